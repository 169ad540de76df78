"""impactlab: order-flow and price-impact simulation toolkit.

A limit-order-book matching engine, stochastic order-flow generators
(zero-intelligence, state-dependent, mutually exciting, and
order-splitting agents), flow statistics, event-time and continuous-time
propagator price models, a latent-liquidity PDE solver, a metaorder
execution lab, co-impact measurement, and a deterministic experiment
runner with CSV persistence.

Hot numerical kernels run through a compiled extension when available
and a numpy fallback otherwise; see impactlab.backend_name().
"""

from ._version import __version__
from ._dispatch import backend_name
from .errors import (
    AlignmentError,
    BookError,
    CalibrationError,
    CancelError,
    ConfigError,
    ConvergenceError,
    GridError,
    ImpactLabError,
    RegimeError,
    StationarityError,
    StrategyError,
    UndefinedQuoteError,
)
from .lob import (
    BookState,
    Event,
    EventStream,
    Kind,
    OrderBook,
    Side,
    Trade,
    apply_event,
    midprice,
    ofi,
    read_events_csv,
    read_trades_csv,
    replay,
    spread,
    write_events_csv,
    write_trades_csv,
)
from .kernels import Kernel, discrete_table, exp_sum_approx
from .flowgen import (
    EventTemplate,
    HawkesSpec,
    PoissonRates,
    SplittingPopulation,
    intensity_at,
    simulate_hawkes,
    simulate_hawkes_times,
    simulate_queue_reactive,
    simulate_splitting_agents,
    simulate_zi,
    simulate_zi_with_injections,
    time_change_residuals,
)
from .flowstats import (
    Autocorr,
    ResponseCurve,
    SignSeries,
    cross_response,
    diagonal_effect,
    fit_powerlaw_tail,
    response_function,
    sign_autocorr,
    split_herd_decompose,
)
from .impact import (
    CrossImpactSpec,
    HdimSpec,
    ImpactSpec,
    Strategy,
    calibrate_propagator,
    discretized_cost_matrix,
    hdim_price,
    manipulation_search,
    multi_tim_price,
    ofi_regression,
    roundtrip_cost,
    tim_equivalent_kappa,
    tim_price,
    tim_response,
    var_fit,
    var_simulate,
)
from .llob import (
    LlobParams,
    MetaorderSchedule,
    impact_curve,
    impact_scaling,
    measure_crossover,
    price_trajectory_selfconsistent,
    solve_pde,
    stationary_closed_form,
    stationary_profile,
)
from .metaorder import (
    ExecutionRecord,
    LlobMarket,
    LobMarket,
    Metaorder,
    TimMarket,
    decay_profile,
    execute_metaorder,
    fit_log_law,
    fit_sqrt_law,
    fit_surface,
    grid_metaorders,
    impact_trajectory,
    implementation_shortfall,
    measure_impact,
    measure_surface,
    read_records_csv,
    run_ensemble,
    sign_persistence_panel,
    write_records_csv,
)
from .coimpact import (
    DayFlows,
    GeometricCounts,
    HalfNormalSizes,
    ParetoSizes,
    aggregate_impact,
    conditional_impact,
    intercept_and_crossover,
    sample_day,
    sample_days,
    shortfall_vs_imbalance,
    sign_correlation,
    simulate_shortfall_days,
)
from .config import (
    ExperimentConfig,
    config_hash,
    parse_config,
    replica_seed,
    serialize_config,
)
from .experiments import run_experiment
from .reports import emit_report
