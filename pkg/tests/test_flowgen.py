"""Tests for the stochastic order-flow generators.

Statistical assertions run on fixed seeds with wide (>= 4 sigma) bands
derived from exact moments, so they are deterministic in practice.
"""

import math

import numpy as np
import pytest
import scipy.stats

from impactlab.flowgen import (
    EventTemplate,
    HawkesSpec,
    PoissonRates,
    SplittingPopulation,
    _pareto_sizes,
    intensity_at,
    simulate_hawkes,
    simulate_hawkes_times,
    simulate_queue_reactive,
    simulate_splitting_agents,
    simulate_zi,
    simulate_zi_with_injections,
    time_change_residuals,
)
from impactlab.flowstats import sign_autocorr
from impactlab.kernels import Kernel
from impactlab.lob import BookState, Event, Kind, OrderBook, Side
from impactlab.errors import StationarityError


def deep_book(depth=20_000):
    """Two-level book with very deep queues so market flow never empties it."""
    return BookState(
        tick=1.0, base=100.0, bids=np.array([depth, 0]), asks=np.array([0, depth])
    )


# ---------------------------------------------------------------------------
# zero-intelligence flow


class TestZeroIntelligence:
    def test_all_rates_zero_gives_empty_stream(self):
        rates = PoissonRates.uniform(4, 0.0, 0.0, 0.0)
        book = BookState.symmetric(4, tick=0.5, depth=10)
        stream = simulate_zi(rates, book, horizon=100.0, seed=3)
        assert len(stream) == 0

    def test_market_order_count_matches_poisson_rate(self):
        # only buy market orders at rate 1/s for 10_000 s: N ~ Poisson(1e4)
        rates = PoissonRates(np.zeros(2), np.zeros(2), market_buy=1.0, market_sell=0.0)
        stream = simulate_zi(rates, deep_book(), horizon=10_000.0, seed=11)
        assert all(e.kind is Kind.MARKET and e.side is Side.BUY for e in stream)
        assert abs(len(stream) - 10_000) < 4 * math.sqrt(10_000)
        times = stream.times
        assert times[0] >= 0.0 and times[-1] <= 10_000.0
        assert np.all(np.diff(times) >= 0)

    def test_market_order_signs_are_uncorrelated(self):
        rates = PoissonRates(np.zeros(2), np.zeros(2), market_buy=0.5, market_sell=0.5)
        stream = simulate_zi(rates, deep_book(), horizon=20_000.0, seed=5)
        signs = np.array([1.0 if e.side is Side.BUY else -1.0 for e in stream])
        from impactlab.flowstats import SignSeries

        ac = sign_autocorr(SignSeries(signs), max_lag=5)
        assert np.all(np.abs(ac.values) < 4.0 / math.sqrt(len(signs)))

    def test_mixed_flow_replays_with_conservation(self):
        rates = PoissonRates.uniform(
            6, limit_rate=0.5, cancel_rate=0.1, market_rate=0.3
        )
        book = BookState.symmetric(6, tick=1.0, depth=8)
        stream = simulate_zi(rates, book, horizon=500.0, seed=7)
        assert len(stream) > 100
        engine = OrderBook(book)
        for e in stream:
            engine.apply(e)
        assert engine.conservation_ok()

    def test_seed_determinism(self):
        rates = PoissonRates.uniform(4, 0.4, 0.1, 0.2)
        book = BookState.symmetric(4, tick=1.0, depth=5)
        a = simulate_zi(rates, book, horizon=200.0, seed=42)
        b = simulate_zi(rates, book, horizon=200.0, seed=42)
        c = simulate_zi(rates, book, horizon=200.0, seed=43)
        assert list(a) == list(b)
        assert list(a) != list(c)

    def test_grid_mismatch_rejected(self):
        rates = PoissonRates.uniform(3, 0.1, 0.1, 0.1)
        book = BookState.symmetric(4, tick=1.0, depth=5)
        with pytest.raises(ValueError, match="levels"):
            simulate_zi(rates, book, horizon=10.0)

    def test_nonpositive_horizon_rejected(self):
        rates = PoissonRates.uniform(2, 0.1, 0.0, 0.1)
        book = BookState.symmetric(2, tick=1.0, depth=5)
        with pytest.raises(ValueError, match="horizon"):
            simulate_zi(rates, book, horizon=0.0)

    def test_rate_validation(self):
        with pytest.raises(ValueError):
            PoissonRates(np.array([-0.1, 0.2]), np.zeros(2), 0.0, 0.0)
        with pytest.raises(ValueError):
            PoissonRates(np.zeros(2), np.zeros(3), 0.0, 0.0)
        with pytest.raises(ValueError):
            PoissonRates(np.zeros(2), np.zeros(2), math.inf, 0.0)


class TestInjections:
    def test_empty_injections_match_plain_simulation(self):
        rates = PoissonRates.uniform(4, 0.3, 0.1, 0.2)
        book = BookState.symmetric(4, tick=1.0, depth=6)
        plain = simulate_zi(rates, book, horizon=300.0, seed=9)
        merged = simulate_zi_with_injections(rates, book, 300.0, [], seed=9)
        assert list(plain) == list(merged)

    def test_injected_events_appear_at_exact_times(self):
        rates = PoissonRates.uniform(4, 0.3, 0.1, 0.2)
        book = BookState.symmetric(4, tick=1.0, depth=6)
        injections = [
            Event(50.0, Kind.MARKET, Side.BUY, 3),
            Event(150.0, Kind.MARKET, Side.BUY, 3),
            Event(250.0, Kind.MARKET, Side.BUY, 3),
        ]
        stream = simulate_zi_with_injections(rates, book, 300.0, injections, seed=9)
        got = [e for e in stream if e.size == 3]
        assert got == injections
        assert np.all(np.diff(stream.times) >= 0)

    def test_injection_beyond_horizon_is_dropped(self):
        rates = PoissonRates.uniform(2, 0.0, 0.0, 0.0)
        book = BookState.symmetric(2, tick=1.0, depth=6)
        late = [Event(99.0, Kind.MARKET, Side.BUY, 2)]
        stream = simulate_zi_with_injections(rates, book, 50.0, late, seed=0)
        assert len(stream) == 0

    def test_unsorted_injections_rejected(self):
        rates = PoissonRates.uniform(2, 0.1, 0.0, 0.1)
        book = BookState.symmetric(2, tick=1.0, depth=6)
        bad = [
            Event(20.0, Kind.MARKET, Side.BUY, 1),
            Event(10.0, Kind.MARKET, Side.SELL, 1),
        ]
        with pytest.raises(ValueError, match="sorted"):
            simulate_zi_with_injections(rates, book, 50.0, bad, seed=0)


class TestQueueReactive:
    def test_constant_map_reproduces_zero_intelligence(self):
        rates = PoissonRates.uniform(4, 0.3, 0.0, 0.2)
        book = BookState.symmetric(4, tick=1.0, depth=6)
        plain = simulate_zi(rates, book, horizon=200.0, seed=21)
        reactive = simulate_queue_reactive(
            lambda state: rates, book, horizon=200.0, rate_cap=10.0, seed=21
        )
        assert list(plain) == list(reactive)

    def test_state_dependent_switch_stops_flow(self):
        # buy market orders fire only while the ask side holds shares, so the
        # stream ends after exactly the initial ask depth regardless of horizon
        book = BookState(
            tick=1.0, base=100.0, bids=np.array([0, 0]), asks=np.array([0, 3])
        )

        def intensity(state):
            on = 1.0 if sum(state.asks) > 0 else 0.0
            return PoissonRates(np.zeros(2), np.zeros(2), on, 0.0)

        stream = simulate_queue_reactive(intensity, book, 1e6, rate_cap=2.0, seed=1)
        assert len(stream) == 3
        assert all(e.kind is Kind.MARKET and e.side is Side.BUY for e in stream)

    def test_rate_cap_is_required_and_finite(self):
        book = BookState.symmetric(2, tick=1.0, depth=5)
        rates = PoissonRates.uniform(2, 0.1, 0.0, 0.1)
        for bad in (None, math.inf, 0.0, -1.0):
            with pytest.raises(ValueError, match="rate_cap"):
                simulate_queue_reactive(lambda s: rates, book, 10.0, rate_cap=bad)

    def test_runtime_cap_violation_raises(self):
        book = BookState.symmetric(2, tick=1.0, depth=5)
        rates = PoissonRates(np.zeros(2), np.zeros(2), 8.0, 8.0)
        with pytest.raises(ValueError, match="cap"):
            simulate_queue_reactive(lambda s: rates, book, 10.0, rate_cap=5.0, seed=0)

    def test_wrong_grid_from_map_raises(self):
        book = BookState.symmetric(4, tick=1.0, depth=5)
        rates = PoissonRates.uniform(2, 0.1, 0.0, 0.1)
        with pytest.raises(ValueError, match="grid"):
            simulate_queue_reactive(lambda s: rates, book, 10.0, rate_cap=5.0)


# ---------------------------------------------------------------------------
# Hawkes flow


def exp_kernel(mass, beta=1.0):
    return Kernel.exponential(g0=mass * beta, beta=beta)


class TestHawkes:
    def test_no_excitation_reduces_to_poisson(self):
        spec = HawkesSpec(mu=[2.0], kernels=[[None]])
        times, comps = simulate_hawkes_times(spec, horizon=5_000.0, seed=2)
        assert np.all(comps == 0)
        assert np.all(np.diff(times) >= 0)
        assert abs(len(times) - 10_000) < 4 * math.sqrt(10_000)

    def test_branching_half_doubles_the_rate(self):
        # E[N] = mu T / (1 - n) = 20_000; Var(N) ~ T mu / (1-n)^3 = 8e4
        spec = HawkesSpec(mu=[1.0], kernels=[[exp_kernel(0.5, beta=2.0)]])
        times, _ = simulate_hawkes_times(spec, horizon=10_000.0, seed=8)
        assert abs(len(times) - 20_000) < 4 * math.sqrt(8e4)

    def test_zero_horizon_gives_empty_arrays(self):
        spec = HawkesSpec(mu=[1.0], kernels=[[None]])
        times, comps = simulate_hawkes_times(spec, horizon=0.0, seed=0)
        assert len(times) == 0 and len(comps) == 0
        assert comps.dtype == np.int64

    def test_supercritical_spec_rejected(self):
        spec = HawkesSpec(mu=[1.0], kernels=[[exp_kernel(1.0)]])
        with pytest.raises(StationarityError, match="spectral radius"):
            simulate_hawkes_times(spec, horizon=10.0)
        cross = HawkesSpec(
            mu=[1.0, 1.0],
            kernels=[[None, exp_kernel(1.1)], [exp_kernel(1.1), None]],
        )
        with pytest.raises(StationarityError):
            simulate_hawkes_times(cross, horizon=10.0)

    def test_branching_matrix_and_spectral_radius(self):
        kernels = [
            [exp_kernel(0.3), exp_kernel(0.2)],
            [exp_kernel(0.1), exp_kernel(0.4)],
        ]
        spec = HawkesSpec(mu=[1.0, 1.0], kernels=kernels)
        expected = np.array([[0.3, 0.2], [0.1, 0.4]])
        assert np.allclose(spec.branching_matrix(), expected, atol=1e-12)
        oracle = np.abs(np.linalg.eigvals(expected)).max()
        assert spec.spectral_radius() == pytest.approx(oracle, abs=1e-12)
        with_dirac = HawkesSpec(
            mu=[1.0, 1.0], kernels=kernels, dirac=[[0.1, 0.0], [0.0, 0.0]]
        )
        assert np.allclose(
            with_dirac.branching_matrix(), expected + np.diag([0.1, 0.0])
        )

    def test_intensity_at_closed_form(self):
        spec = HawkesSpec(mu=[0.1], kernels=[[Kernel.exponential(g0=2.0, beta=1.0)]])
        history = (np.array([0.0]), np.array([0]))
        lam = intensity_at(spec, history, t=1.0)
        assert lam[0] == pytest.approx(0.1 + 2.0 * math.exp(-1.0), rel=1e-12)
        # events at or after t do not contribute
        assert intensity_at(spec, history, t=0.0)[0] == pytest.approx(0.1)
        future = (np.array([5.0]), np.array([0]))
        assert intensity_at(spec, future, t=1.0)[0] == pytest.approx(0.1)
        empty = (np.array([]), np.array([], dtype=np.int64))
        assert intensity_at(spec, empty, t=1.0)[0] == pytest.approx(0.1)

    def test_intensity_accepts_event_stream_history(self):
        spec = HawkesSpec(
            mu=[0.5],
            kernels=[[exp_kernel(0.5)]],
            templates=[EventTemplate(Kind.MARKET, Side.BUY)],
        )
        stream = simulate_hawkes(spec, horizon=100.0, seed=4)
        t = 50.0
        raw = (stream.times, np.zeros(len(stream), dtype=np.int64))
        assert intensity_at(spec, stream, t) == pytest.approx(
            intensity_at(spec, raw, t)
        )

    def test_unmatched_event_raises(self):
        spec = HawkesSpec(
            mu=[0.1],
            kernels=[[None]],
            templates=[EventTemplate(Kind.MARKET, Side.BUY)],
        )
        stranger = [Event(1.0, Kind.MARKET, Side.SELL, 1)]
        with pytest.raises(ValueError, match="template"):
            intensity_at(spec, stranger, t=2.0)

    def test_time_change_residuals_are_unit_exponential(self):
        spec = HawkesSpec(mu=[1.0], kernels=[[exp_kernel(0.5, beta=2.0)]])
        history = simulate_hawkes_times(spec, horizon=6_000.0, seed=13)
        (res,) = time_change_residuals(spec, history)
        assert len(res) > 8_000
        assert abs(res.mean() - 1.0) < 4.0 / math.sqrt(len(res))
        ks = scipy.stats.kstest(res, "expon")
        assert ks.pvalue > 0.01

    def test_residuals_warn_with_same_instant_triggering(self):
        spec = HawkesSpec(mu=[1.0], kernels=[[None]], dirac=[[0.3]])
        history = simulate_hawkes_times(spec, horizon=50.0, seed=1)
        with pytest.warns(UserWarning, match="same-instant"):
            time_change_residuals(spec, history)

    def test_dirac_triggering_multiplies_counts(self):
        # Poisson immigrants with Poisson(0.5) same-instant offspring:
        # E[N] = mu T / (1 - 0.5), Var(N) = mu T E[S^2] with E[S^2] = 8
        spec = HawkesSpec(mu=[1.0], kernels=[[None]], dirac=[[0.5]])
        times, _ = simulate_hawkes_times(spec, horizon=5_000.0, seed=6)
        assert abs(len(times) - 10_000) < 4 * math.sqrt(5_000 * 8.0)
        assert np.any(np.diff(times) == 0.0)

    def test_templates_shape_the_event_stream(self):
        spec = HawkesSpec(
            mu=[0.5, 0.5],
            kernels=[[None, None], [None, None]],
            templates=[
                EventTemplate(Kind.MARKET, Side.BUY, size=1),
                EventTemplate(Kind.LIMIT, Side.SELL, level=3, size=2),
            ],
        )
        stream = simulate_hawkes(spec, horizon=200.0, seed=3)
        kinds = {e.kind for e in stream}
        assert kinds == {Kind.MARKET, Kind.LIMIT}
        for e in stream:
            if e.kind is Kind.LIMIT:
                assert e.side is Side.SELL and e.level == 3 and e.size == 2
            else:
                assert e.side is Side.BUY and e.size == 1

    def test_event_budget_overflow_raises(self):
        spec = HawkesSpec(mu=[1.0], kernels=[[None]])
        with pytest.raises(RuntimeError, match="max_events"):
            simulate_hawkes_times(spec, horizon=10_000.0, seed=0, max_events=100)

    def test_seed_determinism(self):
        spec = HawkesSpec(mu=[1.0], kernels=[[exp_kernel(0.4)]])
        t1, c1 = simulate_hawkes_times(spec, horizon=500.0, seed=77)
        t2, c2 = simulate_hawkes_times(spec, horizon=500.0, seed=77)
        assert np.array_equal(t1, t2) and np.array_equal(c1, c2)


# ---------------------------------------------------------------------------
# order-splitting agents


class TestSplittingAgents:
    def test_population_validation(self):
        with pytest.raises(ValueError, match="agent"):
            SplittingPopulation(n_agents=0)
        with pytest.raises(ValueError, match="alpha"):
            SplittingPopulation(n_agents=1, alpha=1.0)
        with pytest.raises(ValueError, match="rate"):
            SplittingPopulation(n_agents=1, rate=0.0)
        with pytest.raises(ValueError, match="herding"):
            SplittingPopulation(n_agents=1, herding=1.5)

    def test_tiny_horizon_raises(self):
        pop = SplittingPopulation(n_agents=1, rate=1.0)
        with pytest.raises(ValueError, match="horizon too short"):
            simulate_splitting_agents(pop, horizon=1e-12, seed=0)

    def test_size_law_tail(self):
        # L = ceil(U^(-1/alpha)) has P(L >= l) = (l-1)^(-alpha) for l >= 2
        rng = np.random.default_rng(0)
        sizes = _pareto_sizes(rng, 1_000_000, alpha=1.5)
        assert sizes.min() >= 1
        p10 = np.mean(sizes >= 10)
        assert p10 * 9.0**1.5 == pytest.approx(1.0, abs=0.02)

    def test_single_agent_signs_come_in_runs(self):
        pop = SplittingPopulation(n_agents=1, alpha=1.5, rate=1.0)
        s = simulate_splitting_agents(pop, horizon=10_000.0, seed=19)
        assert np.all(s.labels == 0)
        assert np.all(np.diff(s.times) >= 0)
        ac = sign_autocorr(s, max_lag=1)
        # consecutive child orders usually belong to the same metaorder
        assert ac.values[0] > 0.2

    def test_full_herding_locks_the_sign(self):
        for n_agents in (1, 5):
            pop = SplittingPopulation(n_agents=n_agents, herding=1.0)
            s = simulate_splitting_agents(pop, horizon=2_000.0, seed=2)
            assert len(np.unique(s.signs)) == 1

    def test_labels_cover_population(self):
        pop = SplittingPopulation(n_agents=10, alpha=1.5, rate=1.0)
        s = simulate_splitting_agents(pop, horizon=2_000.0, seed=4)
        assert set(np.unique(s.labels)) == set(range(10))

    def test_seed_determinism(self):
        pop = SplittingPopulation(n_agents=3, alpha=1.5, rate=1.0, herding=0.2)
        a = simulate_splitting_agents(pop, horizon=1_000.0, seed=31)
        b = simulate_splitting_agents(pop, horizon=1_000.0, seed=31)
        assert np.array_equal(a.signs, b.signs)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.labels, b.labels)
