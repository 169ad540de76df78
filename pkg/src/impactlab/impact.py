"""Price-from-order-flow models.

Discrete event-time propagator pricing (transient impact, TIM) and its
history-dependent generalization (HDIM), propagator calibration from a
measured response curve, the contemporaneous order-flow-imbalance
regression, a bivariate structural VAR, the continuous-time multi-asset
propagator model with exact piecewise integrals, and the round-trip cost
functional with a manipulation (negative-cost round trip) search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from ._dispatch import hot
from .errors import CalibrationError, StrategyError
from .kernels import Kernel, discrete_table


def _power_sign(x, delta):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.abs(x) ** delta


@dataclass(frozen=True)
class ImpactSpec:
    """Event-time propagator model specification.

    One kernel per event type; the instantaneous impact of a signed volume v
    of type a is scales[a] * sgn(v)|v|^delta.  Per-type scales multiply into
    the kernel amplitudes, so the (scale, g0) parametrization is redundant
    by design; calibration treats g0 as the free amplitude.
    """

    types: tuple
    kernels: tuple
    delta: float = 0.5
    scales: tuple = ()
    noise_vol: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if len(self.types) != len(self.kernels):
            raise ValueError("need exactly one kernel per event type")
        if not self.scales:
            object.__setattr__(self, "scales", (1.0,) * len(self.types))
        else:
            object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if len(self.scales) != len(self.types):
            raise ValueError("need exactly one scale per event type")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("instantaneous-impact exponent delta must be in (0, 1]")
        if self.noise_vol < 0:
            raise ValueError("noise volatility must be >= 0")

    @classmethod
    def single(cls, kernel, delta=0.5, scale=1.0, noise_vol=0.0):
        return cls(("MO",), (kernel,), delta, (scale,), noise_vol)

    def type_indices(self, types):
        index = {t: k for k, t in enumerate(self.types)}
        try:
            return np.array([index[t] for t in types], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown event type {exc.args[0]!r}") from None


def tim_price(types, volumes, spec, seed=None, p0=0.0, max_lag=None):
    """Propagator price path of length n + 1.

    p[t] = p0 + sum_{s < t} G_{type_s}(t - s) * scales[type_s] *
    sgn(v_s)|v_s|^delta, plus an optional random-walk noise term.  p[0] is
    the pre-flow price.
    """
    volumes = np.asarray(volumes, dtype=np.float64)
    n = len(volumes)
    if types is None:
        if len(spec.types) != 1:
            raise ValueError("types may only be omitted for single-type specs")
        idx = np.zeros(n, dtype=np.int64)
    else:
        if len(types) != n:
            raise ValueError("types and volumes differ in length")
        idx = spec.type_indices(types)
    table = discrete_table(spec.kernels, n if max_lag is None else max_lag)
    fv = np.asarray(spec.scales, dtype=np.float64)[idx] * _power_sign(
        volumes, spec.delta
    )
    p = p0 + hot.tim_path(table, idx, fv)
    if spec.noise_vol > 0:
        if seed is None:
            raise ValueError("a seed is required when noise_vol > 0")
        rng = np.random.default_rng(seed)
        p[1:] += spec.noise_vol * np.cumsum(rng.standard_normal(n))
    return p


@dataclass(frozen=True)
class HdimSpec:
    """History-dependent impact model specification.

    g1[b] is the immediate impact of a type-b event; kappa[a, b, l] the
    influence of a type-a event l steps in the past on the increment at a
    current type-b event (lag column 0 is ignored).
    """

    types: tuple
    g1: tuple
    kappa: np.ndarray
    noise_vol: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "g1", tuple(float(g) for g in self.g1))
        kappa = np.asarray(self.kappa, dtype=np.float64)
        object.__setattr__(self, "kappa", kappa)
        a = len(self.types)
        if len(self.g1) != a:
            raise ValueError("need one immediate impact per event type")
        if kappa.ndim != 3 or kappa.shape[0] != a or kappa.shape[1] != a:
            raise ValueError("kappa must have shape (types, types, max_lag + 1)")
        if self.noise_vol < 0:
            raise ValueError("noise volatility must be >= 0")

    def type_indices(self, types):
        index = {t: k for k, t in enumerate(self.types)}
        try:
            return np.array([index[t] for t in types], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unknown event type {exc.args[0]!r}") from None


def tim_equivalent_kappa(kernel, max_lag):
    """Influence-kernel table kappa(l) = G(l + 1) - G(l) that makes the
    single-type history-dependent model reproduce the propagator model."""
    g = kernel.values(max_lag + 1)
    kap = np.zeros(max_lag + 1)
    kap[1:] = g[2:] - g[1:-1]
    return kap


def hdim_price(types, signs, spec, seed=None, p0=0.0):
    """History-dependent price path of length n + 1 built from increments

    dp_t = g1[type_t] * eps_t + sum_{s < t} kappa[type_s, type_t](t - s) eps_s.
    """
    signs = np.asarray(signs, dtype=np.float64)
    n = len(signs)
    if types is None:
        if len(spec.types) != 1:
            raise ValueError("types may only be omitted for single-type specs")
        idx = np.zeros(n, dtype=np.int64)
    else:
        if len(types) != n:
            raise ValueError("types and signs differ in length")
        idx = spec.type_indices(types)
    dp = hot.hdim_deltas(np.asarray(spec.g1), spec.kappa, idx, signs)
    if spec.noise_vol > 0:
        if seed is None:
            raise ValueError("a seed is required when noise_vol > 0")
        rng = np.random.default_rng(seed)
        dp = dp + spec.noise_vol * rng.standard_normal(n)
    p = np.empty(n + 1)
    p[0] = p0
    p[1:] = p0 + np.cumsum(dp)
    return p


def tim_response(kernel, autocorr, lags, support=None):
    """Model-implied response of a single-kernel propagator model.

    R(tau) = sum_{u >= 1} G(u) [C(|tau - u|) - C(u)] for a sign series with
    autocorrelation C (C[0] = 1).  Negative lags follow the measurement
    convention R(-k) = E[eps_t (p_t - p_{t-k})], which under the model is
    sum_{u >= 1} G(u) [C(u) - C(u + k)].  The kernel sum is truncated at
    `support` lags, which requires C out to support + max |tau|.
    """
    c = np.asarray(autocorr, dtype=np.float64)
    lags = np.asarray(lags, dtype=np.int64)
    max_abs = int(np.abs(lags).max(initial=0))
    if support is None:
        support = len(c) - 1 - max_abs
    if support < 1:
        raise ValueError("autocorrelation record too short for these lags")
    if support + max_abs > len(c) - 1:
        raise ValueError(
            f"need C out to lag {support + max_abs}, got {len(c) - 1}"
        )
    u = np.arange(1, support + 1)
    g = kernel.values(support)[1:]
    out = np.empty(len(lags))
    for i, tau in enumerate(lags):
        if tau >= 0:
            out[i] = np.dot(g, c[np.abs(tau - u)] - c[u])
        else:
            out[i] = np.dot(g, c[u] - c[u - tau])
    return out


def _autocorr_array(autocorr, needed):
    """C as a plain array indexed by lag with C[0] = 1, padded with zeros."""
    c = np.zeros(needed + 1)
    c[0] = 1.0
    if hasattr(autocorr, "lags"):
        lags = np.asarray(autocorr.lags, dtype=np.int64)
        vals = np.asarray(autocorr.values, dtype=np.float64)
    else:
        vals = np.asarray(autocorr, dtype=np.float64)
        lags = np.arange(1, len(vals) + 1)
    keep = lags <= needed
    c[lags[keep]] = vals[keep]
    return c


def calibrate_propagator(response, autocorr, family="power-law", support=None):
    """Fit a kernel so the model-implied response matches a measured one.

    Weighted least squares on the positive-lag part of the response curve,
    weights the inverse standard errors; the model response is the analytic
    sign-autocorrelation expansion used by tim_response.  Returns the fitted
    Kernel and a diagnostics dict; a non-convergent fit raises
    CalibrationError carrying the diagnostics.
    """
    pos = response.lags > 0
    lags = np.asarray(response.lags[pos], dtype=np.int64)
    target = np.asarray(response.values[pos], dtype=np.float64)
    if len(lags) < 3:
        raise ValueError("need at least three positive-lag response points")
    se = np.asarray(response.stderr[pos], dtype=np.float64)
    w = np.where(se > 0, 1.0 / np.where(se > 0, se, 1.0), 1.0)
    if support is None:
        support = int(lags.max())
    c = _autocorr_array(autocorr, support + int(lags.max()))

    def build(theta):
        if family == "power-law":
            return Kernel.power_law(math.exp(theta[0]), theta[1])
        if family == "exponential":
            return Kernel.exponential(math.exp(theta[0]), math.exp(theta[1]))
        if family == "constant":
            return Kernel.constant(math.exp(theta[0]))
        raise ValueError(f"unknown kernel family {family!r}")

    def resid(theta):
        model = tim_response(build(theta), c, lags, support=support)
        return w * (model - target)

    scale0 = max(float(np.abs(target).max()), 1e-12)
    if family == "power-law":
        x0 = np.array([math.log(scale0), 0.5])
        bounds = ([-30.0, 1e-3], [10.0, 5.0])
    elif family == "exponential":
        x0 = np.array([math.log(scale0), math.log(0.1)])
        bounds = ([-30.0, -15.0], [10.0, 10.0])
    else:
        x0 = np.array([math.log(scale0)])
        bounds = ([-30.0], [10.0])
    res = optimize.least_squares(resid, x0, bounds=bounds, xtol=1e-12, ftol=1e-12)
    diagnostics = {
        "success": bool(res.success),
        "cost": float(res.cost),
        "residual_norm": float(np.linalg.norm(res.fun)),
        "nfev": int(res.nfev),
        "message": res.message,
        "family": family,
    }
    if not res.success:
        raise CalibrationError("propagator fit did not converge", diagnostics)
    return build(res.x), diagnostics


@dataclass(frozen=True)
class OlsFit:
    slope: float
    intercept: float
    r2: float
    slope_stderr: float


def ofi_regression(price_changes, ofi):
    """Contemporaneous OLS of price changes on order-flow imbalance."""
    dp = np.asarray(price_changes, dtype=np.float64)
    x = np.asarray(ofi, dtype=np.float64)
    if len(dp) != len(x):
        raise ValueError("series lengths differ")
    if len(dp) < 3:
        raise ValueError("need at least three observations")
    if np.var(x) == 0:
        raise ValueError("zero-variance regressor")
    fit = stats.linregress(x, dp)
    return OlsFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r2=float(fit.rvalue**2),
        slope_stderr=float(fit.stderr),
    )


@dataclass(frozen=True)
class VarFit:
    """Structural bivariate VAR x_t = (price change, signed flow).

    g is the contemporaneous (immediate) impact coefficient in the price
    equation dp_t = g * fv_t + lags + noise; a_price / a_flow stack the lag
    coefficients of the two equations as (lag, 2) arrays ordered (dp, fv),
    with matching elementwise standard errors.
    """

    g: float
    a_price: np.ndarray
    a_flow: np.ndarray
    resid_cov: np.ndarray
    g_stderr: float
    a_price_stderr: np.ndarray
    a_flow_stderr: np.ndarray


def _lag_design(dp, fv, p):
    n = len(dp)
    rows = n - p
    x = np.empty((rows, 2 * p))
    for k in range(1, p + 1):
        x[:, 2 * (k - 1)] = dp[p - k : n - k]
        x[:, 2 * (k - 1) + 1] = fv[p - k : n - k]
    return x


def _ols(x, y):
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise ValueError("singular design matrix")
    resid = y - x @ coef
    return coef, resid


def var_fit(price_changes, flows, p):
    """Two-stage least squares for the triangular structural form: the flow
    equation (no contemporaneous price term) is estimated first, then the
    price equation including the contemporaneous flow regressor."""
    dp = np.asarray(price_changes, dtype=np.float64)
    fv = np.asarray(flows, dtype=np.float64)
    if len(dp) != len(fv):
        raise ValueError("series lengths differ")
    n = len(dp)
    if n <= 10 * p:
        raise ValueError("sample too short for the requested lag order")
    xl = _lag_design(dp, fv, p)
    coef_f, resid_f = _ols(xl, fv[p:])
    xp = np.column_stack([fv[p:], xl])
    coef_p, resid_p = _ols(xp, dp[p:])
    g = float(coef_p[0])
    dof_p = max(len(resid_p) - xp.shape[1], 1)
    s2_p = float(resid_p @ resid_p) / dof_p
    se_p = np.sqrt(s2_p * np.diag(np.linalg.inv(xp.T @ xp)))
    dof_f = max(len(resid_f) - xl.shape[1], 1)
    s2_f = float(resid_f @ resid_f) / dof_f
    se_f = np.sqrt(s2_f * np.diag(np.linalg.inv(xl.T @ xl)))
    a_price = coef_p[1:].reshape(p, 2)
    a_flow = coef_f.reshape(p, 2)
    resid_cov = np.cov(np.vstack([resid_p, resid_f]))
    return VarFit(
        g,
        a_price,
        a_flow,
        resid_cov,
        float(se_p[0]),
        se_p[1:].reshape(p, 2),
        se_f.reshape(p, 2),
    )


def var_simulate(g, a_price, a_flow, n, noise_std=(1.0, 1.0), seed=0, burn=200):
    """Simulate the structural VAR for generate-and-refit checks."""
    a_price = np.asarray(a_price, dtype=np.float64)
    a_flow = np.asarray(a_flow, dtype=np.float64)
    p = a_price.shape[0]
    rng = np.random.default_rng(seed)
    total = n + burn
    dp = np.zeros(total)
    fv = np.zeros(total)
    e1 = noise_std[0] * rng.standard_normal(total)
    e2 = noise_std[1] * rng.standard_normal(total)
    for t in range(total):
        acc_f = e2[t]
        acc_p = e1[t]
        for k in range(1, p + 1):
            if t - k < 0:
                break
            acc_f += a_flow[k - 1, 0] * dp[t - k] + a_flow[k - 1, 1] * fv[t - k]
            acc_p += a_price[k - 1, 0] * dp[t - k] + a_price[k - 1, 1] * fv[t - k]
        fv[t] = acc_f
        dp[t] = acc_p + g * fv[t]
    return dp[burn:], fv[burn:]


@dataclass(frozen=True)
class CrossImpactSpec:
    """Continuous-time multi-asset propagator model.

    kernels[i][j] propagates asset-j trading onto asset-i prices; the
    instantaneous function for that pair is scales[i,j] * sgn(x)|x|^
    deltas[i,j].  sigmas are per-asset diffusive noise volatilities.
    """

    kernels: tuple
    deltas: np.ndarray = 1.0
    scales: np.ndarray = 1.0
    sigmas: np.ndarray = 0.0

    def __post_init__(self):
        kernels = tuple(tuple(row) for row in self.kernels)
        object.__setattr__(self, "kernels", kernels)
        n = len(kernels)
        if any(len(row) != n for row in kernels):
            raise ValueError("kernel matrix must be square")
        deltas = np.broadcast_to(np.asarray(self.deltas, dtype=np.float64), (n, n)).copy()
        scales = np.broadcast_to(np.asarray(self.scales, dtype=np.float64), (n, n)).copy()
        sigmas = np.broadcast_to(np.asarray(self.sigmas, dtype=np.float64), (n,)).copy()
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "sigmas", sigmas)
        if ((deltas <= 0) | (deltas > 1)).any():
            raise ValueError("all exponents must lie in (0, 1]")
        if (sigmas < 0).any():
            raise ValueError("volatilities must be >= 0")

    @property
    def n_assets(self):
        return len(self.kernels)

    def f(self, i, j, x):
        return self.scales[i, j] * _power_sign(x, self.deltas[i, j])

    def is_linear(self):
        return bool(np.all(self.deltas == 1.0))


@dataclass(frozen=True)
class Strategy:
    """Piecewise-constant trading rates on a shared time grid.

    edges has m + 1 increasing entries; rates[i, k] is the asset-i rate on
    [edges[k], edges[k+1]].
    """

    edges: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        rates = np.atleast_2d(np.asarray(self.rates, dtype=np.float64))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "rates", rates)
        if edges.ndim != 1 or len(edges) < 2 or (np.diff(edges) <= 0).any():
            raise ValueError("edges must be strictly increasing with >= 2 entries")
        if rates.shape[1] != len(edges) - 1:
            raise ValueError("need one rate per asset per segment")

    @property
    def n_assets(self):
        return self.rates.shape[0]

    def net_volumes(self):
        return self.rates @ np.diff(self.edges)

    def is_roundtrip(self, tol=1e-9):
        scale = np.abs(self.rates).max(initial=0.0) * (
            self.edges[-1] - self.edges[0]
        )
        return bool(np.all(np.abs(self.net_volumes()) <= tol * max(scale, 1e-300)))


def _segment_primitive(kernel, t, a, b):
    """Integral of G(t - s) over segment [a, b] clipped to s < t, for an
    array of observation times t."""
    t = np.asarray(t, dtype=np.float64)
    upper = np.maximum(t - a, 0.0)
    lower = np.maximum(t - b, 0.0)
    return kernel.primitive(upper) - kernel.primitive(lower)


def multi_tim_price(strategy, spec, t_eval, seed=None, p0=None):
    """Price paths under the continuous multi-asset propagator model.

    p_i(t) = p0_i + sum_j sum_segments f_ij(rate) [G1_ij(t - a) -
    G1_ij(t - b)] with exact per-segment primitives, plus independent
    Brownian noise per asset when sigmas > 0.
    """
    n = spec.n_assets
    if strategy.n_assets != n:
        raise ValueError(
            f"strategy covers {strategy.n_assets} assets, spec {n}"
        )
    t_eval = np.asarray(t_eval, dtype=np.float64)
    if (np.diff(t_eval) < 0).any():
        raise ValueError("evaluation times must be non-decreasing")
    a, b = strategy.edges[:-1], strategy.edges[1:]
    paths = np.zeros((n, len(t_eval)))
    if p0 is not None:
        paths += np.asarray(p0, dtype=np.float64)[:, None]
    for i in range(n):
        for j in range(n):
            ker = spec.kernels[i][j]
            if ker is None:
                continue
            fr = spec.f(i, j, strategy.rates[j])
            for k in range(len(a)):
                if fr[k] == 0.0:
                    continue
                paths[i] += fr[k] * _segment_primitive(ker, t_eval, a[k], b[k])
    if (spec.sigmas > 0).any():
        if seed is None:
            raise ValueError("a seed is required when sigmas > 0")
        rng = np.random.default_rng(seed)
        dt = np.diff(t_eval, prepend=t_eval[0])
        steps = rng.standard_normal((n, len(t_eval))) * np.sqrt(np.maximum(dt, 0.0))
        paths += spec.sigmas[:, None] * np.cumsum(steps, axis=1)
    return paths


def _double_primitive_matrix(kernel, edges):
    """Matrix D with D[k, l] the double integral of G(t - s) for t in
    segment k, s in segment l, s < t, via the kernel's second primitive."""

    def g2(x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        pos = x > 0
        if pos.any():
            out[pos] = kernel.double_primitive(x[pos])
        return out

    a, b = edges[:-1], edges[1:]
    return (
        g2(b[:, None] - a[None, :])
        - g2(b[:, None] - b[None, :])
        - g2(a[:, None] - a[None, :])
        + g2(a[:, None] - b[None, :])
    )


def roundtrip_cost(strategy, spec, allow_open=False):
    """Expected cost of a strategy under the continuous propagator model,
    via exact piecewise double integrals.

    C = sum_ij sum_kl rates_i[k] f_ij(rates_j[l]) D_kl with D the exact
    double primitive of G_ij.  Strategies must be round trips (zero net
    volume per asset) unless allow_open is set, in which case the same
    functional is evaluated for shortfall-style uses.
    """
    n = spec.n_assets
    if strategy.n_assets != n:
        raise ValueError(f"strategy covers {strategy.n_assets} assets, spec {n}")
    if not allow_open and not strategy.is_roundtrip():
        raise StrategyError(
            f"net volumes {strategy.net_volumes()} are not a round trip"
        )
    total = 0.0
    for i in range(n):
        for j in range(n):
            ker = spec.kernels[i][j]
            if ker is None:
                continue
            d = _double_primitive_matrix(ker, strategy.edges)
            total += strategy.rates[i] @ d @ spec.f(i, j, strategy.rates[j])
    return float(total)


def discretized_cost_matrix(spec, edges):
    """Quadratic-form matrix Q of the discretized cost for linear specs:
    cost(r) = r^T Q r with r the flattened (asset, segment) rate vector."""
    if not spec.is_linear():
        raise ValueError("cost matrix is only defined for linear specs")
    edges = np.asarray(edges, dtype=np.float64)
    n = spec.n_assets
    m = len(edges) - 1
    q = np.zeros((n * m, n * m))
    for i in range(n):
        for j in range(n):
            ker = spec.kernels[i][j]
            if ker is None:
                continue
            d = spec.scales[i, j] * _double_primitive_matrix(ker, edges)
            q[i * m : (i + 1) * m, j * m : (j + 1) * m] += d
    return q


def _project_roundtrip(rates, durations):
    """Project each asset's rate vector onto the zero-net-volume hyperplane."""
    out = rates.copy()
    denom = durations @ durations
    for i in range(out.shape[0]):
        out[i] -= (out[i] @ durations) / denom * durations
    return out


@dataclass(frozen=True)
class SearchResult:
    strategy: Strategy
    cost: float
    n_evaluations: int


def manipulation_search(
    spec, edges, bound=1.0, n_starts=8, n_iter=300, seed=0, tol=1e-12
):
    """Search for a negative-cost round trip by projected gradient descent.

    Rates stay within |rate| <= bound; feasibility (zero net volume per
    asset) is preserved by projecting gradients onto the constraint plane
    and rescaling, which keeps round trips round.  For linear specs one
    start is the most negative eigendirection of the constrained quadratic
    form, which finds manipulation whenever the discretized cost admits it.
    The returned cost is the exact functional of the returned strategy.
    """
    edges = np.asarray(edges, dtype=np.float64)
    n = spec.n_assets
    m = len(edges) - 1
    durations = np.diff(edges)
    rng = np.random.default_rng(seed)
    n_eval = 0
    dmats = [
        [
            None
            if spec.kernels[i][j] is None
            else _double_primitive_matrix(spec.kernels[i][j], edges)
            for j in range(n)
        ]
        for i in range(n)
    ]

    def clip_scale(r):
        peak = np.abs(r).max()
        return r * (bound / peak) if peak > bound else r

    def cost_of(r):
        nonlocal n_eval
        n_eval += 1
        total = 0.0
        for i in range(n):
            for j in range(n):
                if dmats[i][j] is not None:
                    total += r[i] @ dmats[i][j] @ spec.f(i, j, r[j])
        return total

    def fprime(i, j, x):
        d = spec.deltas[i, j]
        if d == 1.0:
            return np.full_like(x, spec.scales[i, j])
        ax = np.maximum(np.abs(x), 1e-9 * bound)
        return spec.scales[i, j] * d * ax ** (d - 1.0)

    def grad_of(r):
        g = np.zeros_like(r)
        for i in range(n):
            for j in range(n):
                if dmats[i][j] is None:
                    continue
                g[i] += dmats[i][j] @ spec.f(i, j, r[j])
                g[j] += (dmats[i][j].T @ r[i]) * fprime(i, j, r[j])
        return g

    starts = []
    if spec.is_linear():
        q = discretized_cost_matrix(spec, edges)
        qs = 0.5 * (q + q.T)
        p = np.eye(n * m)
        for i in range(n):
            sl = slice(i * m, (i + 1) * m)
            p[sl, sl] -= np.outer(durations, durations) / (durations @ durations)
        w, v = np.linalg.eigh(p @ qs @ p)
        lead = v[:, 0].reshape(n, m)
        starts.append(clip_scale(_project_roundtrip(lead, durations) * bound * 10))
    for _ in range(n_starts):
        r = rng.standard_normal((n, m))
        starts.append(clip_scale(_project_roundtrip(r, durations) * 0.5))
    best_r = np.zeros((n, m))
    best_cost = 0.0
    for r in starts:
        c = cost_of(r)
        step = 0.5
        for _ in range(n_iter):
            grad = _project_roundtrip(grad_of(r), durations)
            gnorm = np.linalg.norm(grad)
            if gnorm < tol:
                break
            improved = False
            while step > 1e-12:
                cand = clip_scale(r - step * grad / gnorm * bound)
                c_cand = cost_of(cand)
                if c_cand < c - 1e-18:
                    r, c = cand, c_cand
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            step = min(step * 2.0, 0.5)
        if c < best_cost:
            best_cost, best_r = c, r
    best_cost = roundtrip_cost(Strategy(edges, best_r), spec)
    return SearchResult(Strategy(edges, best_r), float(best_cost), n_eval)
