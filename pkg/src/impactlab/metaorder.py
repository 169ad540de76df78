"""Metaorder execution lab.

Executes synthetic metaorders through interchangeable market models (a
continuous-time propagator market, the latent-book solver, or a full order
book simulation with background flow) and measures the resulting impact
laws: impact curves and surfaces, square-root / logarithmic fits,
intra-execution trajectories, post-execution decay, and implementation
shortfall.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from . import _csvio
from .errors import CalibrationError, RegimeError, UndefinedQuoteError
from .flowgen import simulate_zi_with_injections
from .lob import Event, Kind, OrderBook, Side
from .llob import LlobParams, MetaorderSchedule, price_trajectory_selfconsistent


@dataclass(frozen=True)
class Metaorder:
    """One parent order: sign, size Q, against a market trading V per day
    with daily volatility sigma, executed over duration T (days).

    phi = Q/V is the volume fraction and eta = phi/T the participation
    rate.  Q = 0 is allowed as a degenerate no-op order.
    """

    sign: int
    Q: float
    V: float
    sigma: float
    T: float

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be -1 or +1")
        if self.Q < 0:
            raise ValueError("Q must be >= 0")
        for name in ("V", "sigma", "T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.eta > 1.0 + 1e-12:
            raise ValueError(
                f"participation rate eta = {self.eta:.4g} exceeds 1"
            )

    @property
    def phi(self):
        return self.Q / self.V

    @property
    def eta(self):
        return self.phi / self.T


@dataclass(frozen=True)
class ExecutionRecord:
    """Result of one execution: the child orders, the reference log-price
    path over [0, T + post horizon], and the peak impact at the end of the
    execution window (sign multiplied in)."""

    metaorder: Metaorder
    child_times: np.ndarray
    child_sizes: np.ndarray
    times: np.ndarray
    logprice: np.ndarray
    peak: float

    def __post_init__(self):
        child_sizes = np.asarray(self.child_sizes, dtype=np.float64)
        if abs(child_sizes.sum() - self.metaorder.Q) > 1e-9 * max(
            self.metaorder.Q, 1.0
        ):
            raise ValueError("child sizes do not add up to Q")
        times = np.asarray(self.times, dtype=np.float64)
        if len(times) != len(self.logprice):
            raise ValueError("times and logprice differ in length")
        if times[0] > 0 or times[-1] < self.metaorder.T * (1 - 1e-12):
            raise ValueError("path does not cover the execution window")

    @property
    def sign(self):
        return self.metaorder.sign

    @property
    def phi(self):
        return self.metaorder.phi

    @property
    def eta(self):
        return self.metaorder.eta

    @property
    def T(self):
        return self.metaorder.T

    @property
    def impact(self):
        return self.peak

    def signed_path(self):
        """epsilon * (log p_t - log p_0) over the full recorded path."""
        return self.metaorder.sign * (self.logprice - self.logprice[0])


class TimMarket:
    """Continuous-time propagator market.

    The log price responds to the participation rate r(t) = m(t)/V through
    an instantaneous power f(r) = sgn(r)|r|^delta and a decay kernel:
    logp(t) = sigma * scale * sum_segments f(eps r_k) [G1(t - a_k) -
    G1(t - b_k)], with G1 the kernel primitive, evaluated exactly per
    segment.  noise adds an independent diffusion of volatility
    noise * sigma on top.
    """

    def __init__(self, kernel, delta=0.5, scale=1.0, noise=0.0, n_segments=64):
        if not 0 < delta <= 1:
            raise ValueError("delta must be in (0, 1]")
        if noise < 0:
            raise ValueError("noise must be >= 0")
        self.kernel = kernel
        self.delta = delta
        self.scale = scale
        self.noise = noise
        self.n_segments = n_segments

    def _f(self, r):
        return np.sign(r) * np.abs(r) ** self.delta

    def logprice_path(self, mo, schedule, times, seed=0):
        times = np.asarray(times, dtype=np.float64)
        out = np.zeros_like(times)
        if mo.Q > 0:
            n_seg = 1 if schedule.shape == "constant" else self.n_segments
            edges = schedule.time_of_volume(mo.Q * np.arange(n_seg + 1) / n_seg)
            vols = schedule.segment_volumes(edges)
            rates = vols / np.diff(edges) / mo.V
            fr = self._f(schedule.sign * rates)
            for k in range(n_seg):
                up = self.kernel.primitive(np.maximum(times - edges[k], 0.0))
                dn = self.kernel.primitive(np.maximum(times - edges[k + 1], 0.0))
                out += fr[k] * (up - dn)
            out *= mo.sigma * self.scale
        if self.noise > 0:
            rng = np.random.default_rng(seed)
            dt = np.diff(times, prepend=times[0])
            steps = rng.standard_normal(len(times)) * np.sqrt(np.maximum(dt, 0))
            out += self.noise * mo.sigma * np.cumsum(steps)
        return out


class LlobMarket:
    """Latent-book market via the self-consistent trajectory.

    The book's transaction rate J is identified with the metaorder's daily
    volume V, so the latent participation ratio Q/(JT) coincides with the
    metaorder's eta.  D converts the latent price displacement to log-price
    units via the metaorder's volatility: logp = sigma * y / sqrt(D).
    Deterministic (no background noise).
    """

    def __init__(self, D=1.0, nu=1e-6, n_grid=400):
        self.D = D
        self.nu = nu
        self.n_grid = n_grid

    def params_for(self, mo):
        lam = mo.V * math.sqrt(self.nu / self.D)
        return LlobParams(D=self.D, nu=self.nu, lam=lam)

    def logprice_path(self, mo, schedule, times, seed=0):
        times = np.asarray(times, dtype=np.float64)
        if mo.Q == 0:
            return np.zeros_like(times)
        params = self.params_for(mo)
        post = max(times[-1] - mo.T, 0.0)
        traj = price_trajectory_selfconsistent(
            params,
            schedule,
            n_grid=self.n_grid,
            post_horizon=post if post > 0 else 0.0,
        )
        y = np.interp(times, traj.t, traj.y)
        return mo.sigma * y / math.sqrt(self.D)


class LobMarket:
    """Full order-book market: child market orders are merged into a
    zero-intelligence background flow and the log midprice is recorded.

    Child volumes are rounded to whole shares (the grid currency), so Q
    should be an integer multiple of the child count for exact totals.
    Qualitative by nature; the background keeps the book near its
    stationary state while the metaorder walks the price.
    """

    def __init__(self, rates, book0):
        self.rates = rates
        self.book0 = book0

    def logprice_path(self, mo, schedule, times, seed=0):
        times = np.asarray(times, dtype=np.float64)
        n_children = max(int(round(mo.Q)), 0)
        side = Side.BUY if mo.sign > 0 else Side.SELL
        grid = mo.Q * (np.arange(n_children) + 0.5) / max(n_children, 1)
        child_times = schedule.time_of_volume(grid)
        injections = [
            Event(float(t), Kind.MARKET, side, 1, trader="meta")
            for t in child_times
        ]
        stream = simulate_zi_with_injections(
            self.rates, self.book0, float(times[-1]), injections, seed=seed
        )
        engine = OrderBook(self.book0)
        mid0 = engine.midprice()
        mids = np.empty(len(stream.events))
        last = mid0
        for k, event in enumerate(stream.events):
            engine.apply(event)
            try:
                last = engine.midprice()
            except UndefinedQuoteError:
                pass
            mids[k] = last
        idx = np.searchsorted(stream.times, times, side="right") - 1
        path = np.where(idx >= 0, np.concatenate([[mid0], mids])[idx + 1], mid0)
        return np.log(path)


def execute_metaorder(
    mo,
    market,
    schedule_shape="constant",
    c=0.0,
    seed=0,
    post_horizon=0.0,
    n_children=64,
    n_path=129,
    n_post=None,
):
    """Run one metaorder through a market model.

    The recorded path covers [0, T + post_horizon] on a grid containing T
    exactly; peak impact is sign * (logp(T) - logp(0)).  Child orders split
    Q into n_children equal volumes placed at the schedule's equal-volume
    times (the LOB market re-derives integer children internally).
    """
    schedule = MetaorderSchedule(
        Q=mo.Q, T=mo.T, sign=mo.sign, shape=schedule_shape, c=c
    )
    times = np.linspace(0.0, mo.T, n_path)
    if post_horizon > 0:
        if n_post is None:
            n_post = max(int(round((n_path - 1) * post_horizon / mo.T)), 2)
        times = np.concatenate(
            [times, mo.T + (post_horizon * np.arange(1, n_post + 1)) / n_post]
        )
    logprice = np.asarray(
        market.logprice_path(mo, schedule, times, seed=seed), dtype=np.float64
    )
    if mo.Q > 0:
        grid = mo.Q * (np.arange(n_children) + 0.5) / n_children
        child_times = np.asarray(schedule.time_of_volume(grid), dtype=np.float64)
        child_sizes = np.full(n_children, mo.Q / n_children)
    else:
        child_times = np.empty(0)
        child_sizes = np.empty(0)
    i_end = n_path - 1
    peak = mo.sign * (logprice[i_end] - logprice[0])
    return ExecutionRecord(
        metaorder=mo,
        child_times=child_times,
        child_sizes=child_sizes,
        times=times,
        logprice=logprice,
        peak=float(peak),
    )


@dataclass(frozen=True)
class ImpactCurve:
    """Binned impact against volume fraction: per-bin mean of the signed
    log-price change, its standard error, and the record count."""

    phi: np.ndarray
    impact: np.ndarray
    stderr: np.ndarray
    count: np.ndarray


@dataclass(frozen=True)
class ImpactSurface:
    """Long-format binned impact over (duration, participation) cells."""

    T: np.ndarray
    eta: np.ndarray
    impact: np.ndarray
    stderr: np.ndarray
    count: np.ndarray


def _group_stats(keys, values):
    order = np.lexsort(keys[::-1])
    stacked = np.stack([k[order] for k in keys])
    vals = values[order]
    boundaries = np.concatenate(
        [[True], (np.diff(stacked, axis=1) != 0).any(axis=0)]
    )
    starts = np.flatnonzero(boundaries)
    ends = np.append(starts[1:], len(vals))
    means, errs, counts, labels = [], [], [], []
    for s, e in zip(starts, ends):
        chunk = vals[s:e]
        means.append(chunk.mean())
        errs.append(chunk.std(ddof=1) / math.sqrt(e - s) if e - s > 1 else 0.0)
        counts.append(e - s)
        labels.append(stacked[:, s])
    return (
        np.array(labels).reshape(len(starts), len(keys)),
        np.array(means),
        np.array(errs),
        np.array(counts, dtype=np.int64),
    )


def measure_impact(records, phi_edges=None):
    """Impact curve: mean of sign * Delta log p binned by volume fraction.

    With explicit phi_edges, records are histogram-binned (empty bins are
    dropped with a notice and the bin's mean phi is reported); without
    them, records group by exact phi values.
    """
    if not records:
        raise ValueError("no records")
    phi = np.array([r.phi for r in records])
    peak = np.array([r.peak for r in records])
    if phi_edges is None:
        labels, means, errs, counts = _group_stats([phi], peak)
        return ImpactCurve(labels[:, 0], means, errs, counts)
    edges = np.asarray(phi_edges, dtype=np.float64)
    idx = np.digitize(phi, edges) - 1
    keep = (idx >= 0) & (idx < len(edges) - 1)
    if not keep.all():
        warnings.warn(
            f"{int((~keep).sum())} records fall outside the phi bins",
            stacklevel=2,
        )
    occupied = np.unique(idx[keep])
    if len(occupied) < len(edges) - 1:
        warnings.warn(
            f"dropping {len(edges) - 1 - len(occupied)} empty phi bins",
            stacklevel=2,
        )
    phis, means, errs, counts = [], [], [], []
    for b in occupied:
        sel = keep & (idx == b)
        chunk = peak[sel]
        phis.append(phi[sel].mean())
        means.append(chunk.mean())
        errs.append(
            chunk.std(ddof=1) / math.sqrt(len(chunk)) if len(chunk) > 1 else 0.0
        )
        counts.append(len(chunk))
    return ImpactCurve(
        np.array(phis), np.array(means), np.array(errs), np.array(counts)
    )


def measure_surface(records):
    """Impact surface: records grouped by exact (T, eta) cells."""
    if not records:
        raise ValueError("no records")
    T = np.array([r.T for r in records])
    eta = np.array([r.eta for r in records])
    peak = np.array([r.peak for r in records])
    labels, means, errs, counts = _group_stats([T, eta], peak)
    return ImpactSurface(labels[:, 0], labels[:, 1], means, errs, counts)


@dataclass(frozen=True)
class SqrtLawFit:
    """Power-law fit I = Y sigma phi^e: the free-exponent fit and the
    amplitude with the exponent pinned to 1/2."""

    Y: float
    exponent: float
    Y_pinned: float
    r2: float
    n_used: int


def fit_sqrt_law(curve, sigma=1.0):
    """Log-log fit of an impact curve; non-positive values are excluded
    with a warning."""
    phi = np.asarray(curve.phi, dtype=np.float64)
    impact = np.asarray(curve.impact, dtype=np.float64)
    keep = impact > 0
    if not keep.all():
        warnings.warn(
            f"excluding {int((~keep).sum())} non-positive impact values",
            stacklevel=2,
        )
    if keep.sum() < 2:
        raise ValueError("need at least two positive curve points")
    lp, li = np.log(phi[keep]), np.log(impact[keep])
    slope, intercept = np.polyfit(lp, li, 1)
    pred = intercept + slope * lp
    ss_res = float(((li - pred) ** 2).sum())
    ss_tot = float(((li - li.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    y_pinned = math.exp(float(np.mean(li - 0.5 * lp))) / sigma
    return SqrtLawFit(
        Y=math.exp(float(intercept)) / sigma,
        exponent=float(slope),
        Y_pinned=y_pinned,
        r2=r2,
        n_used=int(keep.sum()),
    )


@dataclass(frozen=True)
class SurfaceFit:
    """Two-regressor power-law fit I = A * T^delta_T * eta^delta_eta."""

    A: float
    delta_T: float
    delta_eta: float
    residual: float
    n_used: int


def fit_surface(records):
    """Log-log least squares of impact on duration and participation.

    Accepts execution records (grouped by exact (T, eta) first) or an
    ImpactSurface.  Collinear T and eta across cells (all cells share phi)
    make the two exponents unidentifiable and raise RegimeError.
    """
    surface = records if isinstance(records, ImpactSurface) else measure_surface(records)
    keep = surface.impact > 0
    if not keep.all():
        warnings.warn(
            f"excluding {int((~keep).sum())} non-positive surface cells",
            stacklevel=2,
        )
    if keep.sum() < 3:
        raise ValueError("need at least three positive surface cells")
    lt = np.log(surface.T[keep])
    le = np.log(surface.eta[keep])
    li = np.log(surface.impact[keep])
    centered = np.column_stack([lt - lt.mean(), le - le.mean()])
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[-1] <= 1e-10 * max(svals[0], 1e-300):
        raise RegimeError(
            "T and eta are collinear across the sample (constant phi); "
            "the two exponents are not identifiable"
        )
    design = np.column_stack([np.ones(int(keep.sum())), lt, le])
    coef, _, _, _ = np.linalg.lstsq(design, li, rcond=None)
    resid = li - design @ coef
    return SurfaceFit(
        A=math.exp(float(coef[0])),
        delta_T=float(coef[1]),
        delta_eta=float(coef[2]),
        residual=float(np.sqrt(np.mean(resid**2))),
        n_used=int(keep.sum()),
    )


@dataclass(frozen=True)
class LogLawFit:
    """Fit of I = a*log(1 + phi/b) with a paired power-law comparison;
    sse fields are sums of squared residuals on the impact scale."""

    a: float
    b: float
    sse: float
    power_sse: float
    power_exponent: float

    @property
    def log_law_preferred(self):
        return self.sse < self.power_sse


def fit_log_law(curve):
    """Nonlinear least squares of a logarithmic impact law, with residuals
    compared against the best pure power law on the same points."""
    phi = np.asarray(curve.phi, dtype=np.float64)
    impact = np.asarray(curve.impact, dtype=np.float64)
    keep = impact > 0
    if keep.sum() < 3:
        raise ValueError("need at least three positive curve points")
    phi, impact = phi[keep], impact[keep]

    def law(x, a, b):
        return a * np.log1p(x / b)

    b0 = float(np.median(phi))
    a0 = float(impact.max() / math.log1p(phi.max() / b0))
    try:
        popt, _ = optimize.curve_fit(
            law,
            phi,
            impact,
            p0=(a0, b0),
            bounds=([0.0, 1e-300], [np.inf, np.inf]),
            maxfev=20000,
        )
    except RuntimeError as exc:
        raise CalibrationError(
            "logarithmic-law fit did not converge",
            {"message": str(exc), "p0": (a0, b0)},
        ) from None
    sse = float(((law(phi, *popt) - impact) ** 2).sum())
    slope, intercept = np.polyfit(np.log(phi), np.log(impact), 1)
    power_pred = np.exp(intercept + slope * np.log(phi))
    power_sse = float(((power_pred - impact) ** 2).sum())
    return LogLawFit(
        a=float(popt[0]),
        b=float(popt[1]),
        sse=sse,
        power_sse=power_sse,
        power_exponent=float(slope),
    )


@dataclass(frozen=True)
class DoubleLogFit:
    """Placeholder surface law I = a*log(1 + T/b)*log(1 + eta/c).

    The separable double-logarithmic form is an assumption of this toolkit,
    not an established functional form; treat the parameters as
    descriptive.
    """

    a: float
    b: float
    c: float
    sse: float


def fit_double_log_surface(records):
    """Fit the placeholder double-logarithmic surface law (flagged as an
    assumption; see DoubleLogFit)."""
    surface = records if isinstance(records, ImpactSurface) else measure_surface(records)
    keep = surface.impact > 0
    if keep.sum() < 4:
        raise ValueError("need at least four positive surface cells")
    T = surface.T[keep]
    eta = surface.eta[keep]
    impact = surface.impact[keep]

    def law(x, a, b, c):
        t, e = x
        return a * np.log1p(t / b) * np.log1p(e / c)

    p0 = (float(impact.max()), float(np.median(T)), float(np.median(eta)))
    try:
        popt, _ = optimize.curve_fit(
            law,
            (T, eta),
            impact,
            p0=p0,
            bounds=([0.0, 1e-300, 1e-300], [np.inf, np.inf, np.inf]),
            maxfev=20000,
        )
    except RuntimeError as exc:
        raise CalibrationError(
            "double-logarithmic surface fit did not converge",
            {"message": str(exc), "p0": p0},
        ) from None
    sse = float(((law((T, eta), *popt) - impact) ** 2).sum())
    return DoubleLogFit(a=float(popt[0]), b=float(popt[1]), c=float(popt[2]), sse=sse)


@dataclass(frozen=True)
class MeanTrajectory:
    """Average normalized in-execution price path for one (T, eta) group,
    on rescaled time s = t/T in [0, 1]."""

    T: float
    eta: float
    s: np.ndarray
    path: np.ndarray
    count: int
    flagged: bool


def impact_trajectory(records, n_points=51, min_group=30):
    """Average of sign * (log p_t - log p_0) over records sharing (T, eta),
    on rescaled execution time; groups below min_group are flagged."""
    if not records:
        raise ValueError("no records")
    groups = {}
    for r in records:
        groups.setdefault((r.T, r.eta), []).append(r)
    s = np.linspace(0.0, 1.0, n_points)
    out = []
    for (T, eta), members in sorted(groups.items()):
        acc = np.zeros(n_points)
        for r in members:
            acc += np.interp(s * T, r.times, r.signed_path())
        out.append(
            MeanTrajectory(
                T=T,
                eta=eta,
                s=s,
                path=acc / len(members),
                count=len(members),
                flagged=len(members) < min_group,
            )
        )
    return out


@dataclass(frozen=True)
class DecayProfile:
    """Post-execution decay: ratio of mean impact at lag h after the end to
    the mean peak, with the constants 2/3 and 1/3 attached as reference
    lines (not fit targets)."""

    h: np.ndarray
    ratio: np.ndarray
    stderr: np.ndarray
    asymptote: float
    references: tuple = (2.0 / 3.0, 1.0 / 3.0)
    count: int = 0


def decay_profile(records, n_points=41):
    """Average post-execution impact path, normalized by the mean peak.

    The asymptote estimate is the mean ratio over the last quarter of the
    post horizon.  Standard errors propagate the numerator only (the peak
    normalization is treated as exact).
    """
    if not records:
        raise ValueError("no records")
    posts = [r.times[-1] - r.T for r in records]
    post = min(posts)
    if post <= 0:
        raise ValueError("records have no post-execution horizon")
    h = np.linspace(0.0, post, n_points)
    paths = np.empty((len(records), n_points))
    peaks = np.empty(len(records))
    for k, r in enumerate(records):
        paths[k] = np.interp(r.T + h, r.times, r.signed_path())
        peaks[k] = r.peak
    mean_peak = peaks.mean()
    if mean_peak == 0:
        raise ValueError("mean peak impact is zero; ratio undefined")
    num = paths.mean(axis=0)
    if len(records) > 1:
        err = paths.std(axis=0, ddof=1) / math.sqrt(len(records)) / abs(mean_peak)
    else:
        err = np.zeros(n_points)
    ratio = num / mean_peak
    tail = ratio[3 * n_points // 4 :]
    return DecayProfile(
        h=h,
        ratio=ratio,
        stderr=err,
        asymptote=float(tail.mean()),
        count=len(records),
    )


def implementation_shortfall(times, positions, impact_law, epsabs=1e-12):
    """Expected execution cost of a piecewise-linear position path:

        C = integral xdot(t) * I(x(t), t) dt

    integrated segment by segment (adaptive quadrature per segment, so
    power-law impact laws integrate to full accuracy)."""
    times = np.asarray(times, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    if times.shape != positions.shape or times.ndim != 1 or len(times) < 2:
        raise ValueError("need matching 1-d times and positions")
    if (np.diff(times) <= 0).any():
        raise ValueError("times must be strictly increasing")
    total = 0.0
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        x0, x1 = positions[k], positions[k + 1]
        rate = (x1 - x0) / (t1 - t0)
        if rate == 0.0:
            continue

        def integrand(t, t0=t0, x0=x0, rate=rate):
            return impact_law(x0 + rate * (t - t0), t)

        val, _ = integrate.quad(integrand, t0, t1, epsabs=epsabs, limit=200)
        total += rate * val
    return float(total)


def grid_metaorders(T_values, eta_values, V=1.0, sigma=1.0, sign=1, n_each=1):
    """Cartesian (T, eta) grid of metaorders, n_each per cell."""
    out = []
    for T in T_values:
        for eta in eta_values:
            for _ in range(n_each):
                out.append(
                    Metaorder(sign=sign, Q=eta * T * V, V=V, sigma=sigma, T=T)
                )
    return out


def run_ensemble(metaorders, market, seed=0, **execute_kwargs):
    """Execute a list of metaorders with per-record seeds derived from the
    master seed; returns the records in order."""
    records = []
    for k, mo in enumerate(metaorders):
        records.append(
            execute_metaorder(mo, market, seed=[seed, k], **execute_kwargs)
        )
    return records


@dataclass(frozen=True)
class PersistencePanel:
    """Decay measured naively on correlated consecutive daily metaorders
    versus the isolated single-order decay from the same market."""

    h: np.ndarray
    naive_ratio: np.ndarray
    isolated_ratio: np.ndarray
    persistence: float
    signs: np.ndarray


def sign_persistence_panel(
    market,
    eta=0.1,
    T=1.0,
    V=1.0,
    sigma=1.0,
    n_days=200,
    persistence=0.8,
    post_horizon=None,
    seed=0,
    n_path=65,
):
    """Demonstrate the decay bias induced by autocorrelated metaorder signs.

    One metaorder executes per day; its sign repeats the previous day's
    with probability `persistence`.  The market prices the superposed flow
    (deterministic markets only).  The naive per-day decay ratio, measured
    as if days were independent, plateaus well above the isolated-order
    decay because follow-on same-sign flow props the price up.
    """
    if not 0 <= persistence <= 1:
        raise ValueError("persistence must be in [0, 1]")
    if post_horizon is None:
        post_horizon = 1.0 - T if T < 1.0 else 0.5
    rng = np.random.default_rng(seed)
    signs = np.empty(n_days, dtype=np.int64)
    signs[0] = 1
    for d in range(1, n_days):
        signs[d] = signs[d - 1] if rng.random() < persistence else -signs[d - 1]
    mo_of = lambda s: Metaorder(sign=int(s), Q=eta * T * V, V=V, sigma=sigma, T=T)
    schedule_of = lambda s: MetaorderSchedule(Q=eta * T * V, T=T, sign=int(s))
    h = np.linspace(0.0, post_horizon, n_path)
    probe = np.concatenate([[0.0], T + h])
    naive = np.zeros(len(h))
    for d in range(n_days):
        path = np.zeros(len(probe))
        for b in range(n_days):
            offset = (d - b) * 1.0
            t_rel = probe + offset
            if t_rel[-1] <= 0:
                continue
            path += market.logprice_path(
                mo_of(signs[b]), schedule_of(signs[b]), np.maximum(t_rel, 0.0)
            )
        naive += signs[d] * (path[1:] - path[0])
    naive /= n_days
    solo = market.logprice_path(mo_of(1), schedule_of(1), probe)
    solo_impact = solo[1:] - solo[0]
    return PersistencePanel(
        h=h,
        naive_ratio=naive / naive[0],
        isolated_ratio=solo_impact / solo_impact[0],
        persistence=persistence,
        signs=signs,
    )


RECORDS_HEADER = [
    "id", "sign", "Q", "V", "sigma", "T", "eta", "phi",
    "logp_start", "logp_end", "peak", "path_ref",
]


def write_records_csv(path, records, paths_dir=None):
    """Persist execution records; with paths_dir set, each record's full
    log-price path is written alongside and referenced by file name."""
    rows = []
    for k, r in enumerate(records):
        ref = ""
        if paths_dir is not None:
            ref = f"path_{k:05d}.csv"
            _csvio.write_columns(
                os.path.join(paths_dir, ref), ["t", "logp"], [r.times, r.logprice]
            )
        i_end = int(np.searchsorted(r.times, r.T, side="left"))
        rows.append(
            [
                k, r.sign, r.metaorder.Q, r.metaorder.V, r.metaorder.sigma,
                r.metaorder.T, r.eta, r.phi, r.logprice[0], r.logprice[i_end],
                r.peak, ref,
            ]
        )
    _csvio.write_rows(path, RECORDS_HEADER, rows)


@dataclass(frozen=True)
class RecordRow:
    """One row of a persisted record table (no full path, unless loaded
    through its path_ref)."""

    id: int
    sign: int
    Q: float
    V: float
    sigma: float
    T: float
    eta: float
    phi: float
    logp_start: float
    logp_end: float
    peak: float
    path_ref: str


def read_records_csv(path):
    _, rows = _csvio.read_rows(path, RECORDS_HEADER)
    out = []
    for row in rows:
        out.append(
            RecordRow(
                id=int(row[0]),
                sign=int(row[1]),
                Q=float(row[2]),
                V=float(row[3]),
                sigma=float(row[4]),
                T=float(row[5]),
                eta=float(row[6]),
                phi=float(row[7]),
                logp_start=float(row[8]),
                logp_end=float(row[9]),
                peak=float(row[10]),
                path_ref=row[11],
            )
        )
    return out
