"""Co-impact: simultaneous metaorders sharing one day's price formation.

A one-factor latent Gaussian drives the signs of the N metaorders active on
a day; sizes are independent draws from a heavy-tailed law.  The day's
return is a concave function of the net signed flow, which makes the
impact of a single metaorder conditional on its own sign carry an
intercept (the average push of everybody else) that grows with the sign
correlation, before crossing over to the familiar square-root law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from . import _csvio
from .errors import RegimeError


@dataclass(frozen=True)
class ParetoSizes:
    """Truncated Pareto law for unsigned volume fractions.

    Density proportional to x^-(alpha+1) on [xmin, xmax]; sampling is by
    inverse CDF and moments are closed-form.
    """

    alpha: float = 1.5
    xmin: float = 1e-4
    xmax: float = 0.1

    def __post_init__(self):
        if not 0 < self.xmin < self.xmax:
            raise ValueError("need 0 < xmin < xmax")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")

    def sample(self, rng, n):
        u = rng.random(n)
        ratio = (self.xmin / self.xmax) ** self.alpha
        return self.xmin * (1.0 - u * (1.0 - ratio)) ** (-1.0 / self.alpha)

    def moment(self, k):
        a = self.alpha
        if k == a:
            c = a * self.xmin**a / (1.0 - (self.xmin / self.xmax) ** a)
            return c * math.log(self.xmax / self.xmin)
        c = a * self.xmin**a / (1.0 - (self.xmin / self.xmax) ** a)
        return c * (self.xmax ** (k - a) - self.xmin ** (k - a)) / (k - a)


@dataclass(frozen=True)
class HalfNormalSizes:
    """Half-normal size law |N(0, scale^2)|.

    With independent signs (rho = 0) the signed fractions are iid Gaussian
    and the Gaussian evaluator is exact, which makes this the validation
    configuration.  Correlated signs push the co-flow sum away from
    normality even for this law, so exactness is limited to rho = 0.
    """

    scale: float = 0.01

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be > 0")

    def sample(self, rng, n):
        return np.abs(rng.normal(0.0, self.scale, n))

    def moment(self, k):
        if k == 1:
            return self.scale * math.sqrt(2.0 / math.pi)
        if k == 2:
            return self.scale**2
        raise NotImplementedError("only the first two moments are tabulated")


@dataclass(frozen=True)
class DayFlows:
    """Signed volume fractions of the metaorders active on one day."""

    phi: np.ndarray
    rho: float = 0.0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        object.__setattr__(self, "phi", phi)
        if phi.ndim != 1 or len(phi) < 1:
            raise ValueError("need at least one metaorder")
        if (phi == 0).any():
            raise ValueError("signed fractions must be nonzero")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must be in [0, 1]")

    @property
    def N(self):
        return len(self.phi)

    @property
    def total(self):
        return float(self.phi.sum())


def f_delta(v, delta=0.5):
    """Odd concave response sgn(v)|v|^delta."""
    v = np.asarray(v, dtype=np.float64)
    out = np.sign(v) * np.abs(v) ** delta
    return out if out.ndim else float(out)


def aggregate_impact(flows, Y=1.0, delta=0.5):
    """Expected daily return from the net signed flow: Y * f_delta(sum)."""
    if isinstance(flows, DayFlows):
        total = flows.total
    else:
        total = np.asarray(flows, dtype=np.float64)
        if total.ndim > 0:
            total = total.sum()
    return Y * f_delta(float(total), delta)


def sign_correlation(rho):
    """Pairwise sign correlation induced by latent Gaussian correlation
    rho: (2/pi) * arcsin(rho)."""
    return (2.0 / math.pi) * math.asin(rho)


def _latent_signs(rng, n_days, N, rho):
    factor = rng.standard_normal((n_days, 1))
    idio = rng.standard_normal((n_days, N))
    z = math.sqrt(rho) * factor + math.sqrt(1.0 - rho) * idio
    return np.where(z >= 0, 1.0, -1.0)


def sample_day(N, rho, size_law=None, seed=0):
    """One day's flows: signs from the one-factor latent Gaussian, sizes
    independent of signs."""
    flows = sample_days(1, N, rho, size_law, seed)
    return DayFlows(phi=flows[0], rho=rho)


def sample_days(n_days, N, rho, size_law=None, seed=0):
    """Vectorized sampler: (n_days, N) signed fractions."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 <= rho <= 1:
        raise ValueError("rho must be in [0, 1]")
    if size_law is None:
        size_law = ParetoSizes()
    rng = np.random.default_rng(seed)
    eps = _latent_signs(rng, n_days, N, rho)
    sizes = size_law.sample(rng, (n_days, N)).reshape(n_days, N)
    return eps * sizes


def empirical_sign_correlation(phi):
    """Mean pairwise product of signs across rows of a (days, N) array."""
    eps = np.sign(phi)
    n = eps.shape[1]
    if n < 2:
        raise ValueError("need at least two metaorders per day")
    row_sums = eps.sum(axis=1)
    pair_mean = (row_sums**2 - n) / (n * (n - 1))
    return float(pair_mean.mean())


@dataclass(frozen=True)
class CoimpactCurve:
    """Conditional impact of a focal metaorder against its own fraction."""

    phi: np.ndarray
    impact: np.ndarray
    stderr: np.ndarray
    count: int


def _coflow_samples(N, rho, size_law, n_mc, rng):
    """Monte Carlo draws of the co-flow sum conditioned on the focal
    metaorder's sign being +.

    The latent vector is jointly sign-symmetric, so multiplying every sign
    by the focal's sign produces exact conditional samples (no rejection).
    """
    if isinstance(N, int):
        counts = np.full(n_mc, N, dtype=np.int64)
    else:
        counts = np.asarray(N.sample(rng, n_mc), dtype=np.int64)
        if (counts < 1).any():
            raise ValueError("metaorder counts must be >= 1")
    max_n = int(counts.max())
    eps = _latent_signs(rng, n_mc, max_n, rho)
    eps *= eps[:, :1]
    sizes = size_law.sample(rng, (n_mc, max_n)).reshape(n_mc, max_n)
    mask = np.arange(max_n)[None, :] < counts[:, None]
    signed = np.where(mask, eps * sizes, 0.0)
    return signed[:, 1:].sum(axis=1)


def conditional_impact(
    phis,
    N,
    rho,
    size_law=None,
    n_mc=20000,
    seed=0,
    Y=1.0,
    delta=0.5,
    method="mc",
):
    """Impact of a buy metaorder of fraction phi given N-1 co-executing
    metaorders: E[Y * f_delta(phi + S)] with S the conditional co-flow.

    method "mc" samples S once and reuses it across the phi grid; method
    "gaussian" integrates against a normal law with the exact conditional
    mean and variance of S.  That is exact for HalfNormalSizes with
    rho = 0 (S is then genuinely Gaussian) and a moment-matched
    approximation otherwise, since correlated signs skew the co-flow sum
    away from normality.
    """
    if size_law is None:
        size_law = ParetoSizes()
    phis = np.atleast_1d(np.asarray(phis, dtype=np.float64))
    if method == "mc":
        if n_mc < 1000:
            raise ValueError("need at least 1000 MC samples")
        rng = np.random.default_rng(seed)
        s = _coflow_samples(N, rho, size_law, n_mc, rng)
        vals = Y * f_delta(phis[:, None] + s[None, :], delta)
        impact = vals.mean(axis=1)
        err = vals.std(axis=1, ddof=1) / math.sqrt(n_mc)
        return CoimpactCurve(phis, impact, err, n_mc)
    if method != "gaussian":
        raise ValueError(f"unknown method {method!r}")
    if not isinstance(N, int):
        raise ValueError("the gaussian evaluation needs a fixed integer N")
    c1 = sign_correlation(rho)
    m1, m2 = size_law.moment(1), size_law.moment(2)
    mean_s = (N - 1) * c1 * m1
    second = (N - 1) * m2 + (N - 1) * (N - 2) * c1 * m1**2
    var_s = max(second - mean_s**2, 0.0)
    impact = np.empty(len(phis))
    if var_s == 0.0:
        impact[:] = Y * f_delta(phis + mean_s, delta)
        return CoimpactCurve(phis, impact, np.zeros(len(phis)), 0)
    sd = math.sqrt(var_s)
    for k, phi in enumerate(phis):
        loc = phi + mean_s

        def plus(x):
            return x**delta * stats.norm.pdf(x, loc, sd)

        def minus(x):
            return x**delta * stats.norm.pdf(-x, loc, sd)

        hi = abs(loc) + 12 * sd
        a, _ = integrate.quad(plus, 0.0, hi, epsabs=1e-13, limit=200)
        b, _ = integrate.quad(minus, 0.0, hi, epsabs=1e-13, limit=200)
        impact[k] = Y * (a - b)
    return CoimpactCurve(phis, impact, np.zeros(len(phis)), 0)


@dataclass(frozen=True)
class GeometricCounts:
    """Geometric law on {1, 2, ...} for the number of daily metaorders."""

    mean: float = 10.0

    def __post_init__(self):
        if self.mean < 1:
            raise ValueError("mean count must be >= 1")

    def sample(self, rng, n):
        return rng.geometric(1.0 / self.mean, n)


@dataclass(frozen=True)
class InterceptFit:
    """Small-phi intercept and the crossover to the square-root branch."""

    intercept: float
    slope: float
    sqrt_coef: float
    phi_star: float
    n_linear: int
    n_sqrt: int
    intercept_stderr: float


def intercept_and_crossover(curve, linear_frac=1.0 / 3.0, sqrt_frac=1.0 / 3.0):
    """Fit the two regimes of a conditional-impact curve.

    The smallest-phi third (by default) is fitted as intercept + slope*phi
    by ordinary least squares; the largest-phi third as b*sqrt(phi) with
    the exponent pinned.  phi_star solves intercept + slope*phi =
    b*sqrt(phi); of the two roots, the one closest (in log distance) to
    the gap between the two fit windows is reported.  A curve that does
    not span both regimes, or whose branches never intersect, raises
    RegimeError.
    """
    phi = np.asarray(curve.phi, dtype=np.float64)
    impact = np.asarray(curve.impact, dtype=np.float64)
    if (np.diff(phi) <= 0).any():
        raise ValueError("phi must be strictly increasing")
    n = len(phi)
    n_lin = max(int(round(n * linear_frac)), 0)
    n_sq = max(int(round(n * sqrt_frac)), 0)
    if n_lin < 3 or n_sq < 3 or n_lin + n_sq > n:
        raise RegimeError(
            "curve too short to resolve separate linear and square-root "
            f"windows ({n} points)"
        )
    lo = slice(0, n_lin)
    hi = slice(n - n_sq, n)
    if (impact[hi] <= 0).any():
        raise RegimeError("square-root window contains non-positive values")
    fit = stats.linregress(phi[lo], impact[lo])
    intercept, slope = float(fit.intercept), float(fit.slope)
    b = math.exp(float(np.mean(np.log(impact[hi]) - 0.5 * np.log(phi[hi]))))
    disc = b * b - 4.0 * slope * intercept
    if disc < 0 or slope <= 0:
        raise RegimeError(
            "fitted linear and square-root branches do not intersect"
        )
    roots = np.array(
        [(b - math.sqrt(disc)) / (2 * slope), (b + math.sqrt(disc)) / (2 * slope)]
    )
    roots = roots[roots > 0] ** 2
    if len(roots) == 0:
        raise RegimeError("no positive crossover root")
    gap = math.sqrt(phi[n_lin - 1] * phi[n - n_sq])
    phi_star = float(roots[np.argmin(np.abs(np.log(roots) - math.log(gap)))])
    return InterceptFit(
        intercept=intercept,
        slope=slope,
        sqrt_coef=b,
        phi_star=phi_star,
        n_linear=n_lin,
        n_sqrt=n_sq,
        intercept_stderr=float(fit.intercept_stderr),
    )


@dataclass(frozen=True)
class ImbalanceRegression:
    slope: float
    intercept: float
    r2: float
    slope_stderr: float


def shortfall_vs_imbalance(shortfalls, imbalances):
    """OLS of per-metaorder implementation shortfall on the net co-flow
    imbalance oriented by the focal sign."""
    y = np.asarray(shortfalls, dtype=np.float64)
    x = np.asarray(imbalances, dtype=np.float64)
    if y.shape != x.shape or y.ndim != 1:
        raise ValueError("need matching 1-d arrays")
    if len(y) < 30:
        raise ValueError("need at least 30 records")
    if np.var(x) == 0:
        raise ValueError("zero-variance regressor")
    fit = stats.linregress(x, y)
    return ImbalanceRegression(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r2=float(fit.rvalue**2),
        slope_stderr=float(fit.stderr),
    )


def simulate_shortfall_days(
    n_days, N, rho, size_law=None, Y=1.0, delta=0.5, seed=0
):
    """Generate (shortfall, imbalance) pairs through aggregate-impact
    pricing.

    The focal metaorder is index 0 of each day.  The day's return is
    Y*f_delta of the net flow; execution accumulates linearly through the
    day, so the shortfall against the arrival price is half the day's
    return, oriented by the focal sign.  The regressor is the co-flow
    imbalance oriented the same way.
    """
    flows = sample_days(n_days, N, rho, size_law, seed)
    ret = Y * f_delta(flows.sum(axis=1), delta)
    focal_sign = np.sign(flows[:, 0])
    coflow = flows[:, 1:].sum(axis=1)
    shortfalls = focal_sign * ret / 2.0
    imbalances = focal_sign * coflow
    return shortfalls, imbalances


def write_dayflows_csv(path, flows_matrix):
    """Persist a (days, N) signed-fraction array as day,metaorder_id rows."""
    flows_matrix = np.asarray(flows_matrix, dtype=np.float64)
    rows = []
    for d in range(flows_matrix.shape[0]):
        for i in range(flows_matrix.shape[1]):
            rows.append([d, i, flows_matrix[d, i]])
    _csvio.write_rows(path, ["day", "metaorder_id", "phi_tilde"], rows)


def read_dayflows_csv(path):
    _, rows = _csvio.read_rows(path, ["day", "metaorder_id", "phi_tilde"])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    days = np.array([int(r[0]) for r in rows])
    ids = np.array([int(r[1]) for r in rows])
    vals = np.array([float(r[2]) for r in rows])
    n_days = days.max() + 1
    n = ids.max() + 1
    out = np.zeros((n_days, n))
    out[days, ids] = vals
    return out
