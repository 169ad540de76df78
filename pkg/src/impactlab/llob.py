"""Locally-linear latent order book solver.

The signed latent density phi obeys

    d(phi)/dt = D d2(phi)/dy2 - nu*phi + lam*sgn(y) + m(t)*delta(y)

in the frame of the price (y > 0 toward the bid side, so buy liquidity is
positive).  This module provides the analytic-grade stationary profile as a
finite-difference boundary-value solve, an explicit time stepper for the
full PDE with a metaorder source, the self-consistent price trajectory of
the cancellation-free regime, and the impact-scaling / crossover
measurements built on top of them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import _csvio
from ._dispatch import hot
from .errors import ConvergenceError, GridError, RegimeError


@dataclass(frozen=True)
class LlobParams:
    """Latent-book parameters: diffusivity D, cancellation rate nu, and
    deposition intensity lam (orders per unit price and time)."""

    D: float
    nu: float
    lam: float

    def __post_init__(self):
        for name in ("D", "nu", "lam"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def L(self):
        """Liquidity: slope of the stationary density at the price."""
        return self.lam / math.sqrt(self.D * self.nu)

    @property
    def J(self):
        """Transaction rate sustained by the stationary book."""
        return self.D * self.L


@dataclass(frozen=True)
class MetaorderSchedule:
    """Execution schedule with total size Q over duration T.

    shape "constant" trades at rate Q/T; shape "front-loaded" at rate
    Q*(c+1)/T * (1 - t/T)^c with c > 0, which decreases over the execution
    window.  Cumulative volumes are closed-form, so per-step source volumes
    telescope exactly.
    """

    Q: float
    T: float
    sign: int = 1
    shape: str = "constant"
    c: float = 0.0

    def __post_init__(self):
        if self.Q < 0:
            raise ValueError("metaorder size Q must be >= 0")
        if not self.T > 0:
            raise ValueError("duration T must be > 0")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be -1 or +1")
        if self.shape not in ("constant", "front-loaded"):
            raise ValueError(f"unknown schedule shape {self.shape!r}")
        if self.c < 0:
            raise ValueError("decay parameter c must be >= 0")
        if self.shape == "constant" and self.c != 0.0:
            raise ValueError("constant schedules take no decay parameter")

    def rate(self, t):
        """Unsigned trading rate m(t), zero outside [0, T]."""
        t = np.asarray(t, dtype=np.float64)
        inside = (t >= 0) & (t < self.T)
        if self.shape == "constant":
            out = np.where(inside, self.Q / self.T, 0.0)
        else:
            rel = np.where(inside, 1.0 - t / self.T, 0.0)
            out = np.where(
                inside, self.Q * (self.c + 1.0) / self.T * rel**self.c, 0.0
            )
        return out if out.ndim else float(out)

    def cumulative(self, t):
        """Volume executed by time t (reaches Q at T and stays there)."""
        t = np.asarray(t, dtype=np.float64)
        frac = np.clip(t / self.T, 0.0, 1.0)
        if self.shape == "constant":
            out = self.Q * frac
        else:
            out = self.Q * (1.0 - (1.0 - frac) ** (self.c + 1.0))
        return out if out.ndim else float(out)

    def segment_volumes(self, edges):
        """Exact unsigned volumes executed within consecutive [edges] bins."""
        edges = np.asarray(edges, dtype=np.float64)
        if (np.diff(edges) < 0).any():
            raise ValueError("edges must be non-decreasing")
        return np.diff(self.cumulative(edges))

    def time_of_volume(self, v):
        """Inverse of cumulative(): the time by which volume v is done."""
        v = np.asarray(v, dtype=np.float64)
        if self.Q == 0:
            out = np.zeros_like(v)
            return out if out.ndim else 0.0
        if ((v < -1e-12 * self.Q) | (v > self.Q * (1 + 1e-12))).any():
            raise ValueError("volume outside [0, Q]")
        frac = np.clip(v / self.Q, 0.0, 1.0)
        if self.shape == "constant":
            out = self.T * frac
        else:
            out = self.T * (1.0 - (1.0 - frac) ** (1.0 / (self.c + 1.0)))
        return out if out.ndim else float(out)


def _uniform_spacing(grid, name):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or len(grid) < 3:
        raise GridError(f"{name} must be a 1-d grid with at least 3 points")
    steps = np.diff(grid)
    h = steps[0]
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0):
        raise GridError(f"{name} must be uniformly spaced and increasing")
    return grid, float(h)


def stationary_profile(params, y, bc=None):
    """Stationary signed density on a symmetric grid.

    Solves D*phi'' - nu*phi + lam*sgn(y) = 0 as a tridiagonal
    boundary-value problem; the discrete solution is the exact fixed point
    of the explicit time stepper on the same grid.  bc gives the Dirichlet
    values at (y[0], y[-1]); by default the asymptotic levels -/+ lam/nu
    are used, with a warning when the grid is too narrow for the
    asymptotes to have set in.
    """
    y, h = _uniform_spacing(y, "y")
    if abs(y[0] + y[-1]) > 1e-9 * max(abs(y[0]), abs(y[-1])):
        raise GridError("grid must be symmetric about 0")
    if bc is None:
        k = math.sqrt(params.nu / params.D)
        tail = math.exp(-k * y[-1]) / math.sinh(k * y[-1])
        if tail > 1e-8:
            warnings.warn(
                "grid too narrow for asymptotic boundary values; the "
                "profile slope will be distorted (pass bc= explicitly)",
                stacklevel=2,
            )
        level = params.lam / params.nu
        bc = (level * np.sign(y[0]), level * np.sign(y[-1]))
    n = len(y)
    phi = np.empty(n)
    phi[0], phi[-1] = bc
    inner = n - 2
    a = params.D / (h * h)
    band = np.zeros((3, inner))
    band[0, 1:] = a
    band[1, :] = -2.0 * a - params.nu
    band[2, :-1] = a
    rhs = -params.lam * np.sign(y[1:-1])
    rhs[0] -= a * phi[0]
    rhs[-1] -= a * phi[-1]
    phi[1:-1] = solve_banded((1, 1), band, rhs)
    return phi


def stationary_closed_form(params, y):
    """Analytic stationary profile (lam/nu)*sgn(y)*(1 - e^{-|y|sqrt(nu/D)})."""
    y = np.asarray(y, dtype=np.float64)
    k = math.sqrt(params.nu / params.D)
    return (params.lam / params.nu) * np.sign(y) * (1.0 - np.exp(-k * np.abs(y)))


@dataclass(frozen=True)
class PdeResult:
    """Output of the explicit PDE run: the price path on the step grid, the
    final density, optional snapshots, and the worst relative mass-balance
    violation observed."""

    times: np.ndarray
    prices: np.ndarray
    phi: np.ndarray
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    max_mass_violation: float


def solve_pde(
    params,
    schedule,
    x,
    dt,
    horizon,
    phi0=None,
    snapshot_every=0,
    mass_check=True,
):
    """Explicit finite-difference evolution of the latent book in price
    coordinates (buy volume positive below the price).

    The metaorder source deposits the exact schedule volume of each time
    step, split between the two cells bracketing the interpolated zero
    crossing.  Boundary values are held fixed, so the grid must be wide
    enough that the stationary tails are flat there.  Raises GridError for
    a CFL-unstable dt and ConvergenceError if the zero crossing is lost
    (one side of the book emptied).
    """
    x, dx = _uniform_spacing(x, "x")
    if dt <= 0:
        raise GridError("dt must be > 0")
    # exact linear-stability bound of the explicit reaction-diffusion step:
    # the sawtooth mode amplifies by 1 - 4 D dt / dx^2 - nu dt
    cfl = 2.0 / (4.0 * params.D / (dx * dx) + params.nu)
    if dt > cfl * (1.0 + 1e-12):
        raise GridError(f"dt={dt:g} violates the stability bound {cfl:g}")
    if phi0 is None:
        phi = stationary_closed_form(params, -x)
    else:
        phi = np.array(phi0, dtype=np.float64)
        if phi.shape != x.shape:
            raise GridError("initial profile does not match the grid")
    n_steps = int(round(horizon / dt))
    if n_steps < 1:
        raise ValueError("horizon shorter than one time step")
    edges = dt * np.arange(n_steps + 1)
    source = np.zeros(n_steps)
    if schedule is not None and schedule.Q > 0:
        source = schedule.sign * schedule.segment_volumes(edges) / dt
    times = edges
    prices = np.empty(n_steps + 1)
    snaps = [phi.copy()] if snapshot_every else []
    snap_times = [0.0] if snapshot_every else []
    chunk = snapshot_every if snapshot_every else n_steps
    max_viol = 0.0
    done = 0
    while done < n_steps:
        step = min(chunk, n_steps - done)
        p, viol, lost = hot.llob_ftcs(
            phi, x, dx, dt, params.D, params.nu, params.lam,
            source[done : done + step], step, mass_check,
        )
        max_viol = max(max_viol, viol)
        if lost >= 0:
            raise ConvergenceError(
                "zero crossing lost at step "
                f"{done + lost} (t={times[done + lost]:g}): one side of the "
                "book emptied; widen the grid or lower the trading rate",
                iterations=done + lost,
            )
        prices[done : done + step + 1] = p
        done += step
        if snapshot_every:
            snaps.append(phi.copy())
            snap_times.append(times[done])
    return PdeResult(
        times=times,
        prices=prices,
        phi=phi,
        snapshot_times=np.asarray(snap_times),
        snapshots=np.asarray(snaps) if snaps else np.empty((0, len(x))),
        max_mass_violation=float(max_viol),
    )


@dataclass(frozen=True)
class Trajectory:
    """Self-consistent price trajectory y(t) with solver diagnostics."""

    t: np.ndarray
    y: np.ndarray
    iterations: int
    residual: float


def _power_grid(n, power):
    return (np.arange(n + 1) / n) ** power


def _march(t_hat, tm, w, rhat):
    """Solve the discrete self-consistent trajectory by causal marching.

    Each node value depends only on earlier segments, so the system is
    triangular in time: one scalar root find per node (safeguarded Newton
    inside a guaranteed bisection bracket) instead of a global fixed point.
    The midpoint of the most recent segment involves the unknown itself and
    is folded into the scalar equation.  Robust at any participation rate,
    unlike damped global iteration which stalls deep in the nonlinear
    regime.
    """
    n = t_hat.size
    y = np.zeros(n)
    ym = np.zeros(max(n - 1, 0))
    for i in range(1, n):
        wr = w[i, :i] * rhat[:i]
        lo = float(np.minimum(wr, 0.0).sum())
        hi = float(np.maximum(wr, 0.0).sum())
        if lo == 0.0 and hi == 0.0:
            y[i] = 0.0
            ym[i - 1] = 0.5 * y[i - 1]
            continue
        inv = 0.25 / (t_hat[i] - tm[:i])
        base = ym[:i].copy()
        base[-1] = y[i - 1]
        dd = np.ones(i)
        dd[-1] = 0.5
        a, b = lo, hi
        val = min(max(y[i - 1], a), b)
        for _ in range(80):
            d = (val - base) * dd
            e = np.exp(-(d * d) * inv)
            fv = val - float(wr @ e)
            if abs(fv) <= 1e-12 * (1.0 + abs(val)):
                break
            if fv > 0.0:
                b = val
            else:
                a = val
            if b - a <= 1e-15 * (1.0 + abs(val)):
                break
            dfv = 1.0 + 2.0 * float(wr @ (e * d * inv * dd))
            cand = val - fv / dfv if dfv > 0.0 else math.inf
            if not (a < cand < b):
                cand = 0.5 * (a + b)
            val = cand
        y[i] = val
        ym[i - 1] = 0.5 * (y[i - 1] + val)
    return y


def price_trajectory_selfconsistent(
    params,
    m,
    T=None,
    t_grid=None,
    n_grid=600,
    grid_power=2.0,
    post_horizon=0.0,
    n_post=0,
    damping=0.5,
    tol=1e-8,
    max_iter=400,
):
    """Price trajectory from the cancellation-free self-consistent equation

        y(t) = (1/L) * integral_0^t m(s) (4 pi D (t-s))^{-1/2}
               exp[-(y(t)-y(s))^2 / (4 D (t-s))] ds,

    solved on a time grid clustered near 0 by causal marching (the discrete
    equation is triangular in time), then polished with damped fixed-point
    sweeps if needed.  m may be a constant rate (with T the duration) or a
    MetaorderSchedule.  The 1/sqrt singularity is integrated exactly segment
    by segment.  Valid deep in the nu*T << 1 regime; a warning is issued
    outside it.
    """
    if isinstance(m, MetaorderSchedule):
        schedule = m
        if T is None:
            T = schedule.T
        elif T != schedule.T:
            raise ValueError("T disagrees with the schedule duration")
    else:
        if T is None:
            raise ValueError("T is required when m is a constant rate")
        sign = -1 if m < 0 else 1
        schedule = MetaorderSchedule(Q=abs(float(m)) * T, T=T, sign=sign)
    if params.nu * T > 0.1:
        warnings.warn(
            f"nu*T = {params.nu * T:.3g} is not << 1; the cancellation-free "
            "trajectory is a poor approximation here",
            stacklevel=2,
        )
    if t_grid is not None:
        t_hat = np.asarray(t_grid, dtype=np.float64) / T
        if t_hat[0] != 0.0 or (np.diff(t_hat) <= 0).any():
            raise ValueError("t_grid must start at 0 and increase strictly")
    else:
        t_hat = _power_grid(n_grid, grid_power)
        if post_horizon > 0:
            if n_post <= 0:
                n_post = max(n_grid // 2, 2)
            extra = 1.0 + (post_horizon / T) * _power_grid(n_post, grid_power)[1:]
            t_hat = np.concatenate([t_hat, extra])
    vols = schedule.segment_volumes(T * t_hat)
    seg_dt = np.diff(t_hat)
    rhat = schedule.sign * (vols / seg_dt) / (params.J * T)
    tm = 0.5 * (t_hat[:-1] + t_hat[1:])
    with np.errstate(invalid="ignore"):
        past = np.sqrt(np.maximum(t_hat[:, None] - t_hat[None, :-1], 0.0))
        future = np.sqrt(np.maximum(t_hat[:, None] - t_hat[None, 1:], 0.0))
    w = (past - future) / math.sqrt(math.pi)
    y = _march(t_hat, tm, w, rhat)
    g = hot.selfconsistent_sweep(t_hat, tm, w, rhat, y)
    residual = float(np.max(np.abs(g - y)) / max(np.max(np.abs(g)), 1e-300))
    iteration = 0
    while residual > tol and iteration < max_iter:
        y = y + damping * (g - y)
        g = hot.selfconsistent_sweep(t_hat, tm, w, rhat, y)
        residual = float(np.max(np.abs(g - y)) / max(np.max(np.abs(g)), 1e-300))
        iteration += 1
    if residual > tol:
        raise ConvergenceError(
            f"self-consistent iteration stalled at residual {residual:.3e}",
            residual=residual,
            iterations=iteration,
        )
    scale = math.sqrt(params.D * T)
    return Trajectory(
        t=T * t_hat, y=scale * y, iterations=iteration, residual=residual
    )


@dataclass(frozen=True)
class ImpactScaling:
    """Peak impact I(Q, T), the scaling function value F(eta), and the
    participation ratio eta = Q / (J T)."""

    impact: float
    F: float
    eta: float


def impact_scaling(Q, T, params, **solver_kwargs):
    """I(Q, T) = sqrt(D Q / J) * F(eta) from the self-consistent trajectory,
    evaluated at the end of the execution window."""
    if Q < 0:
        raise ValueError("Q must be >= 0")
    if Q == 0:
        return ImpactScaling(impact=0.0, F=0.0, eta=0.0)
    eta = Q / (params.J * T)
    traj = price_trajectory_selfconsistent(params, Q / T, T, **solver_kwargs)
    impact = float(traj.y[-1])
    return ImpactScaling(
        impact=impact, F=impact / math.sqrt(params.D * Q / params.J), eta=eta
    )


def impact_curve(params, sizes, T, **solver_kwargs):
    """Impact against participation ratio for a grid of metaorder sizes
    executed over the same duration; returns (eta, impact) arrays."""
    sizes = np.asarray(sizes, dtype=np.float64)
    etas = np.empty(len(sizes))
    impacts = np.empty(len(sizes))
    for k, q in enumerate(sizes):
        out = impact_scaling(float(q), T, params, **solver_kwargs)
        etas[k] = out.eta
        impacts[k] = out.impact
    return etas, impacts


@dataclass(frozen=True)
class CrossoverFit:
    """Regime-intersection fit of an impact curve: eta_star is where the
    fitted linear branch a*eta meets the square-root branch b*sqrt(eta)."""

    eta_star: float
    linear_coef: float
    sqrt_coef: float
    n_linear: int
    n_sqrt: int


def measure_crossover(eta, impact, slope_hi=0.85, slope_lo=0.65):
    """Locate the linear-to-square-root crossover of an impact curve.

    Pointwise log-log slopes classify the curve: the maximal contiguous
    prefix with slope >= slope_hi is the linear regime and the maximal
    contiguous suffix with slope <= slope_lo the square-root regime (each
    needs at least two points, else RegimeError).  Branch prefactors are
    fitted with exponents pinned to 1 and 1/2, and eta_star solves
    a*eta = b*sqrt(eta).
    """
    eta = np.asarray(eta, dtype=np.float64)
    impact = np.asarray(impact, dtype=np.float64)
    if eta.shape != impact.shape or eta.ndim != 1:
        raise ValueError("eta and impact must be matching 1-d arrays")
    if len(eta) < 4:
        raise ValueError("need at least 4 curve points")
    if (np.diff(eta) <= 0).any():
        raise ValueError("eta must be strictly increasing")
    if (impact <= 0).any() or (eta <= 0).any():
        raise ValueError("curve values must be positive")
    le, li = np.log(eta), np.log(impact)
    slopes = np.empty(len(eta))
    slopes[1:-1] = (li[2:] - li[:-2]) / (le[2:] - le[:-2])
    slopes[0] = (li[1] - li[0]) / (le[1] - le[0])
    slopes[-1] = (li[-1] - li[-2]) / (le[-1] - le[-2])
    n_lin = 0
    while n_lin < len(eta) and slopes[n_lin] >= slope_hi:
        n_lin += 1
    n_sq = 0
    while n_sq < len(eta) and slopes[len(eta) - 1 - n_sq] <= slope_lo:
        n_sq += 1
    if n_lin < 2:
        raise RegimeError("curve does not reach the linear small-eta regime")
    if n_sq < 2:
        raise RegimeError("curve does not reach the square-root regime")
    lin = slice(0, n_lin)
    sq = slice(len(eta) - n_sq, len(eta))
    a = math.exp(float(np.mean(li[lin] - le[lin])))
    b = math.exp(float(np.mean(li[sq] - 0.5 * le[sq])))
    return CrossoverFit(
        eta_star=(b / a) ** 2,
        linear_coef=a,
        sqrt_coef=b,
        n_linear=n_lin,
        n_sqrt=n_sq,
    )


def write_profile_csv(path, x, phi):
    _csvio.write_columns(path, ["x", "phi"], [x, phi])


def read_profile_csv(path):
    cols = _csvio.read_numeric(path, ["x", "phi"])
    return cols["x"], cols["phi"]


def write_trajectory_csv(path, t, y):
    _csvio.write_columns(path, ["t", "y"], [t, y])


def read_trajectory_csv(path):
    cols = _csvio.read_numeric(path, ["t", "y"])
    return cols["t"], cols["y"]
