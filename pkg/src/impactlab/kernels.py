"""Propagator kernels shared by the flow generators and the impact models.

Three families: constant, exponential ``g0*exp(-beta*l)`` and power-law
``g0*(ell0+l)**-gamma``.  Each kernel knows its pointwise values, its exact
antiderivatives G1(x) = int_0^x G and G2(x) = int_0^x G1 (used for exact
piecewise-constant flow integrals and round-trip costs), and its total mass
(the branching ratio contribution when used as a self-excitation kernel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import CalibrationError

FAMILIES = ("constant", "exponential", "power-law")


@dataclass(frozen=True)
class Kernel:
    family: str
    g0: float
    beta: float = 0.0
    gamma: float = 0.0
    ell0: float = 0.0
    lag_unit: str = "events"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.g0 < 0:
            raise ValueError("kernel amplitude g0 must be >= 0")
        if self.family == "exponential" and self.beta <= 0:
            raise ValueError("exponential kernel needs beta > 0")
        if self.family == "power-law":
            if self.gamma <= 0:
                raise ValueError("power-law kernel needs gamma > 0")
            if self.ell0 < 0:
                raise ValueError("power-law offset ell0 must be >= 0")

    @classmethod
    def constant(cls, g0, lag_unit="events"):
        return cls("constant", g0, lag_unit=lag_unit)

    @classmethod
    def exponential(cls, g0, beta, lag_unit="events"):
        return cls("exponential", g0, beta=beta, lag_unit=lag_unit)

    @classmethod
    def power_law(cls, g0, gamma, ell0=0.0, lag_unit="events"):
        return cls("power-law", g0, gamma=gamma, ell0=ell0, lag_unit=lag_unit)

    def __call__(self, lag):
        """Pointwise value G(lag); lag >= 0.

        A power-law kernel with ell0 == 0 diverges at lag 0; callers that
        need lag-0 values must set ell0 > 0.
        """
        lag = np.asarray(lag, dtype=np.float64)
        if self.family == "constant":
            return np.full_like(lag, self.g0)
        if self.family == "exponential":
            return self.g0 * np.exp(-self.beta * lag)
        with np.errstate(divide="ignore"):
            return self.g0 * np.power(self.ell0 + lag, -self.gamma)

    def values(self, max_lag):
        """Table of values at integer lags 0..max_lag.

        The lag-0 entry is zeroed for an ell0 == 0 power law (it never enters
        a propagator sum, which starts at lag 1).
        """
        lags = np.arange(max_lag + 1, dtype=np.float64)
        if self.family == "power-law" and self.ell0 == 0.0:
            out = np.zeros(max_lag + 1)
            if max_lag >= 1:
                out[1:] = self(lags[1:])
            return out
        return self(lags)

    def primitive(self, x):
        """G1(x) = integral of G over [0, x]."""
        x = np.asarray(x, dtype=np.float64)
        g0 = self.g0
        if self.family == "constant":
            return g0 * x
        if self.family == "exponential":
            b = self.beta
            return (g0 / b) * (1.0 - np.exp(-b * x))
        gam, l0 = self.gamma, self.ell0
        if l0 == 0.0 and gam >= 1.0:
            raise ValueError("power-law kernel with ell0=0 and gamma>=1 is not integrable at 0")
        if gam == 1.0:
            return g0 * (np.log(l0 + x) - math.log(l0))
        return g0 * ((l0 + x) ** (1.0 - gam) - l0 ** (1.0 - gam)) / (1.0 - gam)

    def double_primitive(self, x):
        """G2(x) = integral of G1 over [0, x]."""
        x = np.asarray(x, dtype=np.float64)
        g0 = self.g0
        if self.family == "constant":
            return 0.5 * g0 * x * x
        if self.family == "exponential":
            b = self.beta
            return (g0 / b) * (x - (1.0 - np.exp(-b * x)) / b)
        gam, l0 = self.gamma, self.ell0
        if l0 == 0.0:
            if gam >= 1.0:
                raise ValueError("power-law kernel with ell0=0 and gamma>=1 is not integrable at 0")
            return g0 * x ** (2.0 - gam) / ((1.0 - gam) * (2.0 - gam))
        if gam == 1.0:
            return g0 * ((l0 + x) * (np.log(l0 + x) - math.log(l0)) - x)
        if gam == 2.0:
            return g0 * (x / l0 - (np.log(l0 + x) - math.log(l0)))
        a = ((l0 + x) ** (2.0 - gam) - l0 ** (2.0 - gam)) / ((1.0 - gam) * (2.0 - gam))
        return g0 * (a - l0 ** (1.0 - gam) * x / (1.0 - gam))

    def integral(self, a, b):
        """integral of G over [a, b], 0 <= a <= b, exact."""
        return self.primitive(b) - self.primitive(a)

    def total_mass(self):
        """integral of G over [0, inf); inf when not integrable."""
        if self.g0 == 0.0:
            return 0.0
        if self.family == "constant":
            return math.inf
        if self.family == "exponential":
            return self.g0 / self.beta
        if self.gamma <= 1.0 or self.ell0 == 0.0:
            return math.inf
        return self.g0 * self.ell0 ** (1.0 - self.gamma) / (self.gamma - 1.0)


def discrete_table(kernels, max_lag):
    """Stack per-type lag tables into the (n_types, max_lag+1) layout the
    path kernels consume."""
    return np.stack([k.values(max_lag) for k in kernels])


def exp_sum_approx(kernel, support, tol=0.01, per_decade=8):
    """Approximate a power-law kernel by a non-negative sum of exponentials.

    Fits amplitudes on a geometric ladder of decay rates by non-negative
    least squares and checks the relative L1 error over [0, support].
    Returns (amplitudes, betas, l1_rel_error).
    """
    if kernel.family == "exponential":
        return np.array([kernel.g0]), np.array([kernel.beta]), 0.0
    if kernel.family != "power-law":
        raise ValueError("only exponential and power-law kernels have an exponential representation")
    if kernel.ell0 <= 0:
        raise ValueError("power-law kernel needs ell0 > 0 for an exponential representation")
    l0 = kernel.ell0
    for refine in range(4):
        pd = per_decade * (2 ** refine)
        lo, hi = 0.1 / support, 10.0 / l0
        n_decades = math.log10(hi / lo)
        m = max(2, int(math.ceil(n_decades * pd)) + 1)
        betas = np.geomspace(lo, hi, m)
        ts = np.concatenate([[0.0], np.geomspace(l0 / 100.0, support, 40 * pd)])
        g = kernel(ts)
        basis = np.exp(-np.outer(ts, betas))
        wts = 1.0 / g
        amps, _ = scipy.optimize.nnls(basis * wts[:, None], g * wts)
        dense = np.concatenate([[0.0], np.geomspace(l0 / 100.0, support, 4000)])
        exact = kernel(dense)
        approx = np.exp(-np.outer(dense, betas)) @ amps
        err = np.trapezoid(np.abs(approx - exact), dense) / np.trapezoid(exact, dense)
        if err <= tol:
            keep = amps > 0
            return amps[keep], betas[keep], float(err)
    raise CalibrationError(
        f"exponential representation missed tol={tol} (reached {err:.3g})",
        {"l1_rel_error": float(err), "terms": int(m)},
    )
