"""Stochastic order-flow generators.

Four families: zero-intelligence Poisson flow, state-dependent (queue-reactive)
Poisson flow, multivariate Hawkes flow with optional same-instant triggering,
and order-splitting agent populations producing long-memory sign series.

All generators are pure functions of (spec, seed).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._dispatch import hot
from ._uniform import UniformSource
from .errors import StationarityError
from .flowstats import SignSeries
from .kernels import Kernel, exp_sum_approx
from .lob import BookState, Event, EventStream, Kind, OrderBook, Side


@dataclass(frozen=True)
class PoissonRates:
    """Per-level and per-side event intensities for memoryless flow.

    limit[i] is the arrival rate of limit orders at grid level i+1 (applied
    to whichever side that level is eligible for), cancel[i] the cancellation
    rate per resting share at that level, and market_buy / market_sell the
    market-order rates.
    """

    limit: np.ndarray
    cancel: np.ndarray
    market_buy: float
    market_sell: float

    def __post_init__(self):
        object.__setattr__(self, "limit", np.asarray(self.limit, dtype=np.float64))
        object.__setattr__(self, "cancel", np.asarray(self.cancel, dtype=np.float64))
        if self.limit.ndim != 1 or self.cancel.ndim != 1:
            raise ValueError("limit and cancel rates must be 1-d arrays")
        if len(self.limit) != len(self.cancel):
            raise ValueError("limit and cancel rate arrays differ in length")
        for name in ("limit", "cancel"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or (arr < 0).any():
                raise ValueError(f"{name} rates must be finite and >= 0")
        for name in ("market_buy", "market_sell"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")

    @classmethod
    def uniform(cls, n_levels, limit_rate, cancel_rate, market_rate):
        return cls(
            np.full(n_levels, float(limit_rate)),
            np.full(n_levels, float(cancel_rate)),
            float(market_rate),
            float(market_rate),
        )

    @property
    def n_levels(self):
        return len(self.limit)


def _channel_rates(engine, rates):
    """Per-channel intensity vectors given the current book.

    Buy limit orders are eligible strictly below the best ask, sell limit
    orders strictly above the best bid (either side unrestricted when the
    opposite side is empty), so a level is only ever owned by one side.
    Cancellations run one exponential clock per resting share.
    """
    k = engine.n_levels
    bb = engine.best_level(Side.BUY)
    ba = engine.best_level(Side.SELL)
    lo_b = rates.limit.copy()
    lo_s = rates.limit.copy()
    if ba is not None:
        lo_b[ba - 1 :] = 0.0
    if bb is not None:
        lo_s[:bb] = 0.0
    ca_b = rates.cancel * np.asarray(engine.bids, dtype=np.float64)
    ca_s = rates.cancel * np.asarray(engine.asks, dtype=np.float64)
    return lo_b, lo_s, ca_b, ca_s


def _gillespie(book0, rates_fn, horizon, rng, rate_cap=None, scheduled=()):
    """Exact event-by-event simulation for rates that are constant between
    events.  rates_fn(engine) -> (PoissonRates-compatible) is re-evaluated
    after every applied event.

    scheduled is an optional time-sorted sequence of externally imposed
    events (e.g. metaorder child orders) merged into the stochastic flow.
    Whenever the next exponential waiting time would pass a scheduled event,
    the clock advances to it instead and the wait is redrawn, which is exact
    because the background rates are memoryless and constant between events.
    """
    engine = OrderBook(book0)
    k = engine.n_levels
    events = []
    t = 0.0
    pending = list(scheduled)
    if any(pending[i].time > pending[i + 1].time for i in range(len(pending) - 1)):
        raise ValueError("scheduled events must be time-sorted")
    next_sched = 0
    while True:
        rates = rates_fn(engine)
        lo_b, lo_s, ca_b, ca_s = _channel_rates(engine, rates)
        stacked = np.concatenate(
            [lo_b, lo_s, ca_b, ca_s, [rates.market_buy, rates.market_sell]]
        )
        total = stacked.sum()
        if rate_cap is not None and total > rate_cap:
            raise ValueError(
                f"total intensity {total:.6g} exceeds the declared cap {rate_cap:.6g}"
            )
        t_next = t + rng.exponential(1.0 / total) if total > 0.0 else math.inf
        if next_sched < len(pending) and pending[next_sched].time <= min(
            t_next, horizon
        ):
            e = pending[next_sched]
            next_sched += 1
            t = e.time
            engine.apply(e)
            events.append(e)
            continue
        if t_next > horizon:
            break
        t = t_next
        u = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(stacked), u, side="right"))
        idx = min(idx, 4 * k + 1)
        if idx < k:
            e = Event(t, Kind.LIMIT, Side.BUY, 1, level=idx + 1)
        elif idx < 2 * k:
            e = Event(t, Kind.LIMIT, Side.SELL, 1, level=idx - k + 1)
        elif idx < 3 * k:
            e = Event(t, Kind.CANCEL, Side.BUY, 1, level=idx - 2 * k + 1)
        elif idx < 4 * k:
            e = Event(t, Kind.CANCEL, Side.SELL, 1, level=idx - 3 * k + 1)
        elif idx == 4 * k:
            e = Event(t, Kind.MARKET, Side.BUY, 1)
        else:
            e = Event(t, Kind.MARKET, Side.SELL, 1)
        engine.apply(e)
        events.append(e)
    return EventStream.from_iter(events)


def simulate_zi(rates, book0, horizon, seed=0):
    """Zero-intelligence flow: independent Poisson clocks for limit orders,
    market orders, and per-share cancellations, all unit size."""
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if rates.n_levels != book0.n_levels:
        raise ValueError(
            f"rates cover {rates.n_levels} levels but book has {book0.n_levels}"
        )
    rng = np.random.default_rng(seed)
    return _gillespie(book0, lambda engine: rates, horizon, rng)


def simulate_zi_with_injections(rates, book0, horizon, injections, seed=0):
    """Zero-intelligence background flow with externally scheduled events
    (time-sorted) merged in exactly; returns the combined stream."""
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if rates.n_levels != book0.n_levels:
        raise ValueError(
            f"rates cover {rates.n_levels} levels but book has {book0.n_levels}"
        )
    rng = np.random.default_rng(seed)
    return _gillespie(book0, lambda engine: rates, horizon, rng, scheduled=injections)


def simulate_queue_reactive(intensity_map, book0, horizon, rate_cap, seed=0):
    """State-dependent Poisson flow.

    intensity_map(state: BookState) -> PoissonRates is re-evaluated after
    every event; between events the rates are constant, so Gillespie sampling
    is exact.  rate_cap is a required finite bound on the total intensity the
    map may produce; exceeding it at runtime is an error.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if rate_cap is None or not math.isfinite(rate_cap) or rate_cap <= 0:
        raise ValueError("a finite positive rate_cap is required")
    rng = np.random.default_rng(seed)

    def rates_fn(engine):
        rates = intensity_map(engine.state())
        if rates.n_levels != engine.n_levels:
            raise ValueError("intensity map returned rates on the wrong grid")
        return rates

    return _gillespie(book0, rates_fn, horizon, rng, rate_cap=rate_cap)


@dataclass(frozen=True)
class EventTemplate:
    """Realized event layout for one Hawkes component."""

    kind: Kind = Kind.MARKET
    side: Side = Side.BUY
    level: Optional[int] = None
    size: int = 1

    def build(self, time):
        return Event(time, self.kind, self.side, self.size, level=self.level)


def _default_templates(d):
    return tuple(
        EventTemplate(Kind.MARKET, Side.BUY if i % 2 == 0 else Side.SELL)
        for i in range(d)
    )


@dataclass(eq=False)
class HawkesSpec:
    """Multivariate Hawkes specification with kernel matrix Phi.

    kernels[i][j] is the excitation of component i by past events of
    component j (None for no coupling).  dirac[i][j] adds an expected number
    of immediate component-i children per component-j event (a point mass at
    lag zero).  Component -> order-book event layout is given by templates;
    size-binned event types are expressed as separate components whose
    templates carry the representative sizes.

    Power-law kernels are simulated through a sum-of-exponentials fit with
    relative L1 error <= approx_tol over [0, approx_support]; exponential
    kernels are simulated exactly.
    """

    mu: np.ndarray
    kernels: Sequence[Sequence[Optional[Kernel]]]
    dirac: Optional[np.ndarray] = None
    templates: Optional[Sequence[EventTemplate]] = None
    approx_support: float = 1e3
    approx_tol: float = 0.01

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        if self.mu.ndim != 1 or len(self.mu) == 0:
            raise ValueError("mu must be a non-empty vector")
        if (self.mu < 0).any():
            raise ValueError("baseline intensities must be >= 0")
        d = len(self.mu)
        self.kernels = tuple(tuple(row) for row in self.kernels)
        if len(self.kernels) != d or any(len(row) != d for row in self.kernels):
            raise ValueError(f"kernel matrix must be {d}x{d}")
        if self.dirac is None:
            self.dirac = np.zeros((d, d))
        self.dirac = np.asarray(self.dirac, dtype=np.float64)
        if self.dirac.shape != (d, d):
            raise ValueError(f"dirac weights must be {d}x{d}")
        if (self.dirac < 0).any():
            raise ValueError("dirac weights must be >= 0")
        if self.templates is None:
            self.templates = _default_templates(d)
        self.templates = tuple(self.templates)
        if len(self.templates) != d:
            raise ValueError(f"need {d} event templates, got {len(self.templates)}")
        self._rep = None

    @property
    def d(self):
        return len(self.mu)

    def branching_matrix(self):
        """Expected direct children per event: integral of Phi plus the
        same-instant weights."""
        d = self.d
        n = np.zeros((d, d))
        for i in range(d):
            for j in range(d):
                ker = self.kernels[i][j]
                n[i, j] = 0.0 if ker is None else ker.total_mass()
        return n + self.dirac

    def spectral_radius(self):
        n = self.branching_matrix()
        if not np.all(np.isfinite(n)):
            return math.inf
        return float(np.abs(np.linalg.eigvals(n)).max())

    def exp_representation(self):
        """(amps, betas) with amps[i, j, m] the weight of exp(-betas[m] * t)
        in kernel (i, j); exact for exponential entries, fitted for
        power-law entries."""
        if self._rep is not None:
            return self._rep
        d = self.d
        parts = {}
        all_betas = []
        for i in range(d):
            for j in range(d):
                ker = self.kernels[i][j]
                if ker is None or ker.g0 == 0.0:
                    continue
                a, b, _err = exp_sum_approx(
                    ker, support=self.approx_support, tol=self.approx_tol
                )
                parts[(i, j)] = (a, b)
                all_betas.append(b)
        if all_betas:
            betas = np.unique(np.concatenate(all_betas))
        else:
            betas = np.array([1.0])
        amps = np.zeros((d, d, len(betas)))
        for (i, j), (a, b) in parts.items():
            idx = np.searchsorted(betas, b)
            amps[i, j, idx] += a
        self._rep = (amps, betas)
        return self._rep


def simulate_hawkes_times(spec, horizon, seed=0, max_events=5_000_000):
    """Raw (times, components) arrays of a Hawkes realization on [0, horizon]."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    rho = spec.spectral_radius()
    if not rho < 1.0:
        raise StationarityError(
            f"branching-matrix spectral radius {rho:.6g} >= 1; process is non-stationary"
        )
    if horizon == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    amps, betas = spec.exp_representation()
    src = UniformSource(np.random.default_rng(seed))
    return hot.hawkes_thinning(
        spec.mu, amps, betas, spec.dirac, float(horizon), src, int(max_events)
    )


def simulate_hawkes(spec, horizon, seed=0, max_events=5_000_000):
    """Hawkes-driven EventStream; events are laid out per spec.templates."""
    times, comps = simulate_hawkes_times(spec, horizon, seed, max_events)
    events = [spec.templates[c].build(t) for t, c in zip(times, comps)]
    return EventStream.from_iter(events)


def _history_arrays(spec, history):
    if isinstance(history, tuple):
        times, comps = history
        return np.asarray(times, dtype=np.float64), np.asarray(comps, dtype=np.int64)
    lookup = {
        (tpl.kind, tpl.side, tpl.level, tpl.size): i
        for i, tpl in enumerate(spec.templates)
    }
    times = np.empty(len(history))
    comps = np.empty(len(history), dtype=np.int64)
    for k, e in enumerate(history):
        key = (e.kind, e.side, e.level, e.size)
        if key not in lookup:
            raise ValueError(f"event {e} matches no component template")
        times[k] = e.time
        comps[k] = lookup[key]
    return times, comps


def intensity_at(spec, history, t):
    """Exact conditional intensity vector at time t given strictly earlier
    events (later events are ignored).  Uses the exact kernels, not the
    simulation-side exponential fit."""
    times, comps = _history_arrays(spec, history)
    mask = times < t
    times, comps = times[mask], comps[mask]
    lam = spec.mu.astype(np.float64).copy()
    for j in range(spec.d):
        lags = t - times[comps == j]
        if len(lags) == 0:
            continue
        for i in range(spec.d):
            ker = spec.kernels[i][j]
            if ker is not None:
                lam[i] += ker(lags).sum()
    return lam


def time_change_residuals(spec, history):
    """Inter-event compensator increments per component.

    For a well-specified stream these are i.i.d. unit exponentials.  The
    computation uses the simulation-side exponential representation (exact
    for exponential kernels) and covers the absolutely continuous part only,
    so it is meaningful for specs without same-instant triggering.
    """
    if (spec.dirac > 0).any():
        warnings.warn(
            "time-change residuals ignore the same-instant kernel component",
            stacklevel=2,
        )
    times, comps = _history_arrays(spec, history)
    amps, betas = spec.exp_representation()
    d = spec.d
    s = np.zeros((d, len(betas)))
    acc = np.zeros(d)
    out = [[] for _ in range(d)]
    t_prev = 0.0
    for t, c in zip(times, comps):
        dt = t - t_prev
        if dt > 0:
            decay = -np.expm1(-betas * dt)  # 1 - exp(-beta dt)
            acc += spec.mu * dt + np.einsum("ijm,jm,m->i", amps, s, decay / betas)
            s *= np.exp(-betas * dt)
        out[c].append(acc[c])
        acc[c] = 0.0
        s[c] += 1.0
        t_prev = t
    return [np.asarray(r) for r in out]


@dataclass(frozen=True)
class SplittingPopulation:
    """Order-splitting agents with heavy-tailed decision sizes.

    Each agent works through a queue of metaorders; a metaorder is a run of
    unit child market orders sharing one sign.  Sizes follow the discrete
    Pareto tail P(L >= l) ~ l^(-alpha).  With herding > 0, a fresh decision
    copies the sign of the last market order with that probability instead
    of flipping a fair coin.
    """

    n_agents: int
    alpha: float = 1.5
    rate: float = 1.0
    herding: float = 0.0

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        if self.alpha <= 1.0:
            raise ValueError("size-law tail exponent alpha must be > 1")
        if self.rate <= 0:
            raise ValueError("submission rate must be > 0")
        if not 0.0 <= self.herding <= 1.0:
            raise ValueError("herding weight must lie in [0, 1]")


def _pareto_sizes(rng, n, alpha):
    return np.ceil(rng.random(n) ** (-1.0 / alpha)).astype(np.int64)


def _interleaved_signs(rng, agents, n_agents, alpha):
    """Assign metaorder-run signs to an agent sequence, vectorized per agent."""
    n = len(agents)
    signs = np.empty(n, dtype=np.int8)
    order = np.argsort(agents, kind="stable")
    counts = np.bincount(agents, minlength=n_agents)
    start = 0
    for a in range(n_agents):
        c = int(counts[a])
        if c == 0:
            continue
        chunks = []
        covered = 0
        while covered < c:
            m = max(16, int((c - covered) * 0.6) + 1)
            batch = _pareto_sizes(rng, m, alpha)
            chunks.append(batch)
            covered += int(batch.sum())
        sizes = np.concatenate(chunks)
        keep = int(np.searchsorted(np.cumsum(sizes), c)) + 1
        sizes = sizes[:keep]
        dec = rng.integers(0, 2, len(sizes)) * 2 - 1
        signs[order[start : start + c]] = np.repeat(dec, sizes)[:c]
        start += c
    return signs


def _herded_signs(rng, agents, n_agents, alpha, herding):
    n = len(agents)
    signs = np.empty(n, dtype=np.int8)
    remaining = np.zeros(n_agents, dtype=np.int64)
    current = np.zeros(n_agents, dtype=np.int8)
    last = 0
    u = rng.random(n)
    coin = rng.integers(0, 2, n) * 2 - 1
    for k in range(n):
        a = agents[k]
        if remaining[a] == 0:
            if last != 0 and u[k] < herding:
                s = last
            else:
                s = coin[k]
            current[a] = s
            remaining[a] = math.ceil(rng.random() ** (-1.0 / alpha))
        signs[k] = current[a]
        remaining[a] -= 1
        last = signs[k]
    return signs


def simulate_splitting_agents(pop, horizon, seed=0):
    """Labeled market-order sign series from an order-splitting population.

    Child orders arrive as a Poisson stream at total rate n_agents * rate;
    each is attributed to a uniformly random agent, which emits the next
    child of its current metaorder (drawing a fresh size and sign when the
    previous one is finished).
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(pop.n_agents * pop.rate * horizon))
    if n == 0:
        raise ValueError("horizon too short: no orders generated")
    times = np.sort(rng.random(n)) * horizon
    agents = rng.integers(0, pop.n_agents, n)
    if pop.herding == 0.0:
        signs = _interleaved_signs(rng, agents, pop.n_agents, pop.alpha)
    else:
        signs = _herded_signs(rng, agents, pop.n_agents, pop.alpha, pop.herding)
    return SignSeries(
        signs=signs.astype(np.float64), labels=agents, times=times
    )
