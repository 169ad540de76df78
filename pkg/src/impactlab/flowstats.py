"""Estimators for order-flow stylized facts.

Sign autocorrelation and its power-law tail fit, the same-trader /
cross-trader decomposition of that autocorrelation, event-type transition
(diagonal-effect) statistics, and signed-flow response functions including
negative lags and the cross-asset matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AlignmentError
from .lob import EventStream


@dataclass(frozen=True)
class SignSeries:
    """Market-order signs in event time with optional marks.

    signs are +-1; volumes (shares) and trader labels, when present, cover
    every entry.  times are informational only; estimators work in event
    time (one unit per order).
    """

    signs: np.ndarray
    volumes: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=np.float64)
        object.__setattr__(self, "signs", signs)
        if signs.ndim != 1 or len(signs) == 0:
            raise ValueError("signs must be a non-empty 1-d array")
        if not np.all(np.abs(signs) == 1.0):
            raise ValueError("signs must be +1 or -1")
        for name in ("volumes", "labels", "times"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr)
            object.__setattr__(self, name, arr)
            if arr.shape != signs.shape:
                raise ValueError(f"{name} must match signs in length")
        if self.volumes is not None and (self.volumes <= 0).any():
            raise ValueError("volumes must be > 0")

    @property
    def n(self):
        return len(self.signs)

    def signed_volumes(self):
        if self.volumes is None:
            return self.signs.copy()
        return self.signs * self.volumes


@dataclass(frozen=True)
class ResponseCurve:
    """Sampled curve over (possibly negative) integer lags."""

    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        for name in ("lags", "values", "stderr", "counts"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))

    def __len__(self):
        return len(self.lags)

    def value_at(self, lag):
        idx = np.nonzero(self.lags == lag)[0]
        if len(idx) == 0:
            raise KeyError(f"lag {lag} not in curve")
        return float(self.values[idx[0]])


@dataclass(frozen=True)
class Autocorr:
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    degenerate: bool = False

    def value_at(self, lag):
        idx = np.nonzero(self.lags == lag)[0]
        if len(idx) == 0:
            raise KeyError(f"lag {lag} not in curve")
        return float(self.values[idx[0]])


def sign_autocorr(s, max_lag):
    """Sample autocorrelation C(tau) of the sign series for tau = 1..max_lag.

    C(tau) = [mean(e_t e_{t+tau}) - m^2] / (1 - m^2) with m the sample mean.
    A constant series has zero variance; by convention it reports C = 1
    everywhere with the degenerate flag set.
    """
    e = s.signs
    n = len(e)
    if n <= max_lag:
        raise ValueError(f"series length {n} must exceed max_lag {max_lag}")
    lags = np.arange(1, max_lag + 1)
    m = e.mean()
    var = 1.0 - m * m
    counts = n - lags
    if var <= 0.0:
        return Autocorr(lags, np.ones(max_lag), np.zeros(max_lag), counts, True)
    values = np.empty(max_lag)
    stderr = np.empty(max_lag)
    for i, tau in enumerate(lags):
        raw = np.dot(e[:-tau], e[tau:]) / counts[i]
        # products of +-1 signs: second moment is exactly 1
        values[i] = (raw - m * m) / var
        stderr[i] = np.sqrt(max(1.0 - raw * raw, 0.0) / counts[i]) / var
    return Autocorr(lags, values, stderr, counts, False)


@dataclass(frozen=True)
class PowerlawFit:
    gamma: float
    hurst: float
    amplitude: float
    r2: float
    lags_used: np.ndarray
    truncated: bool


def fit_powerlaw_tail(curve, lag_range):
    """Log-log least-squares fit C(tau) ~ amplitude * tau^(-gamma) over the
    given inclusive lag range; non-positive values are dropped with a
    warning.  Also reports the implied Hurst exponent 1 - gamma/2."""
    lo, hi = lag_range
    sel = (curve.lags >= lo) & (curve.lags <= hi)
    lags = np.asarray(curve.lags[sel], dtype=np.float64)
    vals = np.asarray(curve.values[sel], dtype=np.float64)
    pos = vals > 0
    truncated = False
    if not pos.all():
        truncated = True
        warnings.warn(
            f"dropping {int((~pos).sum())} non-positive autocorrelation values "
            "from the fit range",
            stacklevel=2,
        )
        lags, vals = lags[pos], vals[pos]
    if len(lags) < 2:
        raise ValueError("fewer than two usable points in the fit range")
    x, y = np.log(lags), np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    tss = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / tss if tss > 0 else 1.0
    gamma = -slope
    return PowerlawFit(
        gamma=float(gamma),
        hurst=float(1.0 - gamma / 2.0),
        amplitude=float(np.exp(intercept)),
        r2=float(r2),
        lags_used=lags.astype(np.int64),
        truncated=truncated,
    )


@dataclass(frozen=True)
class SplitHerdDecomposition:
    lags: np.ndarray
    split: np.ndarray
    herd: np.ndarray

    @property
    def total(self):
        return self.split + self.herd


def split_herd_decompose(s, max_lag):
    """Partition C(tau) into same-trader (split) and cross-trader (herd)
    contributions.

    The lag-tau product sum is split by whether the pair shares a trader
    label, and the squared-mean correction is allocated in proportion to the
    pair counts, so split + herd reproduces C(tau) identically.
    """
    if s.labels is None:
        raise ValueError("split/herd decomposition needs trader labels")
    e = s.signs
    n = len(e)
    if n <= max_lag:
        raise ValueError(f"series length {n} must exceed max_lag {max_lag}")
    m = e.mean()
    var = 1.0 - m * m
    if var <= 0.0:
        raise ValueError("constant sign series: decomposition undefined")
    lags = np.arange(1, max_lag + 1)
    split = np.empty(max_lag)
    herd = np.empty(max_lag)
    labels = s.labels
    for i, tau in enumerate(lags):
        prod = e[:-tau] * e[tau:]
        same = labels[:-tau] == labels[tau:]
        n_tau = n - tau
        s_same = prod[same].sum()
        s_diff = prod.sum() - s_same
        w_same = same.sum() / n_tau
        split[i] = (s_same / n_tau - w_same * m * m) / var
        herd[i] = (s_diff / n_tau - (1.0 - w_same) * m * m) / var
    return SplitHerdDecomposition(lags, split, herd)


@dataclass(frozen=True)
class DiagonalEffect:
    labels: tuple
    transition: np.ndarray
    frequencies: np.ndarray

    def excess(self):
        """Diagonal of the transition matrix minus the unconditional
        frequencies; positive entries are the diagonal effect."""
        return np.diag(self.transition) - self.frequencies


def _event_type_labels(stream, size_bins):
    out = []
    for e in stream:
        tag = f"{e.kind.value}-{e.side.value}"
        if size_bins is not None:
            tag += f"-v{int(np.digitize(e.size, size_bins))}"
        out.append(tag)
    return out


def diagonal_effect(stream, size_bins=None):
    """Event-type transition matrix versus unconditional frequencies.

    stream may be an EventStream (types are kind x side, optionally refined
    by size bins) or any sequence of hashable type labels.  The transition
    matrix is row-stochastic: row k holds P(next type | current type k).
    """
    if isinstance(stream, EventStream) or (
        len(stream) > 0 and hasattr(stream[0], "kind")
    ):
        raw = _event_type_labels(stream, size_bins)
    else:
        raw = list(stream)
    if len(raw) < 2:
        raise ValueError("need at least two events")
    labels = tuple(sorted(set(raw)))
    index = {lab: k for k, lab in enumerate(labels)}
    seq = np.array([index[r] for r in raw])
    t = len(labels)
    counts = np.zeros((t, t))
    np.add.at(counts, (seq[:-1], seq[1:]), 1.0)
    rows = counts.sum(axis=1, keepdims=True)
    transition = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    freqs = np.bincount(seq, minlength=t) / len(seq)
    return DiagonalEffect(labels, transition, freqs)


def response_function(s, prices, lags, f=None):
    """Signed-flow response R(tau) = mean over t of f(w_t) (p_{t+tau} - p_t).

    prices has length n + 1 with prices[t] the reference price immediately
    before event t (prices[n] the final price).  For tau < 0 the convention
    is R(tau) = mean f(w_t) (p_t - p_{t-|tau|}): the current order against
    the preceding price move.  f defaults to the sign function.
    """
    w = s.signed_volumes()
    n = len(w)
    prices = np.asarray(prices, dtype=np.float64)
    if len(prices) != n + 1:
        raise AlignmentError(
            f"need {n + 1} prices to bracket {n} events, got {len(prices)}"
        )
    fw = np.sign(w) if f is None else np.asarray(f(w), dtype=np.float64)
    lags = np.asarray(lags, dtype=np.int64)
    if np.abs(lags).max(initial=0) >= n + 1:
        raise ValueError("lag magnitude exceeds the price record")
    values = np.empty(len(lags))
    stderr = np.empty(len(lags))
    counts = np.empty(len(lags), dtype=np.int64)
    for i, tau in enumerate(lags):
        if tau > 0:
            terms = fw[: n - tau + 1] * (prices[tau : n + 1] - prices[: n - tau + 1])
        elif tau < 0:
            k = -tau
            terms = fw[k:] * (prices[k:n] - prices[: n - k])
        else:
            terms = np.zeros(n)
        counts[i] = len(terms)
        if counts[i] == 0:
            raise ValueError(f"no samples available at lag {tau}")
        values[i] = terms.mean()
        stderr[i] = terms.std(ddof=1) / np.sqrt(counts[i]) if counts[i] > 1 else 0.0
    return ResponseCurve(lags, values, stderr, counts)


def cross_response(series, prices, lags, f=None):
    """Matrix of response curves: entry (i, j) measures asset-i signed flow
    against asset-j price moves.  All series and price records must share
    one event clock."""
    m = len(series)
    if len(prices) != m:
        raise AlignmentError("need one price record per sign series")
    n = series[0].n
    for s in series:
        if s.n != n:
            raise AlignmentError("sign series must share one event clock")
    for p in prices:
        if len(p) != n + 1:
            raise AlignmentError("each price record needs n + 1 entries")
    return [
        [response_function(series[i], prices[j], lags, f=f) for j in range(m)]
        for i in range(m)
    ]
