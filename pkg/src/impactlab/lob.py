"""Order-book engine on a fixed price grid.

Prices live on a grid of `n_levels` ticks; level ``l`` (1-based) has price
``base + (l-1)*tick``.  Queues are aggregate share counts per level; buy
queues sit strictly below sell queues.  Events are limit orders, market
orders and cancellations; limit orders that cross the opposite side execute
against it and any remainder rests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from . import _csvio
from .errors import AlignmentError, BookError, CancelError, GridError, UndefinedQuoteError


class Kind(Enum):
    LIMIT = "LO"
    MARKET = "MO"
    CANCEL = "CA"


class Side(Enum):
    BUY = "B"
    SELL = "S"

    @property
    def sign(self):
        return 1 if self is Side.BUY else -1

    @property
    def other(self):
        return Side.SELL if self is Side.BUY else Side.BUY


@dataclass(frozen=True)
class Event:
    time: float
    kind: Kind
    side: Side
    size: int
    level: Optional[int] = None
    trader: Optional[str] = None

    def __post_init__(self):
        if self.size < 1 or int(self.size) != self.size:
            raise ValueError(f"event size must be a positive integer, got {self.size}")
        if self.kind is Kind.MARKET:
            if self.level is not None:
                raise ValueError("market orders carry no level")
        elif self.level is None:
            raise ValueError(f"{self.kind.value} events need a level")
        elif self.level < 1:
            raise GridError(f"level must be >= 1, got {self.level}")


@dataclass(frozen=True)
class Trade:
    time: float
    price: float
    size: int
    aggressor: Side


class Level1(NamedTuple):
    bid: float
    ask: float
    bid_size: int
    ask_size: int


class Fill(NamedTuple):
    trades: list
    unfilled: int


@dataclass(frozen=True)
class EventStream:
    events: tuple

    def __post_init__(self):
        ts = [e.time for e in self.events]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("event times must be non-decreasing")

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    @property
    def times(self):
        return np.array([e.time for e in self.events])

    @classmethod
    def from_iter(cls, events):
        return cls(tuple(events))


@dataclass(frozen=True)
class BookState:
    """Immutable book snapshot: per-level queue sizes for each side."""

    tick: float
    base: float
    bids: tuple
    asks: tuple

    def __post_init__(self):
        if self.tick <= 0:
            raise ValueError("tick must be > 0")
        if len(self.bids) != len(self.asks):
            raise ValueError("bid and ask grids differ in length")
        if any(q < 0 for q in self.bids) or any(q < 0 for q in self.asks):
            raise BookError("queue sizes must be >= 0")
        bb, ba = self.best_bid_level, self.best_ask_level
        if bb is not None and ba is not None and bb >= ba:
            raise BookError(f"crossed book: best bid level {bb} >= best ask level {ba}")

    @classmethod
    def symmetric(cls, n_levels, tick, depth, base=100.0, filled=None):
        """Book with `filled` populated levels per side around the midpoint."""
        half = n_levels // 2
        filled = half if filled is None else filled
        bids = [0] * n_levels
        asks = [0] * n_levels
        for i in range(half - filled, half):
            bids[i] = depth
        for i in range(half, half + filled):
            asks[i] = depth
        return cls(tick, base, tuple(bids), tuple(asks))

    @property
    def n_levels(self):
        return len(self.bids)

    def price(self, level):
        return self.base + (level - 1) * self.tick

    @property
    def best_bid_level(self):
        for i in range(len(self.bids) - 1, -1, -1):
            if self.bids[i] > 0:
                return i + 1
        return None

    @property
    def best_ask_level(self):
        for i in range(len(self.asks)):
            if self.asks[i] > 0:
                return i + 1
        return None

    @property
    def best_bid(self):
        lvl = self.best_bid_level
        if lvl is None:
            raise UndefinedQuoteError("bid side is empty")
        return self.price(lvl)

    @property
    def best_ask(self):
        lvl = self.best_ask_level
        if lvl is None:
            raise UndefinedQuoteError("ask side is empty")
        return self.price(lvl)

    @property
    def midprice(self):
        return 0.5 * (self.best_bid + self.best_ask)

    @property
    def spread(self):
        return self.best_ask - self.best_bid

    def depth(self, side, level):
        arr = self.bids if side is Side.BUY else self.asks
        if not 1 <= level <= len(arr):
            raise GridError(f"level {level} outside grid 1..{len(arr)}")
        return arr[level - 1]

    def level1(self):
        bb, ba = self.best_bid_level, self.best_ask_level
        if bb is None or ba is None:
            raise UndefinedQuoteError("book is one-sided; level-1 data undefined")
        return Level1(self.price(bb), self.price(ba), self.bids[bb - 1], self.asks[ba - 1])


class OrderBook:
    """Mutable matching engine over a BookState.

    Keeps share-conservation counters per side: everything that was ever
    placed on the book (including the initial state) is either still resting,
    traded away, or cancelled.
    """

    def __init__(self, state):
        self.tick = state.tick
        self.base = state.base
        self.n_levels = state.n_levels
        self.bids = list(state.bids)
        self.asks = list(state.asks)
        self.placed = {Side.BUY: sum(self.bids), Side.SELL: sum(self.asks)}
        self.traded = {Side.BUY: 0, Side.SELL: 0}
        self.cancelled = {Side.BUY: 0, Side.SELL: 0}
        self.active_filled = {Side.BUY: 0, Side.SELL: 0}
        self.vanished = {Side.BUY: 0, Side.SELL: 0}

    def price(self, level):
        return self.base + (level - 1) * self.tick

    def _queues(self, side):
        return self.bids if side is Side.BUY else self.asks

    def best_level(self, side):
        if side is Side.BUY:
            for i in range(self.n_levels - 1, -1, -1):
                if self.bids[i] > 0:
                    return i + 1
        else:
            for i in range(self.n_levels):
                if self.asks[i] > 0:
                    return i + 1
        return None

    def level1(self):
        bb, ba = self.best_level(Side.BUY), self.best_level(Side.SELL)
        if bb is None or ba is None:
            raise UndefinedQuoteError("book is one-sided; level-1 data undefined")
        return Level1(self.price(bb), self.price(ba), self.bids[bb - 1], self.asks[ba - 1])

    def midprice(self):
        bb, ba = self.best_level(Side.BUY), self.best_level(Side.SELL)
        if bb is None or ba is None:
            raise UndefinedQuoteError("midprice undefined on a one-sided book")
        return 0.5 * (self.price(bb) + self.price(ba))

    def spread(self):
        bb, ba = self.best_level(Side.BUY), self.best_level(Side.SELL)
        if bb is None or ba is None:
            raise UndefinedQuoteError("spread undefined on a one-sided book")
        return (ba - bb) * self.tick

    def _consume(self, taker_side, time, remaining, limit_level, trades):
        """Execute `remaining` shares against the side opposite taker_side,
        stopping at limit_level (inclusive) when given."""
        maker = taker_side.other
        queues = self._queues(maker)
        while remaining > 0:
            best = self.best_level(maker)
            if best is None:
                break
            if limit_level is not None:
                if taker_side is Side.BUY and best > limit_level:
                    break
                if taker_side is Side.SELL and best < limit_level:
                    break
            qty = min(remaining, queues[best - 1])
            queues[best - 1] -= qty
            remaining -= qty
            self.traded[maker] += qty
            self.active_filled[taker_side] += qty
            trades.append(Trade(time, self.price(best), qty, taker_side))
        return remaining

    def apply(self, event):
        """Apply one event; returns Fill(trades, unfilled).

        unfilled is nonzero only for market orders that exhaust the opposite
        side of the book.
        """
        trades = []
        if event.kind is Kind.CANCEL:
            queues = self._queues(event.side)
            if not 1 <= event.level <= self.n_levels:
                raise GridError(f"level {event.level} outside grid 1..{self.n_levels}")
            if queues[event.level - 1] < event.size:
                raise CancelError(
                    f"cancel of {event.size} exceeds queue {queues[event.level - 1]} "
                    f"at level {event.level}"
                )
            queues[event.level - 1] -= event.size
            self.cancelled[event.side] += event.size
            return Fill(trades, 0)

        if event.kind is Kind.MARKET:
            remaining = self._consume(event.side, event.time, event.size, None, trades)
            if remaining:
                self.vanished[event.side] += remaining
            return Fill(trades, remaining)

        # limit order: execute the crossing part, rest the remainder
        if not 1 <= event.level <= self.n_levels:
            raise GridError(f"level {event.level} outside grid 1..{self.n_levels}")
        remaining = self._consume(event.side, event.time, event.size, event.level, trades)
        if remaining:
            self._queues(event.side)[event.level - 1] += remaining
            self.placed[event.side] += remaining
        return Fill(trades, 0)

    def state(self):
        return BookState(self.tick, self.base, tuple(self.bids), tuple(self.asks))

    def resting(self, side):
        return sum(self._queues(side))

    def conservation_ok(self):
        """placed == resting + traded + cancelled, per side."""
        return all(
            self.placed[s] == self.resting(s) + self.traded[s] + self.cancelled[s]
            for s in (Side.BUY, Side.SELL)
        )


def apply_event(state, event):
    """Pure-function wrapper: (BookState, Event) -> (BookState, Fill)."""
    engine = OrderBook(state)
    fill = engine.apply(event)
    return engine.state(), fill


def midprice(state):
    return state.midprice


def spread(state):
    return state.spread


@dataclass
class ReplayResult:
    state: BookState
    trades: list
    mids: np.ndarray
    snapshots: list


def replay(state, events, snapshots=False):
    """Run events through the engine; mid-prices are recorded after each
    event (NaN where the book is one-sided)."""
    engine = OrderBook(state)
    trades = []
    mids = np.empty(len(events))
    snaps = [state] if snapshots else []
    for i, e in enumerate(events):
        fill = engine.apply(e)
        trades.extend(fill.trades)
        try:
            mids[i] = engine.midprice()
        except UndefinedQuoteError:
            mids[i] = np.nan
        if snapshots:
            snaps.append(engine.state())
    return ReplayResult(engine.state(), trades, mids, snaps)


def ofi(snapshots, events=None):
    """Order-flow imbalance summed over consecutive level-1 updates.

    Each update contributes
        +q_bid    if the bid price did not fall
        -q_bid'   if the bid price did not rise
        -q_ask    if the ask price did not rise
        +q_ask'   if the ask price did not fall
    (primed = previous snapshot).  Snapshots must bracket every event.
    """
    l1s = [s.level1() if isinstance(s, BookState) else s for s in snapshots]
    if len(l1s) < 2:
        raise AlignmentError("need at least two snapshots")
    if events is not None and len(l1s) != len(events) + 1:
        raise AlignmentError(f"{len(events)} events need {len(events) + 1} snapshots, got {len(l1s)}")
    total = 0.0
    for prev, cur in zip(l1s, l1s[1:]):
        if cur.bid >= prev.bid:
            total += cur.bid_size
        if cur.bid <= prev.bid:
            total -= prev.bid_size
        if cur.ask <= prev.ask:
            total -= cur.ask_size
        if cur.ask >= prev.ask:
            total += prev.ask_size
    return total


_KINDS = {k.value: k for k in Kind}
_SIDES = {s.value: s for s in Side}


def write_events_csv(path, events):
    with _csvio.atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["t", "kind", "side", "level", "size", "trader"])
        for e in events:
            w.writerow([
                repr(float(e.time)),
                e.kind.value,
                e.side.value,
                "" if e.level is None else e.level,
                e.size,
                "" if e.trader is None else e.trader,
            ])


def read_events_csv(path):
    events = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["t", "kind", "side", "level", "size", "trader"]:
            raise ValueError(f"unexpected event log header: {header}")
        for row in r:
            t, kind, side, level, size, trader = row
            events.append(Event(
                time=float(t),
                kind=_KINDS[kind],
                side=_SIDES[side],
                size=int(size),
                level=None if level == "" else int(level),
                trader=None if trader == "" else trader,
            ))
    return EventStream.from_iter(events)


def write_trades_csv(path, trades):
    with _csvio.atomic_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(["t", "price", "size", "aggressor"])
        for tr in trades:
            w.writerow([repr(float(tr.time)), repr(float(tr.price)), tr.size, tr.aggressor.value])


def read_trades_csv(path):
    trades = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["t", "price", "size", "aggressor"]:
            raise ValueError(f"unexpected trade log header: {header}")
        for row in r:
            t, price, size, agg = row
            trades.append(Trade(float(t), float(price), int(size), _SIDES[agg]))
    return trades
