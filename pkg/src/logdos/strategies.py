"""Per-AS logging and verification logic."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .bloom import RotatingFilterPair
from .messages import digest_of


class StrategyKind(str, Enum):
    NO_DEFENSE = "none"
    COMPREHENSIVE = "comprehensive"
    ODD = "odd"
    EVEN = "even"
    DYNAMIC = "dynamic"
    DPID = "dpid"

    @classmethod
    def parse(cls, value: "str | StrategyKind") -> "StrategyKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"nodefense": "none", "no_defense": "none", "d_pid": "dpid"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown strategy {value!r} (expected one of {names})") from None

    @property
    def uses_filters(self) -> bool:
        return self in (StrategyKind.COMPREHENSIVE, StrategyKind.ODD, StrategyKind.EVEN, StrategyKind.DYNAMIC)

    @property
    def time_dependent(self) -> bool:
        return self in (StrategyKind.DYNAMIC, StrategyKind.DPID)


class Verdict(str, Enum):
    ALLOW = "allow"  # checked and found in the filters
    PASS = "pass"  # forwarded without a check
    REJECT = "reject"

    @property
    def allowed(self) -> bool:
        return self is not Verdict.REJECT


@dataclass(frozen=True)
class DynamicParams:
    """Dynamic logging timings, all in ticks."""

    initial: int = 10_000
    silent: int = 10_000
    delta: int = 200
    threshold: int = 100

    def __post_init__(self):
        if self.initial <= 0:
            raise ValueError("initial logging duration must be > 0")
        if self.silent < 0 or self.delta < 0:
            raise ValueError("silent period and delta must be >= 0")
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")


@dataclass
class DynamicState:
    t0: int
    T: int
    c: int = 0
    extensions: int = 0
    rollovers: int = 0


@dataclass
class RouterState:
    kind: StrategyKind
    run_seed: int = 0
    pair: Optional[RotatingFilterPair] = None
    params: Optional[DynamicParams] = None
    dyn: Optional[DynamicState] = None
    # called after both filters are cleared at a dynamic rollover
    on_reset: Optional[Callable[["RouterState"], None]] = field(default=None, repr=False)
    logged: int = 0
    checked: int = 0
    rejected: int = 0

    def __post_init__(self):
        if self.kind.uses_filters and self.pair is None:
            raise ValueError(f"{self.kind.value} routers need a filter pair")
        if self.kind is StrategyKind.DYNAMIC:
            if self.params is None:
                self.params = DynamicParams()
            if self.dyn is None:
                self.dyn = DynamicState(t0=0, T=self.params.initial)

    @property
    def storage_bits(self) -> int:
        return self.pair.storage_bits if self.pair is not None else 0

    def logging_window(self) -> tuple[int, int]:
        return self.dyn.t0, self.dyn.t0 + self.dyn.T

    def validation_window(self) -> tuple[int, int]:
        d = self.params.delta
        return self.dyn.t0 + d, self.dyn.t0 + self.dyn.T + d


def should_log(kind: StrategyKind, arrival_prefix_len: int) -> bool:
    """Whether ``kind`` logs (and verifies) at a hop seeing this many PIDs."""
    if arrival_prefix_len < 0:
        raise ValueError("prefix length must be >= 0")
    if kind is StrategyKind.COMPREHENSIVE or kind is StrategyKind.DYNAMIC:
        return True
    if kind is StrategyKind.ODD:
        return arrival_prefix_len % 2 == 1
    if kind is StrategyKind.EVEN:
        return arrival_prefix_len % 2 == 0
    return False


def _in(tick: int, window: tuple[int, int]) -> bool:
    return window[0] <= tick < window[1]


def dynamic_advance(state: RouterState, tick: int) -> None:
    """Close every interval whose validation window ended at or before ``tick``."""
    p, d = state.params, state.dyn
    while tick >= d.t0 + d.T + p.delta:
        if d.c > p.threshold:
            d.T += p.initial
            d.extensions += 1
        else:
            d.t0 = d.t0 + d.T + p.silent
            d.T = p.initial
            d.rollovers += 1
            state.pair.reset()
            if state.on_reset is not None:
                state.on_reset(state)
        d.c = 0


def on_get(state: RouterState, sid: bytes, arrival_prefix, tick: int) -> bool:
    """Log the GET if this AS is due to; returns whether it was logged.

    GETs are always forwarded.
    """
    kind = state.kind
    if not should_log(kind, len(arrival_prefix)):
        return False
    if kind is StrategyKind.DYNAMIC:
        dynamic_advance(state, tick)
        if not _in(tick, state.logging_window()):
            return False
    state.pair.insert(digest_of(sid, arrival_prefix, state.run_seed))
    state.logged += 1
    return True


def on_data(
    state: RouterState,
    sid: bytes,
    stripped_prefix,
    tick: int,
    packet_epoch: int | None = None,
    current_epoch: int | None = None,
) -> Verdict:
    kind = state.kind
    if kind is StrategyKind.DPID:
        if packet_epoch is None or current_epoch is None:
            return Verdict.PASS
        return Verdict.ALLOW if packet_epoch == current_epoch else Verdict.REJECT
    if not should_log(kind, len(stripped_prefix)):
        return Verdict.PASS
    if kind is StrategyKind.DYNAMIC:
        dynamic_advance(state, tick)
        if not _in(tick, state.validation_window()):
            return Verdict.PASS
    state.checked += 1
    if state.pair.query(digest_of(sid, stripped_prefix, state.run_seed)):
        return Verdict.ALLOW
    state.rejected += 1
    if kind is StrategyKind.DYNAMIC:
        state.dyn.c += 1
    return Verdict.REJECT
