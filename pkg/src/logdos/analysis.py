"""Closed-form pass probabilities, storage tables and the D-PID rate model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bloom import size_for
from .strategies import StrategyKind
from .topology import Topology, bfs_parents, path_from_parents


@dataclass(frozen=True)
class PassModel:
    strategy: StrategyKind
    p: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")


def checks_on_path(strategy: StrategyKind, n: int) -> int:
    """Number of verifying ASes on an ``n``-AS path."""
    if strategy is StrategyKind.COMPREHENSIVE:
        return n
    if strategy is StrategyKind.ODD:
        return n // 2
    if strategy is StrategyKind.EVEN:
        return (n + 1) // 2
    if strategy is StrategyKind.NO_DEFENSE:
        return 0
    raise ValueError(f"no closed form for strategy {strategy.value}")


def pr_attack(model: PassModel) -> float:
    """Probability that one attack packet survives every check on its path."""
    return model.p ** checks_on_path(model.strategy, model.n)


def expected_reach_from_lengths(lengths: Iterable[int], strategy: StrategyKind, p: float) -> float:
    probs = [pr_attack(PassModel(strategy, p, n)) for n in lengths]
    if not probs:
        raise ValueError("no paths")
    return float(np.mean(probs))


def attack_paths(topology: Topology, attackers: Sequence[int], victim: int) -> list[list[int]]:
    """Attacker-to-victim paths (reverse of the victim's BFS route to each attacker)."""
    parent = bfs_parents(topology, victim)
    return [path_from_parents(parent, victim, a)[::-1] for a in attackers]


def expected_reach_fraction(
    topology: Topology, attackers: Sequence[int], victim: int, strategy: StrategyKind, p: float
) -> float:
    """Mean over attackers of the survival probability on each attacker's path."""
    lengths = [len(path) for path in attack_paths(topology, attackers, victim)]
    return expected_reach_from_lengths(lengths, strategy, p)


def reach_variance(probs: Sequence[float], packets_per_attacker: int) -> float:
    """Variance of the measured reach fraction when each attacker sends the same count."""
    probs = np.asarray(probs, dtype=float)
    total = packets_per_attacker * len(probs)
    return float(np.sum(packets_per_attacker * probs * (1 - probs)) / total**2)


DEFAULT_STORAGE_N = (500_000, 1_000_000, 1_500_000, 2_000_000)
DEFAULT_STORAGE_P = (1e-5, 1e-4, 1e-3, 1e-2, 5e-2, 1e-1)


def storage_curve(
    n_values: Sequence[int] = DEFAULT_STORAGE_N,
    p_values: Sequence[float] = DEFAULT_STORAGE_P,
    k: int = 3,
) -> list[dict]:
    rows = []
    for n in n_values:
        for p in p_values:
            m = size_for(int(n), float(p), k)
            rows.append(
                {
                    "n": int(n),
                    "p": float(p),
                    "k": k,
                    "m_bits": m,
                    "megabits": m / 1e6,
                    "megabytes": m / 8e6,
                }
            )
    return rows


def dpid_learned_fraction(lambda_per_min: float, update_period_s: float) -> float:
    """Expected share of an update period during which a learned path is valid.

    With learnings arriving as a Poisson process, the path becomes usable at
    the first arrival after each PID change and stays usable until the next
    change: ``1 - (1 - exp(-x)) / x`` for ``x`` expected arrivals per period.
    """
    if lambda_per_min < 0:
        raise ValueError("lambda must be >= 0")
    if update_period_s <= 0:
        raise ValueError("update period must be > 0")
    x = lambda_per_min * update_period_s / 60.0
    if x == 0:
        return 0.0
    if x < 1e-8:
        return x / 2
    return 1.0 - (-math.expm1(-x)) / x


def dpid_closed_form(lambda_per_min: float, update_period_s: float, total_attack_mbps: float) -> float:
    return total_attack_mbps * dpid_learned_fraction(lambda_per_min, update_period_s)
