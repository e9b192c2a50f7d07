"""AS-level graph, directed-edge path identifiers and BFS routing."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

TRANSIENT = "transient"
CORE = "core"


class TopologyError(ValueError):
    pass


class Unreachable(TopologyError):
    pass


@dataclass
class Topology:
    """Undirected simple graph over integer AS ids.

    ``adjacency`` maps each AS to its sorted neighbour list. ``classes``
    optionally labels ASes as transient or core.
    """

    adjacency: dict[int, list[int]]
    classes: dict[int, str] = field(default_factory=dict)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], nodes: Iterable[int] = ()) -> "Topology":
        adj: dict[int, set[int]] = {int(n): set() for n in nodes}
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise TopologyError(f"self-loop on AS {a}")
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        return cls({n: sorted(nb) for n, nb in sorted(adj.items())})

    @property
    def nodes(self) -> list[int]:
        return list(self.adjacency)

    def __len__(self) -> int:
        return len(self.adjacency)

    def __contains__(self, asid: int) -> bool:
        return asid in self.adjacency

    @property
    def num_edges(self) -> int:
        return sum(len(nb) for nb in self.adjacency.values()) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a, nb in self.adjacency.items() for b in nb if a < b]

    def directed_edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a, nb in self.adjacency.items() for b in nb]

    def has_edge(self, a: int, b: int) -> bool:
        nb = self.adjacency.get(a)
        return nb is not None and b in nb

    def transient_nodes(self) -> list[int]:
        return [n for n in self.adjacency if self.classes.get(n) == TRANSIENT]


def load_edge_list(source: TextIO) -> Topology:
    """Parse ``asid asid`` lines. ``#`` starts a comment; blank lines are skipped."""
    edges = []
    for lineno, line in enumerate(source, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TopologyError(f"line {lineno}: expected two AS ids, got {line!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise TopologyError(f"line {lineno}: non-integer AS id in {line!r}") from None
        if a < 0 or b < 0:
            raise TopologyError(f"line {lineno}: negative AS id in {line!r}")
        if a == b:
            raise TopologyError(f"line {lineno}: self-loop on AS {a}")
        edges.append((a, b))
    return Topology.from_edges(edges)


def load_metadata(topology: Topology, source: TextIO) -> None:
    """Attach ``asid class`` labels (class is ``transient`` or ``core``)."""
    for lineno, line in enumerate(source, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in (TRANSIENT, CORE):
            raise TopologyError(f"line {lineno}: expected 'asid transient|core', got {line!r}")
        try:
            asid = int(parts[0])
        except ValueError:
            raise TopologyError(f"line {lineno}: non-integer AS id in {line!r}") from None
        topology.classes[asid] = parts[1]


def generate_synthetic(n_nodes: int, attachment: int, seed: int) -> Topology:
    """Preferential-attachment graph.

    Starts from a clique on ``attachment + 1`` nodes; each later node links
    to ``attachment`` distinct existing nodes drawn with probability
    proportional to degree.
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be >= 2")
    if attachment < 1:
        raise ValueError("attachment must be >= 1")
    rng = np.random.default_rng(seed)
    core = min(attachment + 1, n_nodes)
    edges = [(a, b) for a in range(core) for b in range(a + 1, core)]
    # each node appears once per incident edge endpoint
    pool = [v for e in edges for v in e]
    for new in range(core, n_nodes):
        targets: set[int] = set()
        while len(targets) < attachment:
            targets.add(pool[int(rng.integers(len(pool)))])
        for t in sorted(targets):
            edges.append((t, new))
            pool.extend((t, new))
    return Topology.from_edges(edges, nodes=range(n_nodes))


def bfs_parents(t: Topology, src: int) -> dict[int, int]:
    """BFS tree from ``src``; neighbours are expanded in ascending id order."""
    if src not in t:
        raise TopologyError(f"unknown AS {src}")
    parent = {src: src}
    queue = deque([src])
    adj = t.adjacency
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    return parent


def path_from_parents(parent: dict[int, int], src: int, dst: int) -> list[int]:
    if dst not in parent:
        raise Unreachable(f"AS {dst} unreachable from AS {src}")
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    path.reverse()
    return path


def shortest_path(t: Topology, src: int, dst: int) -> list[int]:
    if dst not in t:
        raise TopologyError(f"unknown AS {dst}")
    return path_from_parents(bfs_parents(t, src), src, dst)


def bfs_distances(t: Topology, src: int) -> dict[int, int]:
    dist = {src: 0}
    queue = deque([src])
    adj = t.adjacency
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in adj[u]:
            if v not in dist:
                dist[v] = du
                queue.append(v)
    return dist


def topology_stats(t: Topology, sample_pairs: int = 1000, seed: int = 0, exact_limit: int = 2000) -> dict:
    """Node/edge counts and hop-count statistics over (sampled) AS pairs.

    Exact over all unordered pairs when the graph has at most
    ``exact_limit`` nodes. ``stderr_path_len`` is the standard error of the
    mean, reported alongside the per-pair standard deviation because small
    published deviations usually refer to the former.
    """
    nodes = t.nodes
    lengths: list[int] = []
    if len(nodes) <= exact_limit:
        mode = "exact"
        for i, a in enumerate(nodes):
            dist = bfs_distances(t, a)
            lengths.extend(dist[b] for b in nodes[i + 1 :] if b in dist)
    else:
        mode = "sampled"
        rng = np.random.default_rng(seed)
        idx = np.asarray(nodes)
        by_src: dict[int, list[int]] = {}
        for _ in range(sample_pairs):
            a, b = rng.choice(idx, size=2, replace=False)
            by_src.setdefault(int(a), []).append(int(b))
        for a, targets in sorted(by_src.items()):
            dist = bfs_distances(t, a)
            lengths.extend(dist[b] for b in targets if b in dist)
    arr = np.asarray(lengths, dtype=float)
    mean = float(arr.mean()) if arr.size else math.nan
    std = float(arr.std()) if arr.size else math.nan
    return {
        "nodes": len(nodes),
        "edges": t.num_edges,
        "mode": mode,
        "pairs": int(arr.size),
        "mean_path_len": mean,
        "stddev_path_len": std,
        "stderr_path_len": std / math.sqrt(arr.size) if arr.size else math.nan,
    }


@dataclass(frozen=True)
class PidMap:
    """One 64-bit path identifier per directed edge, versioned by epoch."""

    pids: dict[tuple[int, int], int]
    epoch: int = 0

    def __getitem__(self, edge: tuple[int, int]) -> int:
        return self.pids[edge]

    def __len__(self) -> int:
        return len(self.pids)

    def path_pids(self, path: list[int]) -> list[int]:
        """PIDs of the directed links along ``path`` (one fewer than nodes)."""
        return [self.pids[(a, b)] for a, b in zip(path, path[1:])]


def _draw_unique(rng: np.random.Generator, n: int) -> list[int]:
    values = rng.integers(0, 2**64, size=n, dtype=np.uint64)
    # redraw collisions until every PID is distinct
    while True:
        uniq, first = np.unique(values, return_index=True)
        if len(uniq) == n:
            return [int(v) for v in values]
        dup = np.ones(n, dtype=bool)
        dup[first] = False
        values[dup] = rng.integers(0, 2**64, size=int(dup.sum()), dtype=np.uint64)


def assign_pids(t: Topology, seed: int, epoch: int = 0) -> PidMap:
    edges = t.directed_edges()
    rng = np.random.default_rng([seed & ((1 << 64) - 1), epoch])
    return PidMap(dict(zip(edges, _draw_unique(rng, len(edges)))), epoch)


def reassign_pids(pm: PidMap, seed: int) -> PidMap:
    edges = list(pm.pids)
    epoch = pm.epoch + 1
    rng = np.random.default_rng([seed & ((1 << 64) - 1), epoch])
    return PidMap(dict(zip(edges, _draw_unique(rng, len(edges)))), epoch)
