"""Tick-based simulation of data-flooding attacks against logging routers.

A run picks a victim and attacker ASes, gives every AS a router state with
prefilled filters, then replays attack DATA packets (and optionally live
legitimate GET/DATA round trips) hop by hop.

Two execution paths exist. Strategies whose verdicts do not depend on
time or on the order packets arrive (no defense, comprehensive, odd,
even, D-PID) with no live traffic are evaluated hop-by-hop over whole
packet batches. Everything else goes through a single event loop that
visits every hop in global tick order.
"""

from __future__ import annotations

import functools
import hashlib
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import checks_on_path, dpid_closed_form, expected_reach_from_lengths
from .bloom import RotatingFilterPair, digest_words, random_words, size_for, splitmix64
from .config import ScenarioConfig, TopologySource
from .messages import DataMessage, MalformedPacket, SID_BYTES, Truth, return_strip, seed_key, serialize
from .strategies import RouterState, StrategyKind, Verdict, on_data, on_get, should_log
from .topology import (
    PidMap,
    Topology,
    TopologyError,
    assign_pids,
    bfs_parents,
    generate_synthetic,
    load_edge_list,
    load_metadata,
    path_from_parents,
)

_MASK64 = (1 << 64) - 1
_MAX_REDRAWS = 20

# event kinds, ordered so that a GET is logged before a DATA at the same tick
GET, LEGIT_DATA, ATTACK_DATA = 0, 1, 2


class SetupError(RuntimeError):
    pass


@functools.lru_cache(maxsize=8)
def load_topology(src: TopologySource) -> Topology:
    if src.file:
        with open(src.file, encoding="ascii") as fh:
            topo = load_edge_list(fh)
    else:
        topo = generate_synthetic(src.nodes, src.attachment, src.seed)
    if src.metadata:
        with open(src.metadata, encoding="ascii") as fh:
            load_metadata(topo, fh)
    return topo


def run_seed_for(master_seed: int, run_index: int) -> int:
    return (master_seed ^ run_index) & _MASK64


def _stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed & _MASK64, *keys])


@dataclass
class LegitFlow:
    consumer: int
    provider: int
    issue_tick: int
    sid: bytes


@dataclass
class AttackBatch:
    """Attack packets of one attacker AS, all following ``path`` to the victim."""

    attacker: int
    path: list[int]  # attacker first, victim last
    pids: tuple[int, ...]  # full list as a response from the attacker would carry
    sids: list[bytes]
    ticks: np.ndarray
    epochs: np.ndarray  # PID epoch each packet was built under (D-PID only)


@dataclass
class AttackOutcome:
    sent: int = 0
    reached: int = 0
    rejected: int = 0
    malformed: int = 0
    per_attacker_reached: dict[int, int] = field(default_factory=dict)


@dataclass
class LegitOutcome:
    sent: int = 0
    dropped: int = 0
    dropped_flows: list[int] = field(default_factory=list)


@dataclass
class RunContext:
    cfg: ScenarioConfig
    run_index: int
    seed: int
    topology: Topology
    pidmap: PidMap
    victim: int
    attackers: list[int]
    paths: dict[int, list[int]]
    routers: dict[int, RouterState] = field(default_factory=dict)
    legit_flows: Optional[list[LegitFlow]] = None
    _parents: dict[int, dict[int, int]] = field(default_factory=dict, repr=False)
    _refill_rngs: dict[int, np.random.Generator] = field(default_factory=dict, repr=False)
    _result: Optional[tuple[AttackOutcome, LegitOutcome]] = field(default=None, repr=False)

    @property
    def kind(self) -> StrategyKind:
        return self.cfg.strategy

    @property
    def filter_m(self) -> int:
        return size_for(self.cfg.filter_capacity, self.cfg.target_fp, self.cfg.hash_count)

    @property
    def prefill_count(self) -> int:
        return round(self.cfg.background.prefill_fraction * self.cfg.filter_capacity)

    def router(self, asid: int) -> RouterState:
        """Router state for ``asid``, created on first use.

        Filter seeds, prefill contents and dynamic phase all come from a
        per-AS stream, so creation order does not affect the run.
        """
        state = self.routers.get(asid)
        if state is None:
            state = self._make_router(asid)
            self.routers[asid] = state
        return state

    def _make_router(self, asid: int) -> RouterState:
        cfg = self.cfg
        kind = cfg.strategy
        if not kind.uses_filters:
            return RouterState(kind=kind, run_seed=self.seed)
        rng = _stream(self.seed, 1, asid)
        pair = RotatingFilterPair(
            self.filter_m, cfg.hash_count, cfg.filter_capacity, seed=int(rng.integers(0, 2**63))
        )
        pair.insert_many(random_words(rng, self.prefill_count))
        state = RouterState(kind=kind, run_seed=self.seed, pair=pair)
        if kind is StrategyKind.DYNAMIC:
            params = cfg.dynamic_params
            state.params = params
            state.dyn.T = params.initial
            state.dyn.t0 = int(rng.integers(0, params.initial + params.silent))
            if cfg.background.refill_on_reset and self.prefill_count:
                self._refill_rngs[asid] = rng
                state.on_reset = functools.partial(_refill, self, asid)
        return state

    def parents_from(self, root: int) -> dict[int, int]:
        tree = self._parents.get(root)
        if tree is None:
            tree = self._parents[root] = bfs_parents(self.topology, root)
        return tree

    def route(self, src: int, dst: int) -> list[int]:
        return path_from_parents(self.parents_from(src), src, dst)

    def storage_bits_per_as(self) -> int:
        return 2 * self.filter_m if self.kind.uses_filters else 0

    def expected_reach(self, p: float | None = None) -> float:
        """Closed-form reach fraction for this run's paths (static strategies)."""
        if p is None:
            p = self.cfg.target_fp
        lengths = [len(self.paths[a]) for a in self.attackers]
        return expected_reach_from_lengths(lengths, self.kind, p)


def _refill(ctx: RunContext, asid: int, state: RouterState) -> None:
    state.pair.insert_many(random_words(ctx._refill_rngs[asid], ctx.prefill_count))


def setup_run(cfg: ScenarioConfig, run_index: int = 0, topology: Topology | None = None) -> RunContext:
    topo = topology if topology is not None else load_topology(cfg.topology)
    seed = run_seed_for(cfg.master_seed, run_index)
    rng = _stream(seed, 0)
    eligible = topo.nodes
    if cfg.topology.transient_only and topo.classes:
        eligible = topo.transient_nodes()
    eligible = np.asarray(sorted(eligible))
    if len(eligible) < cfg.num_attack_ases + 1:
        raise SetupError(
            f"need {cfg.num_attack_ases + 1} eligible ASes, topology offers {len(eligible)}"
        )
    for _ in range(_MAX_REDRAWS):
        victim = int(rng.choice(eligible))
        parent = bfs_parents(topo, victim)
        pool = np.asarray([a for a in eligible if a != victim and a in parent])
        if len(pool) >= cfg.num_attack_ases:
            break
    else:
        raise SetupError("could not find a victim reaching enough attacker ASes")
    attackers = [int(a) for a in rng.choice(pool, size=cfg.num_attack_ases, replace=False)]
    paths = {a: path_from_parents(parent, victim, a)[::-1] for a in attackers}
    ctx = RunContext(
        cfg=cfg,
        run_index=run_index,
        seed=seed,
        topology=topo,
        pidmap=assign_pids(topo, splitmix64(seed)),
        victim=victim,
        attackers=attackers,
        paths=paths,
    )
    ctx._parents[victim] = parent
    return ctx


def _random_sids(rng: np.random.Generator, n: int) -> list[bytes]:
    raw = rng.bytes(SID_BYTES * n)
    return [raw[i : i + SID_BYTES] for i in range(0, len(raw), SID_BYTES)]


def attack_batches(ctx: RunContext) -> list[AttackBatch]:
    """Crafted attack DATA per attacker: learned PID list, SID per config, random send ticks."""
    cfg = ctx.cfg
    n = cfg.packets_per_attacker
    catalog = None
    if cfg.sid_mode == "copied":
        catalog = _random_sids(_stream(ctx.seed, 2), 1024)
    update_ticks = _dpid_update_ticks(cfg)
    batches = []
    for a in ctx.attackers:
        rng = _stream(ctx.seed, 3, a)
        path = ctx.paths[a]
        get_path = path[::-1]
        pids = tuple(ctx.pidmap.path_pids(get_path))
        if catalog is None:
            sids = _random_sids(rng, n)
        else:
            sids = [catalog[i] for i in rng.integers(0, len(catalog), size=n)]
        ticks = rng.integers(0, cfg.horizon_ticks, size=n)
        epochs = np.zeros(n, dtype=np.int64)
        if cfg.strategy is StrategyKind.DPID:
            epochs = _learned_epochs(rng, ticks, cfg.dpid.lambda_per_min, cfg.tick_ms, update_ticks)
        batches.append(AttackBatch(a, path, pids, sids, ticks, epochs))
    return batches


def _dpid_update_ticks(cfg: ScenarioConfig) -> int:
    return max(1, round(cfg.dpid.update_period_s * 1000 / cfg.tick_ms))


def _learned_epochs(rng, ticks, lambda_per_min, tick_ms, update_ticks) -> np.ndarray:
    """Epoch of the newest learned path at each send tick; -1 before the first learning."""
    horizon = int(ticks.max()) + 1 if len(ticks) else 0
    rate_per_tick = lambda_per_min / 60_000.0 * tick_ms
    learn = []
    if rate_per_tick > 0:
        t = rng.exponential(1.0 / rate_per_tick)
        while t < horizon:
            learn.append(t)
            t += rng.exponential(1.0 / rate_per_tick)
    learn = np.asarray(learn)
    idx = np.searchsorted(learn, ticks, side="right") - 1
    out = np.full(len(ticks), -1, dtype=np.int64)
    ok = idx >= 0
    out[ok] = (learn[idx[ok]] // update_ticks).astype(np.int64)
    return out


def background_flows(ctx: RunContext) -> list[LegitFlow]:
    if ctx.legit_flows is not None:
        return ctx.legit_flows
    cfg = ctx.cfg
    rate = cfg.background.live_get_rate
    if rate <= 0:
        return []
    rng = _stream(ctx.seed, 4)
    horizon_s = cfg.horizon_ticks * cfg.tick_ms / 1000.0
    count = int(rng.poisson(rate * horizon_s))
    nodes = np.asarray(ctx.topology.nodes)
    flows = []
    for _ in range(count):
        c, p = (int(x) for x in rng.choice(nodes, size=2, replace=False))
        flows.append(LegitFlow(c, p, int(rng.integers(0, cfg.horizon_ticks)), rng.bytes(SID_BYTES)))
    return flows


def _hash_sids(sids: list[bytes], prefix: tuple[int, ...], run_seed: int) -> np.ndarray:
    key = seed_key(run_seed)
    tail = struct.pack(f">I{len(prefix)}Q", len(prefix), *prefix)
    blake = hashlib.blake2b
    return digest_words([blake(s + tail, digest_size=16, key=key).digest() for s in sids])


def _run_batched(ctx: RunContext, batches: list[AttackBatch]) -> AttackOutcome:
    kind = ctx.kind
    out = AttackOutcome()
    hop = ctx.cfg.per_hop_ticks
    update_ticks = _dpid_update_ticks(ctx.cfg)
    for b in batches:
        n_pk = len(b.sids)
        out.sent += n_pk
        alive = np.ones(n_pk, dtype=bool)
        n = len(b.path)
        for h, asid in enumerate(b.path):
            # at the attacker's own AS nothing is stripped; each later hop strips one PID
            plen = len(b.pids) - h
            if plen < 0:
                out.malformed += int(alive.sum())
                alive[:] = False
                break
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            if kind is StrategyKind.DPID:
                current = (b.ticks[idx] + h * hop) // update_ticks
                bad = b.epochs[idx] != current
            elif should_log(kind, plen):
                state = ctx.router(asid)
                words = _hash_sids([b.sids[i] for i in idx], b.pids[:plen], ctx.seed)
                bad = ~state.pair.query_many(words)
                state.checked += idx.size
                state.rejected += int(bad.sum())
            else:
                continue
            alive[idx[bad]] = False
            out.rejected += int(bad.sum())
        reached = int(alive.sum())
        out.reached += reached
        out.per_attacker_reached[b.attacker] = reached
    return out


def _run_events(ctx: RunContext, batches: list[AttackBatch], flows: list[LegitFlow]):
    cfg = ctx.cfg
    hop = cfg.per_hop_ticks
    update_ticks = _dpid_update_ticks(cfg)
    attack = AttackOutcome()
    legit = LegitOutcome()

    # event arrays: tick, kind, owner (batch or flow), item (packet index), hop
    cols: list[list[np.ndarray]] = [[], [], [], [], []]

    def add(ticks, kind, owner, item, hop_idx):
        cols[0].append(np.asarray(ticks, dtype=np.int64))
        size = len(cols[0][-1])
        cols[1].append(np.full(size, kind, dtype=np.int64))
        cols[2].append(np.full(size, owner, dtype=np.int64))
        cols[3].append(np.asarray(item, dtype=np.int64))
        cols[4].append(np.full(size, hop_idx, dtype=np.int64))

    flow_paths = []
    flow_pids = []
    for f_i, f in enumerate(flows):
        path = ctx.route(f.consumer, f.provider)
        flow_paths.append(path)
        flow_pids.append(tuple(ctx.pidmap.path_pids(path)))
        n = len(path)
        for i in range(n):
            add([f.issue_tick + i * hop], GET, f_i, [0], i)
        # DATA leaves the provider's AS when the GET arrives there, then walks back
        for j in range(n):
            add([f.issue_tick + (n - 1) * hop + j * hop], LEGIT_DATA, f_i, [0], j)
    legit.sent = len(flows)

    for b_i, b in enumerate(batches):
        items = np.arange(len(b.sids))
        for h in range(len(b.path)):
            add(b.ticks + h * hop, ATTACK_DATA, b_i, items, h)
        attack.sent += len(b.sids)

    if cols[0]:
        ticks, kinds, owners, items, hops = (np.concatenate(c) for c in cols)
        order = np.lexsort((hops, items, owners, kinds, ticks))
    else:
        ticks = kinds = owners = items = hops = np.zeros(0, dtype=np.int64)
        order = ticks

    flow_msgs: list[Optional[DataMessage]] = [None] * len(flows)
    flow_dead = [False] * len(flows)
    # remaining PID count per attack packet; -1 once dropped
    remaining = [np.full(len(b.sids), len(b.pids), dtype=np.int64) for b in batches]
    kind = ctx.kind

    events = zip(*(a[order].tolist() for a in (ticks, kinds, owners, items, hops)))
    for t, k, owner, i, h in events:
        if k == GET:
            f = flows[owner]
            on_get(ctx.router(flow_paths[owner][h]), f.sid, flow_pids[owner][:h], t)
        elif k == LEGIT_DATA:
            if flow_dead[owner]:
                continue
            f = flows[owner]
            path = flow_paths[owner]
            asid = path[len(path) - 1 - h]
            msg = flow_msgs[owner]
            if msg is None:
                msg = DataMessage(sid=f.sid, pids=flow_pids[owner], ground_truth=Truth.LEGITIMATE)
            else:
                msg, _ = return_strip(msg)
            flow_msgs[owner] = msg
            verdict = on_data(ctx.router(asid), msg.sid, msg.pids, t)
            if verdict is Verdict.REJECT:
                flow_dead[owner] = True
                legit.dropped += 1
                legit.dropped_flows.append(owner)
        else:
            b = batches[owner]
            rem = remaining[owner]
            left = int(rem[i])
            if left < 0:
                continue
            if h > 0:
                if left == 0:
                    attack.malformed += 1
                    rem[i] = -1
                    continue
                left -= 1
                rem[i] = left
            state = ctx.router(b.path[h])
            if kind is StrategyKind.DPID:
                verdict = on_data(state, b.sids[i], (), t, int(b.epochs[i]), t // update_ticks)
            else:
                verdict = on_data(state, b.sids[i], b.pids[:left], t)
            if verdict is Verdict.REJECT:
                attack.rejected += 1
                rem[i] = -1
            elif h == len(b.path) - 1:
                attack.reached += 1
                attack.per_attacker_reached[b.attacker] = attack.per_attacker_reached.get(b.attacker, 0) + 1
    for b in batches:
        attack.per_attacker_reached.setdefault(b.attacker, 0)
    return attack, legit


def needs_event_loop(ctx: RunContext, flows: list[LegitFlow]) -> bool:
    return ctx.kind is StrategyKind.DYNAMIC or bool(flows)


def simulate(ctx: RunContext, force_events: bool = False) -> tuple[AttackOutcome, LegitOutcome]:
    """Replay attack and background traffic once; later calls return the cached result."""
    if ctx._result is None:
        batches = attack_batches(ctx)
        flows = background_flows(ctx)
        if force_events or needs_event_loop(ctx, flows):
            ctx._result = _run_events(ctx, batches, flows)
        else:
            ctx._result = (_run_batched(ctx, batches), LegitOutcome())
    return ctx._result


def inject_attack(ctx: RunContext) -> AttackOutcome:
    return simulate(ctx)[0]


def simulate_background(ctx: RunContext) -> LegitOutcome:
    return simulate(ctx)[1]


def deliver_data(ctx: RunContext, msg: DataMessage, path: list[int], tick: int) -> tuple[Verdict, int]:
    """Walk one DATA message from ``path[0]`` towards ``path[-1]``.

    Returns the final verdict and the index of the AS that decided it
    (the last AS when the message is delivered).
    """
    hop = ctx.cfg.per_hop_ticks
    for h, asid in enumerate(path):
        if h > 0:
            try:
                msg, _ = return_strip(msg)
            except MalformedPacket:
                return Verdict.REJECT, h
        verdict = on_data(ctx.router(asid), msg.sid, msg.pids, tick + h * hop)
        if verdict is Verdict.REJECT:
            return verdict, h
    return Verdict.ALLOW, len(path) - 1


@dataclass
class RunMetrics:
    scenario: str
    strategy: str
    p: float
    k: int
    attack_ases: int
    aggregate_mbps: float
    run: int
    seed: int
    sent: int
    reached: int
    rejected: int
    malformed: int
    legit_sent: int
    legit_dropped: int
    storage_bits_per_as: int
    expected_reach: float = math.nan
    mean_path_nodes: float = math.nan

    @property
    def reach_fraction(self) -> float:
        return self.reached / self.sent if self.sent else 0.0

    @property
    def filtered_fraction(self) -> float:
        return 1.0 - self.reach_fraction

    @property
    def victim_mbps(self) -> float:
        return self.aggregate_mbps * self.reach_fraction


def execute_run(cfg: ScenarioConfig, run_index: int) -> RunMetrics:
    ctx = setup_run(cfg, run_index)
    attack, legit = simulate(ctx)
    lengths = [len(ctx.paths[a]) for a in ctx.attackers]
    try:
        expected = ctx.expected_reach()
    except ValueError:
        expected = math.nan
    if cfg.strategy is StrategyKind.DPID:
        expected = dpid_closed_form(cfg.dpid.lambda_per_min, cfg.dpid.update_period_s, 1.0)
    return RunMetrics(
        scenario=cfg.name,
        strategy=cfg.strategy.value,
        p=cfg.target_fp,
        k=cfg.hash_count,
        attack_ases=cfg.num_attack_ases,
        aggregate_mbps=cfg.aggregate_attack_mbps,
        run=run_index,
        seed=ctx.seed,
        sent=attack.sent,
        reached=attack.reached,
        rejected=attack.rejected,
        malformed=attack.malformed,
        legit_sent=legit.sent,
        legit_dropped=legit.dropped,
        storage_bits_per_as=ctx.storage_bits_per_as(),
        expected_reach=expected,
        mean_path_nodes=float(np.mean(lengths)),
    )


@dataclass
class ScenarioResult:
    cfg: ScenarioConfig
    runs: list[RunMetrics]

    def _stat(self, attr: str) -> tuple[float, float]:
        vals = np.asarray([getattr(r, attr) for r in self.runs], dtype=float)
        return float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0

    @property
    def reach_fraction(self) -> float:
        return self._stat("reach_fraction")[0]

    @property
    def filtered_fraction(self) -> float:
        return 1.0 - self.reach_fraction

    @property
    def victim_mbps(self) -> float:
        return self.cfg.aggregate_attack_mbps * self.reach_fraction

    @property
    def victim_mbps_std(self) -> float:
        return self.cfg.aggregate_attack_mbps * self._stat("reach_fraction")[1]

    def mean(self, attr: str) -> float:
        return self._stat(attr)[0]


def _execute(args):
    return execute_run(*args)


def run_scenario(cfg: ScenarioConfig, threads: int = 1) -> ScenarioResult:
    """All runs of ``cfg``; results do not depend on ``threads``."""
    jobs = [(cfg, i) for i in range(cfg.runs)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(_execute, jobs))
    else:
        runs = [execute_run(*j) for j in jobs]
    return ScenarioResult(cfg, runs)


@dataclass
class DPidRun:
    run: int
    seed: int
    learned_fraction: float
    victim_mbps: float


@dataclass
class DPidResult:
    cfg: ScenarioConfig
    runs: list[DPidRun]

    @property
    def victim_mbps(self) -> float:
        return float(np.mean([r.victim_mbps for r in self.runs]))

    @property
    def victim_mbps_std(self) -> float:
        if len(self.runs) < 2:
            return 0.0
        return float(np.std([r.victim_mbps for r in self.runs], ddof=1))

    @property
    def closed_form(self) -> float:
        c = self.cfg
        return dpid_closed_form(c.dpid.lambda_per_min, c.dpid.update_period_s, c.aggregate_attack_mbps)


def learned_time(rng: np.random.Generator, lambda_per_min: float, period_s: float, horizon_s: float) -> float:
    """Seconds within ``[0, horizon_s)`` during which one attacker holds a valid path.

    PIDs change every ``period_s``; each learning (Poisson, rate per
    minute) yields a path that stays valid until the next change.
    """
    if lambda_per_min <= 0:
        return 0.0
    rate = lambda_per_min / 60.0
    total = 0.0
    valid_until = -1.0
    t = rng.exponential(1.0 / rate)
    while t < horizon_s:
        if t >= valid_until:
            epoch_end = min((math.floor(t / period_s) + 1) * period_s, horizon_s)
            total += epoch_end - t
            valid_until = epoch_end
        t += rng.exponential(1.0 / rate)
    return total


def run_dpid(cfg: ScenarioConfig) -> DPidResult:
    """Rate-level D-PID simulation over ``dpid.horizon_s`` seconds per run."""
    if cfg.strategy is not StrategyKind.DPID:
        raise ValueError("run_dpid needs strategy dpid")
    d = cfg.dpid
    per_as = cfg.per_as_mbps
    runs = []
    for i in range(cfg.runs):
        seed = run_seed_for(cfg.master_seed, i)
        rng = _stream(seed, 5)
        fractions = [
            learned_time(rng, d.lambda_per_min, d.update_period_s, d.horizon_s) / d.horizon_s
            for _ in range(cfg.num_attack_ases)
        ]
        runs.append(DPidRun(i, seed, float(np.mean(fractions)), per_as * float(np.sum(fractions))))
    return DPidResult(cfg, runs)
