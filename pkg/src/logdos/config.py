"""Scenario configuration: dataclasses, defaults and YAML loading.

Schema (every key optional unless noted; see ``configs/`` for examples)::

    name: str
    master_seed: int
    runs: int
    threads: int
    topology:   {file, metadata, nodes, attachment, seed, transient_only}
    strategy:   {kind, target_fp, hash_count, filter_capacity}
    attack:     {num_attack_ases, aggregate_mbps, packets_per_attacker, sid_mode}
    timing:     {horizon_ticks, tick_ms, per_hop_ticks}
    dynamic:    {initial_s, silent_s, delta_ms, threshold}
    dpid:       {update_period_s, lambda_per_min, horizon_s}
    background: {prefill_fraction, live_get_rate, refill_on_reset}
    sweep:      {target_fp, num_attack_ases, aggregate_mbps, strategy,
                 lambda_per_min, update_period_s}   # lists
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from .strategies import DynamicParams, StrategyKind


class ConfigError(ValueError):
    def __init__(self, key: str, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}: {message}{where}")
        self.key = key
        self.line = line


@dataclass(frozen=True)
class TopologySource:
    file: str | None = None
    metadata: str | None = None
    nodes: int = 1000
    attachment: int = 2
    seed: int = 7
    transient_only: bool = False


@dataclass(frozen=True)
class DynamicTiming:
    initial_s: float = 10.0
    silent_s: float = 10.0
    delta_ms: float = 200.0
    threshold: int = 100

    def to_ticks(self, tick_ms: float) -> DynamicParams:
        return DynamicParams(
            initial=max(1, round(self.initial_s * 1000 / tick_ms)),
            silent=round(self.silent_s * 1000 / tick_ms),
            delta=round(self.delta_ms / tick_ms),
            threshold=self.threshold,
        )


@dataclass(frozen=True)
class DPidConfig:
    update_period_s: float = 60.0
    lambda_per_min: float = 8.0
    horizon_s: float = 3600.0


@dataclass(frozen=True)
class BackgroundConfig:
    prefill_fraction: float = 1.0
    live_get_rate: float = 0.0  # legitimate GETs per second, network-wide
    refill_on_reset: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    topology: TopologySource = field(default_factory=TopologySource)
    strategy: StrategyKind = StrategyKind.COMPREHENSIVE
    target_fp: float = 0.01
    hash_count: int = 3
    filter_capacity: int = 10_000
    num_attack_ases: int = 100
    aggregate_attack_mbps: float = 3000.0
    packets_per_attacker: int = 10_000
    sid_mode: str = "random"
    horizon_ticks: int = 300_000
    tick_ms: float = 1.0
    per_hop_ticks: int = 10
    runs: int = 1
    master_seed: int = 1
    dynamic: DynamicTiming = field(default_factory=DynamicTiming)
    dpid: DPidConfig = field(default_factory=DPidConfig)
    background: BackgroundConfig = field(default_factory=BackgroundConfig)

    def __post_init__(self):
        object.__setattr__(self, "strategy", StrategyKind.parse(self.strategy))
        validate(self)

    @property
    def dynamic_params(self) -> DynamicParams:
        return self.dynamic.to_ticks(self.tick_ms)

    @property
    def per_as_mbps(self) -> float:
        return self.aggregate_attack_mbps / self.num_attack_ases

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def validate(cfg: ScenarioConfig) -> None:
    def need(ok: bool, key: str, msg: str):
        if not ok:
            raise ConfigError(key, msg)

    need(0.0 < cfg.target_fp < 1.0, "strategy.target_fp", f"must be in (0, 1), got {cfg.target_fp}")
    need(cfg.hash_count >= 1, "strategy.hash_count", "must be >= 1")
    need(cfg.filter_capacity >= 1, "strategy.filter_capacity", "must be >= 1")
    need(cfg.num_attack_ases >= 1, "attack.num_attack_ases", "must be >= 1")
    need(cfg.aggregate_attack_mbps >= 0, "attack.aggregate_mbps", "must be >= 0")
    need(cfg.packets_per_attacker >= 0, "attack.packets_per_attacker", "must be >= 0")
    need(cfg.sid_mode in ("random", "copied"), "attack.sid_mode", "must be 'random' or 'copied'")
    need(cfg.horizon_ticks >= 1, "timing.horizon_ticks", "must be >= 1")
    need(cfg.tick_ms > 0, "timing.tick_ms", "must be > 0")
    need(cfg.per_hop_ticks >= 0, "timing.per_hop_ticks", "must be >= 0")
    need(cfg.runs >= 1, "runs", "must be >= 1")
    need(cfg.topology.nodes >= 2, "topology.nodes", "must be >= 2")
    need(cfg.topology.attachment >= 1, "topology.attachment", "must be >= 1")
    need(0.0 <= cfg.background.prefill_fraction <= 1.0, "background.prefill_fraction", "must be in [0, 1]")
    need(cfg.background.live_get_rate >= 0, "background.live_get_rate", "must be >= 0")
    need(cfg.dpid.update_period_s > 0, "dpid.update_period_s", "must be > 0")
    need(cfg.dpid.lambda_per_min >= 0, "dpid.lambda_per_min", "must be >= 0")
    need(cfg.dpid.horizon_s > 0, "dpid.horizon_s", "must be > 0")
    need(cfg.dynamic.initial_s > 0, "dynamic.initial_s", "must be > 0")
    need(cfg.dynamic.silent_s >= 0, "dynamic.silent_s", "must be >= 0")
    need(cfg.dynamic.delta_ms >= 0, "dynamic.delta_ms", "must be >= 0")
    need(cfg.dynamic.threshold >= 1, "dynamic.threshold", "must be >= 1")


# YAML section -> (dataclass attribute on ScenarioConfig or None for top level, key renames)
_SECTIONS = {
    "topology": ("topology", {}),
    "dynamic": ("dynamic", {}),
    "dpid": ("dpid", {}),
    "background": ("background", {}),
    "strategy": (None, {"kind": "strategy"}),
    "attack": (None, {"aggregate_mbps": "aggregate_attack_mbps"}),
    "timing": (None, {}),
}
_TOP_LEVEL = {"name", "master_seed", "runs"}
_FLAT_KEYS = {
    "strategy": {"kind", "target_fp", "hash_count", "filter_capacity"},
    "attack": {"num_attack_ases", "aggregate_mbps", "packets_per_attacker", "sid_mode"},
    "timing": {"horizon_ticks", "tick_ms", "per_hop_ticks"},
}
SWEEP_AXES = {
    "target_fp": "target_fp",
    "num_attack_ases": "num_attack_ases",
    "aggregate_mbps": "aggregate_attack_mbps",
    "strategy": "strategy",
    "lambda_per_min": "dpid.lambda_per_min",
    "update_period_s": "dpid.update_period_s",
}


@dataclass(frozen=True)
class ExperimentSpec:
    base: ScenarioConfig
    sweep: dict[str, list] = field(default_factory=dict)
    threads: int = 1

    def points(self) -> list[ScenarioConfig]:
        """Cross product of the sweep axes, in declaration order."""
        if not self.sweep:
            return [self.base]
        axes = list(self.sweep)
        out = []
        for i, combo in enumerate(itertools.product(*(self.sweep[a] for a in axes))):
            cfg = self.base
            for axis, value in zip(axes, combo):
                cfg = set_path(cfg, SWEEP_AXES[axis], value)
            tag = ",".join(f"{a}={_fmt(v)}" for a, v in zip(axes, combo))
            out.append(replace(cfg, name=f"{self.base.name}[{tag}]"))
        return out


def _fmt(v: Any) -> str:
    return v.value if isinstance(v, StrategyKind) else str(v)


def set_path(cfg: ScenarioConfig, path: str, value: Any) -> ScenarioConfig:
    head, _, rest = path.partition(".")
    if not rest:
        return replace(cfg, **{head: value})
    return replace(cfg, **{head: replace(getattr(cfg, head), **{rest: value})})


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    mapping = {}
    lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in mapping:
            raise ConfigError(str(key), "duplicate key", key_node.start_mark.line + 1)
        mapping[key] = loader.construct_object(value_node, deep=True)
        lines[key] = key_node.start_mark.line + 1
    return _LinedDict(mapping, lines)


class _LinedDict(dict):
    def __init__(self, data, lines):
        super().__init__(data)
        self.lines = lines


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _coerce(key: str, value: Any, target: type | str, line: int | None) -> Any:
    t = target if isinstance(target, str) else getattr(target, "__name__", str(target))
    try:
        if "StrategyKind" in t:
            return StrategyKind.parse(value)
        if t.startswith("bool"):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if t.startswith("int"):
            if isinstance(value, bool) or not isinstance(value, int):
                if isinstance(value, float) and value.is_integer():
                    return int(value)
                raise TypeError
            return value
        if t.startswith("float"):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if t.startswith("str"):
            if value is None:
                return None
            return str(value)
    except (TypeError, ValueError) as exc:
        msg = str(exc) if isinstance(exc, ValueError) and str(exc) else f"expected {t}, got {value!r}"
        raise ConfigError(key, msg, line) from None
    return value


def _field_types(cls) -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(cls)}


def spec_from_mapping(data: dict, base_dir: Path | None = None) -> ExperimentSpec:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    lines = getattr(data, "lines", {})
    top_types = _field_types(ScenarioConfig)
    kwargs: dict[str, Any] = {}
    nested: dict[str, dict] = {}
    sweep: dict[str, list] = {}
    threads = 1

    for key, value in data.items():
        line = lines.get(key)
        if key in _TOP_LEVEL:
            kwargs[key] = _coerce(key, value, top_types[key], line)
        elif key == "threads":
            threads = _coerce(key, value, "int", line)
        elif key == "sweep":
            sweep = _parse_sweep(value, line)
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(key, "expected a mapping", line)
            attr, renames = _SECTIONS[key]
            sub_lines = getattr(value, "lines", {})
            if attr is None:
                allowed = _FLAT_KEYS[key]
                for sk, sv in value.items():
                    if sk not in allowed:
                        raise ConfigError(f"{key}.{sk}", "unknown key", sub_lines.get(sk))
                    target = renames.get(sk, sk)
                    kwargs[target] = _coerce(f"{key}.{sk}", sv, top_types[target], sub_lines.get(sk))
            else:
                cls = type(getattr(ScenarioConfig(), attr))
                types = _field_types(cls)
                sub = {}
                for sk, sv in value.items():
                    if sk not in types:
                        raise ConfigError(f"{key}.{sk}", "unknown key", sub_lines.get(sk))
                    sub[sk] = _coerce(f"{key}.{sk}", sv, types[sk], sub_lines.get(sk))
                nested[attr] = sub
        else:
            raise ConfigError(key, "unknown key", line)

    for attr, sub in nested.items():
        if attr == "topology" and base_dir is not None:
            for fk in ("file", "metadata"):
                if sub.get(fk):
                    p = Path(sub[fk])
                    sub[fk] = str(p if p.is_absolute() else base_dir / p)
        kwargs[attr] = type(getattr(ScenarioConfig(), attr))(**sub)
    if threads < 1:
        raise ConfigError("threads", "must be >= 1", lines.get("threads"))

    try:
        base = ScenarioConfig(**kwargs)
    except ConfigError as exc:
        section, _, leaf = exc.key.partition(".")
        line = None
        if leaf and isinstance(data.get(section), dict):
            line = getattr(data[section], "lines", {}).get(leaf)
        elif exc.key in lines:
            line = lines[exc.key]
        raise ConfigError(exc.key, str(exc).split(": ", 1)[1], line) from None
    spec = ExperimentSpec(base=base, sweep=sweep, threads=threads)
    sweep_lines = getattr(data.get("sweep"), "lines", {}) if isinstance(data.get("sweep"), dict) else {}
    for axis in sweep:
        try:
            # validate every value on its own so errors name the axis
            for v in sweep[axis]:
                set_path(base, SWEEP_AXES[axis], v)
        except ConfigError as exc:
            raise ConfigError(f"sweep.{axis}", str(exc).split(": ", 1)[1], sweep_lines.get(axis)) from None
    return spec


def _parse_sweep(value: Any, line: int | None) -> dict[str, list]:
    if not isinstance(value, dict):
        raise ConfigError("sweep", "expected a mapping", line)
    sub_lines = getattr(value, "lines", {})
    out = {}
    for axis, values in value.items():
        l = sub_lines.get(axis)
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.{axis}", "unknown sweep axis", l)
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.{axis}", "expected a non-empty list", l)
        kind = {
            "target_fp": "float",
            "num_attack_ases": "int",
            "aggregate_mbps": "float",
            "strategy": "StrategyKind",
            "lambda_per_min": "float",
            "update_period_s": "float",
        }[axis]
        out[axis] = [_coerce(f"sweep.{axis}", v, kind, l) for v in values]
    return out


def parse_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_config_text(text, base_dir=path.parent)


def parse_config_text(text: str, base_dir: Path | None = None) -> ExperimentSpec:
    try:
        data = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<yaml>", str(getattr(exc, "problem", exc)), mark.line + 1 if mark else None) from None
    return spec_from_mapping(data, base_dir)


def config_metadata(cfg: ScenarioConfig) -> dict:
    """Plain-dict view of a scenario, for run metadata."""
    out = dataclasses.asdict(cfg)
    out["strategy"] = cfg.strategy.value
    return out
