"""Command-line entry point: ``logdos {run,sweep,storage,dpid,topostats}``.

All commands write CSV to stdout or ``--out``. Exit status is 0 on
success, 1 for configuration errors and 2 for I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

from . import analysis
from .config import ConfigError, ExperimentSpec, ScenarioConfig, parse_config
from .engine import ScenarioResult, SetupError, load_topology, run_dpid, run_scenario
from .strategies import StrategyKind
from .topology import TopologyError, topology_stats

RUN_COLUMNS = [
    "scenario",
    "strategy",
    "p",
    "k",
    "attack_ases",
    "aggregate_mbps",
    "run",
    "seed",
    "sent",
    "reached",
    "filtered_fraction",
    "victim_mbps",
    "legit_sent",
    "legit_dropped",
    "storage_bits_per_as",
]

DEFAULT_LAMBDAS = (0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0)
DEFAULT_PERIODS = (60.0, 120.0, 240.0)
DEFAULT_EVEN_P = (0.05, 0.1, 0.2)


def _fmt(value) -> str:
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 1e15:
            return str(int(value))
        return format(value, ".12g")
    if isinstance(value, StrategyKind):
        return value.value
    return str(value)


def write_csv(rows: Iterable[dict], columns: Sequence[str], out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])


def scenario_rows(result: ScenarioResult) -> list[dict]:
    cfg = result.cfg
    rows = []
    for r in result.runs:
        rows.append(
            {
                "scenario": r.scenario,
                "strategy": r.strategy,
                "p": r.p,
                "k": r.k,
                "attack_ases": r.attack_ases,
                "aggregate_mbps": r.aggregate_mbps,
                "run": r.run,
                "seed": r.seed,
                "sent": r.sent,
                "reached": r.reached,
                "filtered_fraction": r.filtered_fraction,
                "victim_mbps": r.victim_mbps,
                "legit_sent": r.legit_sent,
                "legit_dropped": r.legit_dropped,
                "storage_bits_per_as": r.storage_bits_per_as,
            }
        )
    rows.append(
        {
            "scenario": cfg.name,
            "strategy": cfg.strategy.value,
            "p": cfg.target_fp,
            "k": cfg.hash_count,
            "attack_ases": cfg.num_attack_ases,
            "aggregate_mbps": cfg.aggregate_attack_mbps,
            "run": "mean",
            "seed": cfg.master_seed,
            "sent": result.mean("sent"),
            "reached": result.mean("reached"),
            "filtered_fraction": result.filtered_fraction,
            "victim_mbps": result.victim_mbps,
            "legit_sent": result.mean("legit_sent"),
            "legit_dropped": result.mean("legit_dropped"),
            "storage_bits_per_as": result.mean("storage_bits_per_as"),
        }
    )
    return rows


def _apply_seed(spec: ExperimentSpec, seed: int | None) -> ExperimentSpec:
    if seed is None:
        return spec
    return replace(spec, base=replace(spec.base, master_seed=seed))


def cmd_run(spec: ExperimentSpec, out, threads: int) -> None:
    write_csv(scenario_rows(run_scenario(spec.base, threads)), RUN_COLUMNS, out)


def cmd_sweep(spec: ExperimentSpec, out, threads: int) -> None:
    rows = []
    for cfg in spec.points():
        rows.extend(scenario_rows(run_scenario(cfg, threads)))
    write_csv(rows, RUN_COLUMNS, out)


STORAGE_COLUMNS = ["n", "p", "k", "m_bits", "megabits", "megabytes", "note"]

# "About 120 MB" is the usual quoted size for this point; it only fits if MB means megabits.
LABEL_NOTE = {
    (2_000_000, 1e-4, 3): "'about 120 MB' label fits megabits (1e6 bits); in bytes it is 8x smaller",
}


def cmd_storage(out, n_values=None, p_values=None, k: int = 3) -> None:
    rows = analysis.storage_curve(
        n_values or analysis.DEFAULT_STORAGE_N, p_values or analysis.DEFAULT_STORAGE_P, k
    )
    for row in rows:
        row["note"] = LABEL_NOTE.get((int(row["n"]), float(row["p"]), int(row["k"])), "")
    write_csv(rows, STORAGE_COLUMNS, out)


def dpid_table(spec: ExperimentSpec, lambdas=None, periods=None, even_ps=None, threads: int = 1) -> tuple[list[dict], list[str]]:
    base = replace(spec.base, strategy=StrategyKind.DPID)
    lambdas = spec.sweep.get("lambda_per_min") or lambdas or DEFAULT_LAMBDAS
    periods = spec.sweep.get("update_period_s") or periods or DEFAULT_PERIODS
    even_ps = even_ps or DEFAULT_EVEN_P

    even_rate = {}
    for p in even_ps:
        cfg = replace(spec.base, strategy=StrategyKind.EVEN, target_fp=p, name=f"{base.name}-even")
        even_rate[p] = run_scenario(cfg, threads).victim_mbps

    columns = ["update_period_s", "lambda_per_min", "dpid_mbps", "dpid_std_mbps", "dpid_closed_form_mbps"]
    columns += [f"even_p{p}_mbps" for p in even_ps]
    rows = []
    for period in periods:
        for lam in lambdas:
            cfg = replace(base, dpid=replace(base.dpid, update_period_s=period, lambda_per_min=lam))
            res = run_dpid(cfg)
            row = {
                "update_period_s": float(period),
                "lambda_per_min": float(lam),
                "dpid_mbps": res.victim_mbps,
                "dpid_std_mbps": res.victim_mbps_std,
                "dpid_closed_form_mbps": res.closed_form,
            }
            for p in even_ps:
                row[f"even_p{p}_mbps"] = even_rate[p]
            rows.append(row)
    return rows, columns


def cmd_dpid(spec: ExperimentSpec, out, threads: int, **kw) -> None:
    rows, columns = dpid_table(spec, threads=threads, **kw)
    write_csv(rows, columns, out)


TOPOSTATS_COLUMNS = ["nodes", "edges", "mode", "pairs", "mean_path_len", "stddev_path_len", "stderr_path_len"]


def cmd_topostats(cfg: ScenarioConfig, out, pairs: int, seed: int) -> None:
    stats = topology_stats(load_topology(cfg.topology), sample_pairs=pairs, seed=seed)
    write_csv([stats], TOPOSTATS_COLUMNS, out)


def _floats(text: str | None) -> list[float] | None:
    if text is None:
        return None
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logdos", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("config", help="YAML scenario file")
        p.add_argument("--out", help="write CSV here instead of stdout")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--threads", type=int, help="parallel worker processes for runs")

    common(sub.add_parser("run", help="run one scenario"))
    common(sub.add_parser("sweep", help="run every point of the sweep axes"))

    st = sub.add_parser("storage", help="filter size table over GET counts and FP targets")
    st.add_argument("--out")
    st.add_argument("--k", type=int, default=3)
    st.add_argument("--n", help="comma-separated GET counts")
    st.add_argument("--p", help="comma-separated FP targets")

    dp = sub.add_parser("dpid", help="D-PID victim rate vs learning rate, with Even logging columns")
    common(dp)
    dp.add_argument("--lambdas", help="comma-separated learning rates per minute")
    dp.add_argument("--periods", help="comma-separated PID update periods in seconds")
    dp.add_argument("--even-p", help="comma-separated FP targets for the Even columns")

    ts = sub.add_parser("topostats", help="node/edge counts and path length statistics")
    common(ts)
    ts.add_argument("--pairs", type=int, default=1000, help="sampled pairs for large graphs")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "storage":
            buf = io.StringIO()
            n = _floats(args.n)
            cmd_storage(buf, [int(x) for x in n] if n else None, _floats(args.p), args.k)
        else:
            spec = _apply_seed(parse_config(args.config), args.seed)
            threads = args.threads or spec.threads
            if threads < 1:
                raise ConfigError("threads", "must be >= 1")
            buf = io.StringIO()
            if args.command == "run":
                cmd_run(spec, buf, threads)
            elif args.command == "sweep":
                cmd_sweep(spec, buf, threads)
            elif args.command == "dpid":
                cmd_dpid(
                    spec,
                    buf,
                    threads,
                    lambdas=_floats(args.lambdas),
                    periods=_floats(args.periods),
                    even_ps=_floats(args.even_p),
                )
            elif args.command == "topostats":
                cmd_topostats(spec.base, buf, args.pairs, spec.base.master_seed)
    except (ConfigError, TopologyError, SetupError, ValueError) as exc:
        print(f"logdos: config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"logdos: I/O error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.out:
            Path(args.out).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
        else:
            sys.stdout.write(buf.getvalue())
    except OSError as exc:
        print(f"logdos: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
