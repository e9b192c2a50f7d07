"""Victim attack rate vs attacker count for each logging strategy.

Runs the attack_rate_*.yaml sweeps and writes one CSV per strategy to
results/, then prints the mean victim rate (Mbps) as a small table.

    python3 scripts/run_attack_rate.py [--only even] [--threads 4]
"""

import argparse
import csv
import io
from collections import defaultdict
from pathlib import Path

from logdos.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
STRATEGIES = ("comprehensive", "even", "odd", "dynamic")


def summarize(path):
    table = defaultdict(dict)
    with open(path) as fh:
        for row in csv.DictReader(fh):
            if row["run"] == "mean":
                table[row["aggregate_mbps"]][int(row["attack_ases"])] = float(row["victim_mbps"])
    out = io.StringIO()
    counts = sorted({n for cols in table.values() for n in cols})
    out.write("aggregate_mbps " + " ".join(f"{n:>9}" for n in counts) + "\n")
    for agg, cols in table.items():
        out.write(f"{agg:>14} " + " ".join(f"{cols.get(n, float('nan')):9.4f}" for n in counts) + "\n")
    return out.getvalue()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", choices=STRATEGIES)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--outdir", default=str(ROOT / "results"))
    args = ap.parse_args()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    for kind in [args.only] if args.only else STRATEGIES:
        cfg = ROOT / "configs" / f"attack_rate_{kind}.yaml"
        out = outdir / f"attack_rate_{kind}.csv"
        status = cli_main(["sweep", str(cfg), "--out", str(out), "--threads", str(args.threads)])
        if status:
            raise SystemExit(status)
        print(f"== {kind} (victim Mbps) -> {out}")
        print(summarize(out))


if __name__ == "__main__":
    main()
