"""D-PID victim rate vs learning rate and update period, against Even logging.

Writes results/dpid.csv and prints, for each update period, the ratio of
the smallest D-PID rate at lambda >= 2/min to each Even column.
"""

import csv
import sys
from pathlib import Path

from logdos.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    out = ROOT / "results" / "dpid.csv"
    out.parent.mkdir(exist_ok=True)
    status = cli_main(["dpid", str(ROOT / "configs" / "dpid.yaml"), "--out", str(out), *sys.argv[1:]])
    if status:
        sys.exit(status)
    rows = list(csv.DictReader(open(out)))
    even_cols = [c for c in rows[0] if c.startswith("even_")]
    for period in sorted({r["update_period_s"] for r in rows}, key=float):
        sel = [r for r in rows if r["update_period_s"] == period and float(r["lambda_per_min"]) >= 2]
        low = min(float(r["dpid_mbps"]) for r in sel)
        ratios = ", ".join(f"{c}: x{low / max(float(sel[0][c]), 1e-12):.0f}" for c in even_cols)
        print(f"T_update={period}s  min D-PID (lambda>=2) {low:.0f} Mbps  {ratios}")
