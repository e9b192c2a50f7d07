"""Per-AS filter size over GET counts and FP targets, written to results/storage.csv."""

import sys
from pathlib import Path

from logdos.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    out = ROOT / "results" / "storage.csv"
    out.parent.mkdir(exist_ok=True)
    status = cli_main(["storage", "--out", str(out), *sys.argv[1:]])
    if status == 0:
        print(out.read_text(), end="")
    sys.exit(status)
