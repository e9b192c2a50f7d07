"""Node/edge counts and shortest-path length statistics for a topology config.

    python3 scripts/topology_stats.py [configs/topology.yaml] [--pairs 2000]
"""

import sys
from pathlib import Path

from logdos.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent

if __name__ == "__main__":
    args = sys.argv[1:]
    if not args or args[0].startswith("-"):
        args = [str(ROOT / "configs" / "topology.yaml"), *args]
    sys.exit(cli_main(["topostats", *args]))
