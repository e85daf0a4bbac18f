"""The classic NYSE pair comparison, when the data is available.

Reproduces the strategy-comparison rows (absolute, active, the
nearest-neighbour recovery, universal portfolio, best stock) for the
IROQU/KINAR pair and friends.  Reference terminal wealths on the full
1962-84 set: UP 38.67 and best stock 8.92 for IROQU/KINAR, with the
pattern-matching portfolios reaching ~1e12.

Needs the 36-stock NYSE relatives CSV described in data/nyse/README.md;
without it this demo explains itself and exits.

Run:  python3 demos/nyse_table.py            (tens of seconds per pair)
"""

import os
import sys
from pathlib import Path

from zeroport.run import nyse_table

DATA_DIR = Path(__file__).parent.parent / "data" / "nyse"
OUT = Path(__file__).parent / "out"


def locate():
    env = os.environ.get("ZEROPORT_NYSE_DATA")
    if env and Path(env).exists():
        return Path(env)
    hits = sorted(DATA_DIR.glob("*.csv"))
    return hits[0] if hits else None


path = locate()
if path is None:
    print("NYSE relatives not found.")
    print(f"Drop the wide relatives CSV under {DATA_DIR}/ (see the README")
    print("there for the format) or set ZEROPORT_NYSE_DATA, then rerun.")
    sys.exit(0)

print(f"using {path}")
rows = nyse_table(path, pairs=(("IROQU", "KINAR"),), outdir=OUT)
for row in rows:
    print(f"\n{row['stocks']}")
    for name, cell in row["strategies"].items():
        wealth = cell.get("wealth")
        best = cell.get("best_agent")
        extra = f"  best agent {best:.3e}" if best else ""
        print(f"  {name:<20} {wealth:.4g}{extra}")
print(f"\nartifacts: {OUT}/nyse_table.csv, nyse_table.json")
