"""From OHLC bars to cleaned price-relative features.

Builds a small long-format bar file (with a missing bar, a zero price and
a 10:1 split) and walks it through ingestion, the four pairing
conventions, outlier cleaning and the cleaning report.

Run:  python3 demos/market_data.py
"""

import tempfile
from pathlib import Path

import numpy as np

from zeroport import marketdata

rows = [
    # ticker, date, open, high, low, close
    ("AAA", "2001-01-01", 100.0, 101.0, 99.5, 100.5),
    ("AAA", "2001-01-02", 100.8, 102.0, 100.1, 101.6),
    ("AAA", "2001-01-03", 101.5, 103.0, 101.0, 102.9),
    ("AAA", "2001-01-04", 10.3, 10.4, 10.1, 10.2),    # 10:1 split
    ("AAA", "2001-01-05", 10.2, 10.5, 10.1, 10.4),
    ("BBB", "2001-01-01", 50.0, 50.5, 49.0, 50.2),
    ("BBB", "2001-01-02", 50.1, 51.0, 49.9, 50.9),
    # BBB misses 2001-01-03 entirely
    ("BBB", "2001-01-04", 51.2, 51.6, 50.8, 0.0),     # bad close -> missing
    ("BBB", "2001-01-05", 51.0, 51.4, 50.6, 51.1),
]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "bars.csv"
    path.write_text(
        "ticker,timestamp,open,high,low,close\n"
        + "".join(",".join(map(str, r)) + "\n" for r in rows)
    )
    series = marketdata.load_csv(path)

for s in series:
    print(f"{s.ticker}: {len(s)} bars, missing mask {s.missing.astype(int).tolist()}")

for convention in marketdata.CONVENTIONS:
    m = marketdata.to_relatives(series, convention)
    print(f"\n{convention} ({m.shape[0]} periods):")
    for row, ts in zip(np.round(m.values, 4), m.timestamps):
        print("  ", ts[:10], row.tolist())

m = marketdata.to_relatives(series, "close_to_close")
cleaned = marketdata.clean_relatives(m)  # default split thresholds 0.7 / 1.3
print("\nafter cleaning (split day and missing bars forced to 1):")
for row, ts in zip(np.round(cleaned.values, 4), cleaned.timestamps):
    print("  ", ts[:10], row.tolist())
print("\ncleaning report:", marketdata.cleaning_report(cleaned))
