"""Execution costs and the analytic-vs-numeric speed gap.

Part 1 reproduces the cost arithmetic behind the "12% a year unleveraged"
claim: 15 bps of daily gross edge, 10 bps of slippage at full turnover,
compounded over 250 trading days.

Part 2 times the same 10-asset backtest three ways: analytic absolute,
analytic active, and the numeric growth-optimal solver the analytic route
replaces.  The numeric leg is the whole point of the quadratic
approximation: expect an order of magnitude or two.

Run:  python3 demos/frictions_and_timing.py   (the timing part takes a while)
"""

import numpy as np

from zeroport import synth
from zeroport.learner import WealthTrack
from zeroport.run import GridConfig, apply_frictions, timing_report

# -- part 1: cost arithmetic --------------------------------------------------

gross_edge = 1.0015            # 15 bps per day before costs
cost_bps = 10.0                # slippage + capital costs
track = WealthTrack(
    wealth=np.cumprod(np.full(250, gross_edge)),
    controls=np.zeros((250, 2)),
    turnover=np.ones(250),     # 100% of inventory turned over daily
    hold_cash=np.zeros(250, dtype=bool),
    mode="active",
)
net = apply_frictions(track, cost_bps, flat_turnover=1.0)
print("gross year:", round(track.terminal, 4))
print("net year:  ", round(net.terminal, 4),
      f"({(net.terminal - 1) * 100:.1f}% after {cost_bps:.0f} bps on full turnover)")
print("netting exactly 5 bps/day compounds to", round(1.0005**250, 4))

# -- part 2: timing -----------------------------------------------------------

print("\ntiming three strategies on a 10-asset, 1000-period market")
print("(median of 3 interleaved runs; spreads reported, ordering beyond")
print("the noise band is what matters)\n")
x = synth.generate(synth.SynthSpec(case="SDC3", assets=10, periods=1000, seed=5))
rows = timing_report(x, strategies=("absolute", "active", "numeric"),
                     repeats=3, grid=GridConfig(), warmup_periods=200)
for row in rows:
    print(f"  {row['strategy']:<10} median {row['median_seconds']:>8.2f}s"
          f"   spread {row['spread']:.2f}s")
ratio = rows[-1]["median_seconds"] / rows[0]["median_seconds"]
print(f"\nnumeric / analytic ratio: {ratio:.0f}x")
