"""Simulate a hive, fit it day by day, and look at what the fit can and cannot see.

Run: python3 demos/01_fit_a_hive.py
"""

import numpy as np

from hivetherm import ExtProfile, HiveParams, ScenarioSpec, fit_per_day, fit_segment, generate
from hivetherm.fitting import strength_summary

truth = HiveParams(s_c=12.0, s_h=5.0, theta_ideal=34.8)
spec = ScenarioSpec(
    num_days=7,
    regimes=((0, truth),),
    ext_profile=ExtProfile(amplitude=10.0, heatwave_days=((3, 43.0),)),
    noise_sigma=0.3,
    seed=4,
)
ds, _ = generate(spec)

# One parameter triple for the whole week.
week = fit_segment(ds, (0, ds.n_ticks))
print(f"true      {truth}")
print(f"week fit  {week.params}  rmse={week.rmse:.3f} C over {week.n_used} ticks")

# Each day on its own holds less information: stiff cooling is hard to tell
# apart from very stiff cooling, so a single day can overshoot badly. Days
# where the air never crosses the ideal would be flagged and filled in.
days = fit_per_day(ds)
print("\nday  s_c    s_h    theta   flag")
for i, f in enumerate(days):
    p = f.params
    note = f.degenerate.value + (f" (filled {','.join(sorted(f.filled))})" if f.filled else "")
    print(f"{i:>3}  {p.s_c:5.1f}  {p.s_h:5.1f}  {p.theta_ideal:5.2f}   {note}")

daily = [f.params for f in days]
print("\nsummary:", {k: round(v, 2) if isinstance(v, float) else v
                     for k, v in strength_summary(daily).items()})
print("median daily s_c vs truth:", round(float(np.median([p.s_c for p in daily])), 2), truth.s_c)
