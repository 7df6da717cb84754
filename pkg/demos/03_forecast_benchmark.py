"""Rolling 3-day fit / 7-day forecast against the reference forecasters.

Run: python3 demos/03_forecast_benchmark.py
"""

from hivetherm import ExtProfile, HiveParams, ScenarioSpec, generate, rolling_evaluation

regimes = ((0, HiveParams(6, 18, 34.5)), (22, HiveParams(14, 5, 35.0)), (41, HiveParams(4, 10, 34.0)))
heat = ((5, 43.0), (6, 44.0), (15, 42.0), (24, 43.0), (33, 42.0), (47, 44.0), (48, 43.0))
ds, _ = generate(ScenarioSpec(60, regimes, ext_profile=ExtProfile(amplitude=10.0, heatwave_days=heat),
                              noise_sigma=0.3, seed=1))

ev = rolling_evaluation(ds, max_workers=4)
print(ev.summary().sort_values("mean_rmse").round(3))
print(f"\norigins where the model beats every baseline by 20%: {ev.improvement_share():.0%}")

# Origins whose fit window straddles a regime change are the hard ones.
ebv = ev.table[ev.table.method == "ebv"].set_index("fit_start_day").rmse
print("\nworst origins (fit start day, rmse):")
print(ebv.sort_values(ascending=False).head(5).round(3).to_string())
