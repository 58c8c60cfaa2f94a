"""
Scaling plans and parameter sweeps
==================================

The disturbance-minimising plan interpolates a pair only when that disturbs
it less than extrapolating. Sweeping the decision threshold or the number of
interpolated dimensions traces the trade-off.
"""

from ropedist import LLAMA2, plan_dprope, sweep
from ropedist.formats import plan_to_json

plan = plan_dprope(LLAMA2, 8192, n_hat=80)
print(plan.n_interpolated, "pairs interpolated")
print("".join("I" if s == "interpolate" else "." for s in plan.strategies))

# %%
# threshold: larger t keeps more pairs extrapolated
for row in sweep(LLAMA2, 8192, "t", [0.0, 0.01, 0.1, 1.0]):
    print(f"t={row.value:<5} aggregate={row.aggregate * 1e3:7.2f}e-3 interpolated={row.n_interpolated}")

# %%
# interpolated scalar dimensions
for row in sweep(LLAMA2, 8192, "n_hat", range(56, 97, 8)):
    print(f"n_hat={row.value:<3} aggregate={row.aggregate * 1e3:7.2f}e-3")

# %%
# interval count of the histogram
for row in sweep(LLAMA2, 8192, "b", [90, 180, 360, 720], n_hat=80):
    print(f"b={row.value:<4} aggregate={row.aggregate * 1e3:7.2f}e-3")

print(plan_to_json(plan)[:300])
