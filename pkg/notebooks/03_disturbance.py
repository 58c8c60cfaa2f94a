"""
Disturbance of the pre-trained distribution
===========================================

The disturbance of a pair is the smoothed KL divergence from its
pre-training histogram to the extended one. Averaging over pairs scores a
whole scaling method.
"""

from ropedist import LLAMA2, disturbance_of_thetas, extension_margins, plan_dprope, plan_pi, plan_yarn

for L2, n_hat in ((8192, 80), (16384, 64)):
    report = extension_margins(LLAMA2, L2)
    plans = {
        "PI": plan_pi(LLAMA2, L2),
        "YaRN": plan_yarn(LLAMA2, L2),
        "ours": plan_dprope(LLAMA2, L2, n_hat=n_hat, report=report),
    }
    scores = {k: disturbance_of_thetas(p.theta_hat, LLAMA2, L2).aggregate * 1e3 for k, p in plans.items()}
    print(L2, {k: round(v, 2) for k, v in scores.items()}, "(x1e-3)")

# %%
# The smoothing constant matters. Any interval the extended histogram fills
# but pre-training never saw contributes roughly ``F' log(F' / eps)``, so the
# absolute numbers scale with ``-log(eps)`` while the ranking stays put.
for eps in (1e-8, 1e-6, 1e-4, 4e-4):
    agg = disturbance_of_thetas(plan_pi(LLAMA2, 8192).theta_hat, LLAMA2, 8192, 360, eps).aggregate
    print(f"eps={eps:g}: PI at 8192 -> {agg * 1e3:.2f} x1e-3")
