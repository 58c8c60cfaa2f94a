"""
Angle distributions of pairs 6 and 22
=====================================

Bucket every angle a pair visits during pre-training into 360 intervals and
compare with what extension by ``s = 2`` produces under each strategy.
"""

from ropedist import LLAMA2, base_theta, estimate_histogram
from ropedist.distribution import base_distribution
from ropedist.disturbance import ood_bins

old_set = base_distribution(LLAMA2, 360)
th = base_theta(LLAMA2)

for i in (6, 22):
    old = old_set[i]
    ext = estimate_histogram(th[i], 8192, 360, dim_pair=i)
    intp = estimate_histogram(th[i] / 2, 8192, 360, dim_pair=i)
    print(f"pair {i}: pre-trained support {old.support().sum()} of 360 intervals")
    print(f"  extrapolate: {ood_bins(ext, old).sum():3d} unseen intervals, support {ext.support().sum()}")
    print(f"  interpolate: {ood_bins(intp, old).sum():3d} unseen intervals, support {intp.support().sum()}")

# Pair 6 already covers almost the whole circle, so both options stay in
# distribution. Pair 22 only covers an arc of the circle: halving theta
# lands half of the new angles in the gaps between pre-trained ones, while
# extrapolation only runs a little past the arc. Interpolation is the worse
# choice for pair 22.

# plot-ready export: ropedist estimate --dims 6,22 --format csv
