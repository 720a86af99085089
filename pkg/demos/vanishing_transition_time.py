"""
Transition time near a degeneracy
=================================

Looking for the particle on the other site, the mean number of looks is
1/(1 - c^2), which blows up as c^2 -> 1.  With a finite number of looks
the picture flips: the walker is almost never found, and undetected runs
count as zero, so the truncated mean goes to 0.
"""

import math

import numpy as np

from mqwalk import Mode, analytic

n_looks = 40

print(f"{'1-c^2':>10} {'<n>_inf':>12} {'<n>_40':>10} {'P(found by 40)':>15}")
for gap in (0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-6, 0.0):
    c = math.sqrt(1 - gap)
    inf_mean = analytic.mean_fdt(c)
    m = analytic.truncated_moments(c, n_looks, Mode.FDT)
    print(f"{gap:10.0e} {inf_mean:12.5g} {m.mean:10.5f} {m.detection_probability:15.6f}")

# %%
# The pmf itself is geometric.
c = math.cos(0.4)
print("FDT pmf at c=cos(0.4):", np.round(analytic.pmf(c, 8, Mode.FDT), 4))
print("FDR pmf at c=cos(0.4):", np.round(analytic.pmf(c, 8, Mode.FDR), 4))
