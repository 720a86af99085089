"""
Quantized mean return time
==========================

A particle hops between two sites and is looked for on its starting site
every tau.  The mean number of looks until it is first found there is 2,
whatever the hopping, except where one period brings it back with
certainty.  There it is 1.
"""

import math

import numpy as np

from mqwalk import DetectionProtocol, Mode, ModelParams, amplitude_distribution, analytic
from mqwalk.linalg import build_two_site_hamiltonian, exact_unitary

tau = 0.4
n_looks = 40

# %%
# Exact propagation of the monitored walk across a hopping sweep.
print(f"{'gamma':>8} {'<n>_N':>10} {'P(found)':>10}")
for gamma in np.linspace(0.0, 16.0, 17):
    params = ModelParams(gamma=gamma, u=0.0, tau=tau)
    v = exact_unitary(build_two_site_hamiltonian(params), tau)
    dist = amplitude_distribution(v, DetectionProtocol.two_site(1, Mode.FDR, n_looks))
    m = dist.moments()
    print(f"{gamma:8.2f} {m.mean:10.5f} {m.detection_probability:10.5f}")

# %%
# The dips sit at gamma = pi k / tau.
dips = analytic.degenerate_potentials(0.0, tau, 2).gamma_degeneracies
print("degenerate hoppings:", np.round(dips, 4))

# %%
# Near a dip the walk returns almost surely each period, so 40 looks are not
# enough to see the plateau value: the truncated mean sags below 2.
for gamma in (dips[0] - 0.5, dips[0] - 0.1, dips[0]):
    c = analytic.c_parameter(ModelParams(gamma, 0.0, tau))
    print(f"gamma={gamma:.3f}  c^2={c * c:.5f}  <n>_40={analytic.truncated_moments(c, n_looks, Mode.FDR).mean:.4f}"
          f"  <n>_inf={analytic.mean_fdr(c):g}")

# %%
# With an on-site potential the plateau survives and the dips move to
# U_d = sqrt((pi k / tau)^2 - gamma^2).
deg = analytic.degenerate_potentials(-1.0, 3.0, 3)
print("U_d for gamma=-1, tau=3:", np.round(deg.potentials, 4))
for u in (0.0, deg.potentials[0], 1.0, deg.potentials[1]):
    p = ModelParams(-1.0, u, 3.0)
    r = analytic.return_amplitude(p)
    print(f"U={u:.4f}  <n>_40={analytic.truncated_moments(r, n_looks, Mode.FDR).mean:.4f}")
print(f"mean FDR at c=cos(0.4): {analytic.mean_fdr(math.cos(0.4))}")
