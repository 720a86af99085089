"""
From Hamiltonian to circuit
===========================

One period of the two-site walk becomes k slices of rotation gates on one
qubit, or on two qubits with the particle stored as |01> or |10>.
"""

import numpy as np

from mqwalk import Layout, ModelParams, TrotterPlan, build_protocol_circuit, trotterized_unitary
from mqwalk.evolution import DetectionProtocol, Mode
from mqwalk.gates import Mitigation, sector_unitary
from mqwalk.linalg import build_two_site_hamiltonian, exact_unitary

params = ModelParams(gamma=-1.0, u=1.0, tau=3.0)
exact = exact_unitary(build_two_site_hamiltonian(params), params.tau)

# %%
# First-order splitting: the error halves each time k doubles.
print(f"{'k':>5} {'max |V_k - V|':>14}")
for k in (15, 30, 60, 120, 240):
    v_k = trotterized_unitary(params, TrotterPlan.from_steps(params.tau, k))
    print(f"{k:5d} {np.max(np.abs(v_k - exact)):14.3e}")

# %%
# Two qubits: the hopping is an XX+YY rotation and never leaves the
# {|01>, |10>} sector, where it matches the one-qubit product exactly.
plan = TrotterPlan.from_steps(params.tau, 30)
u4 = trotterized_unitary(params, plan, Layout.TWO_QUBIT)
one = trotterized_unitary(params, plan)
print("sector block vs one-qubit product:", np.max(np.abs(sector_unitary(u4) - one)))
print("leak out of sector:", np.max(np.abs(u4[np.ix_([1, 2], [0, 3])])))

# %%
# The monitored protocol as a circuit: slices, then a mid-circuit measurement.
protocol = DetectionProtocol.two_site(1, Mode.FDR, 2)
small = build_protocol_circuit(ModelParams(3.0, 0.0, 0.4), TrotterPlan.from_steps(0.4, 1), protocol,
                               mitigation=Mitigation.REPETITION_MAJORITY)
print(small.draw())
