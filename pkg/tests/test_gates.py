import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqwalk.evolution import DetectionProtocol, Mode
from mqwalk.gates import (
    Circuit,
    DecodeOp,
    Gate,
    GateKind,
    Layout,
    MeasureOp,
    Mitigation,
    ResetOp,
    TrotterPlan,
    apply_gate,
    build_protocol_circuit,
    embed,
    gate_matrix,
    sector_unitary,
    trotterized_unitary,
    two_qubit_hamiltonian,
)
from mqwalk.linalg import PAULI_X, ModelParams, build_two_site_hamiltonian, exact_unitary, is_unitary

from oracles import taylor_expm

XX = np.kron(PAULI_X, PAULI_X)
YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))
angles = st.floats(min_value=-10, max_value=10, allow_nan=False)


def trotter_error(params, k, layout=Layout.SINGLE_QUBIT):
    plan = TrotterPlan.from_steps(params.tau, k)
    if layout is Layout.SINGLE_QUBIT:
        exact = exact_unitary(build_two_site_hamiltonian(params), params.tau)
    else:
        exact = exact_unitary(two_qubit_hamiltonian(params), params.tau)
    return np.max(np.abs(trotterized_unitary(params, plan, layout) - exact))


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate(GateKind.RX, (0, 1), 0.1)
    with pytest.raises(ValueError):
        Gate(GateKind.RXX, (1, 1), 0.1)
    with pytest.raises(ValueError):
        Gate(GateKind.CNOT, (0, 1), 0.3)
    with pytest.raises(ValueError):
        Gate(GateKind.RZ, (0,))


def test_rx_examples():
    np.testing.assert_allclose(gate_matrix(Gate(GateKind.RX, (0,), 0.0)), np.eye(2), atol=0)
    g, dt = 0.8, 0.1
    printed = np.array(
        [[math.cos(g * dt), -1j * math.sin(g * dt)], [-1j * math.sin(g * dt), math.cos(g * dt)]]
    )
    np.testing.assert_allclose(gate_matrix(Gate(GateKind.RX, (0,), 2 * g * dt)), printed, atol=1e-15)
    # the hopping factor exp(+i gamma X dt) is RX(-2 gamma dt)
    np.testing.assert_allclose(
        gate_matrix(Gate(GateKind.RX, (0,), -2 * g * dt)), taylor_expm(1j * g * PAULI_X * dt), atol=1e-14
    )


def test_rz_matrix():
    u, dt = 1.3, 0.1
    np.testing.assert_allclose(
        gate_matrix(Gate(GateKind.RZ, (0,), 2 * u * dt)), np.diag([np.exp(-1j * u * dt), np.exp(1j * u * dt)])
    )


def test_rxx_ryy_block_matrix():
    g, dt = 0.9, 0.1
    theta = 2 * g * dt
    prod = gate_matrix(Gate(GateKind.RXX, (0, 1), theta)) @ gate_matrix(Gate(GateKind.RYY, (0, 1), theta))
    c, s = math.cos(2 * g * dt), math.sin(2 * g * dt)
    printed = np.array([[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, 1]])
    np.testing.assert_allclose(prod, printed, atol=1e-15)
    assert np.max(np.abs(prod - taylor_expm(-1j * theta / 2 * (XX + YY)))) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([GateKind.RX, GateKind.RZ, GateKind.RXX, GateKind.RYY, GateKind.CNOT]), angles)
def test_gates_unitary(kind, theta):
    targets = (0,) if kind in (GateKind.RX, GateKind.RZ) else (0, 1)
    g = Gate(kind, targets, None if kind is GateKind.CNOT else theta)
    assert is_unitary(gate_matrix(g))


def test_apply_gate_examples():
    psi = np.array([0.6, 0.8j])
    np.testing.assert_allclose(apply_gate(psi, Gate(GateKind.RX, (0,), 0.0)), psi)
    np.testing.assert_allclose(apply_gate(np.array([1, 0]), Gate(GateKind.RX, (0,), math.pi)), [0, -1j], atol=1e-15)


def test_apply_gate_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_gate(np.ones(3) / math.sqrt(3), Gate(GateKind.RX, (0,), 0.1))
    with pytest.raises(ValueError):
        apply_gate(np.array([1, 0]), Gate(GateKind.RXX, (0, 1), 0.1))


def test_apply_gate_matches_dense_and_conserves_sector():
    rng = np.random.default_rng(7)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    out = apply_gate(apply_gate(psi, Gate(GateKind.RYY, (0, 1), 0.7)), Gate(GateKind.RXX, (0, 1), 0.7))
    dense = gate_matrix(Gate(GateKind.RXX, (0, 1), 0.7)) @ gate_matrix(Gate(GateKind.RYY, (0, 1), 0.7)) @ psi
    np.testing.assert_allclose(out, dense, atol=1e-14)
    np.testing.assert_allclose(abs(out[0]) ** 2 + abs(out[3]) ** 2, abs(psi[0]) ** 2 + abs(psi[3]) ** 2, atol=1e-14)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)


def test_apply_gate_on_third_qubit_matches_kron():
    rng = np.random.default_rng(3)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    g = Gate(GateKind.RX, (2,), 0.4)
    dense = np.kron(np.eye(4), gate_matrix(g)) @ psi
    np.testing.assert_allclose(apply_gate(psi, g), dense, atol=1e-14)
    cnot = Gate(GateKind.CNOT, (0, 2))
    basis = np.zeros(8)
    basis[0b100] = 1
    np.testing.assert_allclose(apply_gate(basis, cnot), np.eye(8)[0b101])
    np.testing.assert_allclose(embed(gate_matrix(cnot), (0, 2), 3)[:, 0b100], np.eye(8)[0b101])


def test_trotter_exact_when_commuting():
    for k in (1, 2, 7, 30):
        assert trotter_error(ModelParams(gamma=-1.3, u=0.0, tau=3.0), k) < 1e-12
        assert trotter_error(ModelParams(gamma=-1.3, u=0.0, tau=3.0), k, Layout.TWO_QUBIT) < 1e-12


def test_trotter_first_order_scaling():
    p = ModelParams(gamma=-1, u=1, tau=3)
    errs = [trotter_error(p, k) for k in (30, 60, 120, 240)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    for r in ratios:
        assert r == pytest.approx(2.0, abs=0.3)


def test_trotter_rejects_bad_plan():
    with pytest.raises(ValueError):
        TrotterPlan(k=0, delta_t=0.1)
    with pytest.raises(ValueError):
        trotterized_unitary(ModelParams(1, 1, 3), TrotterPlan(k=30, delta_t=0.2))
    assert TrotterPlan.from_delta_t(3.0, 0.1).k == 30
    with pytest.raises(ValueError):
        TrotterPlan.from_delta_t(3.0, 0.7)


@settings(max_examples=30, deadline=None)
@given(angles, angles, st.floats(0.05, 3), st.integers(1, 20))
def test_two_qubit_sector_matches_single_qubit(gamma, u, tau, k):
    p = ModelParams(gamma, u, tau)
    plan = TrotterPlan.from_steps(tau, k)
    u4 = trotterized_unitary(p, plan, Layout.TWO_QUBIT)
    assert is_unitary(u4)
    # |00> and |11> only pick up phases
    for idx in (0, 3):
        assert abs(abs(u4[idx, idx]) - 1) < 1e-12
    np.testing.assert_allclose(sector_unitary(u4), trotterized_unitary(p, plan, Layout.SINGLE_QUBIT), atol=1e-12)
    np.testing.assert_allclose(
        sector_unitary(two_qubit_hamiltonian(p)), build_two_site_hamiltonian(p), atol=1e-15
    )


def protocol(n, mode=Mode.FDR, j=1):
    return DetectionProtocol.two_site(j, mode, n)


def test_smallest_circuit():
    c = build_protocol_circuit(ModelParams(1.0, 0.5, 0.4), TrotterPlan.from_steps(0.4, 1), protocol(1))
    kinds = [op.kind if isinstance(op, Gate) else type(op) for op in c.ops]
    assert kinds == [GateKind.RX, GateKind.RZ, MeasureOp]
    assert c.ops[-1] == MeasureOp((0,), 0)
    assert c.num_qubits == 1 and c.initial_state == 1 and c.n_layers == 1


def test_forty_layers():
    c = build_protocol_circuit(ModelParams(3.0, 0, 0.4), TrotterPlan.from_steps(0.4, 1), protocol(40))
    measures = [op for op in c.ops if isinstance(op, MeasureOp)]
    assert len(measures) == 40 and [m.layer for m in measures] == list(range(40))


def test_repetition_code_layers():
    c = build_protocol_circuit(
        ModelParams(3.0, 0, 0.4), TrotterPlan.from_steps(0.4, 1), protocol(2), mitigation=Mitigation.REPETITION_MAJORITY
    )
    assert c.num_qubits == 3 and c.initial_state == 0b100
    layer = c.ops[: len(c.ops) // 2]
    assert [g.targets for g in layer if isinstance(g, Gate) and g.kind is GateKind.CNOT] == [(0, 1), (0, 2)]
    assert [op for op in layer if isinstance(op, MeasureOp)] == [MeasureOp((0, 1, 2), 0)]
    assert DecodeOp(0) in layer and ResetOp((1, 2)) in layer


def test_two_qubit_circuit():
    p = ModelParams(3.0, 0.2, 0.4)
    plan = TrotterPlan.from_steps(0.4, 2)
    c = build_protocol_circuit(p, plan, protocol(3, j=0), Layout.TWO_QUBIT)
    assert c.num_qubits == 2 and c.initial_state == 0b01
    assert [op.qubits for op in c.ops if isinstance(op, MeasureOp)] == [(0,)] * 3
    c2 = build_protocol_circuit(p, plan, protocol(3, j=1), Layout.TWO_QUBIT, Mitigation.SECTOR_POSTSELECT)
    assert c2.initial_state == 0b10
    assert [op.qubits for op in c2.ops if isinstance(op, MeasureOp)] == [(0, 1)] * 3


def test_incompatible_mitigation_rejected():
    p, plan = ModelParams(1, 0, 0.4), TrotterPlan.from_steps(0.4, 1)
    with pytest.raises(ValueError):
        build_protocol_circuit(p, plan, protocol(2), Layout.TWO_QUBIT, Mitigation.REPETITION_MAJORITY)
    with pytest.raises(ValueError):
        build_protocol_circuit(p, plan, protocol(2), Layout.SINGLE_QUBIT, Mitigation.SECTOR_POSTSELECT)


def test_circuit_is_deterministic():
    args = (ModelParams(-1, 1, 3), TrotterPlan.from_steps(3, 30), protocol(5), Layout.SINGLE_QUBIT)
    assert build_protocol_circuit(*args) == build_protocol_circuit(*args)


def test_circuit_validation():
    with pytest.raises(ValueError):
        Circuit(num_qubits=1, ops=(Gate(GateKind.RXX, (0, 1), 0.1),))
    with pytest.raises(ValueError):
        Circuit(num_qubits=1, ops=(MeasureOp((0,), 1), MeasureOp((0,), 0)))


def test_draw():
    c = build_protocol_circuit(
        ModelParams(1, 0, 0.4), TrotterPlan.from_steps(0.4, 1), protocol(1), mitigation=Mitigation.REPETITION_MAJORITY
    )
    text = c.draw()
    lines = text.splitlines()
    assert len(lines) == 3 and lines[0].startswith("q0:")
    assert "MAJ0" in lines[0] and "|0>" in lines[1] and "X" in lines[2]
    long = build_protocol_circuit(ModelParams(1, 0, 0.4), TrotterPlan.from_steps(0.4, 1), protocol(40))
    assert "more ops" in long.draw(max_ops=10)
