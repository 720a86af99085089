"""Gate library, Trotterised evolution and the protocol circuits.

Qubit ordering is big-endian: qubit 0 is the leftmost label and the most
significant bit of a basis index, so ``|q0 q1>`` has index ``2*q0 + q1``.
In the two-qubit layout the logical (site) states are ``|01>`` (logical 0,
site 2) and ``|10>`` (logical 1, site 1); qubit 0 alone carries the logical
value.

Rotation gates follow the usual convention ``R_P(theta) = exp(-i theta P / 2)``.
One Trotter slice of the two-site model applies ``RX(-2 gamma dt)`` followed by
``RZ(2 u dt)``, which converges to ``exp(-i H tau)`` for
``H = -gamma X + u Z``.  The two-qubit slice uses ``RXX(-gamma dt) RYY(-gamma dt)``
and ``RZ(2 u dt)`` on qubit 0; on the ``{|01>, |10>}`` sector it is identical
to the single-qubit slice.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .linalg import ATOL_BUILD, PAULI_X, PAULI_Y, PAULI_Z, ModelParams


class GateKind(str, enum.Enum):
    RX = "RX"
    RZ = "RZ"
    RXX = "RXX"
    RYY = "RYY"
    CNOT = "CNOT"


class Layout(str, enum.Enum):
    SINGLE_QUBIT = "SINGLE_QUBIT"
    TWO_QUBIT = "TWO_QUBIT"


class Mitigation(str, enum.Enum):
    NONE = "NONE"
    REPETITION_MAJORITY = "REPETITION_MAJORITY"
    SECTOR_POSTSELECT = "SECTOR_POSTSELECT"


_ARITY = {GateKind.RX: 1, GateKind.RZ: 1, GateKind.RXX: 2, GateKind.RYY: 2, GateKind.CNOT: 2}

# Sector basis indices of the two-qubit register: logical 0 = |01>, logical 1 = |10>.
SECTOR_INDICES = (1, 2)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != _ARITY[kind]:
            raise ValueError(f"{kind.value} takes {_ARITY[kind]} target(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{kind.value} targets must be distinct, got {self.targets}")
        if min(self.targets) < 0:
            raise ValueError(f"negative qubit index in {self.targets}")
        if kind is GateKind.CNOT:
            if self.angle is not None:
                raise ValueError("CNOT takes no angle")
        elif self.angle is None or not math.isfinite(self.angle):
            raise ValueError(f"{kind.value} needs a finite angle")

    @property
    def arity(self) -> int:
        return len(self.targets)

    def label(self) -> str:
        if self.angle is None:
            return self.kind.value
        return f"{self.kind.value}({self.angle:.4g})"


@dataclass(frozen=True)
class MeasureOp:
    """Computational-basis measurement of ``qubits`` belonging to round ``layer``."""

    qubits: tuple[int, ...]
    layer: int


@dataclass(frozen=True)
class DecodeOp:
    """Classical majority vote over the bits recorded in round ``layer``."""

    layer: int


@dataclass(frozen=True)
class ResetOp:
    qubits: tuple[int, ...]


Op = Union[Gate, MeasureOp, DecodeOp, ResetOp]


@dataclass(frozen=True)
class TrotterPlan:
    k: int
    delta_t: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"number of Trotter steps must be an integer >= 1, got {self.k!r}")

    @classmethod
    def from_steps(cls, tau: float, k: int) -> "TrotterPlan":
        if int(k) != k or k < 1:
            raise ValueError(f"number of Trotter steps must be an integer >= 1, got {k!r}")
        return cls(k=int(k), delta_t=tau / k)

    @classmethod
    def from_delta_t(cls, tau: float, delta_t: float) -> "TrotterPlan":
        k = round(tau / delta_t)
        if k < 1 or abs(k * delta_t - tau) > 1e-9 * max(1.0, tau):
            raise ValueError(f"tau={tau} is not an integer multiple of delta_t={delta_t}")
        return cls(k=k, delta_t=tau / k)

    def check(self, tau: float) -> None:
        if abs(self.k * self.delta_t - tau) > ATOL_BUILD * max(1.0, abs(tau)):
            raise ValueError(f"plan k*delta_t={self.k * self.delta_t} does not match tau={tau}")


@dataclass(frozen=True)
class Circuit:
    """Flat, strictly sequential gate/measurement program.

    ``initial_state`` is the computational basis index the register starts in.
    ``n_layers`` counts measurement rounds.
    """

    num_qubits: int
    ops: tuple[Op, ...]
    initial_state: int = 0
    layout: Layout = Layout.SINGLE_QUBIT
    mitigation: Mitigation = Mitigation.NONE
    n_layers: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        last = -1
        for op in self.ops:
            qubits = op.targets if isinstance(op, Gate) else getattr(op, "qubits", ())
            if any(q >= self.num_qubits for q in qubits):
                raise ValueError(f"{op} addresses a qubit outside a {self.num_qubits}-qubit register")
            if isinstance(op, MeasureOp):
                if op.layer < last:
                    raise ValueError("measurement records must appear in program order")
                last = op.layer
        if not 0 <= self.initial_state < 2**self.num_qubits:
            raise ValueError(f"initial_state {self.initial_state} out of range")
        if not self.n_layers:
            object.__setattr__(self, "n_layers", last + 1)

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    def gates(self) -> list[Gate]:
        return [op for op in self.ops if isinstance(op, Gate)]

    def draw(self, max_ops: int | None = 60) -> str:
        return draw(self, max_ops)


def _rotation(pauli: np.ndarray, theta: float) -> np.ndarray:
    # pauli squares to the identity, so exp(-i theta P / 2) = cos I - i sin P
    return math.cos(theta / 2) * np.eye(pauli.shape[0]) - 1j * math.sin(theta / 2) * pauli


_XX = np.kron(PAULI_X, PAULI_X)
_YY = np.kron(PAULI_Y, PAULI_Y)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def gate_matrix(g: Gate) -> np.ndarray:
    """Matrix of ``g`` on its own targets, first target most significant."""
    if g.kind is GateKind.RX:
        return _rotation(PAULI_X, g.angle)
    if g.kind is GateKind.RZ:
        return _rotation(PAULI_Z, g.angle)
    if g.kind is GateKind.RXX:
        return _rotation(_XX, g.angle)
    if g.kind is GateKind.RYY:
        return _rotation(_YY, g.angle)
    return _CNOT.copy()


def apply_matrix(states: np.ndarray, matrix: np.ndarray, targets: tuple[int, ...], num_qubits: int) -> np.ndarray:
    """Apply a ``2**t x 2**t`` matrix on ``targets`` to one state or a batch (last axis)."""
    states = np.asarray(states, dtype=complex)
    batch = states.shape[:-1]
    t = len(targets)
    psi = states.reshape(batch + (2,) * num_qubits)
    axes = [len(batch) + q for q in targets]
    op = np.asarray(matrix).reshape((2,) * (2 * t))
    # contract the gate's input legs with the target axes, then restore order
    out = np.tensordot(psi, op, axes=(axes, list(range(t, 2 * t))))
    out = np.moveaxis(out, list(range(out.ndim - t, out.ndim)), axes)
    return out.reshape(states.shape)


def embed(matrix: np.ndarray, targets: tuple[int, ...], num_qubits: int) -> np.ndarray:
    """Full ``2**n x 2**n`` matrix of a gate acting on ``targets``."""
    dim = 2**num_qubits
    # rows of apply_matrix(I) are (M e_i)^T, so the full matrix is the transpose
    return apply_matrix(np.eye(dim, dtype=complex), matrix, targets, num_qubits).T


def apply_gate(state: np.ndarray, g: Gate) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    n = state.shape[-1]
    num_qubits = n.bit_length() - 1
    if n < 2 or 2**num_qubits != n:
        raise ValueError(f"state length {n} is not a power of two")
    if max(g.targets) >= num_qubits:
        raise ValueError(f"{g.kind.value} on qubits {g.targets} does not fit a {num_qubits}-qubit state")
    return apply_matrix(state, gate_matrix(g), g.targets, num_qubits)


def trotter_slice(params: ModelParams, delta_t: float, layout: Layout) -> list[Gate]:
    layout = Layout(layout)
    if layout is Layout.SINGLE_QUBIT:
        return [
            Gate(GateKind.RX, (0,), -2.0 * params.gamma * delta_t),
            Gate(GateKind.RZ, (0,), 2.0 * params.u * delta_t),
        ]
    return [
        Gate(GateKind.RXX, (0, 1), -params.gamma * delta_t),
        Gate(GateKind.RYY, (0, 1), -params.gamma * delta_t),
        Gate(GateKind.RZ, (0,), 2.0 * params.u * delta_t),
    ]


def trotterized_unitary(params: ModelParams, plan: TrotterPlan, layout: Layout = Layout.SINGLE_QUBIT) -> np.ndarray:
    """First-order product ``(slice)**k`` as a 2x2 or 4x4 matrix."""
    if plan.k < 1:
        raise ValueError(f"k must be >= 1, got {plan.k}")
    plan.check(params.tau)
    layout = Layout(layout)
    nq = 1 if layout is Layout.SINGLE_QUBIT else 2
    step = np.eye(2**nq, dtype=complex)
    for g in trotter_slice(params, plan.delta_t, layout):
        step = embed(gate_matrix(g), g.targets, nq) @ step
    return np.linalg.matrix_power(step, plan.k)


def sector_unitary(u4: np.ndarray) -> np.ndarray:
    """Restrict a two-qubit operator to the ``{|01>, |10>}`` sector (logical basis)."""
    idx = np.array(SECTOR_INDICES)
    return np.asarray(u4)[np.ix_(idx, idx)]


def two_qubit_hamiltonian(params: ModelParams) -> np.ndarray:
    """``-(gamma/2)(XX + YY) + u Z_0``: the two-site model embedded in two qubits."""
    return -0.5 * params.gamma * (_XX + _YY) + params.u * np.kron(PAULI_Z, np.eye(2))


def logical_to_register(logical: int, layout: Layout) -> int:
    """Register basis index that encodes a logical site state."""
    if logical not in (0, 1):
        raise ValueError(f"logical state must be 0 or 1, got {logical}")
    if Layout(layout) is Layout.SINGLE_QUBIT:
        return logical
    return SECTOR_INDICES[logical]


def check_compatible(layout: Layout, mitigation: Mitigation) -> None:
    layout, mitigation = Layout(layout), Mitigation(mitigation)
    if mitigation is Mitigation.REPETITION_MAJORITY and layout is not Layout.SINGLE_QUBIT:
        raise ValueError("repetition-code mitigation requires the SINGLE_QUBIT layout")
    if mitigation is Mitigation.SECTOR_POSTSELECT and layout is not Layout.TWO_QUBIT:
        raise ValueError("sector post-selection requires the TWO_QUBIT layout")


def build_protocol_circuit(
    params: ModelParams,
    plan: TrotterPlan,
    protocol,
    layout: Layout = Layout.SINGLE_QUBIT,
    mitigation: Mitigation = Mitigation.NONE,
) -> Circuit:
    """Emit the monitored-walk circuit for ``protocol.n_measurements`` rounds.

    * single qubit, no mitigation: ``k`` slices then measure qubit 0;
    * single qubit, repetition code: slices, ``CNOT(0,1)``, ``CNOT(0,2)``,
      measure all three qubits, majority-vote decode, reset the two ancillas;
    * two qubits: ``k`` two-qubit slices, then measure qubit 0, or both qubits
      when sector post-selection is requested.
    """
    layout, mitigation = Layout(layout), Mitigation(mitigation)
    check_compatible(layout, mitigation)
    plan.check(params.tau)
    if layout is Layout.SINGLE_QUBIT:
        nq = 3 if mitigation is Mitigation.REPETITION_MAJORITY else 1
        initial = protocol.initial_state << (nq - 1)
    else:
        nq = 2
        initial = logical_to_register(protocol.initial_state, layout)

    slice_gates = trotter_slice(params, plan.delta_t, layout)
    ops: list[Op] = []
    for layer in range(protocol.n_measurements):
        for _ in range(plan.k):
            ops.extend(slice_gates)
        if mitigation is Mitigation.REPETITION_MAJORITY:
            ops += [
                Gate(GateKind.CNOT, (0, 1)),
                Gate(GateKind.CNOT, (0, 2)),
                MeasureOp((0, 1, 2), layer),
                DecodeOp(layer),
                ResetOp((1, 2)),
            ]
        elif mitigation is Mitigation.SECTOR_POSTSELECT:
            ops.append(MeasureOp((0, 1), layer))
        else:
            ops.append(MeasureOp((0,), layer))
    return Circuit(
        num_qubits=nq,
        ops=tuple(ops),
        initial_state=initial,
        layout=layout,
        mitigation=mitigation,
        n_layers=protocol.n_measurements,
    )


def draw(circuit: Circuit, max_ops: int | None = 60) -> str:
    """Plain-text diagram, one wire per qubit.  Long circuits are elided."""
    ops = circuit.ops if max_ops is None else circuit.ops[:max_ops]
    wires = [f"q{q}: " for q in range(circuit.num_qubits)]
    for op in ops:
        if isinstance(op, Gate):
            if op.kind is GateKind.CNOT:
                cells = {op.targets[0]: "@", op.targets[1]: "X"}
            else:
                cells = {t: op.label() for t in op.targets}
        elif isinstance(op, MeasureOp):
            cells = {q: f"M{op.layer}" for q in op.qubits}
        elif isinstance(op, DecodeOp):
            cells = {0: f"MAJ{op.layer}"}
        else:
            cells = {q: "|0>" for q in op.qubits}
        width = max(len(c) for c in cells.values())
        for q in range(circuit.num_qubits):
            wires[q] += "-" + cells.get(q, "").center(width, "-") + "-"
    if max_ops is not None and len(circuit.ops) > max_ops:
        wires = [w + " ..." for w in wires]
        wires.append(f"({len(circuit.ops) - max_ops} more ops, {circuit.n_layers} measurement rounds)")
    return "\n".join(wires)
