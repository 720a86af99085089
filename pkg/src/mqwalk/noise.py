"""Readout and gate noise, repetition-code decoding and sector post-selection.

Depolarising noise is unravelled into Pauli insertions on individual
trajectories; the engine never carries a density matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields

import numpy as np

from .gates import apply_matrix
from .linalg import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z

_PAULIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True)
class NoiseModel:
    """Parametric noise.  The all-zero model is the exact noiseless limit.

    ``depolarize_encode`` also exposes the repetition-code CNOTs to
    ``depolarizing_2q``; by default only the evolution gates are noisy.
    """

    readout_flip_0to1: float = 0.0
    readout_flip_1to0: float = 0.0
    depolarizing_1q: float = 0.0
    depolarizing_2q: float = 0.0
    depolarize_encode: bool = False

    def __post_init__(self):
        for f in fields(self):
            if f.name == "depolarize_encode":
                continue
            p = getattr(self, f.name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{f.name} must lie in [0, 1], got {p!r}")

    @classmethod
    def symmetric_readout(cls, p: float, **kwargs) -> "NoiseModel":
        return cls(readout_flip_0to1=p, readout_flip_1to0=p, **kwargs)

    @property
    def has_readout_noise(self) -> bool:
        return self.readout_flip_0to1 > 0 or self.readout_flip_1to0 > 0

    @property
    def has_gate_noise(self) -> bool:
        return self.depolarizing_1q > 0 or self.depolarizing_2q > 0

    @property
    def is_noiseless(self) -> bool:
        return not (self.has_readout_noise or self.has_gate_noise)


NOISELESS = NoiseModel()


def flip_readout(bits: np.ndarray, model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Vectorised asymmetric bit flips on an integer array of recorded bits."""
    bits = np.asarray(bits, dtype=np.int8)
    if not model.has_readout_noise:
        return bits.copy()
    p_flip = np.where(bits == 1, model.readout_flip_1to0, model.readout_flip_0to1)
    flips = rng.random(bits.shape) < p_flip
    return bits ^ flips.astype(np.int8)


def apply_readout_noise(bit: int, model: NoiseModel, rng: np.random.Generator) -> int:
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return int(flip_readout(np.array([bit]), model, rng)[0])


def majority_vote(bits) -> int:
    bits = tuple(int(b) for b in bits)
    if len(bits) != 3 or any(b not in (0, 1) for b in bits):
        raise ValueError(f"majority vote needs exactly three bits, got {bits}")
    return int(sum(bits) >= 2)


def majority_vote_batch(bits: np.ndarray) -> np.ndarray:
    """Row-wise majority of an ``(m, 3)`` bit array."""
    bits = np.asarray(bits)
    if bits.ndim != 2 or bits.shape[1] != 3:
        raise ValueError(f"expected shape (m, 3), got {bits.shape}")
    return (bits.sum(axis=1) >= 2).astype(np.int8)


def majority_residual_error(p: float) -> float:
    """Logical error of a 3-bit majority vote under independent flips of probability ``p``."""
    return 3 * p**2 - 2 * p**3


def sector_postselect(record) -> int | None:
    """Map a two-bit readout ``(q0, q1)`` to a site, or ``None`` to reject.

    ``01`` is site 2 and ``10`` is site 1; ``00`` and ``11`` leave the
    single-particle sector and are rejected.
    """
    if isinstance(record, str):
        record = tuple(int(ch) for ch in record)
    q0, q1 = (int(b) for b in record)
    if (q0, q1) == (0, 1):
        return 2
    if (q0, q1) == (1, 0):
        return 1
    if q0 in (0, 1) and q1 in (0, 1):
        return None
    raise ValueError(f"invalid two-bit record {record!r}")


def site_to_logical(site: int) -> int:
    return {2: 0, 1: 1}[site]


def pauli_strings(n_targets: int) -> list[np.ndarray]:
    """All non-identity Pauli products on ``n_targets`` qubits."""
    out = []
    for combo in itertools.product(range(4), repeat=n_targets):
        if any(combo):
            m = np.array([[1.0 + 0j]])
            for c in combo:
                m = np.kron(m, _PAULIS[c])
            out.append(m)
    return out


def depolarize_batch(
    states: np.ndarray,
    targets: tuple[int, ...],
    p: float,
    num_qubits: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """In-place Pauli unravelling of the depolarising channel on a batch of states.

    Each row independently receives, with probability ``p``, a uniformly drawn
    non-identity Pauli on ``targets``.
    """
    if p <= 0 or states.shape[0] == 0:
        return states
    hit = np.flatnonzero(rng.random(states.shape[0]) < p)
    if hit.size == 0:
        return states
    paulis = pauli_strings(len(targets))
    choice = rng.integers(len(paulis), size=hit.size)
    for i, pauli in enumerate(paulis):
        rows = hit[choice == i]
        if rows.size:
            states[rows] = apply_matrix(states[rows], pauli, targets, num_qubits)
    return states


def apply_depolarizing(state: np.ndarray, targets, p: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    state = np.array(state, dtype=complex)
    num_qubits = state.shape[-1].bit_length() - 1
    batch = state.reshape(1, -1)
    depolarize_batch(batch, tuple(targets), p, num_qubits, rng)
    return batch.reshape(state.shape)
