"""Stroboscopic detection: amplitude propagation and trajectory sampling.

A detection protocol starts the walker in basis state ``j``, evolves it for
one period with a unitary ``V``, and asks whether it sits in state ``d``.  The
first round ``n`` with a positive answer is the first-detection time.  Its
amplitude is ``<d| V (P V)**(n-1) |j>`` with ``P = 1 - |d><d|``.

:func:`amplitude_distribution` iterates that amplitude exactly.
:func:`sample_trajectories` instead draws Born-rule outcomes shot by shot,
with collapse, optional gate and readout noise, and the mitigation
post-processing wired into a :class:`~mqwalk.gates.Circuit`.

Sampling is vectorised over shots.  Shots are grouped in chunks of fixed
size; chunk ``i`` draws from a Philox stream keyed by ``(seed, *stream, i)``,
so results do not depend on how chunks are scheduled over workers.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .gates import (
    Circuit,
    DecodeOp,
    Gate,
    GateKind,
    Layout,
    MeasureOp,
    Mitigation,
    ResetOp,
    check_compatible,
    embed,
    gate_matrix,
    logical_to_register,
)
from .linalg import ATOL_BUILD
from .noise import NOISELESS, NoiseModel, depolarize_batch, flip_readout, majority_vote_batch

DEFAULT_CHUNK_SIZE = 4096


class Mode(str, enum.Enum):
    FDR = "FDR"
    FDT = "FDT"


@dataclass(frozen=True)
class DetectionProtocol:
    """Initial state ``j``, detected state ``d`` and number of rounds ``N``.

    For circuits the indices are logical site states (0 = site 2, 1 = site 1).
    """

    initial_state: int
    detect_state: int
    n_measurements: int
    mode: Mode | None = None

    def __post_init__(self):
        if self.n_measurements < 1:
            raise ValueError(f"n_measurements must be >= 1, got {self.n_measurements}")
        if self.initial_state < 0 or self.detect_state < 0:
            raise ValueError("basis indices must be non-negative")
        implied = Mode.FDR if self.initial_state == self.detect_state else Mode.FDT
        if self.mode is None:
            object.__setattr__(self, "mode", implied)
        elif Mode(self.mode) is not implied:
            raise ValueError(
                f"mode {Mode(self.mode).value} is inconsistent with initial={self.initial_state}, "
                f"detect={self.detect_state}"
            )
        else:
            object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def two_site(cls, initial_state: int, mode: Mode, n_measurements: int) -> "DetectionProtocol":
        if initial_state not in (0, 1):
            raise ValueError(f"two-site initial state must be 0 or 1, got {initial_state}")
        mode = Mode(mode)
        detect = initial_state if mode is Mode.FDR else 1 - initial_state
        return cls(initial_state, detect, n_measurements, mode)


@dataclass(frozen=True)
class DetectionMoments:
    mean: float
    second_moment: float
    variance: float
    detection_probability: float


@dataclass(frozen=True)
class FirstDetectionDistribution:
    """``probabilities[n-1]`` is the chance of first detection in round ``n``.

    ``n_shots`` is ``None`` for exact propagation; for sampled distributions
    it counts accepted shots and ``counts`` holds the raw tallies.
    """

    probabilities: np.ndarray
    undetected_mass: float
    n_shots: int | None = None
    counts: np.ndarray | None = None
    undetected_count: int | None = None
    rejected_shots: int = 0

    @property
    def n_measurements(self) -> int:
        return len(self.probabilities)

    @property
    def rejected_fraction(self) -> float:
        if self.n_shots is None:
            return 0.0
        total = self.n_shots + self.rejected_shots
        return self.rejected_shots / total if total else 0.0

    def moments(self) -> DetectionMoments:
        return detection_moments(self)

    def standard_error(self) -> float:
        """Standard error of the sampled mean; ``nan`` for exact distributions."""
        if not self.n_shots:
            return math.nan
        m = detection_moments(self)
        return math.sqrt(max(m.variance, 0.0) / self.n_shots)


def detection_moments(dist: FirstDetectionDistribution) -> DetectionMoments:
    """Truncated, unnormalised moments: undetected walks contribute zero."""
    p = np.asarray(dist.probabilities, dtype=float)
    n = np.arange(1, len(p) + 1, dtype=float)
    mean = float(n @ p)
    second = float((n * n) @ p)
    return DetectionMoments(mean, second, second - mean * mean, float(p.sum()))


def _check_evolution(evolution: np.ndarray, protocol: DetectionProtocol) -> np.ndarray:
    v = np.asarray(evolution, dtype=complex)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"evolution must be a square matrix, got shape {v.shape}")
    dim = v.shape[0]
    if max(protocol.initial_state, protocol.detect_state) >= dim:
        raise ValueError(f"protocol indices do not fit a {dim}-dimensional evolution")
    return v


def survival_amplitudes(evolution: np.ndarray, protocol: DetectionProtocol) -> np.ndarray:
    """Unnormalised states ``V (P V)**(n-1) |j>`` just before each measurement.

    Row ``n-1`` is the state entering round ``n``.
    """
    v = _check_evolution(evolution, protocol)
    d = protocol.detect_state
    psi = np.zeros(v.shape[0], dtype=complex)
    psi[protocol.initial_state] = 1.0
    out = np.empty((protocol.n_measurements, v.shape[0]), dtype=complex)
    for r in range(protocol.n_measurements):
        psi = v @ psi
        out[r] = psi
        psi = psi.copy()
        psi[d] = 0.0
    return out


def amplitude_distribution(evolution: np.ndarray, protocol: DetectionProtocol) -> FirstDetectionDistribution:
    """Exact first-detection probabilities ``|<d| V (P V)**(n-1) |j>|**2``."""
    amps = survival_amplitudes(evolution, protocol)
    d = protocol.detect_state
    probs = np.abs(amps[:, d]) ** 2
    last = amps[-1].copy()
    last[d] = 0.0
    return FirstDetectionDistribution(
        probabilities=probs,
        undetected_mass=float(np.vdot(last, last).real),
    )


def survival_probability(evolution: np.ndarray, protocol: DetectionProtocol, n: int) -> float:
    """Probability that the first ``n`` rounds all miss the detected state."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    v = _check_evolution(evolution, protocol)
    d = protocol.detect_state
    psi = np.zeros(v.shape[0], dtype=complex)
    psi[protocol.initial_state] = 1.0
    for _ in range(n):
        psi = v @ psi
        psi[d] = 0.0
    return float(np.vdot(psi, psi).real)


# --------------------------------------------------------------------------
# trajectory sampling


@dataclass
class _Tally:
    counts: np.ndarray
    undetected: int = 0
    rejected: int = 0

    def __iadd__(self, other: "_Tally") -> "_Tally":
        self.counts += other.counts
        self.undetected += other.undetected
        self.rejected += other.rejected
        return self


def _chunk_rng(seed: int, stream: tuple[int, ...], chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream) + (chunk,))
    return np.random.Generator(np.random.Philox(ss))


def _renormalize(states: np.ndarray) -> None:
    norms = np.sqrt(np.einsum("ij,ij->i", states.conj(), states).real)
    states /= norms[:, None]


def _run_exact_chunk(v, protocol, noise, n_shots, rng) -> _Tally:
    dim = v.shape[0]
    d = protocol.detect_state
    other = 1 - d if dim == 2 else None
    tally = _Tally(np.zeros(protocol.n_measurements, dtype=np.int64))
    states = np.zeros((n_shots, dim), dtype=complex)
    states[:, protocol.initial_state] = 1.0
    vt = v.T
    for r in range(protocol.n_measurements):
        if states.shape[0] == 0:
            break
        states = states @ vt
        p_det = np.abs(states[:, d]) ** 2
        hit = rng.random(states.shape[0]) < p_det
        if noise.has_readout_noise:
            outcome = np.where(hit, d, other).astype(np.int8)
            recorded = flip_readout(outcome, noise, rng) == d
        else:
            recorded = hit
        # collapse: detected rows land on |d>, the rest are projected off it
        phase = states[hit, d] / np.abs(states[hit, d])
        states[hit] = 0.0
        states[hit, d] = phase
        miss = ~hit
        states[miss, d] = 0.0
        if np.any(miss):
            sub = states[miss]
            _renormalize(sub)
            states[miss] = sub
        tally.counts[r] += int(recorded.sum())
        states = states[~recorded]
    tally.undetected += states.shape[0]
    return tally


@dataclass(frozen=True)
class _Step:
    kind: str
    matrix: np.ndarray | None = None
    targets: tuple[int, ...] = ()
    p_depol: float = 0.0
    layer: int = -1


def _compile(circuit: Circuit, noise: NoiseModel) -> list[_Step]:
    """Fuse runs of noiseless gates into single register unitaries."""
    nq = circuit.num_qubits
    steps: list[_Step] = []
    pending: np.ndarray | None = None

    def flush():
        nonlocal pending
        if pending is not None:
            steps.append(_Step("unitary", pending))
            pending = None

    for op in circuit.ops:
        if isinstance(op, Gate):
            if op.arity == 1:
                p = noise.depolarizing_1q
            elif op.kind is GateKind.CNOT and not noise.depolarize_encode:
                p = 0.0
            else:
                p = noise.depolarizing_2q
            full = embed(gate_matrix(op), op.targets, nq)
            pending = full if pending is None else full @ pending
            if p > 0:
                flush()
                steps.append(_Step("depolarize", targets=op.targets, p_depol=p))
        elif isinstance(op, MeasureOp):
            flush()
            steps.append(_Step("measure", targets=op.qubits, layer=op.layer))
        elif isinstance(op, DecodeOp):
            flush()
            steps.append(_Step("decode", layer=op.layer))
        elif isinstance(op, ResetOp):
            flush()
            steps.append(_Step("reset", targets=op.qubits))
    flush()
    return steps


def _bit_mask(q: int, nq: int) -> np.ndarray:
    idx = np.arange(2**nq)
    return ((idx >> (nq - 1 - q)) & 1).astype(bool)


def _measure_qubit(states: np.ndarray, q: int, nq: int, rng) -> np.ndarray:
    """Projective Z measurement of qubit ``q`` on every row; returns outcomes."""
    ones = _bit_mask(q, nq)
    p1 = np.sum(np.abs(states[:, ones]) ** 2, axis=1)
    outcome = rng.random(states.shape[0]) < p1
    states[np.ix_(outcome, ~ones)] = 0.0
    states[np.ix_(~outcome, ones)] = 0.0
    _renormalize(states)
    return outcome.astype(np.int8)


def _flip_matrix(q: int, nq: int) -> np.ndarray:
    perm = np.arange(2**nq) ^ (1 << (nq - 1 - q))
    return perm


def _run_circuit_chunk(circuit: Circuit, steps, protocol, noise, n_shots, rng) -> _Tally:
    nq = circuit.num_qubits
    d = protocol.detect_state
    mitigation = circuit.mitigation
    tally = _Tally(np.zeros(protocol.n_measurements, dtype=np.int64))
    states = np.zeros((n_shots, circuit.dim), dtype=complex)
    states[:, circuit.initial_state] = 1.0
    record = None

    for step in steps:
        if states.shape[0] == 0:
            break
        if step.kind == "unitary":
            states = states @ step.matrix.T
        elif step.kind == "depolarize":
            depolarize_batch(states, step.targets, step.p_depol, nq, rng)
        elif step.kind == "reset":
            for q in step.targets:
                flip = _measure_qubit(states, q, nq, rng).astype(bool)
                if np.any(flip):
                    states[flip] = states[flip][:, _flip_matrix(q, nq)]
        elif step.kind == "measure":
            true_bits = np.stack([_measure_qubit(states, q, nq, rng) for q in step.targets], axis=1)
            record = flip_readout(true_bits, noise, rng)
            if mitigation is Mitigation.REPETITION_MAJORITY:
                continue
            if mitigation is Mitigation.SECTOR_POSTSELECT:
                keep = record[:, 0] != record[:, 1]
                tally.rejected += int((~keep).sum())
                states, record = states[keep], record[keep]
            logical = record[:, 0]
            detected = logical == d
            tally.counts[step.layer] += int(detected.sum())
            states = states[~detected]
        elif step.kind == "decode":
            logical = majority_vote_batch(record)
            detected = logical == d
            tally.counts[step.layer] += int(detected.sum())
            states = states[~detected]
    tally.undetected += states.shape[0]
    return tally


Source = Union[np.ndarray, Circuit]


def sample_trajectories(
    source: Source,
    protocol: DetectionProtocol,
    noise: NoiseModel | None = None,
    mitigation: Mitigation | None = None,
    shots: int = 1000,
    seed: int | None = None,
    *,
    stream: tuple[int, ...] = (),
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int = 1,
) -> FirstDetectionDistribution:
    """Monte-Carlo first-detection statistics.

    ``source`` is either a one-period unitary (exact path, protocol indices
    are basis indices) or a protocol :class:`Circuit` (protocol indices are
    logical site states).  Gate noise and mitigation need a circuit; readout
    noise on the exact path is only defined for two-dimensional evolutions.
    The returned distribution is normalised over accepted shots.
    """
    if int(shots) != shots or shots < 1:
        raise ValueError(f"shots must be a positive integer, got {shots!r}")
    if seed is None:
        raise ValueError("an explicit seed is required for sampled runs")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    noise = NOISELESS if noise is None else noise

    if isinstance(source, Circuit):
        if mitigation is None:
            mitigation = source.mitigation
        mitigation = Mitigation(mitigation)
        check_compatible(source.layout, mitigation)
        if mitigation is not source.mitigation:
            raise ValueError(
                f"circuit was built for {source.mitigation.value}, sampler asked for {mitigation.value}"
            )
        if source.n_layers != protocol.n_measurements:
            raise ValueError(
                f"circuit has {source.n_layers} measurement rounds, protocol asks for {protocol.n_measurements}"
            )
        if max(protocol.initial_state, protocol.detect_state) > 1:
            raise ValueError("circuit protocols use logical states 0 and 1")
        expected = logical_to_register(protocol.initial_state, source.layout)
        if source.layout is Layout.SINGLE_QUBIT:
            expected <<= source.num_qubits - 1
        if source.initial_state != expected:
            raise ValueError("circuit initial state does not match the protocol")
        steps = _compile(source, noise)

        def run(n, rng):
            return _run_circuit_chunk(source, steps, protocol, noise, n, rng)

    else:
        v = _check_evolution(source, protocol)
        if np.max(np.abs(v.conj().T @ v - np.eye(v.shape[0]))) > 1e3 * ATOL_BUILD:
            raise ValueError("exact evolution must be unitary")
        if mitigation not in (None, Mitigation.NONE, "NONE"):
            raise ValueError("mitigation requires a circuit source")
        if noise.has_gate_noise:
            raise ValueError("gate noise requires a circuit source")
        if noise.has_readout_noise and v.shape[0] != 2:
            raise ValueError("readout noise on an exact evolution needs a two-dimensional system")

        def run(n, rng):
            return _run_exact_chunk(v, protocol, noise, n, rng)

    sizes = [chunk_size] * (shots // chunk_size)
    if shots % chunk_size:
        sizes.append(shots % chunk_size)

    def job(i):
        return run(sizes[i], _chunk_rng(seed, stream, i))

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]

    total = _Tally(np.zeros(protocol.n_measurements, dtype=np.int64))
    for part in parts:
        total += part

    accepted = shots - total.rejected
    if accepted:
        probs = total.counts / accepted
        undetected = total.undetected / accepted
    else:
        probs = np.zeros(protocol.n_measurements)
        undetected = 0.0
    return FirstDetectionDistribution(
        probabilities=probs,
        undetected_mass=undetected,
        n_shots=accepted,
        counts=total.counts,
        undetected_count=total.undetected,
        rejected_shots=total.rejected,
    )
