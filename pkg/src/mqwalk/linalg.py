"""Hamiltonians, spectra and propagators for the two-site model and open chains.

Basis convention for the two-site (single-qubit) model, shared by every
module in the package::

    index 0  <->  |01>  <->  particle on site 2
    index 1  <->  |10>  <->  particle on site 1

In this basis the two-site Hamiltonian is ``-gamma * sigma_x + u * sigma_z``.
It is traceless; the qubit encoding differs from it by a multiple of the
identity, which only contributes a global phase and never enters a detection
probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Absolute tolerances.  Construction-level checks (hermiticity, unitarity,
# normalisation) use ATOL_BUILD; derived quantities use ATOL_DERIVED.
ATOL_BUILD = 1e-12
ATOL_DERIVED = 1e-10

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the monitored walk.

    Attributes
    ----------
    gamma : float
        Hopping matrix element.  Negative values are allowed.
    u : float
        On-site potential.
    tau : float
        Stroboscopic period between two measurements.
    l : int
        Chain length; every two-site quantity requires ``l == 2``.
    """

    gamma: float
    u: float = 0.0
    tau: float = 1.0
    l: int = 2

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and math.isfinite(self.u)):
            raise ValueError(f"gamma and u must be finite, got {self.gamma!r}, {self.u!r}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be a positive finite number, got {self.tau!r}")
        if int(self.l) != self.l or self.l < 2:
            raise ValueError(f"chain length l must be an integer >= 2, got {self.l!r}")

    @property
    def omega(self) -> float:
        """Level half-splitting ``sqrt(u**2 + gamma**2)`` of the two-site model."""
        return math.hypot(self.u, self.gamma)


@dataclass(frozen=True)
class SpectralData:
    energies: np.ndarray
    eigenvectors: np.ndarray
    c_parameter: float | None


def is_hermitian(h: np.ndarray, atol: float = ATOL_BUILD) -> bool:
    h = np.asarray(h)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and np.allclose(h, h.conj().T, rtol=0, atol=atol)


def is_unitary(m: np.ndarray, atol: float = ATOL_BUILD) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) < atol


def _require_hermitian(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 2:
        raise ValueError(f"expected a square matrix of dimension >= 2, got shape {h.shape}")
    if not is_hermitian(h):
        raise ValueError("matrix is not Hermitian")
    return h


def build_two_site_hamiltonian(params: ModelParams) -> np.ndarray:
    """Return ``[[u, -gamma], [-gamma, -u]]`` in the (site 2, site 1) basis."""
    if params.l != 2:
        raise ValueError(f"two-site Hamiltonian requires l == 2, got l={params.l}")
    g, u = params.gamma, params.u
    return np.array([[u, -g], [-g, -u]], dtype=complex)


def build_chain_hamiltonian(params: ModelParams, potentials: Sequence[float] | None = None) -> np.ndarray:
    """Single-particle tight-binding matrix of an open chain of ``params.l`` sites.

    Off-diagonal nearest-neighbour entries are ``-gamma``; the diagonal holds
    ``potentials`` (one value per site) or the uniform ``params.u``.  Rows are
    chain positions ``0..l-1``.

    With ``l == 2`` and ``potentials=(u, -u)`` this is exactly
    :func:`build_two_site_hamiltonian`; a uniform potential ``u`` gives the
    two-site matrix at ``u=0`` shifted by ``u * I``.
    """
    l = params.l
    if potentials is None:
        diag = np.full(l, params.u, dtype=float)
    else:
        diag = np.asarray(potentials, dtype=float)
        if diag.shape != (l,):
            raise ValueError(f"expected {l} site potentials, got shape {diag.shape}")
        if not np.all(np.isfinite(diag)):
            raise ValueError("site potentials must be finite")
    h = np.diag(diag).astype(complex)
    off = np.arange(l - 1)
    h[off, off + 1] = -params.gamma
    h[off + 1, off] = -params.gamma
    return h


def pauli_components(h: np.ndarray) -> tuple[float, np.ndarray]:
    """Decompose a 2x2 Hermitian matrix as ``a0 * I + a . sigma``."""
    h = np.asarray(h, dtype=complex)
    a0 = 0.5 * (h[0, 0] + h[1, 1]).real
    a = np.array([h[0, 1].real, -h[0, 1].imag, 0.5 * (h[0, 0] - h[1, 1]).real])
    return a0, a


def _pauli_exponential(h: np.ndarray, t: float) -> np.ndarray:
    # exp(-i h t) = exp(-i a0 t) [cos(w t) I - i sin(w t) n.sigma],  w = |a|
    a0, a = pauli_components(h)
    w = float(np.linalg.norm(a))
    out = math.cos(w * t) * PAULI_I
    if w > 0:
        n = a / w
        n_sigma = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
        out = out - 1j * math.sin(w * t) * n_sigma
    return np.exp(-1j * a0 * t) * out


def exact_unitary(h: np.ndarray, t: float) -> np.ndarray:
    """Propagator ``exp(-i h t)``.

    Two-dimensional inputs use the closed Pauli form; larger ones go through
    the eigendecomposition of ``h``.
    """
    h = _require_hermitian(h)
    if h.shape[0] == 2:
        return _pauli_exponential(h, t)
    energies, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * energies * t)) @ vecs.conj().T


def spectral_data(h: np.ndarray, tau: float) -> SpectralData:
    """Sorted spectrum of ``h``; for 2x2 inputs also ``c = cos(omega * tau)``.

    ``omega`` is half the level splitting, which equals ``sqrt(u**2 + gamma**2)``
    for the two-site Hamiltonian.
    """
    h = _require_hermitian(h)
    energies, vecs = np.linalg.eigh(h)
    c = None
    if h.shape[0] == 2:
        _, a = pauli_components(h)
        c = math.cos(float(np.linalg.norm(a)) * tau)
    return SpectralData(energies=energies, eigenvectors=vecs, c_parameter=c)
