"""Closed-form first-detection statistics of the two-site model.

Everything is a function of the return amplitude ``c = cos(omega * tau)``
with ``omega = sqrt(u**2 + gamma**2)``; write ``q = c**2``.  That is the
exact one-period return probability only at ``u = 0``.  For general ``u`` the
same formulas hold with ``q = |<j|V|j>|**2 = 1 - (gamma/omega)**2 sin(omega tau)**2``,
see :func:`return_amplitude`.  Both agree on where ``q = 1``.

First detected return (FDR)::

    p_1 = q,        p_n = (1 - q)**2 * q**(n - 2)    (n >= 2)

First detected transition (FDT)::

    p_n = (1 - q) * q**(n - 1)

Finite-N moments
----------------
With ``A_M(k) = sum_{m=0}^{M-1} m**k q**m`` (k = 0, 1, 2)::

    A_M(0) = (1 - q**M) / (1 - q)
    A_M(1) = q (1 - M q**(M-1) + (M-1) q**M) / (1 - q)**2
    A_M(2) = q (1 + q - M**2 q**(M-1) + (2M**2 - 2M - 1) q**M
                - (M-1)**2 q**(M+1)) / (1 - q)**3

the truncated sums over ``n = 1..N`` are, substituting ``n = m + 1`` (FDT)
or ``n = m + 2`` (FDR, M = N - 1)::

    FDT  sum n p_n   = (1 - q) (A1 + A0)
         sum n^2 p_n = (1 - q) (A2 + 2 A1 + A0)
         sum p_n     = 1 - q**N
    FDR  sum n p_n   = q + (1 - q)**2 (A1 + 2 A0)
         sum n^2 p_n = q + (1 - q)**2 (A2 + 4 A1 + 4 A0)
         sum p_n     = 1 - (1 - q) q**(N-1)

Moments are not conditioned on detection: undetected walks contribute zero.
That is why the finite-N FDT mean goes to zero, not to infinity, as
``q -> 1``.  Close to ``q = 1`` the divided differences above lose precision,
so the same sums are evaluated term by term there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .evolution import DetectionMoments, Mode
from .linalg import ModelParams

# |c^2 - 1| below DEGENERATE_ATOL is treated as exactly degenerate;
# below NEAR_DEGENERATE_ATOL finite-N effects dominate and callers are warned.
DEGENERATE_ATOL = 1e-12
NEAR_DEGENERATE_ATOL = 1e-6

# 1 - q below this switches the truncated moments to direct summation.
_CLOSED_FORM_MIN_GAP = 1e-2


@dataclass(frozen=True)
class DegeneracySet:
    """Potentials ``U_d`` (and hoppings ``gamma_d`` at ``U = 0``) with ``c**2 == 1``."""

    tau: float
    gamma: float
    potentials: np.ndarray
    orders: np.ndarray
    gamma_degeneracies: np.ndarray = field(default_factory=lambda: np.empty(0))


def c_parameter(params: ModelParams) -> float:
    if params.l != 2:
        raise ValueError(f"c parameter is defined for the two-site model only, got l={params.l}")
    return math.cos(params.omega * params.tau)


def return_amplitude(params: ModelParams) -> float:
    """``|<j|exp(-i H tau)|j>|``, the amplitude that enters the pmfs for any ``u``.

    Equals ``|c_parameter(params)|`` when ``u == 0``.
    """
    if params.l != 2:
        raise ValueError(f"return amplitude is defined for the two-site model only, got l={params.l}")
    w = params.omega
    if w == 0.0:
        return 1.0
    s = math.sin(w * params.tau)
    return math.sqrt(max(0.0, 1.0 - (params.gamma / w) ** 2 * s * s))


def is_degenerate(c: float, atol: float = DEGENERATE_ATOL) -> bool:
    return abs(c * c - 1.0) < atol


def is_near_degenerate(c: float) -> bool:
    return is_degenerate(c, NEAR_DEGENERATE_ATOL)


def _check_c(c: float) -> float:
    if not abs(c) <= 1 + 1e-12:
        raise ValueError(f"|c| must not exceed 1, got {c!r}")
    return min(c * c, 1.0)


def fdr_pmf(c: float, n: int) -> float:
    q = _check_c(c)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return q
    return (1 - q) ** 2 * q ** (n - 2)


def fdt_pmf(c: float, n: int) -> float:
    q = _check_c(c)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return (1 - q) * q ** (n - 1)


def pmf(c: float, n_max: int, mode: Mode) -> np.ndarray:
    """Vector ``[p_1, ..., p_{n_max}]`` for the given detection mode."""
    q = _check_c(c)
    n = np.arange(1, n_max + 1)
    if Mode(mode) is Mode.FDT:
        return (1 - q) * q ** (n - 1)
    out = (1 - q) ** 2 * q ** np.maximum(n - 2, 0).astype(float)
    out[0] = q
    return out


def mean_fdr(c: float) -> float:
    _check_c(c)
    return 1.0 if is_degenerate(c) else 2.0


def mean_fdt(c: float) -> float:
    """Infinite-N FDT mean ``1 / (1 - c**2)``; grows without bound near degeneracy."""
    q = _check_c(c)
    return 0.0 if is_degenerate(c) else 1.0 / (1.0 - q)


def fdt_total(c: float) -> float:
    _check_c(c)
    return 0.0 if is_degenerate(c) else 1.0


def _power_sums(q: float, m: int) -> tuple[float, float, float]:
    if m <= 0:
        return 0.0, 0.0, 0.0
    r = 1.0 - q
    qm1 = q ** (m - 1)
    qm = qm1 * q
    a0 = (1 - qm) / r
    a1 = q * (1 - m * qm1 + (m - 1) * qm) / r**2
    a2 = q * (1 + q - m * m * qm1 + (2 * m * m - 2 * m - 1) * qm - (m - 1) ** 2 * qm * q) / r**3
    return a0, a1, a2


def _direct_moments(q: float, n_measurements: int, mode: Mode) -> tuple[float, float, float]:
    n = np.arange(1, n_measurements + 1, dtype=float)
    if mode is Mode.FDT:
        p = (1 - q) * q ** (n - 1)
    else:
        p = (1 - q) ** 2 * q ** np.maximum(n - 2, 0)
        p[0] = q
    return float(p.sum()), float(n @ p), float((n * n) @ p)


def truncated_moments(c: float, n_measurements: int, mode: Mode) -> DetectionMoments:
    """Moments of the first-detection time over the first ``n_measurements`` rounds."""
    q = _check_c(c)
    mode = Mode(mode)
    if n_measurements < 1:
        raise ValueError(f"n_measurements must be >= 1, got {n_measurements}")
    N = n_measurements

    if is_degenerate(c):
        if mode is Mode.FDT:
            total = mean = second = 0.0
        else:
            total = mean = second = 1.0
    elif 1 - q < _CLOSED_FORM_MIN_GAP:
        total, mean, second = _direct_moments(q, N, mode)
    elif mode is Mode.FDT:
        a0, a1, a2 = _power_sums(q, N)
        r = 1 - q
        total = 1 - q**N
        mean = r * (a1 + a0)
        second = r * (a2 + 2 * a1 + a0)
    else:
        a0, a1, a2 = _power_sums(q, N - 1)
        r2 = (1 - q) ** 2
        total = 1 - (1 - q) * q ** (N - 1)
        mean = q + r2 * (a1 + 2 * a0)
        second = q + r2 * (a2 + 4 * a1 + 4 * a0)

    return DetectionMoments(
        mean=mean,
        second_moment=second,
        variance=second - mean * mean,
        detection_probability=total,
    )


def degenerate_potentials(gamma: float, tau: float, k_max: int) -> DegeneracySet:
    """Potentials ``U_d = sqrt((pi k / tau)**2 - gamma**2)`` for ``k = 1..k_max``.

    Orders ``k`` with a negative radicand are skipped.  The hopping
    degeneracies ``gamma_d = pi k / tau`` of the ``U = 0`` model are reported
    alongside.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    ks = np.arange(1, k_max + 1)
    radicand = (np.pi * ks / tau) ** 2 - gamma**2
    keep = radicand >= 0
    return DegeneracySet(
        tau=tau,
        gamma=gamma,
        potentials=np.sqrt(radicand[keep]),
        orders=ks[keep],
        gamma_degeneracies=np.pi * ks / tau,
    )
