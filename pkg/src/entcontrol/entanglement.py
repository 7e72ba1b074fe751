"""Algebraic lower bound on the squared multipartite concurrence.

For an N-qubit state the bound is ``tau(rho) = Tr[(rho (x) rho) A]`` with

    A = 4 (P+ - P+^1 (x) ... (x) P+^N - (1 - 2**(1-N)) P-)

on the duplicated space.  Writing ``P+^1 (x) ... (x) P+^N`` as
``2**-N sum_S SWAP_S`` and using ``Tr[(s (x) r) SWAP_S] = Tr[s_S r_S]``
reduces every contraction with ``A`` to the bilinear form

    B(s, r) = 4 [ (Tr s Tr r + Tr sr) / 2
                  - 2**-N sum_S Tr(s_S r_S)
                  - (1 - 2**(1-N)) (Tr s Tr r - Tr sr) / 2 ]

evaluated with partial traces only.  The explicit ``4**N`` matrix is kept
as an independent oracle for tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quantum_core import CapacityError, ShapeError, as_register, n_qubits_of, partial_trace, purity

ORACLE_MAX_QUBITS = 6
IMAG_TOL = 1e-10
DERIVATIVE_TRACE_TOL = 1e-9


class ContractError(ValueError):
    """A derivative argument is not traceless."""


@dataclass(frozen=True)
class TauReport:
    tau: float
    tau_dot: float
    tau_ddot: float
    purity: float


def _subset_keep(mask: int, n: int) -> tuple[int, ...]:
    return tuple(q for q in range(n) if (mask >> q) & 1)


def _drop_imag(value: np.ndarray, what: str) -> np.ndarray:
    scale = np.maximum(1.0, np.abs(value.real))
    if np.any(np.abs(value.imag) > IMAG_TOL * scale):
        raise ArithmeticError(f"{what} has imaginary residue {np.max(np.abs(value.imag)):.3e}")
    return value.real


def subset_overlaps(sigma: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``Tr(sigma_S rho_S)`` for every subset ``S``, indexed by bitmask.

    Broadcasts over leading batch dimensions of either argument.
    """
    n = n_qubits_of(sigma)
    sigma, rho = np.broadcast_arrays(sigma, rho)
    out = np.empty(sigma.shape[:-2] + (2**n,), dtype=complex)
    full = 2**n - 1
    for mask in range(2**n):
        if mask == 0:
            out[..., 0] = np.trace(sigma, axis1=-2, axis2=-1) * np.trace(rho, axis1=-2, axis2=-1)
            continue
        if mask == full:
            s, r = sigma, rho
        else:
            keep = _subset_keep(mask, n)
            s, r = partial_trace(sigma, keep), partial_trace(rho, keep)
        out[..., mask] = np.einsum("...ij,...ji->...", s, r)
    return out


def a_bilinear(sigma: np.ndarray, rho: np.ndarray) -> np.ndarray | float:
    """``Tr[(sigma (x) rho) A]`` via reduced-state overlaps.

    Both arguments must be Hermitian ``2**N`` square matrices; leading batch
    dimensions broadcast.
    """
    sigma = np.asarray(sigma)
    rho = np.asarray(rho)
    if sigma.shape[-2:] != rho.shape[-2:]:
        raise ShapeError(f"shape mismatch {sigma.shape} vs {rho.shape}")
    n = n_qubits_of(sigma)
    overlaps = subset_overlaps(sigma, rho)
    tt = overlaps[..., 0]
    tsr = overlaps[..., -1]
    value = 4 * (
        (tt + tsr) / 2
        - overlaps.sum(axis=-1) / 2**n
        - (1 - 2.0 ** (1 - n)) * (tt - tsr) / 2
    )
    value = _drop_imag(value, "bilinear form")
    return float(value) if value.ndim == 0 else value


def tau(rho: np.ndarray) -> float:
    """Concurrence lower bound ``tau(rho) = B(rho, rho)``; not clamped at zero."""
    return a_bilinear(rho, rho)


def _check_traceless(*ops: np.ndarray) -> None:
    # Roundoff in the trace grows with the entries, so the bound does too.
    for op in ops:
        tr = np.trace(op, axis1=-2, axis2=-1)
        scale = max(1.0, float(np.max(np.abs(op)))) if op.size else 1.0
        if not np.all(np.abs(tr) <= DERIVATIVE_TRACE_TOL * scale):
            raise ContractError(f"time derivative must be traceless, got trace {np.max(np.abs(tr)):.3e}")


def tau_dot(rho: np.ndarray, rho_dot: np.ndarray) -> np.ndarray | float:
    _check_traceless(rho_dot)
    return 2 * a_bilinear(rho_dot, rho)


def tau_ddot(rho: np.ndarray, rho_dot: np.ndarray, rho_ddot: np.ndarray) -> np.ndarray | float:
    _check_traceless(rho_dot, rho_ddot)
    return 2 * (a_bilinear(rho_ddot, rho) + a_bilinear(rho_dot, rho_dot))


def tau_report(rho: np.ndarray, rho_dot: np.ndarray, rho_ddot: np.ndarray) -> TauReport:
    return TauReport(
        tau=tau(rho),
        tau_dot=tau_dot(rho, rho_dot),
        tau_ddot=tau_ddot(rho, rho_dot, rho_ddot),
        purity=purity(rho),
    )


# -- explicit duplicate-space oracle ---------------------------------------


def swap_subset(n: int, mask: int) -> np.ndarray:
    """Permutation on the duplicated space exchanging the ``mask`` qubits of the two copies.

    Duplicate-space index is ``a * 2**N + b`` for ``|a> (x) |b>``.
    """
    d = 2**n
    a, b = np.divmod(np.arange(d * d), d)
    a2 = (a & ~mask) | (b & mask)
    b2 = (b & ~mask) | (a & mask)
    out = np.zeros((d * d, d * d))
    out[a2 * d + b2, a * d + b] = 1.0
    return out


@lru_cache(maxsize=None)
def _a_operator(n: int) -> np.ndarray:
    d = 2**n
    eye = np.eye(d * d)
    swap = swap_subset(n, d - 1)
    local = sum(swap_subset(n, mask) for mask in range(d)) / d
    a = 4 * ((eye + swap) / 2 - local - (1 - 2.0 ** (1 - n)) * (eye - swap) / 2)
    a.setflags(write=False)
    return a


def build_a_operator(reg) -> np.ndarray:
    """Explicit (real, symmetric) ``4**N x 4**N`` matrix of ``A``; cached and read-only."""
    n = as_register(reg).n_qubits
    if n > ORACLE_MAX_QUBITS:
        raise CapacityError(f"explicit A operator limited to {ORACLE_MAX_QUBITS} qubits, got {n}")
    return _a_operator(n)


def tau_direct_oracle(rho: np.ndarray, a_matrix: np.ndarray | None = None) -> float:
    """``Tr[(rho (x) rho) A]`` by literal contraction on the duplicated space."""
    rho = np.asarray(rho)
    n = n_qubits_of(rho)
    if a_matrix is None:
        a_matrix = build_a_operator(n)
    value = np.sum(np.kron(rho, rho) * a_matrix.T)
    return float(_drop_imag(np.asarray(value), "oracle trace"))
