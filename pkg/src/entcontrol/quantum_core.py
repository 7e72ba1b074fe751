"""Dense operator algebra for small qubit registers.

Basis convention (used everywhere in the package): the computational basis
state ``|b_{N-1} ... b_1 b_0>`` maps to the integer ``sum_j b_j 2**j``, i.e.
qubit 0 is the least significant bit.  In Kronecker products this puts
qubit 0 in the rightmost factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable

import numpy as np

MAX_QUBITS = 8


class CapacityError(ValueError):
    """Requested register is too large for dense storage."""


class ShapeError(ValueError):
    """Operator dimensions do not match."""


class StateValidityError(RuntimeError):
    """A density matrix violates Hermiticity, normalization or positivity."""


@dataclass(frozen=True)
class QubitRegister:
    n_qubits: int

    def __post_init__(self):
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise ValueError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        if self.n_qubits > MAX_QUBITS:
            raise CapacityError(f"at most {MAX_QUBITS} qubits supported, got {self.n_qubits}")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


def as_register(reg: QubitRegister | int) -> QubitRegister:
    return reg if isinstance(reg, QubitRegister) else QubitRegister(int(reg))


class PauliAxis(Enum):
    X = 1
    Y = 2
    Z = 3

    @property
    def matrix(self) -> np.ndarray:
        return PAULI[self.value - 1]


IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)
for _m in (IDENTITY, *PAULI):
    _m.setflags(write=False)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, ``(a (x) b)[i*db + k, j*db + l] = a[i, j] * b[k, l]``."""
    return np.kron(np.asarray(a), np.asarray(b))


def _check_site(site: int, n: int) -> None:
    if not 0 <= site < n:
        raise IndexError(f"qubit index {site} out of range for {n} qubits")


def embed(op: np.ndarray, site: int, reg: QubitRegister | int) -> np.ndarray:
    """Lift a single-qubit operator onto ``site`` of the register."""
    reg = as_register(reg)
    _check_site(site, reg.n_qubits)
    left = np.eye(2 ** (reg.n_qubits - 1 - site), dtype=complex)
    right = np.eye(2**site, dtype=complex)
    return np.kron(np.kron(left, op), right)


def pauli_on_site(axis: PauliAxis | str, site: int, reg: QubitRegister | int) -> np.ndarray:
    """Pauli matrix ``axis`` acting on qubit ``site``, identity elsewhere."""
    if isinstance(axis, str):
        axis = PauliAxis[axis.upper()]
    return embed(axis.matrix, site, reg)


def n_qubits_of(op: np.ndarray) -> int:
    dim = op.shape[-1]
    n = dim.bit_length() - 1
    if op.shape[-2] != dim or 2**n != dim:
        raise ShapeError(f"expected a square operator of dimension 2**N, got shape {op.shape}")
    return n


@lru_cache(maxsize=None)
def _partial_trace_subscripts(n: int, keep: tuple[int, ...]) -> str:
    # Tensor axis a (row) and n + a (column) carry qubit n - 1 - a.
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    rows, cols, out_rows, out_cols = [], [], [], []
    for a in range(n):
        r = next(letters)
        if (n - 1 - a) in keep:
            c = next(letters)
            out_rows.append(r)
            out_cols.append(c)
        else:
            c = r
        rows.append(r)
        cols.append(c)
    return "..." + "".join(rows + cols) + "->..." + "".join(out_rows + out_cols)


def partial_trace(rho: np.ndarray, keep: Iterable[int]) -> np.ndarray:
    """Reduce ``rho`` onto the qubits in ``keep``.

    Leading batch dimensions are carried through.  Kept qubits retain their
    relative order, so the reduced operator follows the same bit convention
    on the renumbered subsystem.  ``keep=()`` gives the ``1x1`` operator
    ``[[Tr rho]]``.
    """
    rho = np.asarray(rho)
    n = n_qubits_of(rho)
    keep = tuple(sorted(set(int(k) for k in keep)))
    for k in keep:
        _check_site(k, n)
    if len(keep) == n:
        return rho.copy()
    batch = rho.shape[:-2]
    tensor = rho.reshape(batch + (2,) * (2 * n))
    reduced = np.einsum(_partial_trace_subscripts(n, keep), tensor)
    dk = 2 ** len(keep)
    return reduced.reshape(batch + (dk, dk))


def purity(rho: np.ndarray) -> float:
    """``Tr rho**2`` for a Hermitian ``rho``."""
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho.conj().T, rho)))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-2:] != b.shape[-2:]:
        raise ShapeError(f"commutator of shapes {a.shape} and {b.shape}")
    return a @ b - b @ a


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_local_unitary(reg: QubitRegister | int, seed: int) -> np.ndarray:
    """Tensor product of independent Haar-random single-qubit unitaries."""
    reg = as_register(reg)
    rng = np.random.default_rng(seed)
    out = np.eye(1, dtype=complex)
    # Draw qubit 0 first, place it rightmost.
    for u in [haar_unitary(2, rng) for _ in range(reg.n_qubits)]:
        out = np.kron(u, out)
    return out


def random_density_matrix(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a Gaussian purification of the given rank."""
    dim = 2**n_qubits
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_state(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    return random_density_matrix(n_qubits, rng, rank=1)


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + np.swapaxes(a, -1, -2).conj()) / 2


def validate_density_matrix(
    rho: np.ndarray,
    herm_tol: float = 1e-10,
    trace_tol: float = 1e-9,
    check_psd: bool = False,
    psd_tol: float = 1e-8,
) -> None:
    """Raise :class:`StateValidityError` if ``rho`` is not a valid state.

    The eigenvalue check is opt-in; it is too costly for per-step use.
    """
    rho = np.asarray(rho)
    n_qubits_of(rho)
    drift = np.max(np.abs(rho - rho.conj().T))
    if drift > herm_tol:
        raise StateValidityError(f"Hermiticity violated by {drift:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise StateValidityError(f"trace {tr.real:.12g} deviates from 1")
    if check_psd:
        smallest = np.linalg.eigvalsh(hermitian_part(rho))[0]
        if smallest < -psd_tol:
            raise StateValidityError(f"negative eigenvalue {smallest:.3e}")
