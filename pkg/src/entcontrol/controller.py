"""Curvature-maximizing local control.

The curvature of the entanglement bound is linear in the local control
coefficients ``h``: ``tau_ddot(h) = X . h + tau_ddot_0``.  ``X`` is obtained
exactly by evaluating ``tau_ddot`` once with no control and once per basis
operator, and the optimal control under ``||h|| <= h_max`` is
``h = h_max X / ||X||``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .dynamics import LindbladChannel, lindblad_rhs
from .entanglement import tau_ddot
from .quantum_core import PAULI, ShapeError, as_register, embed


class ControlMode(str, Enum):
    NONE = "none"
    ADDRESSABLE = "addressable"
    UNADDRESSABLE = "unaddressable"


class FallbackPolicy(str, Enum):
    HOLD = "hold"
    ZERO = "zero"


@dataclass(frozen=True)
class ControlBasis:
    """Ordered Hermitian, traceless control operators.

    Addressable: index ``k = i + 3 j`` is Pauli ``i`` (x, y, z) on qubit ``j``.
    Unaddressable: index ``k = i`` is Pauli ``i`` summed over all qubits.
    """

    mode: ControlMode
    operators: np.ndarray

    def __len__(self):
        return len(self.operators)


@dataclass(frozen=True)
class GradientVector:
    x: np.ndarray
    tau_ddot_free: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.x))


def build_basis(reg, mode: ControlMode | str = ControlMode.ADDRESSABLE) -> ControlBasis:
    reg = as_register(reg)
    mode = ControlMode(mode)
    n = reg.n_qubits
    if mode is ControlMode.ADDRESSABLE:
        ops = [embed(PAULI[i], j, n) for j in range(n) for i in range(3)]
    elif mode is ControlMode.UNADDRESSABLE:
        ops = [sum(embed(PAULI[i], j, n) for j in range(n)) for i in range(3)]
    else:
        raise ValueError("control mode 'none' has no basis")
    ops = np.array(ops)
    ops.setflags(write=False)
    return ControlBasis(mode, ops)


def assemble_hc(basis: ControlBasis, h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (len(basis),):
        raise ShapeError(f"control vector of length {h.shape} for basis of {len(basis)}")
    return np.tensordot(h, basis.operators, axes=1)


def tau_ddot_under(rho: np.ndarray, h_total: np.ndarray, channels: Sequence[LindbladChannel] = ()) -> np.ndarray:
    """Curvature of tau for one or a batch of frozen Hamiltonians."""
    rd = lindblad_rhs(rho, h_total, channels)
    rdd = lindblad_rhs(rd, h_total, channels)
    return tau_ddot(rho, rd, rdd)


def gradient_x(
    rho: np.ndarray,
    h_sys: np.ndarray,
    channels: Sequence[LindbladChannel],
    basis: ControlBasis,
) -> GradientVector:
    """Exact gradient of the curvature with respect to the control coefficients."""
    if h_sys.shape != rho.shape:
        raise ShapeError(f"Hamiltonian {h_sys.shape} does not match state {rho.shape}")
    stack = np.concatenate([h_sys[None], h_sys[None] + basis.operators])
    curv = np.atleast_1d(tau_ddot_under(rho, stack, channels))
    return GradientVector(x=curv[1:] - curv[0], tau_ddot_free=float(curv[0]))


def degeneracy_threshold(grad: GradientVector) -> float:
    return 1e-10 * max(1.0, abs(grad.tau_ddot_free))


def optimal_h(
    grad: GradientVector,
    h_max: float,
    policy: FallbackPolicy | str = FallbackPolicy.HOLD,
    previous: np.ndarray | None = None,
) -> np.ndarray:
    """Control vector of norm ``h_max`` parallel to ``X``.

    When ``||X||`` is below :func:`degeneracy_threshold` the direction is
    undefined; ``hold`` returns ``previous`` (zero if there is none) and
    ``zero`` returns the zero vector.
    """
    if h_max < 0:
        raise ValueError(f"h_max must be non-negative, got {h_max}")
    norm = grad.norm
    if norm > degeneracy_threshold(grad):
        return h_max * grad.x / norm
    if FallbackPolicy(policy) is FallbackPolicy.HOLD and previous is not None:
        return np.array(previous, dtype=float)
    return np.zeros_like(grad.x)


def noise_injection(
    h: np.ndarray,
    relative_amplitude: float,
    rng: np.random.Generator | int,
    h_max: float | None = None,
) -> np.ndarray:
    """Add uniform white noise of size ``relative_amplitude * ||h||``.

    Each component receives ``a ||h|| u_k / sqrt(len)`` with ``u_k`` uniform on
    ``[-1, 1]``; the result is clipped to ``h_max (1 + a)`` in norm.
    """
    if relative_amplitude < 0:
        raise ValueError("noise amplitude must be non-negative")
    h = np.asarray(h, dtype=float)
    if relative_amplitude == 0:
        return h.copy()
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    norm = np.linalg.norm(h)
    u = rng.uniform(-1.0, 1.0, size=h.shape)
    noisy = h + relative_amplitude * norm * u / np.sqrt(h.size)
    cap = (norm if h_max is None else h_max) * (1 + relative_amplitude)
    noisy_norm = np.linalg.norm(noisy)
    if noisy_norm > cap:
        noisy *= cap / noisy_norm
    return noisy


class CurvatureController:
    """Stateful control hook for :func:`entcontrol.dynamics.propagate`.

    Every ``refresh_stride`` calls it recomputes ``X`` at the current state,
    picks the optimal ``h`` (optionally perturbed by noise) and caches the
    resulting control Hamiltonian; other calls return the cached operator.
    One instance drives exactly one trajectory.
    """

    def __init__(
        self,
        h_sys: np.ndarray,
        channels: Sequence[LindbladChannel],
        basis: ControlBasis,
        h_max: float,
        refresh_stride: int = 1,
        noise_relative: float = 0.0,
        rng_seed: int = 0,
        policy: FallbackPolicy | str = FallbackPolicy.HOLD,
    ):
        if refresh_stride < 1:
            raise ValueError("refresh_stride must be >= 1")
        if h_max < 0:
            raise ValueError("h_max must be non-negative")
        self.h_sys = h_sys
        self.channels = list(channels)
        self.basis = basis
        self.h_max = float(h_max)
        self.refresh_stride = int(refresh_stride)
        self.noise_relative = float(noise_relative)
        self.policy = FallbackPolicy(policy)
        self._rng = np.random.default_rng(rng_seed)
        self._calls = 0
        self._previous: np.ndarray | None = None
        self._hc: np.ndarray | None = None
        self.last_h = np.zeros(len(basis))
        self.last_x_norm = 0.0
        self.last_gradient: GradientVector | None = None

    def __call__(self, rho: np.ndarray, t: float) -> np.ndarray:
        if self._calls % self.refresh_stride == 0 or self._hc is None:
            grad = gradient_x(rho, self.h_sys, self.channels, self.basis)
            h = optimal_h(grad, self.h_max, self.policy, self._previous)
            self._previous = h
            if self.noise_relative > 0:
                h = noise_injection(h, self.noise_relative, self._rng, self.h_max)
            self.last_gradient = grad
            self.last_x_norm = grad.norm
            self.last_h = h
            self._hc = assemble_hc(self.basis, h)
        self._calls += 1
        return self._hc


def controller_hook(
    h_sys: np.ndarray,
    channels: Sequence[LindbladChannel],
    basis: ControlBasis,
    h_max: float,
    refresh_stride: int = 1,
    noise_relative: float = 0.0,
    rng_seed: int = 0,
) -> CurvatureController:
    return CurvatureController(h_sys, channels, basis, h_max, refresh_stride, noise_relative, rng_seed)
