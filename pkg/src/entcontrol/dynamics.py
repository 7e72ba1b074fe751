"""Lindblad propagation under piecewise-constant Hamiltonians.

Units: hbar = 1, time in microseconds, couplings and control amplitudes in
rad/us, rates in 1/us.  The master equation is

    drho/dt = -i [H, rho] + sum_k (gamma_k / 4) (2 mu rho mu^+ - {mu^+ mu, rho})
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .entanglement import tau, tau_ddot, tau_dot
from .quantum_core import (
    SIGMA_Z,
    ShapeError,
    StateValidityError,
    as_register,
    embed,
    hermitian_part,
    n_qubits_of,
    purity,
)

TRACE_ABORT_TOL = 1e-6
HERMITICITY_ABORT_TOL = 1e-6

Hook = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class CouplingGraph:
    """Weighted ``sigma_z sigma_z`` couplings; pairs are normalized to ``i < j``."""

    n_qubits: int
    pairs: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        as_register(self.n_qubits)
        seen = set()
        normalized = []
        for i, j, lam in self.pairs:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-coupling on qubit {i}")
            for q in (i, j):
                if not 0 <= q < self.n_qubits:
                    raise IndexError(f"coupling site {q} out of range for {self.n_qubits} qubits")
            i, j = min(i, j), max(i, j)
            if (i, j) in seen:
                raise ValueError(f"duplicate coupling ({i}, {j})")
            seen.add((i, j))
            normalized.append((i, j, float(lam)))
        object.__setattr__(self, "pairs", tuple(normalized))


@dataclass(frozen=True)
class LindbladChannel:
    mu: np.ndarray
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"channel rate must be non-negative, got {self.gamma}")


def dephasing_channels(n_qubits: int, gamma: float | Sequence[float]) -> list[LindbladChannel]:
    """``sigma_z`` dephasing on every qubit; ``gamma`` may be per-site."""
    rates = [gamma] * n_qubits if np.isscalar(gamma) else list(gamma)
    return [LindbladChannel(embed(SIGMA_Z, q, n_qubits), float(g)) for q, g in enumerate(rates)]


def build_hsys(graph: CouplingGraph) -> np.ndarray:
    """``sum lambda_ij sigma_z^i sigma_z^j``; diagonal in the computational basis."""
    dim = 2**graph.n_qubits
    idx = np.arange(dim)
    diag = np.zeros(dim)
    for i, j, lam in graph.pairs:
        zi = 1 - 2 * ((idx >> i) & 1)
        zj = 1 - 2 * ((idx >> j) & 1)
        diag += lam * zi * zj
    return np.diag(diag).astype(complex)


def lindblad_rhs(rho: np.ndarray, h_total: np.ndarray, channels: Sequence[LindbladChannel] = ()) -> np.ndarray:
    """Right-hand side of the master equation.

    Broadcasts over leading batch dimensions of ``rho`` and ``h_total``.
    """
    if rho.shape[-2:] != h_total.shape[-2:]:
        raise ShapeError(f"state {rho.shape} and Hamiltonian {h_total.shape} differ")
    out = -1j * (h_total @ rho - rho @ h_total)
    for ch in channels:
        if ch.gamma == 0:
            continue
        mu = ch.mu
        if mu.shape != rho.shape[-2:]:
            raise ShapeError(f"jump operator {mu.shape} does not match state {rho.shape}")
        mu_dag = mu.conj().T
        mdm = mu_dag @ mu
        out = out + (ch.gamma / 4) * (2 * mu @ rho @ mu_dag - rho @ mdm - mdm @ rho)
    return out


def rho_ddot(rho: np.ndarray, h_total: np.ndarray, channels: Sequence[LindbladChannel] = ()) -> np.ndarray:
    """Second time derivative with the Hamiltonian held fixed."""
    return lindblad_rhs(lindblad_rhs(rho, h_total, channels), h_total, channels)


def rk4_raw(rho: np.ndarray, dt: float, h_total: np.ndarray, channels: Sequence[LindbladChannel] = ()) -> np.ndarray:
    """One classical RK4 step, without any renormalization."""
    k1 = lindblad_rhs(rho, h_total, channels)
    k2 = lindblad_rhs(rho + (dt / 2) * k1, h_total, channels)
    k3 = lindblad_rhs(rho + (dt / 2) * k2, h_total, channels)
    k4 = lindblad_rhs(rho + dt * k3, h_total, channels)
    return rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_step(rho: np.ndarray, dt: float, h_total: np.ndarray, channels: Sequence[LindbladChannel] = ()) -> np.ndarray:
    """RK4 step followed by re-Hermitization and trace renormalization."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    out = hermitian_part(rk4_raw(rho, dt, h_total, channels))
    return out / np.trace(out).real


def null_hook(rho: np.ndarray, t: float) -> np.ndarray:
    return np.zeros_like(rho)


@dataclass
class Trajectory:
    """Sampled time series of a propagation run.

    ``trace_err`` holds ``|Tr rho - 1|`` of the raw RK4 output that produced
    each sample (0 for the initial state); ``max_trace_drift`` is the maximum
    over every step, sampled or not.
    """

    t: np.ndarray
    tau: np.ndarray
    tau_dot: np.ndarray
    tau_ddot: np.ndarray
    x_norm: np.ndarray
    purity: np.ndarray
    trace_err: np.ndarray
    h: np.ndarray
    states: list[tuple[float, np.ndarray]] = field(default_factory=list)
    max_trace_drift: float = 0.0
    final_state: np.ndarray | None = None

    def __len__(self):
        return len(self.t)

    @property
    def peak(self) -> tuple[float, float]:
        """``(max tau, time of first maximum)``."""
        k = int(np.argmax(self.tau))
        return float(self.tau[k]), float(self.t[k])

    def mean_tau(self, t_from: float, t_to: float = math.inf) -> float:
        sel = (self.t >= t_from - 1e-12) & (self.t <= t_to + 1e-12)
        return float(np.mean(self.tau[sel]))

    def first_time_above(self, threshold: float) -> float | None:
        hit = np.nonzero(self.tau >= threshold)[0]
        return float(self.t[hit[0]]) if hit.size else None


def propagate(
    rho0: np.ndarray,
    t_final: float,
    dt: float,
    hook: Hook | None = None,
    channels: Sequence[LindbladChannel] = (),
    h_sys: np.ndarray | None = None,
    sample_stride: int = 1,
    state_stride: int = 0,
) -> Trajectory:
    """Integrate from ``rho0`` to ``t_final`` with fixed RK4 steps.

    At each step the hook is queried with ``(rho, t)`` for the control
    Hamiltonian, ``H_sys + H_c`` is frozen for the step, and samples are
    recorded every ``sample_stride`` steps (the final time is always
    sampled).  The hook may expose ``last_h`` and ``last_x_norm`` attributes,
    which are recorded alongside.  ``state_stride > 0`` stores density
    matrix snapshots at that step stride.
    """
    if t_final < 0:
        raise ValueError(f"t_final must be non-negative, got {t_final}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    hook = hook or null_hook
    rho = np.array(rho0, dtype=complex)
    n_qubits_of(rho)
    if h_sys is None:
        h_sys = np.zeros_like(rho)

    n_steps = math.ceil(t_final / dt - 1e-9) if t_final > 0 else 0
    rows: dict[str, list] = {k: [] for k in ("t", "tau", "tau_dot", "tau_ddot", "x_norm", "purity", "trace_err", "h")}
    states = []
    max_drift = 0.0
    last_drift = 0.0
    t = 0.0

    for k in range(n_steps + 1):
        h_c = hook(rho, t)
        h_total = h_sys + h_c
        if k % sample_stride == 0 or k == n_steps:
            rd = lindblad_rhs(rho, h_total, channels)
            rdd = lindblad_rhs(rd, h_total, channels)
            rows["t"].append(t)
            rows["tau"].append(tau(rho))
            rows["tau_dot"].append(tau_dot(rho, rd))
            rows["tau_ddot"].append(tau_ddot(rho, rd, rdd))
            rows["x_norm"].append(float(getattr(hook, "last_x_norm", 0.0)))
            rows["purity"].append(purity(rho))
            rows["trace_err"].append(last_drift)
            rows["h"].append(np.array(getattr(hook, "last_h", ()), dtype=float))
        if state_stride and k % state_stride == 0:
            states.append((t, rho.copy()))
        if k == n_steps:
            break
        step = dt if k < n_steps - 1 else t_final - (n_steps - 1) * dt
        with np.errstate(all="ignore"):
            raw = rk4_raw(rho, step, h_total, channels)
            last_drift = float(abs(np.trace(raw) - 1))
            max_drift = max(max_drift, last_drift)
            herm_drift = float(np.max(np.abs(raw - raw.conj().T)))
            rho = hermitian_part(raw)
            rho = rho / np.trace(rho).real
        if not (last_drift <= TRACE_ABORT_TOL and herm_drift <= HERMITICITY_ABORT_TOL and np.isfinite(raw).all()):
            raise StateValidityError(
                f"state drifted at t={t + step:.6g}: trace error {last_drift:.3e}, hermiticity {herm_drift:.3e}"
            )
        t = (k + 1) * dt if k < n_steps - 1 else t_final

    return Trajectory(
        t=np.array(rows["t"]),
        tau=np.array(rows["tau"]),
        tau_dot=np.array(rows["tau_dot"]),
        tau_ddot=np.array(rows["tau_ddot"]),
        x_norm=np.array(rows["x_norm"]),
        purity=np.array(rows["purity"]),
        trace_err=np.array(rows["trace_err"]),
        h=np.array(rows["h"]) if rows["h"] and rows["h"][0].size else np.zeros((len(rows["t"]), 0)),
        states=states,
        max_trace_drift=max_drift,
        final_state=rho,
    )
