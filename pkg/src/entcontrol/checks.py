"""Cross-validation suite behind ``entcontrol oracle-check``.

Each family compares a production code path against an independent route:
the explicit duplicate-space contraction, finite differences of exactly
propagated trajectories (matrix exponential of the Liouvillian), or the
closed-form dephasing solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.linalg import expm

from .controller import assemble_hc, build_basis, gradient_x, tau_ddot_under
from .dynamics import CouplingGraph, build_hsys, dephasing_channels, lindblad_rhs, rk4_step
from .entanglement import build_a_operator, tau, tau_ddot, tau_direct_oracle, tau_dot
from .quantum_core import SIGMA_X, embed, pure_density, random_density_matrix

FD_CASE_CAP = 20
DECAY_CASE_CAP = 2


@dataclass
class CheckResult:
    name: str
    cases: int
    max_residual: float
    worst_ratio: float
    worst_case: int | None
    tolerance: str

    @property
    def passed(self) -> bool:
        return self.worst_ratio <= 1.0

    def line(self, seed: int) -> str:
        status = "ok  " if self.passed else "FAIL"
        where = "" if self.passed or self.worst_case is None else f"  (seed={seed} case={self.worst_case})"
        return f"{status} {self.name:<26} cases={self.cases:<4} max_residual={self.max_residual:.3e}  tol={self.tolerance}{where}"


def _rng(seed: int, family: int, case: int) -> np.random.Generator:
    return np.random.default_rng([seed, family, case])


def random_open_system(rng: np.random.Generator, n: int):
    """Random ZZ couplings, a local field and per-site dephasing on ``n`` qubits."""
    pairs = tuple((i, j, rng.uniform(-3, 3)) for i in range(n) for j in range(i + 1, n))
    h = build_hsys(CouplingGraph(n, pairs))
    for q in range(n):
        h = h + rng.uniform(-1, 1) * embed(SIGMA_X, q, n)
    channels = dephasing_channels(n, list(rng.uniform(0, 0.5, size=n)))
    return h, channels


def liouvillian(h: np.ndarray, channels) -> np.ndarray:
    """Superoperator matrix acting on row-major ``vec(rho)``."""
    d = h.shape[0]
    basis = np.eye(d * d, dtype=complex).reshape(d * d, d, d)
    return np.array([lindblad_rhs(e, h, channels).ravel() for e in basis]).T


def exact_taus(rho: np.ndarray, gen: np.ndarray, times) -> np.ndarray:
    d = rho.shape[0]
    return np.array([tau((expm(gen * t) @ rho.ravel()).reshape(d, d)) for t in times])


def five_point_first(f: np.ndarray, delta: float) -> float:
    fm2, fm1, _, fp1, fp2 = f
    return (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * delta)


def five_point_second(f: np.ndarray, delta: float) -> float:
    fm2, fm1, f0, fp1, fp2 = f
    return (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * delta**2)


def _run_family(name: str, cases: int, tolerance: str, one_case: Callable[[int], Iterator[tuple[float, float]]]) -> CheckResult:
    max_res, worst_ratio, worst_case = 0.0, 0.0, None
    for k in range(cases):
        for residual, allowed in one_case(k):
            max_res = max(max_res, residual)
            ratio = residual / allowed
            if ratio > worst_ratio or not np.isfinite(ratio):
                worst_ratio, worst_case = ratio, k
    return CheckResult(name, cases, max_res, worst_ratio, worst_case, tolerance)


def run_checks(seed: int = 0, n_cases: int = 100, inject_fault: bool = False) -> list[CheckResult]:
    """Run every family; ``inject_fault`` perturbs the explicit A operator."""
    a_cache: dict[int, np.ndarray] = {}

    def a_matrix(n: int) -> np.ndarray:
        if n not in a_cache:
            a = np.array(build_a_operator(n))
            if inject_fault:
                a[0, -1] += 0.5
                a[-1, 0] += 0.5
            a_cache[n] = a
        return a_cache[n]

    def tau_case(k):
        rng = _rng(seed, 1, k)
        n = 2 + k % 3
        rank = int(rng.integers(1, 2**n + 1))
        rho = random_density_matrix(n, rng, rank)
        if inject_fault:
            # Weight the corner elements the fault touches.
            psi = np.zeros(2**n)
            psi[0] = psi[-1] = 1
            rho = 0.5 * rho + 0.5 * pure_density(psi)
        yield abs(tau(rho) - tau_direct_oracle(rho, a_matrix(n))), 1e-9

    def derivative_case(k):
        rng = _rng(seed, 2, k)
        n = 2 + k % 2
        h, channels = random_open_system(rng, n)
        rho = random_density_matrix(n, rng, int(rng.integers(1, 3)))
        gen = liouvillian(h, channels)
        rd = lindblad_rhs(rho, h, channels)
        rdd = lindblad_rhs(rd, h, channels)
        d1 = 1e-4
        f1 = exact_taus(rho, gen, d1 * np.arange(-2, 3))
        td = tau_dot(rho, rd)
        yield abs(td - five_point_first(f1, d1)), 1e-6 * (1 + abs(td))
        d2 = 2e-4
        f2 = exact_taus(rho, gen, d2 * np.arange(-2, 3))
        tdd = tau_ddot(rho, rd, rdd)
        yield abs(tdd - five_point_second(f2, d2)), 1e-5 * (1 + abs(tdd))

    def gradient_case(k):
        rng = _rng(seed, 3, k)
        n = 2 + k % 2
        h_sys, channels = random_open_system(rng, n)
        basis = build_basis(n, "addressable" if k % 2 == 0 else "unaddressable")
        rho = random_density_matrix(n, rng, int(rng.integers(1, 3)))
        grad = gradient_x(rho, h_sys, channels, basis)
        h = rng.normal(size=len(basis))
        h *= rng.uniform(0.5, 3) / np.linalg.norm(h)
        gen = liouvillian(h_sys + assemble_hc(basis, h), channels)
        delta = 2e-4
        fd = five_point_second(exact_taus(rho, gen, delta * np.arange(-2, 3)), delta)
        predicted = grad.x @ h + grad.tau_ddot_free
        yield abs(predicted - fd), 1e-5 * (1 + abs(predicted))

    def linearity_case(k):
        rng = _rng(seed, 4, k)
        n = 2 + k % 3
        h_sys, channels = random_open_system(rng, n)
        basis = build_basis(n, "addressable")
        rho = random_density_matrix(n, rng, int(rng.integers(1, 2**n + 1)))
        grad = gradient_x(rho, h_sys, channels, basis)
        h = rng.normal(size=len(basis))
        h *= (10.0 if k % 4 == 0 else rng.uniform(0.1, 5)) / np.linalg.norm(h)
        direct = tau_ddot_under(rho, h_sys + assemble_hc(basis, h), channels)
        yield abs(direct - grad.tau_ddot_free - grad.x @ h), 1e-8 * (1 + abs(direct))

    def decay_case(k):
        rng = _rng(seed, 5, k)
        gamma, dt, t_end = 0.02, 1e-3, 10.0
        theta = rng.uniform(0, 2 * np.pi)
        rho = pure_density([1, np.exp(1j * theta)])
        channels = dephasing_channels(1, gamma)
        h = np.zeros((2, 2), dtype=complex)
        r = rho
        for _ in range(int(round(t_end / dt))):
            r = rk4_step(r, dt, h, channels)
        yield abs(r[0, 1] - np.exp(-gamma * t_end) * rho[0, 1]), 1e-8

    fd_cases = min(n_cases, FD_CASE_CAP)
    return [
        _run_family("tau_vs_direct_oracle", n_cases, "1e-9 abs", tau_case),
        _run_family("finite_diff_tau_derivs", fd_cases, "1e-6/1e-5 rel", derivative_case),
        _run_family("finite_diff_gradient_x", fd_cases, "1e-5 rel", gradient_case),
        _run_family("tau_ddot_linearity", n_cases, "1e-8 rel", linearity_case),
        _run_family("dephasing_decay", min(n_cases, DECAY_CASE_CAP), "1e-8 abs", decay_case),
    ]
