"""Optimal local control of multipartite entanglement in open spin-qubit registers."""

from .controller import (
    ControlBasis,
    ControlMode,
    CurvatureController,
    GradientVector,
    assemble_hc,
    build_basis,
    controller_hook,
    gradient_x,
    noise_injection,
    optimal_h,
)
from .dynamics import (
    CouplingGraph,
    LindbladChannel,
    Trajectory,
    build_hsys,
    dephasing_channels,
    lindblad_rhs,
    propagate,
    rho_ddot,
    rk4_step,
)
from .entanglement import a_bilinear, build_a_operator, tau, tau_ddot, tau_direct_oracle, tau_dot
from .quantum_core import (
    PauliAxis,
    QubitRegister,
    commutator,
    kron,
    partial_trace,
    pauli_on_site,
    purity,
    random_local_unitary,
)
from .scenario import ScenarioConfig, initial_state, parse_config, preset_nv4, serialize_config, simulate

__version__ = "0.1.0"
