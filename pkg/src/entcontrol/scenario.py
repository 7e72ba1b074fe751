"""Run configurations, the four-NV-center preset and initial states.

Config files are line based::

    # four NV centers, dephased
    preset = nv4
    dephasing = 0 0.02
    control_mode = addressable
    h_max = 17

``coupling = i j lambda`` and ``dephasing = site gamma`` may repeat; every
other key appears at most once (a later value overrides an earlier one).
``preset = nv4`` loads :func:`preset_nv4` as the starting point.  Qubit labels
are 0-based: NV spin ``k`` is qubit ``k - 1``.

Defaults: no couplings or channels, ``initial_state = plus_product``,
``h_max = 0``, ``control_mode = none``, ``dt = 0.001``, ``refresh_stride = 1``,
``sample_stride = 1``, ``noise_relative = 0``, ``rng_seed = 0``,
``tau_ref = 2.0``, ``frequency_convention = angular``,
``output_path = trajectory.csv``.  ``n_qubits`` and ``t_final`` are required
unless a preset supplies them.

With ``frequency_convention = ordinary`` the coupling constants and ``h_max``
are read as ordinary frequencies (MHz) and multiplied by 2 pi; dephasing rates
are rates and never rescaled.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .controller import ControlMode, build_basis, controller_hook
from .dynamics import CouplingGraph, LindbladChannel, Trajectory, build_hsys, propagate
from .quantum_core import MAX_QUBITS, SIGMA_Z, embed, pure_density

# Dipole couplings of the four-NV-center register in MHz, keyed by 1-based spin labels.
NV4_COUPLINGS_MHZ = {
    (1, 2): 9.8,
    (3, 4): 2.7,
    (2, 3): 1.3,
    (1, 3): 0.1,
    (1, 4): 0.3,
    (2, 4): 0.5,
}

STATE_FILE_NORM_TOL = 1e-6
SCALAR_KEYS = {
    "n_qubits": int,
    "initial_state": str,
    "h_max": float,
    "control_mode": str,
    "t_final": float,
    "dt": float,
    "refresh_stride": int,
    "sample_stride": int,
    "noise_relative": float,
    "rng_seed": int,
    "tau_ref": float,
    "frequency_convention": str,
    "output_path": str,
}
SWEEPABLE_KEYS = ("h_max", "gamma", "dt", "noise_relative")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ChannelSpec:
    kind: str
    site: int
    gamma: float


@dataclass(frozen=True)
class ScenarioConfig:
    n_qubits: int
    t_final: float
    couplings: tuple[tuple[int, int, float], ...] = ()
    channels: tuple[ChannelSpec, ...] = ()
    initial_state: str = "plus_product"
    h_max: float = 0.0
    control_mode: str = "none"
    dt: float = 1e-3
    refresh_stride: int = 1
    sample_stride: int = 1
    noise_relative: float = 0.0
    rng_seed: int = 0
    tau_ref: float = 2.0
    frequency_convention: str = "angular"
    output_path: str = "trajectory.csv"

    def __post_init__(self):
        errors = validation_errors(self)
        if errors:
            raise ConfigError(errors[0][1])

    @property
    def frequency_scale(self) -> float:
        return 2 * math.pi if self.frequency_convention == "ordinary" else 1.0

    def coupling_graph(self) -> CouplingGraph:
        s = self.frequency_scale
        return CouplingGraph(self.n_qubits, tuple((i, j, s * lam) for i, j, lam in self.couplings))

    def lindblad_channels(self) -> list[LindbladChannel]:
        return [LindbladChannel(embed(SIGMA_Z, c.site, self.n_qubits), c.gamma) for c in self.channels]

    @property
    def h_max_angular(self) -> float:
        return self.frequency_scale * self.h_max


def validation_errors(cfg: ScenarioConfig) -> list[tuple[str, str]]:
    """``(key, message)`` for every violated constraint."""
    errs = []
    if not 1 <= cfg.n_qubits <= MAX_QUBITS:
        errs.append(("n_qubits", f"n_qubits must be in 1..{MAX_QUBITS}, got {cfg.n_qubits}"))
    for key in ("dt", "t_final", "h_max", "noise_relative", "tau_ref"):
        if not math.isfinite(getattr(cfg, key)):
            errs.append((key, f"{key} must be finite"))
    if not cfg.dt > 0:
        errs.append(("dt", f"dt must be positive, got {cfg.dt}"))
    if not cfg.t_final >= 0:
        errs.append(("t_final", f"t_final must be non-negative, got {cfg.t_final}"))
    if not cfg.h_max >= 0:
        errs.append(("h_max", f"h_max must be non-negative, got {cfg.h_max}"))
    if cfg.refresh_stride < 1:
        errs.append(("refresh_stride", "refresh_stride must be >= 1"))
    if cfg.sample_stride < 1:
        errs.append(("sample_stride", "sample_stride must be >= 1"))
    if not cfg.noise_relative >= 0:
        errs.append(("noise_relative", "noise_relative must be non-negative"))
    if not cfg.tau_ref > 0:
        errs.append(("tau_ref", "tau_ref must be positive"))
    if cfg.control_mode not in {m.value for m in ControlMode}:
        errs.append(("control_mode", f"unknown control_mode {cfg.control_mode!r}"))
    if cfg.frequency_convention not in ("angular", "ordinary"):
        errs.append(("frequency_convention", f"unknown frequency_convention {cfg.frequency_convention!r}"))
    errs.extend(("couplings", e) for e in coupling_errors(cfg.couplings, cfg.n_qubits))
    for c in cfg.channels:
        errs.extend(("channels", e) for e in channel_errors(c, cfg.n_qubits))
    try:
        check_initial_state_spec(cfg.initial_state, cfg.n_qubits)
    except ConfigError as exc:
        errs.append(("initial_state", str(exc)))
    return errs


def coupling_errors(couplings, n_qubits: int) -> list[str]:
    errs = []
    seen = set()
    for i, j, lam in couplings:
        if i == j:
            errs.append(f"self-coupling on qubit {i}")
        elif not (0 <= i < n_qubits and 0 <= j < n_qubits):
            errs.append(f"coupling ({i}, {j}) out of range for {n_qubits} qubits")
        elif (min(i, j), max(i, j)) in seen:
            errs.append(f"duplicate coupling ({i}, {j})")
        elif not math.isfinite(lam):
            errs.append("coupling strength must be finite")
        seen.add((min(i, j), max(i, j)))
    return errs


def channel_errors(c: ChannelSpec, n_qubits: int) -> list[str]:
    errs = []
    if c.kind != "dephasing":
        errs.append(f"unsupported channel kind {c.kind!r}")
    if not 0 <= c.site < n_qubits:
        errs.append(f"dephasing site {c.site} out of range for {n_qubits} qubits")
    if not (c.gamma >= 0 and math.isfinite(c.gamma)):
        errs.append(f"dephasing rate must be non-negative, got {c.gamma}")
    return errs


# -- presets and initial states ---------------------------------------------


def preset_nv4() -> ScenarioConfig:
    """Four dipole-coupled NV centers from |+>^4, no dephasing, 3 us at dt = 1 ns."""
    couplings = tuple((i - 1, j - 1, lam) for (i, j), lam in NV4_COUPLINGS_MHZ.items())
    return ScenarioConfig(n_qubits=4, t_final=3.0, couplings=couplings, dt=1e-3)


def entangling_time(lam: float) -> float:
    """Interaction time ``pi / (4 lambda)`` to maximally entangle a ZZ-coupled pair."""
    return math.pi / (4 * lam)


def nv4_entangling_time() -> float:
    """Time scale set by the third-largest NV coupling, lambda_23."""
    return entangling_time(sorted(NV4_COUPLINGS_MHZ.values())[-3])


PRESETS = {"nv4": preset_nv4}

_BITSTRING = re.compile(r"^[01]+$")


def check_initial_state_spec(spec: str, n_qubits: int) -> None:
    if spec in ("plus_product", "ghz") or spec.startswith("file:"):
        return
    if _BITSTRING.match(spec):
        if len(spec) != n_qubits:
            raise ConfigError(f"basis string {spec!r} has length {len(spec)}, expected {n_qubits}")
        return
    raise ConfigError(f"malformed initial_state {spec!r}")


def load_state_file(path: str | Path, n_qubits: int) -> np.ndarray:
    """Read ``re im`` amplitude lines; the vector must have unit norm within 1e-6."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read state file {path}: {exc}") from exc
    amps = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            re_, im_ = (float(p) for p in parts) if len(parts) == 2 else (None, None)
        except ValueError:
            re_ = None
        if re_ is None:
            raise ConfigError(f"{path}: expected 're im' amplitude", lineno)
        amps.append(complex(re_, im_))
    if len(amps) != 2**n_qubits:
        raise ConfigError(f"{path}: expected {2**n_qubits} amplitudes, got {len(amps)}")
    psi = np.array(amps)
    norm = np.linalg.norm(psi)
    if not np.all(np.isfinite(psi)) or abs(norm - 1) > STATE_FILE_NORM_TOL:
        raise ConfigError(f"{path}: state norm {norm:.9g} not within {STATE_FILE_NORM_TOL} of 1")
    return psi / norm


def initial_state(spec: str, n_qubits: int) -> np.ndarray:
    """Pure density matrix for ``plus_product``, ``ghz``, a basis string or ``file:PATH``.

    Basis strings read ``b_{N-1} ... b_0`` (qubit 0 rightmost).
    """
    check_initial_state_spec(spec, n_qubits)
    dim = 2**n_qubits
    if spec == "plus_product":
        psi = np.ones(dim)
    elif spec == "ghz":
        psi = np.zeros(dim)
        psi[0] = psi[-1] = 1
    elif spec.startswith("file:"):
        psi = load_state_file(spec[5:], n_qubits)
    else:
        psi = np.zeros(dim)
        psi[int(spec, 2)] = 1
    return pure_density(psi)


# -- parsing -----------------------------------------------------------------


def _convert(key: str, raw: str, lineno: int):
    kind = SCALAR_KEYS[key]
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}", lineno) from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite", lineno)
    return value


def apply_entry(fields: dict, key: str, raw: str, lineno: int | None) -> None:
    """Apply one ``key = value`` assignment to a mutable field dict.

    Cross-field constraints are checked later by :func:`finalize`.
    """
    if key == "preset":
        if raw not in PRESETS:
            raise ConfigError(f"unknown preset {raw!r}", lineno)
        base = PRESETS[raw]()
        fields.clear()
        fields.update(config_fields(base))
        fields["_lines"] = {}
        return
    lines = fields.setdefault("_lines", {})
    if key == "coupling":
        parts = raw.split()
        try:
            i, j, lam = int(parts[0]), int(parts[1]), float(parts[2])
            if len(parts) != 3:
                raise IndexError
        except (ValueError, IndexError):
            raise ConfigError(f"coupling expects 'i j lambda', got {raw!r}", lineno) from None
        if i == j:
            raise ConfigError(f"self-coupling on qubit {i}", lineno)
        fields["couplings"] = fields.get("couplings", ()) + ((i, j, lam),)
        lines.setdefault("couplings", []).append(lineno)
    elif key == "dephasing":
        parts = raw.split()
        try:
            site, gamma = int(parts[0]), float(parts[1])
            if len(parts) != 2:
                raise IndexError
        except (ValueError, IndexError):
            raise ConfigError(f"dephasing expects 'site gamma', got {raw!r}", lineno) from None
        fields["channels"] = fields.get("channels", ()) + (ChannelSpec("dephasing", site, gamma),)
        lines.setdefault("channels", []).append(lineno)
    elif key == "gamma":
        gamma = _convert_float(key, raw, lineno)
        n = fields.get("n_qubits")
        if n is None:
            raise ConfigError("gamma requires n_qubits (or a preset) to be set first", lineno)
        fields["channels"] = tuple(ChannelSpec("dephasing", q, gamma) for q in range(n))
        lines["channels"] = [lineno] * n
    elif key in SCALAR_KEYS:
        fields[key] = _convert(key, raw, lineno)
        lines[key] = lineno
    else:
        raise ConfigError(f"unknown key {key!r}", lineno)


def _convert_float(key: str, raw: str, lineno: int | None) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as float", lineno) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite", lineno)
    return value


def config_fields(cfg: ScenarioConfig) -> dict:
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}


def finalize(fields: dict) -> ScenarioConfig:
    """Build the config, attributing constraint violations to their lines."""
    lines = fields.pop("_lines", {})
    for required in ("n_qubits", "t_final"):
        if required not in fields:
            raise ConfigError(f"missing required key {required!r}")
    n = fields["n_qubits"]
    if not 1 <= n <= MAX_QUBITS:
        raise ConfigError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n}", lines.get("n_qubits"))
    seen = set()
    for k, c in enumerate(fields.get("couplings", ())):
        errs = coupling_errors([c], n)
        pair = (min(c[0], c[1]), max(c[0], c[1]))
        if not errs and pair in seen:
            errs = [f"duplicate coupling ({c[0]}, {c[1]})"]
        seen.add(pair)
        if errs:
            ln = lines.get("couplings", [])
            raise ConfigError(errs[0], ln[k] if k < len(ln) else None)
    for k, c in enumerate(fields.get("channels", ())):
        errs = channel_errors(c, n)
        if errs:
            ln = lines.get("channels", [])
            raise ConfigError(errs[0], ln[k] if k < len(ln) else None)
    if "initial_state" in fields:
        try:
            check_initial_state_spec(fields["initial_state"], n)
        except ConfigError as exc:
            raise ConfigError(str(exc), lines.get("initial_state")) from None
    try:
        return ScenarioConfig(**fields)
    except ConfigError:
        key, msg = validation_errors(_unchecked(fields))[0]
        line = lines.get(key)
        raise ConfigError(msg, line if isinstance(line, int) else None) from None


def _unchecked(fields: dict) -> SimpleNamespace:
    defaults = {f.name: f.default for f in dataclasses.fields(ScenarioConfig) if f.default is not dataclasses.MISSING}
    return SimpleNamespace(**{**defaults, **fields})


def split_line(line: str, lineno: int | None) -> tuple[str, str] | None:
    line = line.split("#", 1)[0].strip()
    if not line:
        return None
    if "=" not in line:
        raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
    key, value = (s.strip() for s in line.split("=", 1))
    if not key or not value:
        raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
    return key, value


def parse_fields(text: str) -> dict:
    fields: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        entry = split_line(line, lineno)
        if entry is not None:
            apply_entry(fields, *entry, lineno)
    return fields


def parse_config(text: str) -> ScenarioConfig:
    """Parse config text; every problem raises :class:`ConfigError` with a line number where one applies."""
    return finalize(parse_fields(text))


def with_overrides(text: str, overrides: list[str]) -> ScenarioConfig:
    """Parse ``text`` and then apply ``key=value`` overrides with identical validation."""
    fields = parse_fields(text)
    for k, item in enumerate(overrides, 1):
        entry = split_line(item, None)
        if entry is None:
            raise ConfigError(f"empty override #{k}")
        try:
            apply_entry(fields, *entry, None)
        except ConfigError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from None
    return finalize(fields)


def serialize_config(cfg: ScenarioConfig) -> str:
    out = [f"n_qubits = {cfg.n_qubits}"]
    for i, j, lam in cfg.couplings:
        out.append(f"coupling = {i} {j} {lam!r}")
    for c in cfg.channels:
        out.append(f"{c.kind} = {c.site} {c.gamma!r}")
    for key in SCALAR_KEYS:
        if key == "n_qubits":
            continue
        value = getattr(cfg, key)
        out.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(out) + "\n"


# -- running -----------------------------------------------------------------


def simulate(cfg: ScenarioConfig) -> Trajectory:
    """Propagate the configured scenario with the configured controller."""
    rho0 = initial_state(cfg.initial_state, cfg.n_qubits)
    h_sys = build_hsys(cfg.coupling_graph())
    channels = cfg.lindblad_channels()
    hook = None
    if cfg.control_mode != ControlMode.NONE.value:
        hook = controller_hook(
            h_sys,
            channels,
            build_basis(cfg.n_qubits, cfg.control_mode),
            cfg.h_max_angular,
            refresh_stride=cfg.refresh_stride,
            noise_relative=cfg.noise_relative,
            rng_seed=cfg.rng_seed,
        )
    return propagate(rho0, cfg.t_final, cfg.dt, hook, channels, h_sys, sample_stride=cfg.sample_stride)


def apply_sweep_value(cfg: ScenarioConfig, key: str, value: float) -> ScenarioConfig:
    if key not in SWEEPABLE_KEYS:
        raise ConfigError(f"{key!r} is not sweepable; choose from {', '.join(SWEEPABLE_KEYS)}")
    if key == "gamma":
        return replace(cfg, channels=tuple(ChannelSpec("dephasing", q, value) for q in range(cfg.n_qubits)))
    return replace(cfg, **{key: value})
