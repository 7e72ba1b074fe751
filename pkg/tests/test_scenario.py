import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entcontrol.entanglement import tau
from entcontrol.quantum_core import purity
from entcontrol.scenario import (
    NV4_COUPLINGS_MHZ,
    ChannelSpec,
    ConfigError,
    ScenarioConfig,
    apply_sweep_value,
    initial_state,
    nv4_entangling_time,
    parse_config,
    preset_nv4,
    serialize_config,
    with_overrides,
)


class TestPreset:
    def test_values(self):
        cfg = preset_nv4()
        assert cfg.n_qubits == 4 and cfg.t_final == 3.0 and cfg.dt == 1e-3
        assert cfg.channels == () and cfg.initial_state == "plus_product"
        assert dict(((i, j), lam) for i, j, lam in cfg.couplings) == {
            (0, 1): 9.8,
            (2, 3): 2.7,
            (1, 2): 1.3,
            (0, 2): 0.1,
            (0, 3): 0.3,
            (1, 3): 0.5,
        }

    def test_largest_coupling(self):
        assert max(lam for *_, lam in preset_nv4().couplings) == 9.8
        assert len(NV4_COUPLINGS_MHZ) == 6

    def test_entangling_time(self):
        assert nv4_entangling_time() == pytest.approx(math.pi / (4 * 1.3))
        assert nv4_entangling_time() == pytest.approx(0.6042, abs=1e-4)

    def test_ordinary_convention_scales_frequencies(self):
        cfg = replace(preset_nv4(), frequency_convention="ordinary", h_max=17.0)
        pairs = {(i, j): lam for i, j, lam in cfg.coupling_graph().pairs}
        assert pairs[(0, 1)] == pytest.approx(2 * math.pi * 9.8)
        assert cfg.h_max_angular == pytest.approx(2 * math.pi * 17.0)


class TestInitialState:
    def test_plus_product(self):
        rho = initial_state("plus_product", 4)
        assert purity(rho) == pytest.approx(1.0)
        assert tau(rho) == pytest.approx(0.0, abs=1e-12)

    def test_ghz(self):
        assert tau(initial_state("ghz", 4)) == pytest.approx(1.75, abs=1e-9)

    def test_basis_string(self):
        rho = initial_state("0101", 4)
        assert rho[0b0101, 0b0101] == 1
        assert tau(rho) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("spec", ["012", "010", "plus", ""])
    def test_malformed(self, spec):
        with pytest.raises(ConfigError):
            initial_state(spec, 4)

    def test_state_file(self, tmp_path):
        path = tmp_path / "bell.txt"
        path.write_text(f"{1 / math.sqrt(2)} 0\n0 0\n0 0\n0 {1 / math.sqrt(2)}\n")
        rho = initial_state(f"file:{path}", 2)
        assert rho[0, 3] == pytest.approx(-0.5j)
        assert tau(rho) == pytest.approx(1.0)

    @pytest.mark.parametrize("body", ["1 0\n0 0\n0 0\n", "1 0\n1 0\n0 0\n0 0\n", "1 x\n0 0\n0 0\n0 0\n"])
    def test_bad_state_file(self, tmp_path, body):
        path = tmp_path / "s.txt"
        path.write_text(body)
        with pytest.raises(ConfigError):
            initial_state(f"file:{path}", 2)

    def test_missing_state_file(self, tmp_path):
        with pytest.raises(ConfigError):
            initial_state(f"file:{tmp_path / 'nope'}", 2)


class TestParse:
    def test_minimal_defaults(self):
        cfg = parse_config("n_qubits = 2\nt_final = 1.5\n")
        assert cfg == ScenarioConfig(n_qubits=2, t_final=1.5)
        assert cfg.dt == 1e-3 and cfg.control_mode == "none" and cfg.tau_ref == 2.0

    def test_full(self):
        text = """
        # comment line
        n_qubits = 3   # trailing comment
        t_final = 2
        coupling = 0 1 1.5
        coupling = 2 1 0.5
        dephasing = 0 0.02
        control_mode = unaddressable
        h_max = 17
        initial_state = ghz
        """
        cfg = parse_config(text)
        assert cfg.couplings == ((0, 1, 1.5), (2, 1, 0.5))
        assert cfg.coupling_graph().pairs[1] == (1, 2, 0.5)
        assert cfg.channels == (ChannelSpec("dephasing", 0, 0.02),)
        assert cfg.control_mode == "unaddressable" and cfg.h_max == 17.0

    def test_preset_key(self):
        cfg = parse_config("preset = nv4\ngamma = 0.02\ncontrol_mode = addressable\nh_max = 17\n")
        assert cfg.couplings == preset_nv4().couplings
        assert len(cfg.channels) == 4 and all(c.gamma == 0.02 for c in cfg.channels)

    @pytest.mark.parametrize(
        "text, line, fragment",
        [
            ("n_qubits = 2\nt_final = 1\ncoupling = 0 0 1.0\n", 3, "self-coupling"),
            ("n_qubits = 2\nt_final = 1\nfoo = 3\n", 3, "unknown key"),
            ("n_qubits = 2\nt_final = one\n", 2, "cannot parse"),
            ("n_qubits = 2\nt_final = 1\ncoupling = 0 5 1.0\n", 3, "out of range"),
            ("t_final = 1\ncoupling = 0 2 1.0\nn_qubits = 2\n", 2, "out of range"),
            ("n_qubits = 2\nt_final = 1\ncoupling = 0 1\n", 3, "coupling expects"),
            ("n_qubits = 2\nt_final = 1\ncoupling = 0 1 1\ncoupling = 1 0 2\n", 4, "duplicate"),
            ("n_qubits = 2\nt_final = 1\ndephasing = 0 -1\n", 3, "non-negative"),
            ("n_qubits = 2\nt_final = 1\ndt = 0\n", 3, "dt must be positive"),
            ("n_qubits = 2\nt_final = -1\n", 2, "t_final"),
            ("n_qubits = 2\nt_final = 1\nh_max = -3\n", 3, "h_max"),
            ("n_qubits = 2\nt_final = 1\ncontrol_mode = global\n", 3, "control_mode"),
            ("n_qubits = 2\nt_final = 1\ninitial_state = 0101\n", 3, "basis string"),
            ("n_qubits = 2\nt_final = 1\njust text\n", 3, "key = value"),
            ("n_qubits = 12\nt_final = 1\n", 1, "n_qubits"),
            ("n_qubits = 2\nt_final = nan\n", 2, "finite"),
            ("preset = nv5\n", 1, "unknown preset"),
            ("gamma = 0.1\nn_qubits = 2\nt_final = 1\n", 1, "requires n_qubits"),
        ],
    )
    def test_diagnostics(self, text, line, fragment):
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.line == line
        assert fragment in str(info.value)

    @pytest.mark.parametrize("text", ["", "# nothing\n", "n_qubits = 2\n", "t_final = 1\n"])
    def test_missing_required(self, text):
        with pytest.raises(ConfigError, match="missing required"):
            parse_config(text)

    def test_overrides(self):
        cfg = with_overrides("preset = nv4\n", ["control_mode=addressable", "h_max = 17"])
        assert cfg.h_max == 17.0 and cfg.control_mode == "addressable"
        with pytest.raises(ConfigError):
            with_overrides("preset = nv4\n", ["h_max=-1"])
        with pytest.raises(ConfigError):
            with_overrides("preset = nv4\n", ["bogus=1"])

    def test_sweep_values(self):
        cfg = preset_nv4()
        assert apply_sweep_value(cfg, "h_max", 2.5).h_max == 2.5
        assert [c.gamma for c in apply_sweep_value(cfg, "gamma", 0.02).channels] == [0.02] * 4
        with pytest.raises(ConfigError):
            apply_sweep_value(cfg, "n_qubits", 3)


def test_preset_round_trip():
    cfg = replace(preset_nv4(), channels=(ChannelSpec("dephasing", 0, 0.02),), h_max=17.0, control_mode="addressable")
    assert parse_config(serialize_config(cfg)) == cfg


@st.composite
def configs(draw):
    n = draw(st.integers(1, 5))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
    positive = st.floats(1e-6, 10, allow_nan=False)
    couplings = tuple((i, j, draw(finite)) for i, j in chosen)
    channels = tuple(
        ChannelSpec("dephasing", draw(st.integers(0, n - 1)), draw(st.floats(0, 5, allow_nan=False)))
        for _ in range(draw(st.integers(0, 3)))
    )
    init = draw(st.sampled_from(["plus_product", "ghz", "bits"]))
    if init == "bits":
        init = "".join(draw(st.sampled_from("01")) for _ in range(n))
    return ScenarioConfig(
        n_qubits=n,
        t_final=draw(st.floats(0, 100, allow_nan=False)),
        couplings=couplings,
        channels=channels,
        initial_state=init,
        h_max=draw(st.floats(0, 100, allow_nan=False)),
        control_mode=draw(st.sampled_from(["none", "addressable", "unaddressable"])),
        dt=draw(positive),
        refresh_stride=draw(st.integers(1, 10)),
        sample_stride=draw(st.integers(1, 10)),
        noise_relative=draw(st.floats(0, 1, allow_nan=False)),
        rng_seed=draw(st.integers(0, 2**31)),
        tau_ref=draw(positive),
        frequency_convention=draw(st.sampled_from(["angular", "ordinary"])),
        output_path=draw(st.sampled_from(["out.csv", "runs/a.csv"])),
    )


@settings(max_examples=100, deadline=None)
@given(configs())
def test_serialize_round_trip(cfg):
    assert parse_config(serialize_config(cfg)) == cfg


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.sampled_from(list("abn_qubitsfl=0123456789 .-#\n")), max_size=80))
def test_parser_never_crashes(text):
    try:
        parse_config(text)
    except ConfigError:
        pass
