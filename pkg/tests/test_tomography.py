import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stapulse.dynamics import DensityState, Model
from stapulse.levels import ConfigError, EnsembleSpec
from stapulse.tomography import (
    SechParams,
    TomographySpec,
    _bright_phase,
    bloch_of,
    default_sech_spec,
    load_tomography,
    qst_readout,
    qst_symmetry_study,
    qubit_state,
    random_states,
    readout_fidelity,
    rotate_quarter_turns,
    sech_sequence,
)

unit = st.tuples(st.floats(0, np.pi), st.floats(0, 2 * np.pi)).map(
    lambda a: np.array([np.sin(a[0]) * np.cos(a[1]), np.sin(a[0]) * np.sin(a[1]), np.cos(a[0])])
).map(lambda v: v / np.linalg.norm(v))


@pytest.fixture(scope="module")
def small_model():
    return Model(ensemble=EnsembleSpec(n_members=9))


@given(unit)
@settings(max_examples=40, deadline=None)
def test_qubit_state_round_trip(n):
    rho = DensityState.pure(qubit_state(n)).rho
    assert np.allclose(bloch_of(rho), n, atol=1e-12)


def test_ideal_readout_is_exact(model):
    spec = TomographySpec("ideal")
    for n in ([1, 0, 0], [0, -1, 0], [0.6, 0, 0.8], [0, 0, -1]):
        rho = DensityState.pure(qubit_state(n)).rho
        assert np.allclose(qst_readout(rho, spec, model), n, atol=1e-9)


def test_readout_fidelity_formula():
    assert readout_fidelity([1, 0, 0], [1, 0, 0]) == 1.0
    assert readout_fidelity([0, 1, 0], [1, 0, 0]) == 0.5
    assert readout_fidelity([1.1, 0, 0], [1, 0, 0]) > 1


def test_shipped_sech_config():
    spec = default_sech_spec()
    assert spec.pulse_kind == "sech" and spec.n_members is None
    assert spec.sech.duration == pytest.approx(1.0607e-6)
    assert spec.sech.rotation_phase is not None


def test_calibrated_phase_gives_quarter_turn():
    p = default_sech_spec().sech
    assert _bright_phase(p, p.rotation_phase) == pytest.approx(np.pi / 2, abs=1e-6)


def test_sech_sequence_shape():
    p = default_sech_spec().sech
    seq = sech_sequence(p, "X", 0.3)
    assert seq.t_f == pytest.approx(2 * p.duration)
    assert np.iscomplexobj(seq.omega_p)
    assert np.abs(seq.omega_p).max() == pytest.approx(p.peak_rabi, rel=1e-3)
    assert seq.phi - seq.phi_s == pytest.approx(np.pi / 2)


def test_sech_readout_is_azimuthally_covariant(small_model):
    spec = default_sech_spec()
    fx = readout_fidelity(qst_readout(DensityState.pure(qubit_state([1, 0, 0])).rho, spec, small_model), [1, 0, 0])
    fy = readout_fidelity(qst_readout(DensityState.pure(qubit_state([0, 1, 0])).rho, spec, small_model), [0, 1, 0])
    assert fx == pytest.approx(fy, abs=1e-3)
    assert 0.8 < fx < 1.0


def test_member_stack_matches_single_state(small_model):
    spec = default_sech_spec()
    rho = DensityState.pure(qubit_state([0.6, 0.8, 0])).rho
    single = qst_readout(rho, spec, small_model)
    stack = qst_readout(np.repeat(rho[None], 9, 0), spec, small_model)
    assert np.allclose(single, stack, atol=1e-12)


def test_random_states_and_rotations():
    s = random_states(50, 1)
    assert np.allclose(np.linalg.norm(s, axis=1), 1) and np.all(np.abs(s[:, 2]) <= 0.2)
    r = rotate_quarter_turns(s)
    assert r.shape == (50, 4, 3)
    assert np.allclose(r.sum(axis=1)[:, :2], 0, atol=1e-12)
    assert np.all(random_states(10, 1, "one")[:, 2] < -0.95)
    with pytest.raises(ValueError):
        random_states(3, 0, "pole")


def test_symmetry_study_averaging_narrows_band(small_model):
    s = qst_symmetry_study(200, 3, default_sech_spec(), small_model).summary()
    assert s["averaged_spread"] < s["unaveraged_spread"] / 5


def test_config_validation():
    with pytest.raises(ConfigError, match="unknown"):
        load_tomography({"pulse_kind": "sech", "colour": 1})
    with pytest.raises(ConfigError):
        TomographySpec("gaussian")
    with pytest.raises(ConfigError):
        TomographySpec(axes=("X", "X", "Z"))
    with pytest.raises(ConfigError):
        SechParams(duration=-1)
    spec = load_tomography('pulse_kind = "ideal"\naxes = ["Z", "X", "Y"]\nwait = 0.0\n')
    assert spec.axes == ("Z", "X", "Y") and spec.wait == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_averaging_reduces_spread_for_every_seed(small_model, seed):
    s = qst_symmetry_study(100, seed, default_sech_spec(), small_model).summary()
    assert s["averaged_spread"] < s["unaveraged_spread"]
