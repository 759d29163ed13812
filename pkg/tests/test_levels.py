import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stapulse.levels import (
    EXCITED_LABELS,
    GROUND_LABELS,
    INDEX,
    ConfigError,
    DecoherenceSpec,
    EnsembleSpec,
    default_config_text,
    default_level_system,
    load_decoherence,
    load_ensemble,
    load_level_system,
    transition_table,
)

try:
    import tomllib
except ImportError:
    import tomli as tomllib


def _doc():
    return tomllib.loads(default_config_text())


def test_default_layout():
    sys = default_level_system()
    assert sys.frequency("zero", "e1") == 0.0
    assert sys.energy("zero") - sys.energy("one") == pytest.approx(10.2e6)
    assert sys.energy("one") - sys.energy("aux") == pytest.approx(17.3e6)
    assert np.allclose(sys.oscillator_strengths.sum(axis=1), 1.0)
    assert sys.tone_s_Hz - sys.tone_p_Hz == pytest.approx(-10.2e6)
    pos = sys.peak_positions()
    assert sorted(pos) == [1, 2, 3, 4, 5]
    assert all(-2e6 < f < 17e6 for f in pos.values())


def test_basis_order():
    assert [INDEX[g] for g in GROUND_LABELS] == [0, 1, 2]
    assert [INDEX[e] for e in EXCITED_LABELS] == [3, 4, 5]


def test_transition_table_covers_all_lines():
    table = transition_table(default_level_system())
    assert len(table) == 9
    assert sum(t.peak is not None for t in table) == 5


def test_missing_table_is_reported():
    doc = _doc()
    del doc["oscillator_strengths"]
    with pytest.raises(ConfigError, match="oscillator_strengths"):
        load_level_system(doc)


def test_unknown_key_is_reported():
    doc = _doc()
    doc["ground"] = dict(doc["ground"], bogus=1.0)
    with pytest.raises(ConfigError, match="bogus"):
        load_level_system(doc)


def test_negative_strength_is_reported():
    doc = _doc()
    doc["oscillator_strengths"] = dict(doc["oscillator_strengths"], zero=[1.1, -0.1, 0.0])
    with pytest.raises(ConfigError, match="negative"):
        load_level_system(doc)


def test_row_sum_is_checked():
    doc = _doc()
    doc["oscillator_strengths"] = dict(doc["oscillator_strengths"], zero=[0.5, 0.3, 0.1])
    with pytest.raises(ConfigError, match="sum"):
        load_level_system(doc)


def test_aux_default_is_recorded():
    doc = _doc()
    doc["ground"] = {k: v for k, v in doc["ground"].items() if k != "aux"}
    sys = load_level_system(doc)
    assert sys.energy("aux") == pytest.approx(-27.5e6)
    assert any("aux" in d for d in sys.defaults_applied)


def test_bad_toml_is_config_error():
    with pytest.raises(ConfigError):
        load_level_system("not = [valid")


def test_decoherence_validation():
    assert load_decoherence(default_config_text()).t2_optical == 132e-6
    with pytest.raises(ConfigError):
        DecoherenceSpec(t2_optical=400e-6)
    with pytest.raises(ConfigError):
        DecoherenceSpec(t1_optical=-1)
    with pytest.raises(ConfigError):
        DecoherenceSpec(branching=[0.5, 0.6, 0.0])
    d = DecoherenceSpec(branching=[0.2, 0.3, 0.5])
    assert np.allclose(d.branching_matrix(default_level_system()), [[0.2, 0.3, 0.5]] * 3)


def test_default_branching_rows_normalised():
    b = DecoherenceSpec().branching_matrix(default_level_system())
    assert b.shape == (3, 3) and np.allclose(b.sum(axis=1), 1)


@given(st.integers(2, 81), st.sampled_from(["quantile", "hermite"]))
@settings(max_examples=30, deadline=None)
def test_ensemble_members_symmetric_and_normalised(n, quad):
    x, w = EnsembleSpec(170e3, n, quad).members()
    assert x.size == n
    assert np.allclose(x, -x[::-1])
    assert w.sum() == pytest.approx(1.0)


def test_hermite_rule_reproduces_variance():
    ens = EnsembleSpec(170e3, 21, "hermite")
    x, w = ens.members()
    assert w @ x**2 == pytest.approx(ens.sigma**2, rel=1e-10)
    q = EnsembleSpec(170e3, 41).members()[0]
    assert np.sqrt(np.mean(q**2)) == pytest.approx(ens.sigma, rel=0.05)


def test_band_members_stay_inside_band():
    x, w = EnsembleSpec().band_members(500e3, 9)
    assert np.all(np.abs(x) < 500e3) and w.sum() == pytest.approx(1)
    assert load_ensemble(default_config_text()).n_members == 41
    with pytest.raises(ConfigError):
        EnsembleSpec(n_members=0)


def test_table_ignores_config_key_order():
    doc = _doc()
    shuffled = {k: (dict(reversed(list(v.items()))) if isinstance(v, dict) else v)
                for k, v in reversed(list(doc.items()))}
    assert transition_table(load_level_system(shuffled)) == transition_table(load_level_system(doc))


@pytest.mark.parametrize("quad", ["quantile", "hermite"])
@pytest.mark.parametrize("n", [1, 2, 7, 41])
def test_ensemble_mean_detuning_is_zero(quad, n):
    e = EnsembleSpec(n_members=n, quadrature=quad)
    x, w = e.members()
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(np.dot(w, x)) <= 1e-9 * e.detuning_fwhm
