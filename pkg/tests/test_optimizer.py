import numpy as np
import pytest

from stapulse.dynamics import Model
from stapulse.invariant import table1_case
from stapulse.levels import EnsembleSpec
from stapulse.optimizer import (
    BoundaryWarning,
    OptimizerSettings,
    ScoreSpec,
    band_fidelity,
    fidelity_equivalent,
    optimize,
    random_feasible,
    score,
)

QUICK = OptimizerSettings(sa_iterations=6, simplex_max_evals=6, seed=5)
SPEC = ScoreSpec(band_samples=3)


@pytest.fixture(scope="module")
def small():
    return Model(ensemble=EnsembleSpec(n_members=1, spectator_offsets=(-2e6,)))


def test_case1_scores_low(small):
    s = score(table1_case(1), SPEC, small)
    assert 0 < s < 0.01
    assert band_fidelity(table1_case(1), SPEC, small) > 0.98


def test_score_orders_like_fidelity(small):
    good, bad = table1_case(1), random_feasible(3)
    assert score(good, SPEC, small) < score(bad, SPEC, small)
    assert band_fidelity(good, SPEC, small) > band_fidelity(bad, SPEC, small)
    assert fidelity_equivalent(0.02) == 0.01


def test_seeded_run_is_reproducible(small):
    r1 = optimize(random_feasible(2), SPEC, QUICK, small)
    r2 = optimize(random_feasible(2), SPEC, QUICK, small)
    assert r1.scores == r2.scores and r1.best.a == r2.best.a
    assert all(b >= c for b, c in zip(r1.history, r1.history[1:]))
    assert r1.best_score == min(r1.scores) == r1.history[-1]
    assert r1.best.satisfies_constraints(1e-12)


def test_boundary_is_flagged(small):
    # a box on the wrong side of the case 1 solution for a_1
    bounds = ((0.5, 1.0),) + ((-1.5, 1.5),) * 5
    s = OptimizerSettings(sa_iterations=4, simplex_max_evals=0, bounds=bounds)
    with pytest.warns(BoundaryWarning):
        res = optimize(table1_case(1), SPEC, s, small)
    assert res.warning and "a_1" in res.warning
    assert res.best.a[0] == 0.5


def test_settings_validation():
    with pytest.raises(ValueError):
        OptimizerSettings(bounds=((1, 0),) * 6)
    with pytest.raises(ValueError):
        OptimizerSettings(sa_cooling=1.5)
    with pytest.raises(ValueError):
        ScoreSpec(band_samples=0)
    with pytest.raises(ValueError):
        ScoreSpec(target=np.eye(6))


def test_explicit_target(small):
    t = np.zeros((6, 6), complex)
    t[2, 2] = 1
    assert score(table1_case(1), ScoreSpec(band_samples=3, target=t), small) == pytest.approx(
        score(table1_case(1), SPEC, small))


def test_random_feasible_in_range():
    a = random_feasible(9, spread=0.3)
    assert np.all(np.abs(a.free) <= 0.3) and a.satisfies_constraints(1e-12)
    assert random_feasible(9).a == random_feasible(9).a


def test_score_ignores_target_global_phase(small):
    from stapulse.dynamics import target_state

    psi = target_state(np.pi / 2, 0.0) * np.exp(0.7j)
    t = ScoreSpec(band_samples=3, target=np.outer(psi, psi.conj()))
    assert score(table1_case(1), t, small) == pytest.approx(score(table1_case(1), SPEC, small), abs=1e-14)


def test_every_candidate_meets_endpoint_conditions(small):
    seen = []
    optimize(random_feasible(4), SPEC, QUICK, small, callback=lambda i, s, b: seen.append(s))
    assert len(seen) > 0
    res = optimize(random_feasible(4), SPEC, QUICK, small)
    assert res.best.satisfies_constraints(1e-12)
