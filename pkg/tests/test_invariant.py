import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import GAMMA_MID_CASE1, LR_PHASE_CASE1, PEAK_OMEGA, closed_form_rabi, lambda_rk4
from stapulse.invariant import (
    TABLE1,
    AnsatzCoefficients,
    ConstraintError,
    InvariantSpec,
    eigenstate,
    eigenstate_phi0,
    from_free,
    gamma,
    gamma_dot,
    interchange_pulses,
    invariant_matrix,
    lr_phase,
    rabi,
    reverse_pulses,
    square_reference,
    synthesize_pulses,
    table1_case,
    verify_invariant_condition,
)

free_coeffs = st.lists(st.floats(-1.0, 1.0, allow_nan=False), min_size=6, max_size=6)
angles = st.tuples(st.floats(0.05, np.pi - 0.05), st.floats(0.0, 2 * np.pi))


def test_gamma_midpoint_matches_frozen_value():
    a = table1_case(1)
    assert gamma(a, a.t_f / 2) == pytest.approx(GAMMA_MID_CASE1, abs=1e-13)


@pytest.mark.parametrize("case", [1, 2, 3])
def test_peak_rabi_matches_frozen_value(case):
    assert synthesize_pulses(table1_case(case)).peak == pytest.approx(PEAK_OMEGA[case], rel=1e-10)


@pytest.mark.parametrize("case", [1, 2, 3])
def test_printed_rows_meet_endpoint_conditions(case):
    a = table1_case(case, project=False)
    odd, even = a.constraint_residuals()
    assert abs(odd) < 1e-3 and abs(even) < 1e-3
    b = table1_case(case)
    assert np.allclose(b.constraint_residuals(), 0, atol=1e-15)
    assert np.allclose(b.a[:6], TABLE1[case][:6])


def test_case1_printed_residuals():
    odd, even = table1_case(1, project=False).constraint_residuals()
    assert round(abs(odd), 4) == 0.0
    assert round(abs(even), 4) == 0.0002


def test_constraint_error_names_violated_condition():
    a = AnsatzCoefficients((0.1, 0, 0, 0, 0, 0, 0, 0))
    with pytest.raises(ConstraintError, match="a_1 \\+ 3a_3"):
        a.check_constraints()


def test_coefficient_validation():
    with pytest.raises(ValueError):
        AnsatzCoefficients((0.0,) * 7)
    with pytest.raises(ValueError):
        AnsatzCoefficients((0.0,) * 8, t_f=0)
    with pytest.raises(ValueError):
        AnsatzCoefficients((0.0,) * 8, theta=4.0)


def test_grid_limits():
    a = table1_case(1)
    with pytest.raises(ValueError, match="too coarse"):
        synthesize_pulses(a, n_samples=40)
    with pytest.raises(ValueError, match="divide"):
        synthesize_pulses(a, dt=3e-8)
    p = synthesize_pulses(a, dt=a.t_f / 64)
    assert p.n_samples == 65
    with pytest.raises(ValueError):
        gamma(a, 1.1 * a.t_f)


@given(free_coeffs, angles)
@settings(max_examples=60, deadline=None)
def test_projected_coefficients_give_zero_endpoints(free, ang):
    a = from_free(free, theta=ang[0], phi=ang[1])
    assert a.satisfies_constraints(1e-12)
    assert gamma(a, 0.0) == 0.0
    assert gamma(a, a.t_f) == pytest.approx(np.pi, abs=1e-12)
    assert abs(gamma_dot(a, 0.0)) < 1e-6 and abs(gamma_dot(a, a.t_f)) < 1e-6
    assert synthesize_pulses(a, n_samples=257).endpoint_zero(1e-6)


@given(free_coeffs, angles)
@settings(max_examples=40, deadline=None)
def test_dark_eigenvector_transports_one_to_target(free, ang):
    theta, phi = ang
    a = from_free(free, theta=theta, phi=phi)
    start = eigenstate_phi0(a, 0.0)
    end = eigenstate_phi0(a, a.t_f)
    assert abs(start[0]) == pytest.approx(1.0, abs=1e-12)
    target = np.array([np.cos(theta) * np.exp(1j * phi), 0, np.sin(theta)])
    assert abs(np.vdot(target, end)) ** 2 == pytest.approx(1.0, abs=1e-12)


@given(free_coeffs, free_coeffs)
@settings(max_examples=30, deadline=None)
def test_gamma_is_affine_in_coefficients(f1, f2):
    a, b = from_free(f1), from_free(f2)
    s = AnsatzCoefficients(tuple(x + y for x, y in zip(a.a, b.a)))
    t = np.linspace(0, a.t_f, 33)
    ramp = np.pi * t / a.t_f
    assert np.allclose(gamma(s, t) - ramp, (gamma(a, t) - ramp) + (gamma(b, t) - ramp), atol=1e-12)


@given(free_coeffs)
@settings(max_examples=30, deadline=None)
def test_reverse_and_interchange_are_involutions(free):
    p = synthesize_pulses(from_free(free, phi=0.4), n_samples=129)
    assert reverse_pulses(reverse_pulses(p)).equals(p)
    assert interchange_pulses(interchange_pulses(p)).equals(p)
    r = reverse_pulses(p)
    assert np.array_equal(r.omega_p, -p.omega_p[::-1])
    i = interchange_pulses(p)
    assert np.array_equal(i.omega_p, p.omega_s) and i.phi_s == p.phi


@pytest.mark.parametrize("case", [1, 2, 3])
def test_closed_form_envelopes_agree_with_independent_formula(case):
    a = table1_case(case)
    op, os_ = closed_form_rabi(a.a, a.theta)
    t = np.linspace(0, a.t_f, 101)
    p, s = rabi(a, t)
    assert np.allclose(p, [op(x) for x in t], rtol=1e-12, atol=1e-6)
    assert np.allclose(s, [os_(x) for x in t], rtol=1e-12, atol=1e-6)


def test_rk4_oracle_confirms_transfer():
    a = table1_case(1)
    op, os_ = closed_form_rabi(a.a, a.theta)
    psi = lambda_rk4(op, os_, [1, 0, 0], a.t_f, 10230)
    assert abs(psi[2]) ** 2 > 1 - 1e-9


@pytest.mark.parametrize("case", [1, 2, 3])
def test_invariant_condition_holds(case):
    assert verify_invariant_condition(table1_case(case)) < 1e-9


def test_perturbed_pulses_break_invariant_condition():
    a = table1_case(1)
    p = synthesize_pulses(a).scaled(1.1, 1.1)
    assert verify_invariant_condition(a, pulses=p) > 1e-3


def test_invariant_spectrum():
    spec = InvariantSpec(table1_case(2), omega0=2.0)
    for t in (0.0, 1e-6, 2.5e-6):
        ev = np.linalg.eigvalsh(invariant_matrix(spec, t))
        assert np.allclose(ev, [-1.0, 0.0, 1.0], atol=1e-12)
    a = spec.coefficients
    for n in (0, 1, -1):
        v = eigenstate(a, 1.3e-6, n)
        assert np.allclose(invariant_matrix(spec, 1.3e-6) @ v, n * v, atol=1e-12)
    with pytest.raises(ValueError):
        InvariantSpec(a, omega0=0)


def test_lr_phases():
    a = table1_case(1)
    assert lr_phase(a, 0) == pytest.approx(0.0, abs=1e-12)
    for n, ref in LR_PHASE_CASE1.items():
        assert lr_phase(a, n) == pytest.approx(ref, abs=1e-9)
    coarse = lr_phase(a, 1, np.linspace(0, a.t_f, 257), method="trapezoid")
    assert coarse == pytest.approx(LR_PHASE_CASE1[1], abs=1e-3)
    with pytest.raises(ValueError):
        lr_phase(a, 2)


def test_square_reference():
    p = synthesize_pulses(table1_case(1))
    q = square_reference(p)
    assert q.t_f == p.t_f
    assert np.all(q.omega_p == np.abs(p.omega_p).max())
    r = square_reference(p, pi_area=True)
    assert r.omega_p[0] * r.t_f == pytest.approx(np.pi)


@given(free_coeffs)
@settings(max_examples=40, deadline=None)
def test_weighted_coefficient_sum(free):
    a = from_free(free)
    assert sum(n * c for n, c in enumerate(a.a, start=1)) == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize("case", [1, 2, 3])
def test_doubling_resolution_keeps_shared_samples(case):
    a = table1_case(case)
    p = synthesize_pulses(a, n_samples=513)
    q = synthesize_pulses(a, n_samples=1025)
    scale = p.peak
    assert np.abs(q.omega_p[::2] - p.omega_p).max() <= 1e-12 * scale
    assert np.abs(q.omega_s[::2] - p.omega_s).max() <= 1e-12 * scale


@pytest.mark.parametrize("frac", [0.1, 0.25, 0.5, 0.7, 0.9])
def test_state_follows_transported_eigenvector(frac):
    a = table1_case(1)
    op, os_ = closed_form_rabi(a.a, a.theta)
    t = frac * a.t_f
    psi = lambda_rk4(op, os_, [1, 0, 0], t, 4000)
    assert abs(np.vdot(eigenstate_phi0(a, t), psi)) ** 2 >= 1 - 1e-6


@given(free_coeffs, angles)
@settings(max_examples=8, deadline=None)
def test_random_coefficients_transport_by_propagation(free, ang):
    from stapulse.dynamics import PropagationSettings, propagate_pure

    a = from_free(free, theta=ang[0], phi=ang[1])
    psi = propagate_pure([1, 0, 0], synthesize_pulses(a), PropagationSettings(1e-8, 1e-10))
    target = np.array([np.cos(a.theta) * np.exp(1j * a.phi), 0, np.sin(a.theta)])
    assert abs(np.vdot(target, psi)) ** 2 >= 1 - 1e-6
