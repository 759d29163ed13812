import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stapulse.integrate import IntegrationError, dopri5


@given(st.floats(0.1, 5.0), st.floats(0.5, 3.0))
@settings(max_examples=25, deadline=None)
def test_exponential_decay(rate, t1):
    y, stats = dopri5(lambda t, y: -rate * y, 0.0, t1, np.array([1.0]), rtol=1e-9, atol=1e-12)
    assert y[0] == pytest.approx(np.exp(-rate * t1), rel=1e-7)
    assert stats.accepted > 0


def test_complex_rotation_and_dense_output():
    t_eval = np.linspace(0, 2 * np.pi, 50)
    y, _, ys = dopri5(lambda t, y: 1j * y, 0.0, 2 * np.pi, np.array([1 + 0j]),
                      rtol=1e-10, atol=1e-12, t_eval=t_eval)
    assert y[0] == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(ys[:, 0], np.exp(1j * t_eval), atol=1e-6)


def test_batch_of_one_matches_unbatched():
    f = lambda t, y: np.stack([y[..., 1], -y[..., 0]], axis=-1) * (1 + 0.3 * np.sin(t))
    y0 = np.array([1.0, 0.0])
    a, sa = dopri5(f, 0, 10, y0)
    b, sb = dopri5(f, 0, 10, y0[None], batched=True)
    assert np.array_equal(a, b[0]) and sa.accepted == sb.accepted


def test_batched_step_control_uses_worst_member():
    f = lambda t, y: -np.array([[1.0], [50.0]]) * y
    y, _ = dopri5(f, 0, 1, np.ones((2, 1)), batched=True, rtol=1e-8, atol=1e-12)
    assert np.allclose(y[:, 0], np.exp([-1.0, -50.0]), rtol=1e-6)


def test_tolerance_convergence():
    f = lambda t, y: np.array([y[1], -np.sin(y[0])])
    loose, _ = dopri5(f, 0, 20, np.array([2.0, 0.0]), rtol=1e-6, atol=1e-8)
    tight, _ = dopri5(f, 0, 20, np.array([2.0, 0.0]), rtol=1e-11, atol=1e-13)
    assert np.abs(loose - tight).max() < 1e-3


def test_nonfinite_rhs_raises():
    with pytest.raises(IntegrationError, match="non-finite"):
        dopri5(lambda t, y: y * np.nan, 0, 1, np.array([1.0]))


def test_zero_span():
    y, stats = dopri5(lambda t, y: y, 1.0, 1.0, np.array([3.0]))
    assert y[0] == 3.0 and stats.accepted == 0
