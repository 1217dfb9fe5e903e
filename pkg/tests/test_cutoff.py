import numpy as np
import pytest

from trapsmooth.cutoff import SpatialCutoff, smooth_step


def test_step_plateaus():
    t = np.array([-1.0, 0.0, 1.0, 2.0])
    v, d1, d2 = smooth_step(t)
    np.testing.assert_array_equal(v, [1, 1, 0, 0])
    np.testing.assert_array_equal(d1, 0)
    np.testing.assert_array_equal(d2, 0)


def test_step_symmetry_and_range():
    t = np.linspace(0.001, 0.999, 999)
    v, d1, _ = smooth_step(t)
    np.testing.assert_allclose(v + smooth_step(1 - t)[0], 1.0, atol=1e-15)
    assert smooth_step(np.array([0.5]))[0][0] == pytest.approx(0.5)
    assert np.all((v >= 0) & (v <= 1)) and np.all(d1 <= 0)


def test_step_derivatives_match_differences():
    t = np.linspace(0.02, 0.98, 97)
    e = 1e-6
    v, d1, d2 = smooth_step(t)
    fd1 = (smooth_step(t + e)[0] - smooth_step(t - e)[0]) / (2 * e)
    fd2 = (smooth_step(t + e)[1] - smooth_step(t - e)[1]) / (2 * e)
    np.testing.assert_allclose(d1, fd1, atol=1e-7)
    np.testing.assert_allclose(d2, fd2, atol=1e-5)


def test_step_is_flat_at_the_ends():
    v, d1, d2 = smooth_step(np.array([1e-3, 1 - 1e-3]))
    assert abs(d1).max() < 1e-100 and abs(d2).max() < 1e-100


def test_spatial_cutoff_shape():
    chi = SpatialCutoff(1.0, 0.25, 0.5)
    x = np.array([0.4, 0.5, 0.75, 1.0, 1.25, 1.5, 1.7])
    np.testing.assert_array_equal(chi(x)[[0, 1, 3, 5, 6]], [0, 0, 1, 0, 0])
    assert chi(np.array([0.6]))[0] == pytest.approx(chi(np.array([1.4]))[0])
    val, d1, d2 = chi.derivatives(np.array([0.6, 1.4]))
    assert d1[0] == pytest.approx(-d1[1]) and d1[0] > 0
    assert d2[0] == pytest.approx(d2[1])


def test_spatial_cutoff_chain_rule():
    chi = SpatialCutoff(-2.0, 0.3, 0.9)
    x = np.linspace(-2.85, -1.15, 57)
    e = 1e-6
    _, d1, d2 = chi.derivatives(x)
    np.testing.assert_allclose(d1, (chi(x + e) - chi(x - e)) / (2 * e), atol=1e-6)
    np.testing.assert_allclose(
        d2, (chi.derivatives(x + e)[1] - chi.derivatives(x - e)[1]) / (2 * e), atol=1e-5)


def test_zero_plateau_allowed_and_bad_radii_rejected():
    assert SpatialCutoff(0.0, 0.0, 1.0)(np.array([0.0]))[0] == 1.0
    with pytest.raises(ValueError):
        SpatialCutoff(0.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        SpatialCutoff(0.0, -0.1, 0.5)


def test_step_derivatives_finite_near_the_ends():
    t = np.array([5e-265, 1e-12, 1e-4, 1 - 1e-12])
    v, d1, d2 = smooth_step(t)
    assert np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))
    np.testing.assert_array_equal(d1, 0.0)
