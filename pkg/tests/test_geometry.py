import math
import threading

import numpy as np
import pytest

from trapsmooth import geometry as G

P11 = G.SurfaceProfile(1, 1)
P21 = G.SurfaceProfile(2, 1)
P12 = G.SurfaceProfile(1, 2)

# 30-digit adaptive quadrature of the profile integral (mpmath), frozen
A2_ORACLE = {
    (1, 1): {-3: 9.0019084552034911483, -0.5: 1.1977047819983877676, 0.5: 1.0522952180016122324,
             2: 1.214297435588181006, 5: 6.2468015338900317217, 20: 164.04167586214590772},
    (2, 1): {-3: 6.9015701363082138805, -0.5: 1.0224853973404767735, 0.5: 1.0043710513453134708,
             2: 1.1167271971652213218, 5: 5.7988463395166142522, 20: 162.51565776784487873},
    (1, 2): {-3: 15.308987096395073665, -0.5: 1.3166966666251950467, 0.5: 1.0258775386316439764,
             2: 1.0474706960445627613, 5: 3.5867192207461044575, 20: 137.07626211007702363},
}
C1_ORACLE = {(1, 1): 1.0707963267948966192, (2, 1): 1.0096208999123722741,
             (1, 2): 1.0278870147096838573}
# symbolic derivatives of the profile combined with the quadrature values above
V1_ORACLE = {
    (1, 1): {-2: -0.03714448093314880452, 0.5: -0.068214525866652120783, 2: 0.11965302064254341589},
    (2, 1): {-2: -0.020477278350765796636, 0.5: 0.0019169473269381192655, 2: 0.12071605533355266971},
}


def test_profile_rejects_nonpositive_exponents():
    for bad in [(0, 1), (1, 0), (-1, 2), (1.5, 1)]:
        with pytest.raises(ValueError):
            G.SurfaceProfile(*bad)


def test_profile_a_values():
    assert G.profile_a(P11, 0.0) == 0.0
    assert G.profile_a(P11, 1.0) == 0.0
    assert G.profile_a(P11, 2.0) == pytest.approx(0.4, rel=1e-15)


def test_profile_a_prime_values():
    assert G.profile_a_prime(P11, 0.0) == pytest.approx(1.0)
    assert G.profile_a_prime(P11, 1.0) == 0.0


@pytest.mark.parametrize("p", [P11, P21, P12, G.SurfaceProfile(3, 2)])
def test_profile_a_prime_matches_central_difference(p):
    x = np.array([-2.3, -0.7, 0.3, 0.9, 1.4, 3.1])
    step = 1e-6
    fd = (G.profile_a(p, x + step) - G.profile_a(p, x - step)) / (2 * step)
    np.testing.assert_allclose(G.profile_a_prime(p, x), fd, rtol=1e-8)


def test_A_squared_at_origin_is_one():
    for p in (P11, P21, P12):
        assert G.A_squared(p, 0.0) == 1.0


def test_A_squared_closed_form_at_inflection():
    assert G.A_squared(P11, 1.0) == pytest.approx(1 + math.pi / 2 - 1.5, rel=1e-13)


@pytest.mark.parametrize("m", sorted(A2_ORACLE))
def test_A_squared_matches_quadrature_oracle(m):
    p = G.SurfaceProfile(*m)
    xs = sorted(A2_ORACLE[m])
    expected = [A2_ORACLE[m][x] for x in xs]
    np.testing.assert_allclose(G.A_squared(p, np.array(xs, dtype=float)), expected, rtol=1e-12)
    for x, e in zip(xs, expected):
        assert G.A_squared(p, float(x)) == pytest.approx(e, rel=1e-12)


def test_A_squared_grows_quadratically():
    v = G.A_squared(P11, 20.0)
    assert 20**2 * 0.25 <= v <= 20**2 * 1.0


def test_A_squared_large_grid_matches_closed_form():
    x = np.linspace(-12, 13, 20001)
    closed = 1 + x**2 / 2 - 2 * x + 2 * np.arctan(x)
    np.testing.assert_allclose(G.A_squared(P11, x), closed, rtol=1e-12, atol=1e-12)


def test_A_squared_unsorted_and_repeated_points():
    x = np.array([3.0, -1.0, 3.0, 0.0, 0.5, -1.0])
    closed = 1 + x**2 / 2 - 2 * x + 2 * np.arctan(x)
    np.testing.assert_allclose(G.A_squared(P11, x), closed, rtol=1e-12)


def test_A_squared_thread_safe():
    x = np.linspace(-5, 5, 41)
    ref = G.A_squared(P21, x)
    out = [None] * 8

    def work(i):
        out[i] = G.A_squared(P21, x + 0.0)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for o in out:
        np.testing.assert_array_equal(o, ref)


def test_metric_derivatives_at_trapped_points():
    A, A1, A2 = G.metric_derivatives(P11, 0.0)
    assert (A, A1) == (1.0, 0.0)
    assert A2 == pytest.approx(0.5)
    for p in (P21, P12):
        A, A1, A2 = G.metric_derivatives(p, 0.0)
        assert A2 == pytest.approx(G.profile_a_prime(p, 0.0) / 2)
    _, A1, A2 = G.metric_derivatives(P11, 1.0)
    assert A1 == 0.0 and A2 == 0.0


@pytest.mark.parametrize("p", [P11, P21, P12])
def test_metric_derivatives_match_finite_differences(p):
    x = np.linspace(-10, 10, 37)
    step = 1e-4

    def A(y):
        return np.sqrt(G.A_squared(p, y))

    A0, A1, A2 = G.metric_derivatives(p, x)
    fd1 = (A(x + step) - A(x - step)) / (2 * step)
    fd2 = (A(x + step) - 2 * A(x) + A(x - step)) / step**2
    np.testing.assert_allclose(A0, A(x), rtol=1e-12)
    # atol covers the O(step^2) truncation where A' vanishes
    np.testing.assert_allclose(A1, fd1, rtol=1e-6, atol=1e-7)
    np.testing.assert_allclose(A2, fd2, rtol=1e-5, atol=1e-6)


def test_V1_values():
    assert G.conjugation_potential_V1(P11, 0.0) == pytest.approx(0.25)
    assert G.conjugation_potential_V1(P11, 1.0) == 0.0


@pytest.mark.parametrize("m", sorted(V1_ORACLE))
def test_V1_matches_symbolic_oracle(m):
    p = G.SurfaceProfile(*m)
    xs = sorted(V1_ORACLE[m])
    np.testing.assert_allclose(G.conjugation_potential_V1(p, np.array(xs, dtype=float)),
                               [V1_ORACLE[m][x] for x in xs], rtol=1e-11)


@pytest.mark.parametrize("p", [P11, P21, P12])
def test_V1_decays_at_infinity(p):
    x = np.concatenate([-np.geomspace(50, 1e4, 20), np.geomspace(50, 1e4, 20)])
    assert np.all(np.abs(G.conjugation_potential_V1(p, x)) <= 10 / x**2)


def test_effective_potential_values():
    for h in (0.1, 0.01):
        assert G.effective_potential(P11, 0.0, h) == pytest.approx(1 + h * h * 0.25)
    assert G.effective_potential(P11, 1.0, 0.01) == pytest.approx(1 / (1 + math.pi / 2 - 1.5),
                                                                  rel=1e-13)
    with pytest.raises(ValueError):
        G.effective_potential(P11, 0.0, 0.0)


def test_effective_potential_difference_is_h2_V1():
    x = np.linspace(-8, 9, 101)
    inv_a2, v1 = G.potential_parts(P21, x)
    for h in (0.3, 0.01, 1e-4):
        np.testing.assert_allclose(G.effective_potential(P21, x, h) - inv_a2, h * h * v1,
                                   atol=1e-15)


def test_leading_potential_nonincreasing_for_positive_x():
    x = np.linspace(0, 30, 3001)
    inv_a2, _ = G.potential_parts(P11, x)
    assert np.all(np.diff(inv_a2) <= 1e-15)


def test_trapped_constants():
    t = G.trapped_constants(P11)
    assert t.C1 == pytest.approx(C1_ORACLE[(1, 1)], rel=1e-14)
    assert t.c2 == pytest.approx(1 / 6, rel=1e-15)
    assert t.inflection_energy == pytest.approx(1 / C1_ORACLE[(1, 1)], rel=1e-14)
    assert G.trapped_constants(P21).c2 == pytest.approx(1 / 12, rel=1e-15)
    for m, c1 in C1_ORACLE.items():
        t = G.trapped_constants(G.SurfaceProfile(*m))
        assert t.C1 == pytest.approx(c1, rel=1e-13)
        assert t.C1 > 1 and t.c2 < 1
