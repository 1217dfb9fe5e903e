import math

import numpy as np
import pytest

from trapsmooth import discretize as D
from trapsmooth import geometry as G
from trapsmooth.kernels import BandedLU

P = G.SurfaceProfile()


def test_grid_rule_examples():
    g = D.build_grid(P, 0.1, 10, -10, 11)
    assert g.dx <= 2 * math.pi * 0.1 / 10
    assert g.n >= 334
    g = D.build_grid(P, 0.01, 10, -10, 11)
    # 3343 intervals, i.e. 3342 interior nodes, is the smallest admissible grid
    assert g.n + 1 == 3343 and g.dx <= 2 * math.pi * 0.01 / 10
    assert (21 / g.n) > 2 * math.pi * 0.01 / 10


def test_grid_is_smallest_admissible():
    for h in (0.1, 0.037, 0.01, 1 / 320):
        g = D.build_grid(P, h)
        dxmax = 2 * math.pi * h / 10
        assert g.dx <= dxmax
        assert (g.xmax - g.xmin) / g.n > dxmax


def test_ppw_doubling_halves_dx():
    g1 = D.build_grid(P, 0.1, 10, -10, 11)
    g2 = D.build_grid(P, 0.1, 20, -10, 11)
    assert g2.dx <= 2 * math.pi * 0.1 / 20
    assert g2.dx == pytest.approx(g1.dx / 2, rel=2e-3)


def test_grid_errors():
    with pytest.raises(ValueError):
        D.build_grid(P, 0.1, 10, 0.5, 11)
    with pytest.raises(ValueError):
        D.build_grid(P, -0.1)
    with pytest.raises(ValueError):
        D.build_grid(P, 0.1, 4)
    with pytest.raises(ValueError):
        D.build_grid(P, 1e-7)
    with pytest.raises(ValueError):
        D.Grid(1.0, 0.0, 100)


def test_cap_must_fit():
    g = D.build_grid(P, 0.1, 10, -5, 6)
    with pytest.raises(ValueError):
        D.assemble_operator(P, 0.1, g, D.CapProfile(layer_width=3.0))
    D.assemble_operator(P, 0.1, g, D.CapProfile(layer_width=2.0))


def test_constant_vector_is_annihilated_in_the_interior():
    g = D.build_grid(P, 0.05)
    op = D.assemble_operator(P, 0.05, g, potential=lambda x: 0.0)
    r = op.matvec(np.ones(g.n))
    assert np.max(np.abs(r[2:-2])) < 1e-10
    assert np.max(np.abs(r[:2])) > 1.0


def test_dirichlet_sine_is_eigenvector():
    L = 3.0
    g = D.Grid(0.0, L, 2999)
    h = 0.2
    op = D.assemble_operator(P, h, g, potential=np.zeros(g.n))
    s = np.sin(math.pi * g.x / L)
    np.testing.assert_allclose(op.matvec(s).real, h * h * (math.pi / L) ** 2 * s,
                               rtol=1e-6, atol=1e-12)


def test_eigenvalue_converges_at_fourth_order():
    errs = []
    for n in (31, 63, 127):
        g = D.Grid(0.0, math.pi, n)
        op = D.assemble_operator(P, 1.0, g, potential=np.zeros(n))
        lam = np.linalg.eigvalsh(op.to_dense().real)[0]
        errs.append(abs(lam - 1.0))
    r = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert r[0] > 3.8 and r[1] > 3.8


def test_symmetric_without_cap(rng):
    g = D.build_grid(P, 0.1)
    op = D.assemble_operator(P, 0.1, g)
    v, w = rng.normal(size=g.n), rng.normal(size=g.n)
    a, b = np.vdot(op.matvec(v), w), np.vdot(v, op.matvec(w))
    assert abs(a - b) <= 1e-12 * abs(a)


def test_dissipative_with_cap(rng):
    g = D.build_grid(P, 0.1)
    op = D.assemble_operator(P, 0.1, g, D.CapProfile())
    for _ in range(20):
        v = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
        assert np.vdot(v, op.matvec(v)).imag <= 1e-12


def test_cap_vanishes_between_layers():
    cap = D.CapProfile()
    g = D.build_grid(P, 0.05)
    gam = cap.gamma(g.x, g.xmin, g.xmax)
    inner = (g.x >= g.xmin + cap.layer_width) & (g.x <= g.xmax - cap.layer_width)
    assert np.all(gam[inner] == 0.0)
    assert np.all(gam[~inner] > 0.0)
    assert gam.max() <= cap.strength


def test_cap_profile_validation():
    for bad in (dict(layer_width=0), dict(strength=-1), dict(power=1), dict(power=2.5)):
        with pytest.raises(ValueError):
            D.CapProfile(**bad)


def test_operator_diagonal_carries_potential():
    h = 0.05
    g = D.build_grid(P, h)
    op = D.assemble_operator(P, h, g, D.CapProfile())
    c = h * h / (12 * g.dx**2)
    np.testing.assert_allclose(op.bands[2, 1:-1].real - 30 * c,
                               G.effective_potential(P, g.x, h)[1:-1], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(-op.bands[2].imag, op.gamma, atol=0)


def _solver_setup(backend_unused=None):
    h = 0.1
    g = D.build_grid(P, h, 10, -6, 7)
    op = D.assemble_operator(P, h, g, D.CapProfile(layer_width=2.0))
    return op, 0.93


def test_solve_basis_round_trip(backend):
    op, z = _solver_setup()
    s = D.ShiftedSolver(op, z)
    for j in (0, 17, op.n // 2, op.n - 1):
        e = np.zeros(op.n, dtype=complex)
        e[j] = 1.0
        rhs = op.matvec(e) - z * e
        np.testing.assert_allclose(s.solve(rhs), e, atol=1e-10)


def test_solve_residual_and_adjoint(backend, rng):
    op, z = _solver_setup()
    rhs = rng.normal(size=op.n) + 1j * rng.normal(size=op.n)
    w = D.solve_shifted(op, z, rhs)
    r = op.matvec(w) - z * w - rhs
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(rhs)
    Md = op.to_dense() - z * np.eye(op.n)
    wa = D.solve_shifted(op, z, rhs, adjoint=True)
    np.testing.assert_allclose(wa, np.linalg.solve(Md.conj().T, rhs), rtol=1e-8, atol=1e-10)
    with pytest.raises(ValueError):
        D.solve_shifted(op, z, rhs[:-1])


def test_near_singular_shift_is_reported():
    g = D.Grid(0.0, math.pi, 40)
    op = D.assemble_operator(P, 1.0, g, potential=np.zeros(g.n))
    z = float(np.linalg.eigvalsh(op.to_dense().real)[0])
    lu = BandedLU(op.bands - np.array([0, 0, z, 0, 0])[:, None])
    assert lu.min_pivot < 1e-10 * lu.scale
    zero = D.DiscreteOperator(g, 1.0, np.zeros((5, g.n), dtype=complex), np.zeros(g.n),
                              np.zeros(g.n), False)
    with pytest.raises(D.NearSingularError):
        D.ShiftedSolver(zero, 0.0)
