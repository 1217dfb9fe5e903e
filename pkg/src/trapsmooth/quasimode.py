"""WKB quasimodes at the inflection point ``x = 1``.

For the model operator ``(hD)^2 - c2 (x-1)^(2 m2 + 1)`` and the complex energy
``E = (alpha + i beta) h^gamma`` with ``gamma = (4 m2 + 2) / (2 m2 + 3)`` the
phase is

    w(x) = int_1^x (E + c2 (y-1)^(2 m2 + 1))^(1/2) dy

(root taken in the upper half plane), the amplitude is
``u = (w')^(-1/2) exp(i w / h)``, and ``u~ = chi((x-1)/mu) u`` with
``mu = delta h^(gamma / (2 m2 + 1))``.  The residual
``(hD)^2 u~ - (w')^2 u~ = f u~ + [(hD)^2, chi] u`` is assembled twice, once
from closed-form derivatives and once from the finite-difference operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, scaling
from .cutoff import SpatialCutoff
from .discretize import Grid, laplacian_bands
from .kernels import band_matvec

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
MIN_POINTS_PER_MU = 50


def gamma_exponent(m2: int) -> float:
    if m2 < 1:
        raise ValueError("m2 must be >= 1")
    return (4.0 * m2 + 2.0) / (2.0 * m2 + 3.0)


@dataclass(frozen=True)
class QuasimodeParams:
    m2: int
    c2: float
    h: float
    alpha_E: float = 1.0
    beta_E: float = 1.0
    delta: float = 0.1

    def __post_init__(self):
        if self.m2 < 1:
            raise ValueError("m2 must be >= 1")
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.alpha_E <= 0 or self.beta_E <= 0:
            raise ValueError("alpha_E and beta_E must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    @classmethod
    def for_profile(cls, profile: geometry.SurfaceProfile, h: float, **kw):
        return cls(profile.m2, geometry.trapped_constants(profile).c2, h, **kw)

    @property
    def gamma(self) -> float:
        return gamma_exponent(self.m2)

    @property
    def E(self) -> complex:
        return complex(self.alpha_E, self.beta_E) * self.h**self.gamma

    @property
    def mu(self) -> float:
        return self.delta * self.h ** (self.gamma / (2 * self.m2 + 1))


def _branch_sqrt(z):
    r = np.sqrt(np.asarray(z, dtype=complex))
    return np.where(r.imag < 0, -r, r)


def phase_derivatives(params: QuasimodeParams, x):
    """``(w', w'', w''')`` in closed form on the upper-half-plane branch."""
    x = np.asarray(x, dtype=float)
    m, c2, E = params.m2, params.c2, params.E
    s = x - 1.0
    w1 = _branch_sqrt(E + c2 * s ** (2 * m + 1))
    if np.any(w1 == 0):
        raise ZeroDivisionError("phase derivative vanished")
    K = 0.5 * c2 * (2 * m + 1)
    w2 = K * s ** (2 * m) / w1
    w3 = (K * 2 * m * (E * s ** (2 * m - 1) + c2 * s ** (4 * m))
          - K * K * s ** (4 * m)) / w1**3
    return w1, w2, w3


def phase(params: QuasimodeParams, x, panel: float | None = None):
    """``w(x)`` by composite 64-node Gauss-Legendre, panels no longer than ``mu``.

    Arrays are integrated cumulatively outward from ``x = 1``.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    panel = params.mu if panel is None else panel
    out = np.zeros(flat.shape, dtype=complex)
    for side in (1.0, -1.0):
        mask = (flat - 1.0) * side > 0
        if not mask.any():
            continue
        dist = np.unique(np.abs(flat[mask] - 1.0))
        lo = np.concatenate([[0.0], dist[:-1]])
        pieces = np.empty(dist.size, dtype=complex)
        counts = np.maximum(1, np.ceil((dist - lo) / panel).astype(int))
        # panels of each segment, flattened
        seg = np.repeat(np.arange(dist.size), counts)
        first = np.repeat(np.cumsum(counts) - counts, counts)
        k = np.arange(seg.size) - first
        width = (dist - lo)[seg] / counts[seg]
        a = lo[seg] + k * width
        nodes = (a + 0.5 * width)[:, None] + 0.5 * width[:, None] * GL_NODES[None, :]
        w1, _, _ = phase_derivatives(params, 1.0 + side * nodes)
        vals = (w1 @ GL_WEIGHTS) * 0.5 * width * side
        pieces = np.bincount(seg, weights=vals.real, minlength=dist.size) \
            + 1j * np.bincount(seg, weights=vals.imag, minlength=dist.size)
        cum = np.cumsum(pieces)
        idx = np.searchsorted(dist, np.abs(flat[mask] - 1.0))
        out[mask] = cum[idx]
    out = out.reshape(x.shape)
    return out if out.ndim else complex(out)


def correction_f(params: QuasimodeParams, x):
    """``f = -h^2 (3/4 (w')^-2 (w'')^2 - 1/2 (w')^-1 w''')``."""
    w1, w2, w3 = phase_derivatives(params, x)
    return -params.h**2 * (0.75 * w2**2 / w1**2 - 0.5 * w3 / w1)


@dataclass(eq=False)
class QuasimodeBundle:
    params: QuasimodeParams
    grid: Grid
    E: complex
    mu: float
    u_samples: np.ndarray
    utilde_samples: np.ndarray
    norm_utilde: float
    residual_norm: float = math.nan
    support: np.ndarray = field(default=None, repr=False)
    phase_samples: np.ndarray = field(default=None, repr=False)

    @property
    def cutoff(self) -> SpatialCutoff:
        return SpatialCutoff(1.0, self.mu, 2.0 * self.mu)


def local_grid(params: QuasimodeParams, points_per_mu: int = 100, extent: float = 3.0) -> Grid:
    """Uniform grid on ``|x - 1| <= extent * mu`` with ``dx <= mu / points_per_mu``."""
    mu = params.mu
    n = math.ceil(2.0 * extent * points_per_mu) - 1
    return Grid(1.0 - extent * mu, 1.0 + extent * mu, n)


def sample(params: QuasimodeParams, x, mu: float | None = None):
    """``(u, u~)`` at the points ``x`` with no resolution requirement.

    ``u`` is only evaluated where the cutoff can be nonzero
    (``|x - 1| <= 2 mu``) and is returned as zero elsewhere; away from the
    inflection point ``exp(-Im w / h)`` overflows long before a grid ends.
    """
    mu = params.mu if mu is None else float(mu)
    x = np.asarray(x, dtype=float)
    support = np.abs(x - 1.0) <= 2.0 * mu
    u = np.zeros(x.shape, dtype=complex)
    xs = x[support]
    w1, _, _ = phase_derivatives(params, xs)
    u[support] = w1 ** -0.5 * np.exp(1j * phase(params, xs, panel=mu) / params.h)
    return u, SpatialCutoff(1.0, mu, 2.0 * mu)(x) * u


def build(params: QuasimodeParams, grid: Grid, mu: float | None = None) -> QuasimodeBundle:
    """Sample ``u`` and ``u~`` on ``grid``, which must resolve ``mu`` by 50 points."""
    mu = params.mu if mu is None else float(mu)
    if grid.dx > mu / MIN_POINTS_PER_MU * (1 + 1e-12):
        raise ValueError(
            f"grid under-resolves the quasimode: dx = {grid.dx:.3e} > mu/{MIN_POINTS_PER_MU}"
            f" = {mu / MIN_POINTS_PER_MU:.3e}")
    x = grid.x
    support = np.abs(x - 1.0) <= 2.0 * mu
    u, ut = sample(params, x, mu)
    ph = np.zeros(grid.n, dtype=complex)
    ph[support] = phase(params, x[support], panel=mu)
    norm = float(np.sqrt(np.sum(np.abs(ut) ** 2) * grid.dx))
    return QuasimodeBundle(params, grid, params.E, mu, u, ut, norm, support=support,
                           phase_samples=ph)


def residual(bundle: QuasimodeBundle):
    """``(||R_analytic||, ||R_discrete||)`` for ``R = (P~ - E) u~``.

    The analytic form is ``f u~ - h^2 (chi'' u + 2 chi' u')``; the discrete
    form applies the fourth-order operator ``-h^2 D4 - c2 (x-1)^(2m2+1)``.
    Also stores the analytic norm in ``bundle.residual_norm``.
    """
    p = bundle.params
    g = bundle.grid
    x = g.x
    h = p.h
    u = bundle.u_samples
    sup = bundle.support
    _, d1, d2 = bundle.cutoff.derivatives(x)
    R_an = np.zeros(g.n, dtype=complex)
    w1, w2, _ = phase_derivatives(p, x[sup])
    du = u[sup] * (1j * w1 / h - 0.5 * w2 / w1)
    f = correction_f(p, x[sup])
    R_an[sup] = f * bundle.utilde_samples[sup] - h * h * (d2[sup] * u[sup] + 2.0 * d1[sup] * du)
    ut = bundle.utilde_samples
    lap = h * h * band_matvec(laplacian_bands(g).astype(complex), ut)
    R_disc = lap - p.c2 * (x - 1.0) ** (2 * p.m2 + 1) * ut - p.E * ut
    n_an = float(np.sqrt(np.sum(np.abs(R_an) ** 2) * g.dx))
    n_disc = float(np.sqrt(np.sum(np.abs(R_disc) ** 2) * g.dx))
    bundle.residual_norm = n_an
    return n_an, n_disc


@dataclass(frozen=True)
class QuasimodeRow:
    h: float
    mu: float
    norm2: float
    residual_norm: float
    residual_discrete: float
    ratio: float
    max_im_phase: float
    min_abs_w1: float
    max_abs_w1: float
    max_abs_f: float


def verify(profile: geometry.SurfaceProfile, h_list, alpha_E=1.0, beta_E=1.0,
           delta=0.1, points_per_mu=100):
    """Build quasimodes along ``h_list`` and fit the residual and norm laws.

    Returns ``(rows, summary)`` where ``summary`` carries ``gamma``, the fitted
    decay exponents of ``||R|| / ||u~||`` and ``||u~||^2``, their targets and
    pass flags.
    """
    rows = []
    for h in h_list:
        params = QuasimodeParams.for_profile(profile, float(h), alpha_E=alpha_E,
                                             beta_E=beta_E, delta=delta)
        grid = local_grid(params, points_per_mu)
        b = build(params, grid)
        r_an, r_disc = residual(b)
        xs = grid.x[np.abs(grid.x - 1.0) <= params.mu]
        w1, _, _ = phase_derivatives(params, xs)
        im_ph = np.abs(b.phase_samples[b.support].imag).max()
        rows.append(QuasimodeRow(
            h=float(h), mu=b.mu, norm2=b.norm_utilde**2, residual_norm=r_an,
            residual_discrete=r_disc, ratio=r_an / b.norm_utilde,
            max_im_phase=float(im_ph), min_abs_w1=float(np.abs(w1).min()),
            max_abs_w1=float(np.abs(w1).max()),
            max_abs_f=float(np.abs(correction_f(params, xs)).max())))
    gamma = gamma_exponent(profile.m2)
    norm_target = (1.0 - 2.0 * profile.m2) / (2.0 * profile.m2 + 3.0)
    res_fit = scaling.h_exponent([(r.h, r.ratio) for r in rows])
    norm_fit = scaling.h_exponent([(r.h, r.norm2) for r in rows])
    summary = {
        "gamma": gamma,
        "fitted_residual_slope": res_fit.slope,
        "fitted_norm_slope": norm_fit.slope,
        "target_norm_slope": norm_target,
        "residual_pass": bool(res_fit.slope >= gamma - 0.1),
        "norm_pass": bool(abs(norm_fit.slope - norm_target) <= 0.1),
    }
    return rows, summary
