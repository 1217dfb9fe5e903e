"""Cutoff resolvent norms ``||chi (P - z)^{-1} chi||`` and their h-scans.

The absorbing layer makes ``M`` dissipative, so ``(M - z)^{-1}`` at real
``z`` is the discrete stand-in for the outgoing resolvent ``(P - z - i0)^{-1}``.
Norms are estimated by power iteration on ``G^* G`` with
``G = chi (M - z)^{-1} chi``; each iteration costs one forward and one adjoint
banded solve against a single factorization.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import geometry
from .cutoff import SpatialCutoff
from .discretize import (CapProfile, DiscreteOperator, ShiftedSolver,
                         assemble_operator, build_grid)

log = logging.getLogger(__name__)

WELLS = ("hyperbolic", "inflection", "nontrapping")
UNRELIABLE_FRACTION = 0.2


@dataclass(frozen=True)
class NormEstimate:
    norm: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class EnergyWindow:
    """Real energies ``center +- halfwidth`` sampled at ``samples`` points.

    With ``width_exponent`` set, the half-width at a given ``h`` is
    ``max(halfwidth, width_coef * h**width_exponent)``.
    """

    center: float
    halfwidth: float
    samples: int = 11
    width_exponent: float | None = None
    width_coef: float = 2.0

    def __post_init__(self):
        if self.samples < 1 or self.samples % 2 == 0:
            raise ValueError("samples must be odd so the centre is sampled")
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be nonnegative")
        if self.samples > 1 and self.halfwidth <= 0 and self.width_exponent is None:
            raise ValueError("a multi-sample window needs positive halfwidth")
        lo = self.center - self.halfwidth
        hi = self.center + self.halfwidth
        if lo <= 0.0 <= hi:
            raise ValueError("energy window must avoid z = 0")

    def halfwidth_at(self, h: float) -> float:
        if self.width_exponent is None:
            return self.halfwidth
        return max(self.halfwidth, self.width_coef * h**self.width_exponent)

    def points(self, h: float) -> np.ndarray:
        if self.samples == 1:
            return np.array([self.center])
        w = self.halfwidth_at(h)
        return self.center + w * np.linspace(-1.0, 1.0, self.samples)


@dataclass(frozen=True)
class ScanPoint:
    h: float
    z: float
    norm: float
    iterations: int
    converged: bool
    refined: bool = False


@dataclass
class ResolventScan:
    m1: int
    m2: int
    h_list: list
    window: EnergyWindow
    points: list = field(default_factory=list)
    sup_per_h: list = field(default_factory=list)

    @property
    def flagged_fraction(self) -> float:
        if not self.points:
            return 0.0
        return sum(not p.converged for p in self.points) / len(self.points)

    @property
    def reliable(self) -> bool:
        return self.flagged_fraction <= UNRELIABLE_FRACTION

    def sup_points(self):
        return [(h, s) for h, s in self.sup_per_h]


def _gaussian_start(x, center):
    v = np.exp(-0.5 * (x - center) ** 2).astype(np.complex128)
    return v / np.linalg.norm(v)


def cutoff_resolvent_norm(op: DiscreteOperator, z: float, chi: SpatialCutoff,
                          tol: float = 1e-8, maxit: int = 2000,
                          solver: ShiftedSolver | None = None) -> NormEstimate:
    """Largest singular value of ``diag(chi) (M - z)^{-1} diag(chi)``.

    The grid weight ``dx`` multiplies every inner product equally, so the
    L^2 operator norm coincides with the Euclidean matrix norm used here.
    """
    if not 0.0 < tol <= 1e-2:
        raise ValueError("tol must lie in (0, 1e-2]")
    x = op.grid.x
    c = chi(x).astype(np.complex128)
    if not np.any(c):
        return NormEstimate(0.0, 0, True)
    if solver is None:
        solver = ShiftedSolver(op, z)
    v = _gaussian_start(x, chi.center)
    prev = None
    sigma = 0.0
    for it in range(1, maxit + 1):
        w = c * solver.solve(c * v)
        sigma = float(np.linalg.norm(w))
        if sigma == 0.0:
            return NormEstimate(0.0, it, True)
        if prev is not None and abs(sigma - prev) <= tol * sigma:
            return NormEstimate(sigma, it, True)
        prev = sigma
        y = c * solver.solve_adjoint(c * w)
        v = y / np.linalg.norm(y)
    return NormEstimate(sigma, maxit, False)


def dense_cutoff_resolvent_norm(op: DiscreteOperator, z: float, chi: SpatialCutoff) -> float:
    """Dense SVD oracle for :func:`cutoff_resolvent_norm` (small ``n`` only)."""
    c = chi(op.grid.x)
    M = op.to_dense() - z * np.eye(op.n)
    G = c[:, None] * np.linalg.solve(M, np.diag(c).astype(complex))
    return float(np.linalg.svd(G, compute_uv=False)[0])


def expected_exponent(profile: geometry.SurfaceProfile, well: str):
    """Predicted growth exponent ``s`` in ``norm ~ h^{-s}`` and whether a log factor rides on it."""
    if well == "hyperbolic":
        return 2.0 * profile.m1 / (profile.m1 + 1), profile.m1 == 1
    if well == "inflection":
        return (4.0 * profile.m2 + 2.0) / (2.0 * profile.m2 + 3.0), False
    if well == "nontrapping":
        return 1.0, False
    raise ValueError(f"unknown well {well!r}; expected one of {WELLS}")


def spectral_dictionary(h: float, semiclassical_norm: float) -> float:
    """``||chi R(lambda) chi||`` at ``lambda = 1/h`` from the semiclassical norm."""
    if h <= 0:
        raise ValueError("h must be positive")
    return h * h * semiclassical_norm


def default_cutoff(profile: geometry.SurfaceProfile, well: str) -> SpatialCutoff:
    if well == "hyperbolic":
        return SpatialCutoff(0.0)
    if well == "inflection":
        return SpatialCutoff(1.0)
    if well == "nontrapping":
        # sits in the classically allowed region on the left end for z = 1/2
        return SpatialCutoff(-3.0)
    raise ValueError(f"unknown well {well!r}")


def default_window(profile: geometry.SurfaceProfile, well: str) -> EnergyWindow:
    if well == "hyperbolic":
        return EnergyWindow(1.0, 0.05, 11)
    if well == "inflection":
        gamma = (4.0 * profile.m2 + 2.0) / (2.0 * profile.m2 + 3.0)
        center = geometry.trapped_constants(profile).inflection_energy
        return EnergyWindow(center, 0.05, 11, width_exponent=gamma, width_coef=2.0)
    if well == "nontrapping":
        return EnergyWindow(0.5, 0.05, 11)
    raise ValueError(f"unknown well {well!r}")


def _refine_peak(norm_at, zs, norms, lo, hi, refine_samples):
    """Locate the window maximum more precisely than the coarse sampling.

    A uniform sweep of the bracket around the best coarse sample is followed
    by a bounded Brent search between the neighbours of the best swept point.
    Returns the list of ``(z, NormEstimate)`` evaluations performed.
    """
    evals = []
    i = int(np.argmax(norms))
    a = zs[max(i - 1, 0)]
    b = zs[min(i + 1, len(zs) - 1)]
    a, b = max(a, lo), min(b, hi)
    if not b > a:
        return evals
    fine = np.linspace(a, b, refine_samples + 2)[1:-1]
    fine_vals = []
    for z in fine:
        est = norm_at(z)
        evals.append((float(z), est))
        fine_vals.append(est.norm)
    grid = np.concatenate([[a], fine, [b]])
    vals = np.concatenate([[norms[max(i - 1, 0)]], fine_vals, [norms[min(i + 1, len(zs) - 1)]]])
    j = int(np.argmax(vals))
    c, d = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    if not d > c:
        return evals
    cache = {}

    def neg(z):
        est = norm_at(z)
        cache[float(z)] = est
        return -est.norm

    minimize_scalar(neg, bounds=(c, d), method="bounded",
                    options={"xatol": (d - c) * 1e-3, "maxiter": 60})
    evals.extend(cache.items())
    return evals


def scan_single_h(profile, h, window, chi, cap, ppw=10, domain=(-12.0, 13.0),
                  tol=1e-8, maxit=2000, refine=True, refine_samples=41, potential=None):
    """All norm evaluations for one ``h``; returns a list of :class:`ScanPoint`."""
    grid = build_grid(profile, h, ppw, *domain)
    op = assemble_operator(profile, h, grid, cap, potential=potential)

    def norm_at(z):
        return cutoff_resolvent_norm(op, float(z), chi, tol=tol, maxit=maxit)

    zs = window.points(h)
    ests = [norm_at(z) for z in zs]
    pts = [ScanPoint(h, float(z), e.norm, e.iterations, e.converged) for z, e in zip(zs, ests)]
    if refine and len(zs) > 1:
        w = window.halfwidth_at(h)
        norms = np.array([e.norm if e.converged else -np.inf for e in ests])
        if np.isfinite(norms).any():
            for z, e in _refine_peak(norm_at, zs, norms, window.center - w,
                                     window.center + w, refine_samples):
                pts.append(ScanPoint(h, z, e.norm, e.iterations, e.converged, True))
    return pts


def scan(profile: geometry.SurfaceProfile, h_list, window: EnergyWindow,
         chi: SpatialCutoff, cap: CapProfile | None = None, ppw: int = 10,
         domain=(-12.0, 13.0), tol: float = 1e-8, maxit: int = 2000,
         refine: bool = True, refine_samples: int = 41, potential=None,
         threads: int = 1) -> ResolventScan:
    """Cutoff resolvent norms over ``window`` for each ``h``, with per-h suprema.

    Non-converged points are kept but flagged and excluded from the suprema.
    Work for different ``h`` runs on up to ``threads`` workers; the result is
    ordered by ``h`` (as given) and then by ``z``.
    """
    h_list = [float(h) for h in h_list]
    if any(h <= 0 for h in h_list):
        raise ValueError("h values must be positive")
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be strictly decreasing")
    if cap is None:
        cap = CapProfile()
    kw = dict(window=window, chi=chi, cap=cap, ppw=ppw, domain=domain, tol=tol,
              maxit=maxit, refine=refine, refine_samples=refine_samples,
              potential=potential)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_h = list(pool.map(lambda h: scan_single_h(profile, h, **kw), h_list))
    else:
        per_h = [scan_single_h(profile, h, **kw) for h in h_list]
    result = ResolventScan(profile.m1, profile.m2, h_list, window)
    for h, pts in zip(h_list, per_h):
        pts = sorted(pts, key=lambda q: q.z)
        result.points.extend(pts)
        good = [q.norm for q in pts if q.converged]
        if good:
            result.sup_per_h.append((h, max(good)))
        log.info("h=%.5g: %d points, sup=%.6g", h, len(pts), max(good) if good else math.nan)
    if not result.reliable:
        log.warning("scan unreliable: %.0f%% of points did not converge",
                    100 * result.flagged_fraction)
    return result
