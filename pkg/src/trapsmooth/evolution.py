"""Single angular modes of the Schrodinger flow and the smoothing functionals.

Mode ``k`` of the conjugated flow solves ``i dv/dt = P_k v`` with
``P_k = -d^2/dx^2 + k^2 A^{-2} + V1``.  It is advanced by Crank-Nicolson
(the Cayley transform of the discrete operator), which is unitary without an
absorbing layer and dissipative with one.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, quasimode
from .cutoff import SpatialCutoff
from .discretize import CapProfile, DiscreteOperator, Grid, assemble_operator
from .kernels import KU, band_matvec, cayley_factor, cayley_run

log = logging.getLogger(__name__)

DOMAIN = (-12.0, 13.0)
CHUNK_STEPS = 4096


def beta_loss(m1: int, m2: int) -> float:
    """Smoothing loss ``max(m1/(m1+1), (2m2+1)/(2m2+3))``."""
    return max(m1 / (m1 + 1.0), (2.0 * m2 + 1.0) / (2.0 * m2 + 3.0))


def japanese(x):
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


def mode_grid(profile: geometry.SurfaceProfile, k: int, ppw: int = 10,
              dx_max: float | None = None, domain=DOMAIN) -> Grid:
    """Grid with ``dx <= 2 pi / (ppw k)`` and, if given, ``dx <= dx_max``."""
    _check_k(k)
    dx = 2.0 * math.pi / (ppw * k)
    if dx_max is not None:
        dx = min(dx, dx_max)
    xmin, xmax = domain
    n = max(16, math.ceil((xmax - xmin) / dx - 1e-12) - 1)
    return Grid(xmin, xmax, n)


def _check_k(k):
    if int(k) != k or k < 1:
        raise ValueError(f"mode number k must be an integer >= 1, got {k!r}")


@dataclass(frozen=True)
class ModeEvolutionConfig:
    profile: geometry.SurfaceProfile
    k: int
    T: float
    grid: Grid
    dt: float | None = None
    cap: CapProfile | None = field(default_factory=CapProfile)
    window_divisor: float = 10.0

    def __post_init__(self):
        _check_k(self.k)
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.window_divisor <= 0:
            raise ValueError("window_divisor must be positive")
        if self.dt is not None and not 0 < self.dt <= self.T:
            raise ValueError("dt must lie in (0, T]")

    @property
    def nominal_step(self) -> float:
        """Requested step; by default ``min(0.5 / k^2, T / 2000)``."""
        if self.dt is not None:
            return self.dt
        return min(0.5 / self.k**2, self.T / 2000.0)

    @property
    def nsteps(self) -> int:
        return max(1, math.ceil(self.T / self.nominal_step - 1e-9))

    @property
    def step(self) -> float:
        """Step actually taken: ``T / nsteps``, never above the nominal step."""
        return self.T / self.nsteps


@dataclass(eq=False)
class EvolutionTrace:
    """Time levels and running space-time integrals (trapezoid rule)."""

    times: np.ndarray
    mass: np.ndarray
    smoothing_x: np.ndarray
    smoothing_theta: np.ndarray
    smoothing_cutoff: np.ndarray
    weighted_away: np.ndarray
    drained_at: float | None = None

    def final(self) -> dict:
        return {"T": float(self.times[-1]), "mass": float(self.mass[-1]),
                "smoothing_x": float(self.smoothing_x[-1]),
                "smoothing_theta": float(self.smoothing_theta[-1]),
                "smoothing_cutoff": float(self.smoothing_cutoff[-1]),
                "weighted_away": float(self.weighted_away[-1])}

    def rows(self, every: int = 1):
        idx = np.arange(0, len(self.times), max(1, every))
        if idx[-1] != len(self.times) - 1:
            idx = np.append(idx, len(self.times) - 1)
        for i in idx:
            yield (float(self.times[i]), float(self.mass[i]), float(self.smoothing_x[i]),
                   float(self.smoothing_theta[i]), float(self.smoothing_cutoff[i]))


def assemble_mode_operator(profile: geometry.SurfaceProfile, k: int, grid: Grid,
                           cap: CapProfile | None = None) -> DiscreteOperator:
    """``-D4 + diag(k^2 A^-2 + V1) - i k^2 diag(Gamma)``, equal to ``k^2 P(1/k)``.

    The absorbing layer is scaled with ``k^2`` as well so that the identity
    with the semiclassical assembly holds entry by entry.
    """
    _check_k(k)
    h = 1.0 / k
    base = assemble_operator(profile, h, grid, cap)
    k2 = float(k) * float(k)
    bands = base.bands * k2
    inv_a2, v1 = geometry.potential_parts(profile, grid.x)
    V = k2 * inv_a2 + v1
    # rebuild the diagonal directly so that k=1 and large k lose no digits
    bands[KU] = (k2 * h * h) * 30.0 / (12.0 * grid.dx**2) + V - 1j * k2 * base.gamma
    bands[KU, 0] = bands[KU, -1] = (k2 * h * h) * 29.0 / (12.0 * grid.dx**2) + 0j
    bands[KU, 0] += V[0] - 1j * k2 * base.gamma[0]
    bands[KU, -1] += V[-1] - 1j * k2 * base.gamma[-1]
    return DiscreteOperator(grid=grid, h=h, bands=bands, potential=V,
                            gamma=k2 * base.gamma, cap_enabled=cap is not None, cap=cap,
                            scale=k2, meta={"k": int(k)})


def step_crank_nicolson(op: DiscreteOperator, state: np.ndarray, dt: float) -> np.ndarray:
    """One step ``(I + i dt/2 M)^-1 (I - i dt/2 M) state``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    lu, coef = cayley_factor(op.bands, dt)
    state = np.asarray(state, dtype=np.complex128)
    return lu.solve(state - coef * band_matvec(op.bands, state))


def _weights(config: ModeEvolutionConfig, chi: SpatialCutoff):
    x = config.grid.x
    p = config.profile
    k2 = float(config.k) ** 2
    jx = japanese(x)
    away = np.abs(x) ** p.m1 * np.abs(x - 1.0) ** p.m2 * jx ** (-p.m1 - p.m2 - 1.5)
    rows = np.vstack([k2 * jx**-3, k2 * chi(x) ** 2, k2 * away**2])
    return rows, jx**-2


def evolve_and_measure(config: ModeEvolutionConfig, v0: np.ndarray, chi: SpatialCutoff,
                       op: DiscreteOperator | None = None, drain_tol: float = 0.0,
                       check_dissipation: bool = False) -> EvolutionTrace:
    """Step to ``T`` accumulating the four smoothing functionals.

    Integrands per time level are ``||<x>^-1 dv/dx||^2``, ``k^2 ||<x>^-3/2 v||^2``,
    ``k^2 ||chi v||^2`` and ``k^2 ||x^m1 (x-1)^m2 <x>^(-m1-m2-3/2) v||^2``.

    With ``drain_tol > 0`` stepping stops once the mass drops below
    ``drain_tol`` times its initial value; the remaining integrals are then
    below that fraction of the integrands and are dropped.
    """
    v0 = np.asarray(v0, dtype=np.complex128)
    grid = config.grid
    if v0.shape != (grid.n,):
        raise ValueError(f"v0 must have length {grid.n}")
    if op is None:
        op = assemble_mode_operator(config.profile, config.k, grid, config.cap)
    dt = config.step
    nsteps = config.nsteps
    weights, dweight = _weights(config, chi)
    lu, _ = cayley_factor(op.bands, dt)
    records = []
    v = v0
    done = 0
    m0 = None
    drained = None
    while done < nsteps:
        chunk = min(CHUNK_STEPS, nsteps - done)
        v, rec = cayley_run(lu, v, chunk, weights, dweight, grid.dx)
        records.append(rec if not records else rec[1:])
        if m0 is None:
            m0 = rec[0, 0]
        if check_dissipation and np.any(np.diff(rec[:, 0]) > 1e-13 * m0):
            raise ArithmeticError("mass increased during a dissipative run")
        done += chunk
        if drain_tol > 0 and rec[-1, 0] < drain_tol * m0:
            drained = done * dt
            break
    rec = np.concatenate(records)
    times = dt * np.arange(rec.shape[0])
    cum = np.zeros((rec.shape[0], rec.shape[1] - 1))
    cum[1:] = np.cumsum(0.5 * dt * (rec[1:, 1:] + rec[:-1, 1:]), axis=0)
    return EvolutionTrace(times, rec[:, 0], cum[:, 0], cum[:, 1], cum[:, 2], cum[:, 3],
                          drained_at=drained)


def normalize(v, dx):
    v = np.asarray(v, dtype=np.complex128)
    return v / math.sqrt(float(np.sum(np.abs(v) ** 2)) * dx)


def half_derivative_norm2(v, dx: float) -> float:
    """``||<D_x>^{1/2} v||^2`` for compactly supported grid data.

    The support is zero-extended to a periodic interval four times its length
    and the multiplier ``(1 + xi^2)^{1/2}`` is applied to ``|v_hat|^2``.
    """
    v = np.asarray(v, dtype=np.complex128)
    nz = np.flatnonzero(v)
    if nz.size == 0:
        return 0.0
    seg = v[nz[0]:nz[-1] + 1]
    N = 4 * seg.size
    vh = np.fft.fft(seg, N)
    xi = 2.0 * np.pi * np.fft.fftfreq(N, dx)
    return float(np.sum(np.sqrt(1.0 + xi**2) * np.abs(vh) ** 2) * dx / N)


@dataclass(frozen=True)
class RatioResult:
    k: int
    T: float
    lhs: float
    rhs: float
    ratio: float
    trace: EvolutionTrace = field(repr=False, compare=False, default=None)

    def summary(self) -> dict:
        return {"k": self.k, "T": self.T, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}


def saturation_window(k: int, m2: int, window_divisor: float) -> float:
    return k ** (-4.0 / (2 * m2 + 3)) / window_divisor


def saturation_grid(profile, k, qparams: quasimode.QuasimodeParams, domain=DOMAIN):
    return mode_grid(profile, k, dx_max=qparams.mu / quasimode.MIN_POINTS_PER_MU,
                     domain=domain)


def saturation_experiment(profile: geometry.SurfaceProfile, k: int,
                          qparams: quasimode.QuasimodeParams | None = None,
                          window_divisor: float = 10.0, chi: SpatialCutoff | None = None,
                          cap: CapProfile | None = None, grid: Grid | None = None,
                          dt: float | None = None, initial=None) -> RatioResult:
    """Evolve quasimode data at ``h = 1/k`` over ``T(k) = k^(-4/(2m2+3)) / A``.

    ``lhs = int_0^T ||<k> chi v||^2 dt`` and
    ``rhs = <k>^(2(2m2+1)/(2m2+3)) ||phi0||^2``.  ``initial`` replaces the
    quasimode by other data (a callable of ``x`` or an array) for contrast runs.
    """
    _check_k(k)
    if qparams is None:
        qparams = quasimode.QuasimodeParams.for_profile(profile, 1.0 / k)
    if abs(qparams.h * k - 1.0) > 1e-12:
        raise ValueError("quasimode must be built at h = 1/k")
    if chi is None:
        chi = SpatialCutoff(1.0, 0.25, 0.5)
    if cap is None:
        cap = CapProfile()
    if abs(chi.center - 1.0) + 2.0 * qparams.mu > chi.inner_radius:
        raise ValueError("cutoff must equal 1 on the quasimode support")
    if grid is None:
        grid = saturation_grid(profile, k, qparams)
    T = saturation_window(k, qparams.m2, window_divisor)
    cfg = ModeEvolutionConfig(profile, k, T, grid, dt=dt, cap=cap,
                              window_divisor=window_divisor)
    if initial is None:
        _, phi0 = quasimode.sample(qparams, grid.x)
    elif callable(initial):
        phi0 = np.asarray(initial(grid.x), dtype=np.complex128)
    else:
        phi0 = np.asarray(initial, dtype=np.complex128)
    phi0 = normalize(phi0, grid.dx)
    trace = evolve_and_measure(cfg, phi0, chi)
    kb2 = 1.0 + float(k) ** 2
    lhs = float(trace.smoothing_cutoff[-1]) * kb2 / float(k) ** 2
    rhs = kb2 ** ((2 * qparams.m2 + 1) / (2 * qparams.m2 + 3)) * 1.0
    return RatioResult(int(k), float(trace.times[-1]), lhs, rhs, lhs / rhs, trace)


def smoothing_bound_check(profile: geometry.SurfaceProfile, k: int, v0, grid: Grid,
                          T: float = 1.0, cap: CapProfile | None = None,
                          dt: float | None = None, drain_tol: float = 1e-12,
                          chi: SpatialCutoff | None = None) -> RatioResult:
    """``lhs = smoothing_x + smoothing_theta`` to time ``T`` against
    ``rhs = <k>^(2 beta) ||v0||^2 + ||<D_x>^{1/2} v0||^2``."""
    _check_k(k)
    if cap is None:
        cap = CapProfile()
    if chi is None:
        chi = SpatialCutoff(1.0, 0.25, 0.5)
    v0 = np.asarray(v0, dtype=np.complex128)
    cfg = ModeEvolutionConfig(profile, k, T, grid, dt=dt, cap=cap)
    trace = evolve_and_measure(cfg, v0, chi, drain_tol=drain_tol)
    beta = beta_loss(profile.m1, profile.m2)
    mass = float(np.sum(np.abs(v0) ** 2) * grid.dx)
    lhs = float(trace.smoothing_x[-1] + trace.smoothing_theta[-1])
    rhs = (1.0 + float(k) ** 2) ** beta * mass + half_derivative_norm2(v0, grid.dx)
    return RatioResult(int(k), float(T), lhs, rhs, lhs / rhs, trace)


@dataclass(frozen=True)
class PacketFamily:
    """Seeded sum of compactly supported wave packets, realized at any ``k``.

    Packet ``j`` is ``c_j exp(-(x - x_j)^2 / (2 s_j^2)) exp(i k xi_j x)``; the
    sum is multiplied by a smooth cutoff equal to 1 on ``|x - 0.5| <= 4.5``
    and 0 beyond 5.5, so the data has compact support.
    """

    centers: tuple
    widths: tuple
    frequencies: tuple
    coefficients: tuple

    @classmethod
    def draw(cls, rng: np.random.Generator, packets: int = 3):
        centers = rng.uniform(-3.0, 4.0, packets)
        widths = rng.uniform(0.2, 0.6, packets)
        freqs = rng.uniform(-1.0, 1.0, packets)
        coef = rng.normal(size=packets) + 1j * rng.normal(size=packets)
        return cls(tuple(centers), tuple(widths), tuple(freqs), tuple(coef))

    def sample(self, x, k: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.zeros(x.shape, dtype=complex)
        for c, s, f, a in zip(self.centers, self.widths, self.frequencies, self.coefficients):
            v += a * np.exp(-0.5 * ((x - c) / s) ** 2 + 1j * k * f * x)
        return v * SpatialCutoff(0.5, 4.5, 5.5)(x)
