"""Hot numerical kernels: pentadiagonal LU, Crank-Nicolson stepping.

Matrices are stored in the LAPACK general-band layout with ``kl = ku = 2``:
entry ``A[i, j]`` lives at ``ab[KV + i - j, j]`` of a ``(7, n)`` array whose
top two rows are fill-in workspace for partial pivoting.  The compact
five-row form used by the operator builders is the same layout without the
workspace rows (the ``scipy.linalg.solve_banded`` convention).

Each kernel has a numba implementation and a numpy/LAPACK implementation;
``_accel.USE_NUMBA`` picks which one runs.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from . import _accel
from ._accel import njit

KL = 2
KU = 2
KV = KL + KU
LDAB = 2 * KL + KU + 1
# Implicit steps smear exponentially small tails across the grid; left alone
# they sink into subnormal floats, which slow the arithmetic by 20x or more.
FLUSH_BELOW = 1e-150


class SingularSystemError(ArithmeticError):
    """A pivot of the banded factorization fell below the singularity floor."""


# ---------------------------------------------------------------- numba path


@njit(cache=True, nogil=True)
def _gbtf2(ab, ipiv):
    n = ab.shape[1]
    ju = 0
    info = 0
    for j in range(n):
        km = min(KL, n - 1 - j)
        jp = 0
        best = -1.0
        for i in range(km + 1):
            v = ab[KV + i, j]
            s = abs(v.real) + abs(v.imag)
            if s > best:
                best = s
                jp = i
        ipiv[j] = j + jp
        if ab[KV + jp, j] != 0:
            ju = max(ju, min(j + KU + jp, n - 1))
            if jp != 0:
                for c in range(j, ju + 1):
                    r1 = KV + j - c
                    r2 = KV + j + jp - c
                    tmp = ab[r1, c]
                    ab[r1, c] = ab[r2, c]
                    ab[r2, c] = tmp
            if km > 0:
                piv = ab[KV, j]
                for i in range(1, km + 1):
                    ab[KV + i, j] = ab[KV + i, j] / piv
                for c in range(j + 1, ju + 1):
                    ajc = ab[KV + j - c, c]
                    if ajc != 0:
                        for i in range(1, km + 1):
                            ab[KV + j + i - c, c] -= ab[KV + i, j] * ajc
        elif info == 0:
            info = j + 1
    return info


@njit(cache=True, nogil=True)
def _gbtrs(ab, ipiv, b, adjoint):
    n = ab.shape[1]
    if not adjoint:
        for j in range(n - 1):
            lm = min(KL, n - 1 - j)
            p = ipiv[j]
            if p != j:
                tmp = b[p]
                b[p] = b[j]
                b[j] = tmp
            bj = b[j]
            for i in range(1, lm + 1):
                b[j + i] -= ab[KV + i, j] * bj
        for j in range(n - 1, -1, -1):
            b[j] = b[j] / ab[KV, j]
            bj = b[j]
            for i in range(1, min(KV, j) + 1):
                b[j - i] -= ab[KV - i, j] * bj
    else:
        for j in range(n):
            s = b[j]
            for i in range(1, min(KV, j) + 1):
                s -= np.conj(ab[KV - i, j]) * b[j - i]
            b[j] = s / np.conj(ab[KV, j])
        for j in range(n - 2, -1, -1):
            lm = min(KL, n - 1 - j)
            s = b[j]
            for i in range(1, lm + 1):
                s -= np.conj(ab[KV + i, j]) * b[j + i]
            b[j] = s
            p = ipiv[j]
            if p != j:
                tmp = b[p]
                b[p] = b[j]
                b[j] = tmp


@njit(cache=True, nogil=True)
def _band_matvec_nb(ab5, v, out):
    n = v.shape[0]
    for i in range(n):
        s = 0.0j
        for j in range(max(0, i - KL), min(n, i + KU + 1)):
            s += ab5[KU + i - j, j] * v[j]
        out[i] = s


@njit(cache=True, nogil=True)
def _grid_functionals_nb(v, weights, deriv_weight, inv12dx, dx, out):
    # out[0] = mass, out[1] = derivative functional, out[2:] = weighted masses
    n = v.shape[0]
    nw = weights.shape[0]
    for q in range(nw + 2):
        out[q] = 0.0
    mass = 0.0
    dsum = 0.0
    for i in range(n):
        a2 = v[i].real * v[i].real + v[i].imag * v[i].imag
        mass += a2
        for q in range(nw):
            out[2 + q] += weights[q, i] * a2
    for i in range(2, n - 2):
        d = (v[i - 2] - v[i + 2] + 8.0 * (v[i + 1] - v[i - 1])) * inv12dx
        dsum += deriv_weight[i] * (d.real * d.real + d.imag * d.imag)
    for i in (0, 1, n - 2, n - 1):
        d = 8.0 * v[i + 1] if i + 1 < n else 0.0j
        if i + 2 < n:
            d -= v[i + 2]
        if i >= 1:
            d -= 8.0 * v[i - 1]
        if i >= 2:
            d += v[i - 2]
        d *= inv12dx
        dsum += deriv_weight[i] * (d.real * d.real + d.imag * d.imag)
    out[0] = mass
    out[1] = dsum
    for q in range(nw + 2):
        out[q] *= dx


@njit(cache=True, nogil=True)
def _flushed(z):
    if abs(z.real) < FLUSH_BELOW and abs(z.imag) < FLUSH_BELOW:
        return 0.0j
    return z


@njit(cache=True, nogil=True)
def _solve_flush(ab, ipiv, inv_piv, b):
    # forward/back substitution of _gbtrs with reciprocal pivots and flushing
    n = ab.shape[1]
    for j in range(n - 1):
        p = ipiv[j]
        if p != j:
            tmp = b[p]
            b[p] = b[j]
            b[j] = tmp
        bj = _flushed(b[j])
        b[j] = bj
        if bj == 0.0j:
            continue
        for i in range(1, min(KL, n - 1 - j) + 1):
            b[j + i] -= ab[KV + i, j] * bj
    for j in range(n - 1, -1, -1):
        bj = _flushed(b[j] * inv_piv[j])
        b[j] = bj
        if bj == 0.0j:
            continue
        for i in range(1, min(KV, j) + 1):
            b[j - i] -= ab[KV - i, j] * bj


@njit(cache=True, nogil=True)
def _cn_run_nb(lu, ipiv, v, nsteps, weights, deriv_weight, inv12dx, dx, record):
    # (I + cM)^-1 (I - cM) v = 2 (I + cM)^-1 v - v: one solve, no matvec
    n = v.shape[0]
    b = np.empty(n, dtype=np.complex128)
    inv_piv = 1.0 / lu[KV]
    _grid_functionals_nb(v, weights, deriv_weight, inv12dx, dx, record[0])
    for s in range(nsteps):
        for i in range(n):
            b[i] = v[i]
        _solve_flush(lu, ipiv, inv_piv, b)
        for i in range(n):
            v[i] = _flushed(2.0 * b[i] - v[i])
        _grid_functionals_nb(v, weights, deriv_weight, inv12dx, dx, record[s + 1])
    return v


# ---------------------------------------------------------------- numpy path


def band_matvec(ab5: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Multiply a compact five-row band matrix by a vector."""
    if _accel.USE_NUMBA:
        out = np.empty(v.shape[0], dtype=np.complex128)
        _band_matvec_nb(np.ascontiguousarray(ab5, dtype=np.complex128),
                        np.ascontiguousarray(v, dtype=np.complex128), out)
        return out
    n = v.shape[0]
    out = ab5[KU] * v
    for off in range(1, KU + 1):
        # superdiagonal `off`: A[i, i+off] = ab5[KU-off, i+off]
        out[: n - off] += ab5[KU - off, off:] * v[off:]
        # subdiagonal `off`: A[i+off, i] = ab5[KU+off, i]
        out[off:] += ab5[KU + off, : n - off] * v[: n - off]
    return out


def grid_functionals(v, weights, deriv_weight, dx):
    """Quadratures of ``|v|^2`` against each weight row plus a derivative term.

    Returns ``[mass, sum w_d |dv/dx|^2 dx, sum w_0 |v|^2 dx, ...]`` where the
    derivative uses the fourth-order centred stencil with zero extension.
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    out = np.empty(weights.shape[0] + 2)
    if _accel.USE_NUMBA:
        _grid_functionals_nb(np.ascontiguousarray(v, dtype=np.complex128),
                             np.ascontiguousarray(weights),
                             np.ascontiguousarray(deriv_weight, dtype=float),
                             1.0 / (12.0 * dx), dx, out)
        return out
    a2 = np.abs(v) ** 2
    d = first_derivative(v, dx)
    out[0] = a2.sum() * dx
    out[1] = (deriv_weight * np.abs(d) ** 2).sum() * dx
    out[2:] = (weights @ a2) * dx
    return out


def first_derivative(v: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order centred first difference, zero outside the grid."""
    p = np.pad(v, 2)
    return (p[:-4] - 8.0 * p[1:-3] + 8.0 * p[3:-1] - p[4:]) / (12.0 * dx)


class BandedLU:
    """LU factorization (partial pivoting) of a pentadiagonal complex matrix.

    Parameters
    ----------
    ab5 : (5, n) complex array
        Compact band storage, ``A[i, j] = ab5[2 + i - j, j]``.
    """

    def __init__(self, ab5: np.ndarray, singular_rtol: float = 1e-14):
        ab5 = np.asarray(ab5, dtype=np.complex128)
        n = ab5.shape[1]
        work = np.zeros((LDAB, n), dtype=np.complex128)
        work[KL:] = ab5
        self.n = n
        self.scale = float(np.max(np.abs(ab5))) if n else 0.0
        if _accel.USE_NUMBA:
            ipiv = np.empty(n, dtype=np.int64)
            info = _gbtf2(work, ipiv)
            self.lu, self.ipiv = work, ipiv
        else:
            lu, ipiv, info = lapack.zgbtrf(work, KL, KU)
            self.lu, self.ipiv = lu, ipiv.astype(np.int64)
        # both paths use 0-based pivots, so either factorization feeds either solver
        self._ipiv32 = self.ipiv.astype(np.int32)
        self.info = int(info)
        self.min_pivot = float(np.min(np.abs(self.lu[KV]))) if n else 0.0
        self.singular = self.info != 0 or self.min_pivot < singular_rtol * self.scale

    def solve(self, b: np.ndarray, adjoint: bool = False) -> np.ndarray:
        """Solve ``A x = b`` (or ``A^H x = b`` when ``adjoint``)."""
        if _accel.USE_NUMBA:
            x = np.array(b, dtype=np.complex128, copy=True)
            _gbtrs(self.lu, self.ipiv, x, adjoint)
            return x
        # scipy's gb wrappers shift pivots to 0-based on both sides
        x, info = lapack.zgbtrs(self.lu, KL, KU,
                                np.asarray(b, dtype=np.complex128).reshape(-1, 1),
                                self._ipiv32, trans=2 if adjoint else 0)
        return x[:, 0]


def cayley_factor(ab5, dt):
    """Factor ``I + i dt/2 M``; returns ``(BandedLU, coef)`` with ``coef = i dt / 2``."""
    ab5 = np.asarray(ab5, dtype=np.complex128)
    coef = 0.5j * dt
    lhs = coef * ab5
    lhs[KU] += 1.0
    lu = BandedLU(lhs)
    if lu.singular:
        raise SingularSystemError("Crank-Nicolson matrix is singular")
    return lu, coef


def cayley_run(lu, v0, nsteps, weights, deriv_weight, dx):
    """``nsteps`` Cayley steps against a factorization from :func:`cayley_factor`.

    Uses ``(I + cM)^-1 (I - cM) v = 2 (I + cM)^-1 v - v``.  Returns the final state and an ``(nsteps + 1, 2 + len(weights))`` record
    of :func:`grid_functionals` evaluated at every time level.
    """
    weights = np.ascontiguousarray(np.atleast_2d(np.asarray(weights, dtype=float)))
    deriv_weight = np.ascontiguousarray(deriv_weight, dtype=float)
    record = np.empty((nsteps + 1, weights.shape[0] + 2))
    v = np.array(v0, dtype=np.complex128, copy=True)
    if _accel.USE_NUMBA:
        v = _cn_run_nb(lu.lu, lu.ipiv, v, nsteps, weights, deriv_weight,
                       1.0 / (12.0 * dx), dx, record)
        return v, record
    record[0] = grid_functionals(v, weights, deriv_weight, dx)
    for s in range(nsteps):
        v = 2.0 * lu.solve(v) - v
        v[(np.abs(v.real) < FLUSH_BELOW) & (np.abs(v.imag) < FLUSH_BELOW)] = 0.0
        record[s + 1] = grid_functionals(v, weights, deriv_weight, dx)
    return v, record


def crank_nicolson_run(ab5, dt, v0, nsteps, weights, deriv_weight, dx):
    """Advance ``i dv/dt = M v`` by ``nsteps`` Cayley steps (factor and run)."""
    lu, coef = cayley_factor(ab5, dt)
    return cayley_run(lu, v0, nsteps, weights, deriv_weight, dx)


def band_to_dense(ab5: np.ndarray) -> np.ndarray:
    """Expand compact band storage to a dense matrix (test/oracle helper)."""
    n = ab5.shape[1]
    dense = np.zeros((n, n), dtype=ab5.dtype)
    for off in range(-KL, KU + 1):
        row = KU - off
        if off >= 0:
            idx = np.arange(n - off)
            dense[idx, idx + off] = ab5[row, off:]
        else:
            idx = np.arange(n + off)
            dense[idx - off, idx] = ab5[row, : n + off]
    return dense
