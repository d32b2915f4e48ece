"""Eigenvalues and left/right eigenvectors of dense non-normal matrices.

Pipeline: diagonal balancing (powers of two, exact in every mode), Givens
reduction to upper Hessenberg form, then complex single-shift implicit QR with
Wilkinson shifts and Ahues-Tisseur deflation.  Eigenvectors come from
back-substitution on the Schur factor.  The same driver runs in two
arithmetics: ``complex128`` ndarrays ("double") and :class:`ComplexDD`
double-double arrays ("quad").
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nhlab.errors import AmbiguousClusterError, ConvergenceError, NHLabError
from nhlab.kernel import ddouble as dd
from nhlab.kernel.ddouble import ComplexDD
from nhlab.kernel.exact import exact_rank
from nhlab.kernel.matrix import (
    DEFAULT_TOLERANCES,
    UNIT_ROUNDOFF,
    DenseMatrix,
    EigenPair,
    Tolerances,
)

_SAFMIN = np.finfo(float).tiny
_I2 = np.eye(2, dtype=complex)


class _DoubleArith:
    name = "double"
    ulp = UNIT_ROUNDOFF["double"]

    @staticmethod
    def load(a: DenseMatrix) -> np.ndarray:
        return np.array(a.to_complex(), dtype=complex)

    @staticmethod
    def eye(n):
        return np.eye(n, dtype=complex)

    @staticmethod
    def zeros(shape):
        return np.zeros(shape, dtype=complex)

    @staticmethod
    def approx(x) -> np.ndarray:
        return np.asarray(x)

    @staticmethod
    def entry(a, i, j) -> complex:
        return complex(a[i, j])

    @staticmethod
    def givens(a, i0, j0, i1, j1):
        """Rotation G with G @ [a[i0,j0], a[i1,j1]] = [r, 0]."""
        x = complex(a[i0, j0])
        y = complex(a[i1, j1])
        v = math.hypot(abs(x), abs(y))
        if v == 0.0:
            return _I2, 0.0
        c, s = x / v, y / v
        return np.array([[c.conjugate(), s.conjugate()], [-s, c]]), v

    @staticmethod
    def scalar(z: complex):
        return complex(z)

    @staticmethod
    def divide(a, b):
        return a / b

    @staticmethod
    def scale(a, factors: np.ndarray):
        return a * factors

    @staticmethod
    def clamp(den, smin: float):
        den = den.copy()
        den[np.abs(den) < smin] = smin
        return den


class _QuadArith:
    name = "quad"
    ulp = UNIT_ROUNDOFF["quad"]

    @staticmethod
    def load(a: DenseMatrix) -> ComplexDD:
        t = a.to_dd()
        t.d.setflags(write=True)
        return ComplexDD(np.array(t.d))

    @staticmethod
    def eye(n):
        return ComplexDD.eye(n)

    @staticmethod
    def zeros(shape):
        return ComplexDD.zeros(shape)

    @staticmethod
    def approx(x) -> np.ndarray:
        return x.to_complex()

    @staticmethod
    def entry(a, i, j) -> complex:
        d = a.d
        return complex(d[0, 0, i, j] + d[1, 0, i, j], d[0, 1, i, j] + d[1, 1, i, j])

    @staticmethod
    def givens(a, i0, j0, i1, j1):
        d = a.d
        x = (d[0, 0, i0, j0], d[1, 0, i0, j0], d[0, 1, i0, j0], d[1, 1, i0, j0])
        y = (d[0, 0, i1, j1], d[1, 0, i1, j1], d[0, 1, i1, j1], d[1, 1, i1, j1])
        x = tuple(float(t) for t in x)
        y = tuple(float(t) for t in y)
        n2 = dd.dd_add(*dd.scalar_abs2(x), *dd.scalar_abs2(y))
        if n2[0] == 0.0:
            return ComplexDD.from_complex(_I2), 0.0
        vh, vl = dd.dd_sqrt(*n2)
        ih, il = dd.dd_recip(vh, vl)
        inv = (ih, il, 0.0, 0.0)
        c = dd.scalar_complex_mul(x, inv)
        s = dd.scalar_complex_mul(y, inv)
        g = np.empty((2, 2, 2, 2))
        # [[conj c, conj s], [-s, c]] laid out as [word][part][row][col]
        for (r, col), (w, sign_re, sign_im) in {
            (0, 0): (c, 1, -1),
            (0, 1): (s, 1, -1),
            (1, 0): (s, -1, -1),
            (1, 1): (c, 1, 1),
        }.items():
            g[0, 0, r, col] = sign_re * w[0]
            g[1, 0, r, col] = sign_re * w[1]
            g[0, 1, r, col] = sign_im * w[2]
            g[1, 1, r, col] = sign_im * w[3]
        return ComplexDD(g), (vh, vl)

    @staticmethod
    def scalar(z):
        if isinstance(z, tuple):
            return ComplexDD.from_scalar(z, (0.0, 0.0))
        return ComplexDD.from_complex(complex(z))

    @staticmethod
    def divide(a, b):
        return a.divide(b)

    @staticmethod
    def scale(a, factors: np.ndarray):
        # factors are exact powers of two: scale both words directly
        return ComplexDD(a.d * factors)

    @staticmethod
    def clamp(den, smin: float):
        den = den.copy()
        small = np.abs(den.to_complex()) < smin
        den.d[:, :, small] = 0.0
        den.d[0, 0, small] = smin
        return den


_ARITH = {"double": _DoubleArith, "quad": _QuadArith}


# --------------------------------------------------------------------------
# rotations


def _rot_rows(a, i, c0, c1, g):
    b = a[i : i + 2, c0:c1]
    a[i : i + 2, c0:c1] = (g[:, :, None] * b[None, :, :]).sum(axis=1)


def _rot_cols(a, j, r0, r1, g):
    b = a[r0:r1, j : j + 2]
    a[r0:r1, j : j + 2] = (b[:, None, :] * g.conj()[None, :, :]).sum(axis=2)


# --------------------------------------------------------------------------
# balancing and Hessenberg reduction


def balance_factors(a: np.ndarray, max_sweeps: int = 100) -> np.ndarray:
    """Diagonal scaling ``d`` (powers of two) making ``D^-1 A D`` row/column balanced."""
    n = a.shape[0]
    mag = np.abs(a.real) + np.abs(a.imag)
    np.fill_diagonal(mag, 0.0)
    d = np.ones(n)
    for _ in range(max_sweeps):
        done = True
        for i in range(n):
            # entry (k, j) of D^-1 A D is a_kj * d_j / d_k
            c = float(np.sum(mag[:, i] * d[i] / d))
            r = float(np.sum(mag[i, :] * d / d[i]))
            if c == 0.0 or r == 0.0:
                continue
            f = 1.0
            s = c + r
            while c < r / 2.0:
                c *= 2.0
                r /= 2.0
                f *= 2.0
            while c >= r * 2.0:
                c /= 2.0
                r *= 2.0
                f /= 2.0
            if (c + r) < 0.95 * s:
                d[i] *= f
                done = False
        if done:
            break
    return d


def _hessenberg(arith, a, z):
    n = a.shape[0]
    for j in range(n - 2):
        for i in range(n - 1, j + 1, -1):
            if arith.entry(a, i, j) == 0:
                continue
            g, _ = arith.givens(a, i - 1, j, i, j)
            _rot_rows(a, i - 1, j, n, g)
            a[i, j] = arith.scalar(0.0)
            _rot_cols(a, i - 1, 0, n, g)
            _rot_cols(z, i - 1, 0, n, g)


# --------------------------------------------------------------------------
# Schur iteration


def _negligible(arith, t, k, norm) -> bool:
    """Ahues-Tisseur test for the subdiagonal entry t[k, k-1]."""
    h = arith.entry(t, k, k - 1)
    ah = abs(h)
    if ah <= _SAFMIN:
        return True
    a00 = arith.entry(t, k - 1, k - 1)
    a11 = arith.entry(t, k, k)
    tst = abs(a00) + abs(a11)
    if tst == 0.0:
        tst = norm
    ulp = arith.ulp
    if ah > ulp * tst:
        return False
    h01 = abs(arith.entry(t, k - 1, k))
    ab, ba = max(ah, h01), min(ah, h01)
    aa = max(abs(a11), abs(a00 - a11))
    bb = min(abs(a11), abs(a00 - a11))
    s = aa + ab
    return ba * (ab / s) <= max(_SAFMIN, ulp * (bb * (aa / s)))


def _diff(arith, t, i, j) -> complex:
    """t[i, i] - t[j, j] evaluated at working precision, rounded to complex."""
    if arith.name == "double":
        return complex(t[i, i] - t[j, j])
    return complex((t[i, i] - t[j, j]).to_complex())


def _wilkinson_offset(amd, b, c) -> complex:
    """Eigenvalue of [[a, b], [c, d]] closest to d, returned as an offset from d.

    ``amd`` = a - d; the root of x^2 - amd x - b c = 0 nearest 0 is formed
    as -bc / (amd/2 +- sqrt(...)) to avoid cancellation.
    """
    half = amd / 2.0
    root = np.sqrt(half * half + b * c)
    den = half + root if abs(half + root) >= abs(half - root) else half - root
    if den == 0:
        return 0j
    return -(b * c) / den


def _shift_at(arith, t, i, x: complex):
    """t[i, i] + x in the working arithmetic (keeps the quad low words of t[i, i])."""
    if arith.name == "double":
        return t[i, i] + x
    return t[i, i] + ComplexDD.from_complex(x)


def _qr_sweep(arith, t, z, lo, hi, shift):
    n = t.shape[0]
    probe = t[lo : lo + 2, lo : lo + 1].copy()
    probe[0, 0] = t[lo, lo] - shift
    g, _ = arith.givens(probe, 0, 0, 1, 0)
    for k in range(lo, hi):
        c0 = k
        if k > lo:
            # chase the bulge sitting at (k+1, k-1)
            g, _ = arith.givens(t, k, k - 1, k + 1, k - 1)
            c0 = k - 1
        _rot_rows(t, k, c0, n, g)
        if k > lo:
            t[k + 1, k - 1] = arith.scalar(0.0)
        _rot_cols(t, k, 0, min(k + 3, hi + 1), g)
        _rot_cols(z, k, 0, n, g)


def _split_2x2(arith, t, z, lo):
    n = t.shape[0]
    b, c = arith.entry(t, lo, lo + 1), arith.entry(t, lo + 1, lo)
    half = _diff(arith, t, lo + 1, lo) / 2.0  # (d - a) / 2
    root = np.sqrt(half * half + b * c)
    if abs(half + root) < abs(half - root):
        root = -root
    mu = half + root  # lambda - a, computed without cancellation
    v1 = np.array([b, mu])
    v2 = np.array([mu - 2.0 * half, c])
    vec = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    probe = vec.reshape(2, 1).astype(complex)
    if arith.name == "quad":
        probe = ComplexDD.from_complex(probe)
    g, _ = arith.givens(probe, 0, 0, 1, 0)
    _rot_rows(t, lo, lo, n, g)
    _rot_cols(t, lo, 0, lo + 2, g)
    _rot_cols(z, lo, 0, n, g)


def _schur(arith, t, z, max_iter: int):
    n = t.shape[0]
    tc = arith.approx(t)
    norm = float(np.sqrt(np.sum(np.abs(tc) ** 2))) or 1.0
    hi = n - 1
    total = 0
    its = 0
    while hi > 0:
        lo = hi
        while lo > 0 and not _negligible(arith, t, lo, norm):
            lo -= 1
        if lo > 0:
            t[lo, lo - 1] = arith.scalar(0.0)
        if lo == hi:
            hi -= 1
            its = 0
            continue
        if total >= max_iter:
            raise ConvergenceError(
                f"QR iteration did not converge within {max_iter} sweeps",
                {
                    "schur": arith.approx(t).copy(),
                    "converged": list(range(hi + 1, n)),
                    "active_window": (lo, hi),
                    "iterations": total,
                },
            )
        if hi - lo == 1 and its % 10 == 3:
            # a 2x2 block that shifted QR cannot split (eigenvalue gap below
            # the working resolution): rotate an eigenvector onto e1 directly
            _split_2x2(arith, t, z, lo)
            its += 1
            total += 1
            continue
        if its and its % 10 == 0:
            x = 0.75 * abs(arith.entry(t, hi, hi - 1))
        else:
            x = _wilkinson_offset(
                _diff(arith, t, hi - 1, hi),
                arith.entry(t, hi - 1, hi),
                arith.entry(t, hi, hi - 1),
            )
        shift = _shift_at(arith, t, hi, x)
        _qr_sweep(arith, t, z, lo, hi, shift)
        its += 1
        total += 1
    return total


# --------------------------------------------------------------------------
# eigenvectors of the triangular factor


def _diag(arith, t):
    n = t.shape[0]
    if arith.name == "double":
        return np.diag(t).copy()
    out = ComplexDD.zeros(n)
    idx = np.arange(n)
    out.d[...] = t.d[:, :, idx, idx]
    return out


def _colmax_rescale(arith, x, rows):
    big = np.max(np.abs(arith.approx(x[rows, :])), axis=0)
    over = big > 1e150
    if np.any(over):
        f = np.where(over, 2.0**-500, 1.0)
        x[:, :] = arith.scale(x[:, :], f[None, :])


def _triangular_right(arith, t, smin):
    n = t.shape[0]
    lam = _diag(arith, t)
    x = arith.eye(n)
    for i in range(n - 2, -1, -1):
        m = slice(i + 1, n)
        rhs = (t[i, m][:, None] * x[m, m]).sum(axis=0)
        den = arith.clamp(t[i, i] - lam[m], smin)
        x[i, m] = -arith.divide(rhs, den)
        _colmax_rescale(arith, x, slice(i, i + 1))
    return x


def _triangular_left(arith, t, smin):
    n = t.shape[0]
    lam = _diag(arith, t)
    y = arith.eye(n)
    for i in range(1, n):
        m = slice(0, i)
        rhs = (t[m, i].conj()[:, None] * y[m, m]).sum(axis=0)
        den = arith.clamp((t[i, i] - lam[m]).conj(), smin)
        y[i, m] = -arith.divide(rhs, den)
        _colmax_rescale(arith, y, slice(i, i + 1))
    return y


def _safe_norms(x: np.ndarray) -> np.ndarray:
    # column 2-norms without overflow for entries near the double range
    big = np.max(np.maximum(np.abs(x.real), np.abs(x.imag)), axis=0)
    big[(big == 0) | ~np.isfinite(big)] = 1.0
    _, e = np.frexp(big)
    # power-of-two scaling on each part: complex division would overflow on subnormals
    xr = np.ldexp(x.real, -e[None, :])
    xi = np.ldexp(x.imag, -e[None, :])
    return np.ldexp(np.sqrt(np.sum(xr * xr + xi * xi, axis=0)), e)


def _normalize_columns(arith, v):
    nrm = _safe_norms(arith.approx(v))
    nrm[nrm == 0] = 1.0
    if arith.name == "double":
        _, e = np.frexp(nrm)
        vr = np.ldexp(v.real, -e[None, :])
        vi = np.ldexp(v.imag, -e[None, :])
        return (vr + 1j * vi) / np.ldexp(nrm, -e)[None, :]
    return v * ComplexDD.from_complex(1.0 / nrm)[None, :]


def _column_norms(arith, v) -> np.ndarray:
    return _safe_norms(arith.approx(v))


@dataclass
class _Decomposition:
    values: object
    right: object
    left: object
    a: object
    norm: float
    iterations: int
    exponent: int = 0  # values, a and norm are scaled by 2**-exponent


def _scale_pow2(arith, a, e: int):
    # two half steps, since 2**e alone may overflow when a is subnormal
    h = e // 2
    return arith.scale(arith.scale(a, np.ldexp(1.0, h)), np.ldexp(1.0, e - h))


def _decompose(a: DenseMatrix, balance: bool, tol: Tolerances) -> _Decomposition:
    arith = _ARITH[a.precision]
    n = a.dim
    work = arith.load(a)
    approx = arith.approx(work)
    # bring the largest entry near 1 so tiny or huge inputs stay clear of
    # under/overflow in the double-word products
    amax = float(np.max(np.abs(approx))) if n else 0.0
    e = int(np.frexp(amax)[1]) if amax else 0
    if e:
        work = _scale_pow2(arith, work, -e)
        approx = arith.approx(work)
    d = balance_factors(approx) if balance else np.ones(n)
    dinv = 1.0 / d
    t = arith.scale(work, dinv[:, None] * d[None, :])
    z = arith.eye(n)
    _hessenberg(arith, t, z)
    iters = _schur(arith, t, z, tol.max_iter_per_eigenvalue * max(n, 10))
    tnorm = float(np.linalg.norm(arith.approx(t))) or 1.0
    smin = max(arith.ulp * tnorm, _SAFMIN)
    x = _triangular_right(arith, t, smin)
    y = _triangular_left(arith, t, smin)
    right = arith.scale(z @ x, d[:, None])
    left = arith.scale(z @ y, dinv[:, None])
    right = _normalize_columns(arith, right)
    left = _normalize_columns(arith, left)
    anorm = float(np.linalg.norm(approx)) or 1.0
    return _Decomposition(_diag(arith, t), right, left, work, anorm, iters, e)


def eigs_dense(
    a: DenseMatrix,
    *,
    balance: bool = True,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> list[EigenPair]:
    """All eigenpairs of ``a``, sorted by real part, then imaginary part.

    Raises :class:`ConvergenceError` if the QR iteration exceeds its cap and
    :class:`NHLabError` if any residual misses the mode tolerance.
    """
    if a.precision not in ("double", "quad"):
        raise NHLabError("eigs_dense needs a floating precision mode (double or quad)")
    arith = _ARITH[a.precision]
    n = a.dim
    limit = tolerances.residual(a.precision)
    dec = _decompose(a, balance, tolerances)
    rr, rl, bio = _residuals(arith, dec)
    worst = float(max(rr.max(), rl.max()))
    if balance and not worst <= limit:
        # extreme balancing factors can amplify deflation errors in the vectors
        dec2 = _decompose(a, False, tolerances)
        rr2, rl2, bio2 = _residuals(arith, dec2)
        worst2 = float(max(rr2.max(), rl2.max()))
        if worst2 < worst:
            dec, rr, rl, bio, worst = dec2, rr2, rl2, bio2, worst2
    if not worst <= limit:
        raise NHLabError(
            f"eigen-residual {worst:.3e} exceeds the {a.precision} tolerance {limit:.1e}"
        )
    lam, v, w = dec.values, dec.right, dec.left
    if dec.exponent:
        lam = _scale_pow2(arith, lam, dec.exponent)
    vals = arith.approx(lam)
    vc, wc = arith.approx(v), arith.approx(w)
    pairs = [
        EigenPair(
            value=complex(vals[k]),
            right=vc[:, k].copy(),
            left=wc[:, k].copy(),
            residual_right=float(rr[k]),
            residual_left=float(rl[k]),
            biorthogonal_norm=complex(bio[k]),
            precision=a.precision,
            value_words=None if arith.name == "double" else _lam_words(lam, k),
        )
        for k in range(n)
    ]
    pairs.sort(key=lambda p: (p.value.real, p.value.imag))
    return pairs


def _residuals(arith, dec: _Decomposition):
    work, v, w, lam = dec.a, dec.right, dec.left, dec.values
    if arith.name == "double":
        res_r = work @ v - v * lam[None, :]
        res_l = work.conj().T @ w - w * lam.conj()[None, :]
        bio = np.sum(w.conj() * v, axis=0)
    else:
        res_r = (work @ v) - v * lam[None, :]
        res_l = (work.conj().T @ w) - w * lam.conj()[None, :]
        bio = (w.conj() * v).sum(axis=0).to_complex()
    rr = _column_norms(arith, res_r) / (dec.norm * _column_norms(arith, v))
    rl = _column_norms(arith, res_l) / (dec.norm * _column_norms(arith, w))
    return rr, rl, bio


def _lam_words(lam: ComplexDD, k: int):
    d = lam.d
    return (float(d[0, 0, k]), float(d[1, 0, k]), float(d[0, 1, k]), float(d[1, 1, k]))


def eigvals_dense(a: DenseMatrix, **kw) -> np.ndarray:
    """Eigenvalues only (same ordering as :func:`eigs_dense`)."""
    return np.array([p.value for p in eigs_dense(a, **kw)])


def rank_within_tol(a: DenseMatrix, tol: float | None = None) -> int:
    """Numerical rank: singular values above ``tol * sigma_max``.

    Exact mode ignores ``tol`` and returns the exact rank over Q(i).  Quad
    inputs are rounded to double for the singular value decomposition, so the
    default cutoff uses the double unit roundoff in both floating modes.
    """
    if a.precision == "exact":
        return exact_rank(a.entries)
    if tol is not None and tol < 0:
        raise NHLabError("rank tolerance must be non-negative")
    s = np.linalg.svd(a.to_complex(), compute_uv=False)
    if s[0] == 0.0:
        return 0
    if tol is None:
        tol = a.dim * UNIT_ROUNDOFF["double"] * DEFAULT_TOLERANCES.rank_factor
    return int(np.sum(s > tol * s[0]))


def left_right_eigenpair(
    a: DenseMatrix,
    approx: complex,
    *,
    cluster_radius: float | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> EigenPair:
    """Eigenpair of the eigenvalue cluster nearest to ``approx``.

    A cluster is the set of computed eigenvalues within ``cluster_radius``
    (default ``1e-6 * max(1, ||A||)``) of the nearest one.  A cluster with a
    single eigenvector (a defective eigenvalue split by rounding) is returned
    as one pair whose biorthogonal norm is close to zero; a cluster carrying
    two or more independent eigenvectors is ambiguous and raises
    :class:`AmbiguousClusterError`.
    """
    pairs = eigs_dense(a.astype("double") if a.precision == "exact" else a, tolerances=tolerances)
    m = a.to_complex()
    scale = max(1.0, float(np.linalg.norm(m, 2)))
    radius = cluster_radius if cluster_radius is not None else 1e-6 * scale
    vals = np.array([p.value for p in pairs])
    dist = np.abs(vals - approx)
    k = int(np.argmin(dist))
    in_cluster = np.abs(vals - vals[k]) <= radius
    outside = np.flatnonzero(~in_cluster)
    if outside.size:
        j = outside[np.argmin(dist[outside])]
        if dist[j] - dist[k] <= radius:
            raise AmbiguousClusterError(
                f"approximation {approx} is equally close to eigenvalues {vals[k]:.6g} and {vals[j]:.6g}",
                [vals[k], vals[j]],
            )
    if in_cluster.sum() == 1:
        return _refine(m, pairs[k], a.precision)
    cluster = vals[in_cluster]
    mu = complex(np.mean(cluster))
    u, s, vh = np.linalg.svd(m - mu * np.eye(len(m)))
    null = int(np.sum(s <= radius))
    if null >= 2:
        raise AmbiguousClusterError(
            f"eigenvalues {', '.join(f'{z:.6g}' for z in cluster)} lie within the refinement "
            f"radius {radius:.1e} but carry {null} independent eigenvectors",
            cluster,
        )
    # one eigenvector for the whole cluster: a defective eigenvalue
    right = vh[-1].conj()
    left = u[:, -1]
    bio = complex(np.vdot(left, right))
    rr = float(np.linalg.norm(m @ right - mu * right) / scale)
    rl = float(np.linalg.norm(m.conj().T @ left - np.conj(mu) * left) / scale)
    mode = "double" if a.precision == "exact" else a.precision
    return EigenPair(mu, right, left, rr, rl, bio, mode)


def _refine(m: np.ndarray, p: EigenPair, precision: str) -> EigenPair:
    if precision == "quad":
        return p
    bio = np.vdot(p.left, p.right)
    if abs(bio) < 1e-12:
        return p
    e = complex(np.vdot(p.left, m @ p.right) / bio)
    scale = max(1.0, float(np.linalg.norm(m)))
    rr = float(np.linalg.norm(m @ p.right - e * p.right) / scale)
    rl = float(np.linalg.norm(m.conj().T @ p.left - np.conj(e) * p.left) / scale)
    return EigenPair(e, p.right, p.left, rr, rl, complex(bio), p.precision)
