"""Exact complex-rational arithmetic: rank, characteristic polynomial, Sturm counts.

Everything here runs on :class:`fractions.Fraction` and Python integers, so no
rounding happens anywhere.  The characteristic polynomial is obtained with the
division-free Berkowitz recurrence after clearing denominators, which keeps all
intermediate quantities Gaussian integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np

from nhlab.errors import CapExceededError, NHLabError


class QI:
    """Complex rational number ``re + i*im``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is Fraction else Fraction(re)
        self.im = im if type(im) is Fraction else Fraction(im)

    @classmethod
    def coerce(cls, z) -> QI:
        if isinstance(z, QI):
            return z
        if isinstance(z, complex):
            return cls(Fraction(z.real), Fraction(z.imag))
        return cls(Fraction(z), 0)

    def __add__(self, o):
        o = QI.coerce(o)
        return QI(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = QI.coerce(o)
        return QI(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return QI.coerce(o) - self

    def __mul__(self, o):
        o = QI.coerce(o)
        return QI(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = QI.coerce(o)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("complex rational division by zero")
        return QI((self.re * o.re + self.im * o.im) / den, (self.im * o.re - self.re * o.im) / den)

    def __neg__(self):
        return QI(-self.re, -self.im)

    def conjugate(self):
        return QI(self.re, -self.im)

    def __eq__(self, o):
        try:
            o = QI.coerce(o)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return f"QI({self.re})"
        return f"QI({self.re}, {self.im})"


I = QI(0, 1)


def as_qi_matrix(rows) -> list[list[QI]]:
    return [[QI.coerce(x) for x in row] for row in rows]


def qi_matmul(a: Sequence[Sequence[QI]], b: Sequence[Sequence[QI]]) -> list[list[QI]]:
    n, m, p = len(a), len(b), len(b[0])
    bt = [[b[k][j] for k in range(m)] for j in range(p)]
    out = []
    for i in range(n):
        row = a[i]
        nz = [(k, row[k]) for k in range(m) if row[k]]
        out.append([_dot(nz, bt[j]) for j in range(p)])
    return out


def _dot(nz, col) -> QI:
    re = Fraction(0)
    im = Fraction(0)
    for k, x in nz:
        y = col[k]
        if y:
            re += x.re * y.re - x.im * y.im
            im += x.re * y.im + x.im * y.re
    return QI(re, im)


def exact_rank(rows: Sequence[Sequence[QI]]) -> int:
    """Rank over Q(i) by Gaussian elimination."""
    m = [list(r) for r in rows]
    if not m:
        return 0
    nrow, ncol = len(m), len(m[0])
    rank = 0
    for c in range(ncol):
        piv = next((i for i in range(rank, nrow) if m[i][c]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        prow = m[rank]
        inv = QI(1) / prow[c]
        for i in range(rank + 1, nrow):
            if m[i][c]:
                f = m[i][c] * inv
                m[i] = [a - f * b if b else a for a, b in zip(m[i], prow)]
        rank += 1
        if rank == nrow:
            break
    return rank


# --------------------------------------------------------------------------
# characteristic polynomial


def _gaussian_integer_scaling(rows: Sequence[Sequence[QI]]):
    den = 1
    for row in rows:
        for z in row:
            den = lcm(den, z.re.denominator, z.im.denominator)
    n = len(rows)
    re = np.empty((n, n), dtype=object)
    im = np.empty((n, n), dtype=object)
    for i, row in enumerate(rows):
        for j, z in enumerate(row):
            re[i, j] = int(z.re * den)
            im[i, j] = int(z.im * den)
    return den, re, im


def _cmatvec(ar, ai, xr, xi):
    return ar.dot(xr) - ai.dot(xi), ar.dot(xi) + ai.dot(xr)


def _berkowitz(re: np.ndarray, im: np.ndarray) -> list[tuple[int, int]]:
    """Coefficients (highest degree first) of det(xI - A) for a Gaussian-integer A."""
    n = re.shape[0]
    # poly holds coefficients of the char poly of the leading r x r block
    poly = [(1, 0), (-re[0, 0], -im[0, 0])]
    for r in range(1, n):
        # partition A[:r+1,:r+1] = [[A_r, C], [R, a]]
        Ar, Ai = re[:r, :r], im[:r, :r]
        Cr, Ci = re[:r, r], im[:r, r]
        Rr, Ri = re[r, :r], im[r, :r]
        a_r, a_i = re[r, r], im[r, r]
        # Toeplitz column: 1, -a, -R C, -R A C, -R A^2 C, ...
        col = [(1, 0), (-a_r, -a_i)]
        vr, vi = Cr, Ci
        for _ in range(r):
            sr = Rr.dot(vr) - Ri.dot(vi)
            si = Rr.dot(vi) + Ri.dot(vr)
            col.append((-sr, -si))
            vr, vi = _cmatvec(Ar, Ai, vr, vi)
        # new poly = Toeplitz(col) * poly, length r+2
        new = []
        for i in range(r + 2):
            sr = 0
            si = 0
            for j in range(max(0, i - len(col) + 1), min(i, r) + 1):
                cr, ci = col[i - j]
                pr, pi = poly[j]
                sr += cr * pr - ci * pi
                si += cr * pi + ci * pr
            new.append((sr, si))
        poly = new
    return poly


def char_poly_exact(rows: Sequence[Sequence], cap: int = 64) -> list[QI]:
    """Exact coefficients of ``det(xI - A)``, highest degree first.

    ``rows`` holds complex rationals (``QI``, ``Fraction``, ``int`` or exactly
    representable ``complex``).  Raises :class:`CapExceededError` above ``cap``.
    """
    a = as_qi_matrix(rows)
    n = len(a)
    if n == 0 or any(len(r) != n for r in a):
        raise NHLabError("char_poly_exact needs a non-empty square matrix")
    if n > cap:
        raise CapExceededError(
            f"dimension {n} exceeds the exact-arithmetic cap {cap}; use the floating-point path"
        )
    den, re, im = _gaussian_integer_scaling(a)
    coeffs = _berkowitz(re, im)
    # det(xI - A) = den^-n det(den x I - den A): coefficient of x^(n-k) scales by den^-k
    return [QI(Fraction(cr, den**k), Fraction(ci, den**k)) for k, (cr, ci) in enumerate(coeffs)]


# --------------------------------------------------------------------------
# real polynomials and Sturm sequences


@dataclass(frozen=True)
class RealPolynomial:
    """Exact real polynomial, coefficients stored highest degree first."""

    coefficients: tuple[Fraction, ...]

    def __post_init__(self):
        coeffs = tuple(Fraction(c) for c in self.coefficients)
        while len(coeffs) > 1 and coeffs[0] == 0:
            coeffs = coeffs[1:]
        if not coeffs or (coeffs[0] == 0 and len(coeffs) == 1):
            raise NHLabError("zero polynomial has no leading coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_complex_coefficients(cls, coeffs: Sequence[QI]) -> RealPolynomial:
        bad = [k for k, c in enumerate(coeffs) if QI.coerce(c).im != 0]
        if bad:
            raise NHLabError(f"coefficients {bad} have non-zero imaginary part")
        return cls(tuple(QI.coerce(c).re for c in coeffs))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x) -> Fraction:
        acc = Fraction(0)
        for c in self.coefficients:
            acc = acc * x + c
        return acc


def _trim(p: list[Fraction]) -> list[Fraction]:
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return p[i:]


def poly_divmod(a: Sequence[Fraction], b: Sequence[Fraction]):
    a = _trim(list(a))
    b = _trim(list(b))
    if len(b) == 1 and b[0] == 0:
        raise ZeroDivisionError("polynomial division by zero")
    if len(a) < len(b):
        return [Fraction(0)], a
    q = [Fraction(0)] * (len(a) - len(b) + 1)
    r = list(a)
    lead = b[0]
    for i in range(len(q)):
        f = r[i] / lead
        q[i] = f
        if f:
            for j, bj in enumerate(b):
                r[i + j] -= f * bj
    rem = _trim(r[len(q):]) if len(r) > len(q) else [Fraction(0)]
    return q, rem


def _is_zero(p) -> bool:
    return len(p) == 1 and p[0] == 0


def poly_gcd(a, b) -> list[Fraction]:
    a, b = _trim(list(a)), _trim(list(b))
    while not _is_zero(b):
        _, r = poly_divmod(a, b)
        a, b = b, r
    return [c / a[0] for c in a]


def derivative(p: Sequence[Fraction]) -> list[Fraction]:
    n = len(p) - 1
    if n == 0:
        return [Fraction(0)]
    return [c * (n - i) for i, c in enumerate(p[:-1])]


def squarefree_part(p: Sequence[Fraction]) -> list[Fraction]:
    g = poly_gcd(p, derivative(p))
    q, _ = poly_divmod(p, g)
    return q


def squarefree_factors(p: Sequence[Fraction]) -> list[tuple[list[Fraction], int]]:
    """Yun's algorithm: ``p = lc * prod f_i**i`` with pairwise coprime square-free ``f_i``."""
    p = _trim([Fraction(c) for c in p])
    if len(p) == 1:
        return []
    a0 = poly_gcd(p, derivative(p))
    b, _ = poly_divmod(p, a0)
    c, _ = poly_divmod(derivative(p), a0)
    d = [x - y for x, y in _pad(c, derivative(b))]
    out = []
    i = 1
    while len(_trim(b)) > 1:
        a = poly_gcd(b, d)
        b, _ = poly_divmod(b, a)
        c, _ = poly_divmod(d, a)
        d = [x - y for x, y in _pad(c, derivative(b))]
        if len(a) > 1:
            out.append((a, i))
        i += 1
    return out


def _pad(a, b):
    n = max(len(a), len(b))
    a = [Fraction(0)] * (n - len(a)) + list(a)
    b = [Fraction(0)] * (n - len(b)) + list(b)
    return zip(a, b)


def sturm_chain(p: Sequence[Fraction]) -> list[list[Fraction]]:
    chain = [_trim(list(p)), derivative(_trim(list(p)))]
    while not _is_zero(chain[-1]) and len(chain[-1]) > 1:
        _, r = poly_divmod(chain[-2], chain[-1])
        if _is_zero(r):
            break
        chain.append([-c for c in r])
    if _is_zero(chain[-1]):
        chain.pop()
    return chain


def _sign_changes(chain, x) -> int:
    signs = []
    for p in chain:
        acc = Fraction(0)
        for c in p:
            acc = acc * x + c
        if acc:
            signs.append(acc > 0)
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def sturm_real_root_count(p: RealPolynomial | Sequence, lo, hi) -> int:
    """Number of distinct real roots of ``p`` in the half-open interval ``(lo, hi]``."""
    coeffs = p.coefficients if isinstance(p, RealPolynomial) else tuple(Fraction(c) for c in p)
    lo, hi = Fraction(lo), Fraction(hi)
    if not lo < hi:
        raise NHLabError("sturm_real_root_count needs lo < hi")
    sf = squarefree_part(list(coeffs))
    if len(sf) == 1:
        return 0
    chain = sturm_chain(sf)
    return _sign_changes(chain, lo) - _sign_changes(chain, hi)


def cauchy_bound(p: Sequence[Fraction]) -> Fraction:
    """All roots satisfy |x| < bound."""
    p = _trim(list(p))
    lead = abs(p[0])
    return 1 + max((abs(c) / lead for c in p[1:]), default=Fraction(0))


def _horner(p, x) -> Fraction:
    acc = Fraction(0)
    for c in p:
        acc = acc * x + c
    return acc


def isolate_real_roots(
    p: Sequence, lo, hi, rel_width: Fraction = Fraction(1, 2**64)
) -> list[tuple[Fraction, Fraction]]:
    """Disjoint intervals (a, b], one per distinct real root of ``p`` in (lo, hi].

    Sturm counts split (lo, hi] until each piece holds one root; sign
    bisection then shrinks each piece until ``b - a <= rel_width * |b|``
    (or the root is pinned exactly, giving a = b).
    """
    sf = squarefree_part(_trim([Fraction(c) for c in p]))
    lo, hi = Fraction(lo), Fraction(hi)
    if len(sf) == 1 or not lo < hi:
        return []
    chain = sturm_chain(sf)
    out = []
    stack = [(lo, hi, _sign_changes(chain, lo) - _sign_changes(chain, hi))]
    while stack:
        a, b, n = stack.pop()
        if n == 0:
            continue
        if n > 1:
            m = (a + b) / 2
            cm = _sign_changes(chain, m)
            stack.append((m, b, cm - _sign_changes(chain, b)))
            stack.append((a, m, _sign_changes(chain, a) - cm))
            continue
        fb = _horner(sf, b)
        while b - a > rel_width * abs(b):
            if fb == 0:
                a = b
                break
            m = (a + b) / 2
            fm = _horner(sf, m)
            if fm == 0:
                a = b = m
                break
            # the single root sits where the sign changes; f(a) may be 0 only outside (a, b]
            if (fm > 0) == (fb > 0):
                b, fb = m, fm
            else:
                a = m
        out.append((a, b))
    out.sort()
    return out
