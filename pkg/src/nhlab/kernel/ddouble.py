"""Complex double-double arrays.

A double-double number stores an unevaluated sum ``hi + lo`` of two IEEE
doubles with ``|lo| <= ulp(hi)/2``, giving roughly 32 significant digits.
:class:`ComplexDD` keeps the real and imaginary parts of an n-dimensional
array in a single ``float64`` buffer of shape ``(2, 2, *shape)`` laid out as
``[word][part]`` (word 0 = hi, word 1 = lo; part 0 = real, part 1 = imag), so
that a complex product costs one vectorised real product plus one sum.

The scalar primitives (``two_sum``, ``dd_mul``, ...) only use ``+ - *`` and
therefore work on Python floats and on ndarrays alike.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Number

import numpy as np

EPS = 2.0**-104
_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    s, e = quick_two_sum(s, e + t)
    return quick_two_sum(s, e + f)


def dd_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    return quick_two_sum(p, e + (ah * bl + al * bh))


def dd_recip(ah, al):
    q = 1.0 / ah
    # residual 1 - a*q, then one Newton correction
    ph, pl = dd_mul(ah, al, q, 0.0 * q)
    rh, rl = dd_add(1.0 + 0.0 * q, 0.0 * q, -ph, -pl)
    ch, cl = dd_mul(rh, rl, q, 0.0 * q)
    return dd_add(q, 0.0 * q, ch, cl)


def dd_sqrt(ah, al):
    """Square root of a non-negative double-double (Python floats)."""
    if ah <= 0.0:
        return 0.0, 0.0
    x = ah**0.5
    sh, sl = two_prod(x, x)
    rh, rl = dd_add(ah, al, -sh, -sl)
    return quick_two_sum(x, (rh + rl) / (2.0 * x))


def fraction_to_dd(q: Fraction) -> tuple[float, float]:
    hi = float(q)
    return hi, float(q - Fraction(hi))


class ComplexDD:
    """Array of complex double-double numbers with a small ndarray-like API.

    Supports basic and ``None`` indexing, item assignment, ``+``, ``-``,
    ``*`` (broadcasting), :meth:`conj`, :meth:`sum` along one axis and
    conversion back to ``complex128`` through :meth:`to_complex`.
    """

    __slots__ = ("d",)

    def __init__(self, d: np.ndarray):
        self.d = d

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, shape) -> ComplexDD:
        if isinstance(shape, int):
            shape = (shape,)
        return cls(np.zeros((2, 2) + tuple(shape)))

    @classmethod
    def eye(cls, n: int) -> ComplexDD:
        out = cls.zeros((n, n))
        out.d[0, 0] = np.eye(n)
        return out

    @classmethod
    def from_complex(cls, z) -> ComplexDD:
        z = np.asarray(z, dtype=complex)
        d = np.zeros((2, 2) + z.shape)
        d[0, 0] = z.real
        d[0, 1] = z.imag
        return cls(d)

    @classmethod
    def from_scalar(cls, re: tuple[float, float], im: tuple[float, float]) -> ComplexDD:
        return cls(np.array([[re[0], im[0]], [re[1], im[1]]], dtype=float))

    @classmethod
    def from_fractions(cls, re, im) -> ComplexDD:
        """Round nested sequences of exact rationals (real, imag) to double-double."""
        re = np.asarray(re, dtype=object)
        im = np.asarray(im, dtype=object)
        d = np.zeros((2, 2) + re.shape)
        for idx in np.ndindex(re.shape):
            d[(0, 0) + idx], d[(1, 0) + idx] = fraction_to_dd(Fraction(re[idx]))
            d[(0, 1) + idx], d[(1, 1) + idx] = fraction_to_dd(Fraction(im[idx]))
        return cls(d)

    # introspection ------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.d.shape[2:]

    @property
    def ndim(self) -> int:
        return self.d.ndim - 2

    def __len__(self) -> int:
        return self.d.shape[2]

    def copy(self) -> ComplexDD:
        return ComplexDD(self.d.copy())

    def to_complex(self) -> np.ndarray:
        return (self.d[0, 0] + self.d[1, 0]) + 1j * (self.d[0, 1] + self.d[1, 1])

    def scalar_words(self) -> tuple[float, float, float, float]:
        """(re_hi, re_lo, im_hi, im_lo) of a 0-d array as Python floats."""
        d = self.d
        return float(d[0, 0]), float(d[1, 0]), float(d[0, 1]), float(d[1, 1])

    def to_fractions(self):
        """Exact (real, imag) object arrays of Fractions."""
        re = np.empty(self.shape, dtype=object)
        im = np.empty(self.shape, dtype=object)
        for idx in np.ndindex(self.shape):
            re[idx] = Fraction(self.d[(0, 0) + idx]) + Fraction(self.d[(1, 0) + idx])
            im[idx] = Fraction(self.d[(0, 1) + idx]) + Fraction(self.d[(1, 1) + idx])
        return re, im

    # indexing -----------------------------------------------------------
    @staticmethod
    def _key(idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return (slice(None), slice(None)) + idx

    def __getitem__(self, idx) -> ComplexDD:
        return ComplexDD(self.d[self._key(idx)])

    def __setitem__(self, idx, value) -> None:
        if not isinstance(value, ComplexDD):
            value = _coerce(value)
        self.d[self._key(idx)] = value.d

    @property
    def T(self) -> ComplexDD:
        axes = (0, 1) + tuple(range(self.d.ndim - 1, 1, -1))
        return ComplexDD(self.d.transpose(axes))

    # arithmetic ---------------------------------------------------------
    def __neg__(self) -> ComplexDD:
        return ComplexDD(-self.d)

    def __add__(self, other) -> ComplexDD:
        a, o = _align(self.d, _coerce(other).d)
        return ComplexDD(_pack(*dd_add(a[0], a[1], o[0], o[1])))

    __radd__ = __add__

    def __sub__(self, other) -> ComplexDD:
        return self + (-_coerce(other))

    def __rsub__(self, other) -> ComplexDD:
        return _coerce(other) + (-self)

    def __mul__(self, other) -> ComplexDD:
        if isinstance(other, (float, int)) and not isinstance(other, bool):
            return ComplexDD(_pack(*dd_mul(self.d[0], self.d[1], float(other), 0.0)))
        a, o = _align(self.d, _coerce(other).d)
        # p[i, j] = a_i * b_j over parts (re, im)
        ph, pl = dd_mul(a[0][:, None], a[1][:, None], o[0][None, :], o[1][None, :])
        # re = p00 - p11, im = p01 + p10
        sgn = _SIGNS.reshape((2,) + (1,) * (ph.ndim - 2))
        return ComplexDD(_pack(*dd_add(ph[0], pl[0], ph[1, ::-1] * sgn, pl[1, ::-1] * sgn)))

    __rmul__ = __mul__

    def conj(self) -> ComplexDD:
        d = self.d.copy()
        d[:, 1] = -d[:, 1]
        return ComplexDD(d)

    def abs2(self) -> np.ndarray:
        """|z|^2 as a (2, *shape) array of (hi, lo) words."""
        ph, pl = dd_mul(self.d[0], self.d[1], self.d[0], self.d[1])
        return _pack(*dd_add(ph[0], pl[0], ph[1], pl[1]))

    def scale_real(self, words: np.ndarray) -> ComplexDD:
        """Multiply by a real double-double array given as (hi, lo) words."""
        w = np.asarray(words)
        a, w = _align(self.d, w[:, None])
        hi, lo = dd_mul(a[0], a[1], w[0], w[1])
        return ComplexDD(_pack(hi, lo))

    def divide(self, other: ComplexDD) -> ComplexDD:
        """Elementwise complex division."""
        other = _coerce(other)
        n = other.abs2()
        rh, rl = dd_recip(n[0], n[1])
        return (self * other.conj()).scale_real(_pack(rh, rl))

    def sum(self, axis: int = 0) -> ComplexDD:
        """Pairwise double-double reduction along ``axis``."""
        ax = axis % self.ndim + 2
        d = self.d
        pre = (slice(None),) * ax
        while d.shape[ax] > 1:
            m = d.shape[ax]
            half = m // 2
            x = d[pre + (slice(0, half),)]
            y = d[pre + (slice(half, 2 * half),)]
            merged = _pack(*dd_add(x[0], x[1], y[0], y[1]))
            if m % 2:
                merged = np.concatenate((merged, d[pre + (slice(m - 1, m),)]), axis=ax)
            d = merged
        return ComplexDD(d[pre + (0,)])

    def __matmul__(self, other: ComplexDD) -> ComplexDD:
        if other.ndim == 1:
            return (self * other[None, :]).sum(axis=1)
        n, m = self.shape[0], other.shape[1]
        out = ComplexDD.zeros((n, m))
        step = max(1, 2**16 // max(1, self.shape[1] * m))
        for i in range(0, n, step):
            block = self[i : i + step, :, None] * other[None, :, :]
            out[i : i + step] = block.sum(axis=1)
        return out

    def __repr__(self) -> str:
        return f"ComplexDD(shape={self.shape})"


_SIGNS = np.array([-1.0, 1.0])


def _pack(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    hi = np.asarray(hi)
    out = np.empty((2,) + hi.shape)
    out[0] = hi
    out[1] = lo
    return out


def _align(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # pad logical dims so numpy broadcasting never touches the word/part axes
    if a.ndim < b.ndim:
        a = a.reshape(a.shape[:2] + (1,) * (b.ndim - a.ndim) + a.shape[2:])
    elif b.ndim < a.ndim:
        b = b.reshape(b.shape[:2] + (1,) * (a.ndim - b.ndim) + b.shape[2:])
    return a, b


def _coerce(value) -> ComplexDD:
    if isinstance(value, ComplexDD):
        return value
    if isinstance(value, Number) or isinstance(value, np.ndarray):
        return ComplexDD.from_complex(value)
    raise TypeError(f"cannot combine ComplexDD with {type(value).__name__}")


def scalar_complex_mul(a, b):
    """Product of two complex double-doubles given as 4-tuples of floats."""
    arh, arl, aih, ail = a
    brh, brl, bih, bil = b
    p1 = dd_mul(arh, arl, brh, brl)
    p2 = dd_mul(aih, ail, bih, bil)
    p3 = dd_mul(arh, arl, bih, bil)
    p4 = dd_mul(aih, ail, brh, brl)
    re = dd_add(p1[0], p1[1], -p2[0], -p2[1])
    im = dd_add(p3[0], p3[1], p4[0], p4[1])
    return re[0], re[1], im[0], im[1]


def scalar_abs2(a):
    rh, rl, ih, il = a
    p = dd_mul(rh, rl, rh, rl)
    q = dd_mul(ih, il, ih, il)
    return dd_add(p[0], p[1], q[0], q[1])
