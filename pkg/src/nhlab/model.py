"""The two-band gain/loss lattice: Bloch matrix, finite chains and symmetries.

Bloch form::

    H_k = (v + r cos k) sx + (r sin k + i gamma/2) sz

Real-space blocks for site order (a_1, b_1, ..., a_N, b_N)::

    M  = [[i g/2, v], [v, -i g/2]]        on-cell
    C+ = [[-i r/2, r/2], [r/2, i r/2]]    cell n -> cell n+1
    C- = [[ i r/2, r/2], [r/2, -i r/2]]   cell n+1 -> cell n

so that ``M + C+ e^{ik} + C- e^{-ik} = H_k``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from numbers import Rational, Real

import numpy as np

from nhlab.errors import NHLabError
from nhlab.kernel.ddouble import ComplexDD
from nhlab.kernel.exact import QI
from nhlab.kernel.matrix import DenseMatrix


def _as_number(name: str, x) -> Real:
    if isinstance(x, bool):
        raise NHLabError(f"{name} must be a real number, got a boolean")
    if isinstance(x, (str, Decimal)):
        try:
            x = Fraction(str(x).strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise NHLabError(f"{name}: cannot parse {x!r} as a number") from exc
    if not isinstance(x, Real):
        raise NHLabError(f"{name} must be a real number, got {type(x).__name__}")
    if not isinstance(x, Rational) and not math.isfinite(float(x)):
        raise NHLabError(f"{name} must be finite, got {x!r}")
    return x


@dataclass(frozen=True)
class ModelParams:
    """Model parameters ``v`` (intra-cell), ``r`` (inter-cell), ``gamma`` (gain/loss).

    Numbers are kept as given; strings such as ``"13/25"`` or ``"0.52"`` are
    parsed as exact rationals.  :meth:`exact` returns the exact rational value
    of each parameter (a float converts to its exact binary value).
    """

    v: Real
    r: Real
    gamma: Real

    def __post_init__(self):
        for name in ("v", "r", "gamma"):
            object.__setattr__(self, name, _as_number(name, getattr(self, name)))
        if self.gamma < 0:
            raise NHLabError(f"gamma must be non-negative, got {self.gamma}")

    def exact(self) -> tuple[Fraction, Fraction, Fraction]:
        return Fraction(self.v), Fraction(self.r), Fraction(self.gamma)

    def floats(self) -> tuple[float, float, float]:
        return float(self.v), float(self.r), float(self.gamma)

    @property
    def is_hermitian(self) -> bool:
        return self.gamma == 0

    def require_topological(self) -> None:
        if self.r == 0:
            raise NHLabError("topology operations need r != 0")


@dataclass(frozen=True)
class BlochMatrix:
    k: float
    d_x: float
    d_z_tilde: complex
    matrix: np.ndarray


@dataclass(frozen=True)
class SymmetryOperators:
    """``chiral`` = direct sum of sigma_y, ``conjugation_intertwiner`` = direct sum of sigma_x."""

    chiral: DenseMatrix
    conjugation_intertwiner: DenseMatrix


def bloch_hamiltonian(p: ModelParams, k: float) -> BlochMatrix:
    v, r, g = p.floats()
    dx = v + r * math.cos(k)
    dz = complex(r * math.sin(k), g / 2)
    m = np.array([[dz, dx], [dx, -dz]], dtype=complex)
    m.setflags(write=False)
    return BlochMatrix(float(k), dx, dz, m)


def discriminant(p: ModelParams, k):
    """Delta(k) = d_x^2 + d_z_tilde^2; accepts scalars or arrays of k."""
    v, r, g = p.floats()
    return v * v + r * r - g * g / 4 + 2 * v * r * np.cos(k) + 1j * g * r * np.sin(k)


def bloch_spectrum_closed_form(p: ModelParams, k: float) -> tuple[complex, complex]:
    """(E+, E-) = (+sqrt(Delta), -sqrt(Delta)) on the principal branch."""
    s = cmath.sqrt(complex(discriminant(p, k)))
    return s, -s


def cell_blocks(p: ModelParams) -> tuple[list[list[QI]], list[list[QI]], list[list[QI]]]:
    """Exact (M, C+, C-) blocks."""
    v, r, g = p.exact()
    m = [[QI(0, g / 2), QI(v)], [QI(v), QI(0, -g / 2)]]
    cp = [[QI(0, -r / 2), QI(r / 2)], [QI(r / 2), QI(0, r / 2)]]
    cm = [[QI(0, r / 2), QI(r / 2)], [QI(r / 2), QI(0, -r / 2)]]
    return m, cp, cm


def _assemble(p: ModelParams, n_cells: int, periodic: bool) -> list[list[QI]]:
    m, cp, cm = cell_blocks(p)
    dim = 2 * n_cells
    zero = QI(0)
    rows = [[zero] * dim for _ in range(dim)]

    def put(block, ci, cj):
        for a in range(2):
            for b in range(2):
                rows[2 * ci + a][2 * cj + b] = rows[2 * ci + a][2 * cj + b] + block[a][b]

    for n in range(n_cells):
        put(m, n, n)
        if n + 1 < n_cells:
            put(cp, n, n + 1)
            put(cm, n + 1, n)
    if periodic:
        put(cp, n_cells - 1, 0)
        put(cm, 0, n_cells - 1)
    return rows


def _to_mode(rows: list[list[QI]], precision: str) -> DenseMatrix:
    if precision == "exact":
        return DenseMatrix(rows, "exact")
    if precision == "quad":
        re = [[z.re for z in row] for row in rows]
        im = [[z.im for z in row] for row in rows]
        return DenseMatrix(ComplexDD.from_fractions(re, im), "quad")
    if precision == "double":
        return DenseMatrix(np.array([[complex(z) for z in row] for row in rows]), "double")
    raise NHLabError(f"unknown precision mode {precision!r}")


def open_chain(p: ModelParams, n_cells: int, precision: str = "double") -> DenseMatrix:
    """2N x 2N open-boundary Hamiltonian terminated by whole cells."""
    if not isinstance(n_cells, (int, np.integer)) or n_cells < 1:
        raise NHLabError(f"open_chain needs n_cells >= 1, got {n_cells!r}")
    return _to_mode(_assemble(p, int(n_cells), periodic=False), precision)


def periodic_chain(p: ModelParams, n_cells: int, precision: str = "double") -> DenseMatrix:
    """Open chain plus the wrap-around blocks C+ at (N, 1) and C- at (1, N)."""
    if not isinstance(n_cells, (int, np.integer)) or n_cells < 3:
        raise NHLabError(f"periodic_chain needs n_cells >= 3, got {n_cells!r}")
    return _to_mode(_assemble(p, int(n_cells), periodic=True), precision)


def symmetry_operators(n_cells: int, precision: str = "exact") -> SymmetryOperators:
    if n_cells < 1:
        raise NHLabError(f"need n_cells >= 1, got {n_cells}")
    dim = 2 * n_cells
    zero = QI(0)
    sy = [[zero] * dim for _ in range(dim)]
    sx = [[zero] * dim for _ in range(dim)]
    for n in range(n_cells):
        a, b = 2 * n, 2 * n + 1
        sy[a][b], sy[b][a] = QI(0, -1), QI(0, 1)
        sx[a][b], sx[b][a] = QI(1), QI(1)
    return SymmetryOperators(_to_mode(sy, precision), _to_mode(sx, precision))


@dataclass(frozen=True)
class Encirclement:
    """Whether Delta(k) winds around the origin.

    ``status`` is ``"encircled"``, ``"not encircled"`` or ``"on exceptional
    manifold"``; ``encircled`` is ``None`` in the last case.
    """

    status: str
    encircled: bool | None
    center: float
    semi_axis_real: float
    semi_axis_imag: float
    k: np.ndarray
    delta: np.ndarray


def ep_encirclement(p: ModelParams, samples: int = 4096) -> Encirclement:
    """Encirclement of the exceptional point by the discriminant loop.

    The ellipse Delta(k) = c + 2 v r cos k + i g r sin k contains the origin
    iff ``(|v| - |r|)^2 < g^2/4 < (|v| + |r|)^2``; equality puts a zero of
    Delta at k = 0 or k = pi (the exceptional manifold).  The test is done in
    exact rational arithmetic.
    """
    if p.r == 0:
        raise NHLabError("ep_encirclement needs r != 0")
    v, r, g = p.exact()
    lo, hi, mid = (abs(v) - abs(r)) ** 2, (abs(v) + abs(r)) ** 2, g * g / 4
    if g == 0:
        # Hermitian: a degenerate segment on the real axis, never an exceptional point
        status, enc = "not encircled", False
    elif mid == lo or mid == hi:
        status, enc = "on exceptional manifold", None
    else:
        enc = lo < mid < hi
        status = "encircled" if enc else "not encircled"
    k = 2 * np.pi * np.arange(samples) / samples
    vf, rf, gf = p.floats()
    return Encirclement(
        status=status,
        encircled=enc,
        center=vf * vf + rf * rf - gf * gf / 4,
        semi_axis_real=abs(2 * vf * rf),
        semi_axis_imag=abs(gf * rf),
        k=k,
        delta=discriminant(p, k),
    )
