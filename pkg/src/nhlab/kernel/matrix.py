"""Dense complex matrices at a selectable precision."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal

import numpy as np

from nhlab.errors import NHLabError
from nhlab.kernel.ddouble import ComplexDD
from nhlab.kernel.exact import QI

Precision = Literal["double", "quad", "exact"]
PRECISIONS: tuple[str, ...] = ("double", "quad", "exact")
FLOATING: tuple[str, ...] = ("double", "quad")


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds of the spectral kernel (all overridable).

    ``residual_*`` bound the relative eigen-residual ``||Au - Eu|| / (||A|| ||u||)``;
    ``rank_factor`` scales ``dim * eps`` for the default numerical-rank cutoff.
    """

    residual_double: float = 1e-10
    residual_quad: float = 1e-24
    rank_factor: float = 1.0
    max_iter_per_eigenvalue: int = 30
    exact_dim_cap: int = 64

    def residual(self, precision: str) -> float:
        return self.residual_quad if precision == "quad" else self.residual_double

    @classmethod
    def from_env(cls) -> Tolerances:
        # NHLAB_RESIDUAL_DOUBLE / NHLAB_RESIDUAL_QUAD override the defaults
        kw = {}
        for name in ("residual_double", "residual_quad"):
            raw = os.environ.get(f"NHLAB_{name.upper()}")
            if raw:
                kw[name] = float(raw)
        return cls(**kw)


DEFAULT_TOLERANCES = Tolerances()

UNIT_ROUNDOFF = {"double": 2.0**-53, "quad": 2.0**-104}


@dataclass(frozen=True)
class DenseMatrix:
    """Square complex matrix.

    ``entries`` is a read-only ``complex128`` ndarray in double mode, a
    :class:`ComplexDD` in quad mode and a tuple of tuples of :class:`QI` in
    exact-rational mode.
    """

    entries: object
    precision: str = "double"

    def __post_init__(self):
        if self.precision not in PRECISIONS:
            raise NHLabError(f"unknown precision mode {self.precision!r}")
        e = self.entries
        if self.precision == "double":
            a = np.array(e, dtype=complex)
            if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
                raise NHLabError(f"need a non-empty square matrix, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise NHLabError("matrix entries must be finite")
            a.setflags(write=False)
            object.__setattr__(self, "entries", a)
        elif self.precision == "quad":
            if not isinstance(e, ComplexDD):
                e = ComplexDD.from_complex(np.asarray(e, dtype=complex))
            if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 1:
                raise NHLabError(f"need a non-empty square matrix, got shape {e.shape}")
            if not np.all(np.isfinite(e.d)):
                raise NHLabError("matrix entries must be finite")
            e = e.copy()
            e.d.setflags(write=False)
            object.__setattr__(self, "entries", e)
        else:
            rows = tuple(tuple(QI.coerce(x) for x in row) for row in e)
            n = len(rows)
            if n < 1 or any(len(r) != n for r in rows):
                raise NHLabError("need a non-empty square matrix")
            object.__setattr__(self, "entries", rows)

    @property
    def dim(self) -> int:
        if self.precision == "exact":
            return len(self.entries)
        return self.entries.shape[0]

    def to_complex(self) -> np.ndarray:
        if self.precision == "double":
            return np.array(self.entries)
        if self.precision == "quad":
            return self.entries.to_complex()
        return np.array([[complex(z) for z in row] for row in self.entries])

    def to_dd(self) -> ComplexDD:
        if self.precision == "quad":
            return self.entries.copy()
        if self.precision == "double":
            return ComplexDD.from_complex(self.entries)
        re = [[z.re for z in row] for row in self.entries]
        im = [[z.im for z in row] for row in self.entries]
        return ComplexDD.from_fractions(re, im)

    def to_exact_rows(self) -> tuple[tuple[QI, ...], ...]:
        if self.precision == "exact":
            return self.entries
        if self.precision == "double":
            return tuple(
                tuple(QI(Fraction(z.real), Fraction(z.imag)) for z in row) for row in self.entries
            )
        re, im = self.entries.to_fractions()
        n = self.dim
        return tuple(tuple(QI(re[i, j], im[i, j]) for j in range(n)) for i in range(n))

    def astype(self, precision: str) -> DenseMatrix:
        """Convert to another mode; floating to exact is exact, the reverse rounds."""
        if precision == self.precision:
            return self
        if precision == "double":
            return DenseMatrix(self.to_complex(), "double")
        if precision == "quad":
            return DenseMatrix(self.to_dd(), "quad")
        return DenseMatrix(self.to_exact_rows(), "exact")

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseMatrix) or other.precision != self.precision:
            return NotImplemented
        if self.precision == "double":
            return np.array_equal(self.entries, other.entries)
        if self.precision == "quad":
            return np.array_equal(self.entries.d, other.entries.d)
        return self.entries == other.entries

    __hash__ = None


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue with unit-norm right and left eigenvectors.

    ``left`` is the column vector ``w`` with ``w^H A = E w^H``;
    ``biorthogonal_norm`` is ``w^H u``.  Vectors are delivered as complex128
    even in quad mode; the residuals are measured at working precision.
    """

    value: complex
    right: np.ndarray
    left: np.ndarray
    residual_right: float
    residual_left: float
    biorthogonal_norm: complex
    precision: str = "double"
    value_words: tuple[float, float, float, float] | None = field(default=None, repr=False)

    @property
    def condition(self) -> float:
        """Eigenvalue condition number 1/|<<u|u>>| (unit vectors)."""
        b = abs(self.biorthogonal_norm)
        return float("inf") if b == 0 else 1.0 / b
