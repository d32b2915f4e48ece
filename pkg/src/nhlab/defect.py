"""Defective eigenvalues, Jordan chains, the exact in-gap edge state and localization."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from nhlab.errors import NHLabError
from nhlab.kernel.eigen import eigs_dense
from nhlab.kernel.exact import QI, char_poly_exact, exact_rank, qi_matmul
from nhlab.kernel.matrix import DEFAULT_TOLERANCES, DenseMatrix, Tolerances
from nhlab.model import ModelParams, open_chain

ZERO_SCAN_WINDOW = 0.1


@dataclass(frozen=True)
class DefectReport:
    target: complex
    cluster: tuple[complex, ...]
    algebraic_mult: int
    geometric_mult: int
    jordan_chain_lengths: tuple[int, ...]
    rank_sequence: tuple[int, ...]
    method: str
    window: float | None

    @property
    def defective(self) -> bool:
        return self.algebraic_mult > self.geometric_mult

    @property
    def defect_gap(self) -> int:
        """algebraic - geometric multiplicity."""
        return self.algebraic_mult - self.geometric_mult

    @property
    def max_chain_length(self) -> int:
        return max(self.jordan_chain_lengths, default=0)


@dataclass(frozen=True)
class InGapState:
    energy: complex
    vector: np.ndarray
    residual: float
    exact_vector: tuple[QI, ...] | None = None
    exact_zero: bool | None = None


@dataclass(frozen=True)
class LocalizationMetrics:
    ipr: float
    left_edge_weight: float
    cell_profile: np.ndarray


@dataclass(frozen=True)
class ZeroModeRow:
    n_cells: int
    min_abs_energy: float
    cluster: tuple[complex, ...]
    algebraic_mult: int
    geometric_mult: int
    condition: float
    biorthogonal_norm: float


def chains_from_ranks(ranks: list[int], algebraic: int) -> tuple[int, ...]:
    """Jordan chain lengths from rank((A - E)^j), j = 0..m (ranks[0] = dim).

    The number of chains of length >= j is ranks[j-1] - ranks[j].
    """
    at_least = [ranks[j - 1] - ranks[j] for j in range(1, len(ranks))] + [0]
    chains: list[int] = []
    for j in range(1, len(at_least)):
        exactly = at_least[j - 1] - at_least[j]
        chains.extend([j] * exactly)
    chains.sort(reverse=True)
    if sum(chains) != algebraic:
        raise NHLabError(f"rank sequence {ranks} is inconsistent with multiplicity {algebraic}")
    return tuple(chains)


def _root_multiplicity(coeffs: list[QI], root: QI) -> int:
    m = 0
    c = list(coeffs)
    while len(c) > 1:
        # synthetic division by (x - root)
        acc = QI(0)
        quo = []
        for a in c:
            acc = acc * root + a
            quo.append(acc)
        if quo[-1]:
            break
        c = quo[:-1]
        m += 1
    return m


def _exact_report(h: DenseMatrix, e0) -> DefectReport:
    root = QI.coerce(e0)
    rows = h.entries
    n = len(rows)
    alg = _root_multiplicity(char_poly_exact(rows), root)
    if alg == 0:
        raise NHLabError(f"{complex(root)} is not an eigenvalue (exact characteristic polynomial)")
    shifted = [[rows[i][j] - (root if i == j else 0) for j in range(n)] for i in range(n)]
    ranks = [n]
    power = shifted
    while True:
        ranks.append(exact_rank(power))
        if n - ranks[-1] >= alg or ranks[-1] == ranks[-2]:
            break
        power = qi_matmul(power, shifted)
    return DefectReport(
        target=complex(root),
        cluster=(complex(root),) * alg,
        algebraic_mult=alg,
        geometric_mult=n - ranks[1],
        jordan_chain_lengths=chains_from_ranks(ranks, alg),
        rank_sequence=tuple(ranks),
        method="exact",
        window=None,
    )


def _count_below(m: np.ndarray, thresh: float) -> int:
    return int(np.sum(np.linalg.svd(m, compute_uv=False) <= thresh))


def multiplicity_report(
    h: DenseMatrix,
    e0: complex,
    window: float | None = None,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DefectReport:
    """Algebraic and geometric multiplicity and Jordan chains at ``e0``.

    Exact mode uses the exact characteristic polynomial and exact ranks of
    powers of ``H - e0``.  Floating modes count eigenvalues within ``window``
    (default ``10 * residual_max + 1e-8``) and take numerical ranks of the
    powers with singular-value cutoff ``window**j``; the window must be
    separated from the rest of the spectrum by a gap of at least its width.
    """
    if h.precision == "exact":
        return _exact_report(h, e0)
    pairs = eigs_dense(h, tolerances=tolerances)
    vals = np.array([p.value for p in pairs])
    if window is None:
        window = 10 * max(max(p.residual_right, p.residual_left) for p in pairs) + 1e-8
    if window <= 0:
        raise NHLabError("window must be positive")
    dist = np.abs(vals - e0)
    inside = dist <= window
    alg = int(inside.sum())
    if alg == 0:
        raise NHLabError(f"no eigenvalue within {window:.3e} of {e0}")
    if np.any((dist > window) & (dist <= 2 * window)):
        raise NHLabError(f"window {window:.3e} does not separate the cluster at {e0}")
    a = h.to_complex()
    n = len(a)
    shifted = a - e0 * np.eye(n)
    ranks = [n]
    power = np.eye(n, dtype=complex)
    for j in range(1, alg + 1):
        power = power @ shifted
        nullity = _count_below(power, window**j)
        ranks.append(n - min(max(nullity, n - ranks[-1]), alg))
    ranks[-1] = n - alg
    return DefectReport(
        target=complex(e0),
        cluster=tuple(complex(z) for z in vals[inside]),
        algebraic_mult=alg,
        geometric_mult=n - ranks[1],
        jordan_chain_lengths=chains_from_ranks(ranks, alg),
        rank_sequence=tuple(ranks),
        method=h.precision,
        window=float(window),
    )


def closed_form_ingap_state(
    p: ModelParams, sign: int = 1, n_cells: int = 3, precision: str = "exact"
) -> InGapState:
    """The compact left-edge eigenvector at E = sign * r, valid for v = gamma / 2.

    psi = (s + i g/r, s i + g/r, i, 1, 0, ..., 0) with s = sign.  In exact
    mode (H - s r) psi is evaluated in rational arithmetic and ``residual`` is
    0 only if every entry vanishes; in floating modes the residual is
    ||(H - E) psi|| / ||psi||.
    """
    v, r, g = p.exact()
    if sign not in (1, -1):
        raise NHLabError("sign must be +1 or -1")
    if r == 0:
        raise NHLabError("the in-gap state needs r != 0")
    if v != g / 2:
        raise NHLabError(f"the closed-form state needs v = gamma/2 exactly (v = {v}, gamma/2 = {g / 2})")
    if n_cells < 2:
        raise NHLabError("the closed-form state needs n_cells >= 2")
    s = Fraction(sign)
    head = [QI(s, g / r), QI(g / r, s), QI(0, 1), QI(1)]
    psi = head + [QI(0)] * (2 * n_cells - 4)
    vec = np.array([complex(z) for z in psi])
    energy = s * r
    if precision == "exact":
        rows = open_chain(p, n_cells, "exact").entries
        e = QI(energy)
        out = [sum((rows[i][j] * psi[j] for j in range(4)), QI(0)) - e * psi[i] for i in range(len(psi))]
        zero = all(not z for z in out)
        res = float(np.linalg.norm([complex(z) for z in out]) / np.linalg.norm(vec))
        return InGapState(complex(energy), vec, res, tuple(psi), zero)
    h = open_chain(p, n_cells, precision).to_complex()
    res = float(np.linalg.norm(h @ vec - float(energy) * vec) / np.linalg.norm(vec))
    return InGapState(complex(energy), vec, res)


def localization_profile(vector, cell_grouping: int = 2, edge_cells: int = 2) -> LocalizationMetrics:
    """IPR, weight in the first ``edge_cells`` cells and the per-cell probability."""
    psi = np.asarray(vector, dtype=complex).ravel()
    w = np.abs(psi) ** 2
    total = w.sum()
    if total == 0:
        raise NHLabError("localization_profile needs a nonzero vector")
    if len(psi) % cell_grouping:
        raise NHLabError(f"vector length {len(psi)} is not a multiple of {cell_grouping}")
    prob = w / total
    cells = prob.reshape(-1, cell_grouping).sum(axis=1)
    return LocalizationMetrics(
        ipr=float(np.sum(prob**2)),
        left_edge_weight=float(cells[:edge_cells].sum()),
        cell_profile=cells,
    )


def zero_mode_scan(
    p: ModelParams,
    sizes=(10, 20, 40),
    *,
    window: float = ZERO_SCAN_WINDOW,
    precision: str = "double",
) -> list[ZeroModeRow]:
    """Near-zero eigenvalue cluster of the open chain versus size.

    The cluster is every eigenvalue with |E| < window; its geometric
    multiplicity is the number of singular values of H below ``window``.
    The condition is 1/|<<u|u>>| of the eigenvalue closest to 0.
    """
    rows = []
    for n in sizes:
        h = open_chain(p, int(n), precision)
        pairs = eigs_dense(h)
        vals = np.array([q.value for q in pairs])
        mags = np.abs(vals)
        inside = mags < window
        if not inside.any():
            raise NHLabError(f"no eigenvalue within {window} of zero at N = {n}")
        best = pairs[int(np.argmin(mags))]
        rows.append(
            ZeroModeRow(
                n_cells=int(n),
                min_abs_energy=float(mags.min()),
                cluster=tuple(complex(z) for z in vals[inside]),
                algebraic_mult=int(inside.sum()),
                geometric_mult=_count_below(h.to_complex(), window),
                condition=best.condition,
                biorthogonal_norm=abs(best.biorthogonal_norm),
            )
        )
    return rows
