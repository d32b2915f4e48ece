"""Open-chain spectra: symmetry audits, precision escalation and reality certificates."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from nhlab.errors import AuditFailedError, CapExceededError, ModelConstructionError, NHLabError
from nhlab.kernel.eigen import eigs_dense
from nhlab.kernel.exact import (
    RealPolynomial,
    cauchy_bound,
    char_poly_exact,
    isolate_real_roots,
    squarefree_factors,
    sturm_real_root_count,
)
from nhlab.kernel.matrix import DEFAULT_TOLERANCES, PRECISIONS, Tolerances
from nhlab.model import ModelParams, open_chain, periodic_chain

TOL_PAIR = 1e-8
DEFAULT_POLICY: tuple[str, ...] = ("double", "quad", "exact")
EXACT_CELL_CAP = 24
DEFAULT_SIZES: tuple[int, ...] = (10, 20, 40, 80)
BREAKDOWN_IMAG = 1e-6
REAL_TOL = 1e-10


@dataclass(frozen=True)
class SymmetryAudit:
    chiral_defect: float
    conjugation_defect: float
    diameter: float
    tol_pair: float
    passed: bool


@dataclass(frozen=True)
class RealityCertificate:
    """Exact Sturm-count verdict on the reality of an open-chain spectrum.

    ``char_poly`` is det(xI - H) (highest degree first, exactly real and
    even); ``q`` is the degree-N polynomial with ``char_poly(x) = q(x^2)``.
    Every positive root of q gives the real pair +-sqrt(y), a root y = 0 of
    multiplicity m gives x = 0 with multiplicity 2m; negative or complex
    roots of q give non-real energies.
    """

    n_cells: int
    char_poly: tuple[Fraction, ...]
    q: tuple[Fraction, ...]
    zero_multiplicity: int
    positive_roots_distinct: int
    real_roots_with_multiplicity: int
    certified: bool

    @property
    def verdict(self) -> str:
        return "certified real" if self.certified else "not certified"


@dataclass
class SpectrumReport:
    """Open-chain spectrum at the precision that ended the escalation.

    For floating stages ``residual_max`` is the worst eigenpair residual; for
    ``precision_used == "exact"`` it is the relative width of the root
    enclosures.
    """

    params: ModelParams
    n_cells: int
    eigenvalues: np.ndarray
    residual_max: float
    max_abs_imag: float
    precision_used: str
    audit: SymmetryAudit
    attempts: list[dict] = field(default_factory=list)
    audit_failed_at_max_precision: bool = False
    certificate: RealityCertificate | None = None
    eigenvalues_lo: np.ndarray | None = None  # low words (quad and exact stages)


@dataclass
class SweepReport:
    params: ModelParams
    rows: list[dict]
    reports: list[SpectrumReport]


@dataclass
class PbcObcComparison:
    n_cells: int
    pbc_eigenvalues: np.ndarray
    obc: SpectrumReport
    hausdorff: float
    pbc_max_abs_imag: float
    obc_max_abs_imag: float
    breakdown: bool


def symmetry_audit(eigenvalues, tol_pair: float = TOL_PAIR) -> SymmetryAudit:
    """Pair the spectrum with its negation and with its conjugate.

    Each pairing is a minimum-cost perfect matching (Hungarian algorithm) and
    the defect is the largest matched distance.  Points on the axes may pair
    with themselves.  The audit passes when both defects are at most
    ``tol_pair`` times the spectral diameter.
    """
    e = np.asarray(eigenvalues, dtype=complex).ravel()
    if e.size == 0:
        raise NHLabError("symmetry_audit needs a non-empty spectrum")
    if not np.all(np.isfinite(e)):
        raise NHLabError("symmetry_audit needs finite eigenvalues")
    chiral = _matched_defect(np.abs(e[:, None] + e[None, :]))
    conj = _matched_defect(np.abs(e[:, None] - e.conj()[None, :]))
    diam = float(np.max(np.abs(e[:, None] - e[None, :])))
    limit = tol_pair * diam
    return SymmetryAudit(chiral, conj, diam, tol_pair, chiral <= limit and conj <= limit)


def _matched_defect(cost: np.ndarray) -> float:
    i, j = linear_sum_assignment(cost)
    return float(cost[i, j].max())


def resolve_policy(policy=None) -> tuple[str, ...]:
    """Precision ladder; ``NHLAB_PRECISION`` (e.g. ``"quad"`` or ``"double,quad"``) overrides the default."""
    if policy is None:
        env = os.environ.get("NHLAB_PRECISION", "").strip()
        policy = env if env else DEFAULT_POLICY
    if isinstance(policy, str):
        policy = tuple(s.strip() for s in policy.split(",") if s.strip())
    policy = tuple(policy)
    if not policy or any(s not in PRECISIONS for s in policy):
        raise NHLabError(f"precision policy must be a non-empty chain of {PRECISIONS}, got {policy!r}")
    return policy


def spectrum_report(
    p: ModelParams,
    n_cells: int,
    policy=None,
    *,
    tol_pair: float = TOL_PAIR,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    strict: bool = True,
) -> SpectrumReport:
    """Eigenvalues of the open chain with a symmetry audit and precision escalation.

    Floating stages of ``policy`` run in order until one delivers converged
    eigenpairs that pass the audit.  If the policy has an ``"exact"`` stage
    and the floating result is unresolved (audit failed, or some |Im E|
    above ``REAL_TOL``), a Sturm reality certificate is computed (rational
    parameters, at most ``EXACT_CELL_CAP`` cells); when it certifies a real
    spectrum the eigenvalues are taken from the isolated roots of the exact
    characteristic polynomial, since defective spectra defeat every floating
    precision.  The policy ``("exact",)`` means quad eigenvalues plus the
    certificate.  If the final spectrum still fails the audit, ``strict``
    raises :class:`AuditFailedError`; otherwise the report carries
    ``audit_failed_at_max_precision = True``.
    """
    if n_cells < 1:
        raise NHLabError(f"n_cells must be >= 1, got {n_cells}")
    stages = resolve_policy(policy)
    if stages == ("exact",):
        stages = ("quad", "exact")
        force_certificate = True
    else:
        force_certificate = False
    attempts: list[dict] = []
    best: SpectrumReport | None = None
    certificate = None
    for mode in (s for s in stages if s != "exact"):
        try:
            rep = _floating_report(p, n_cells, mode, tol_pair, tolerances)
        except NHLabError as exc:
            attempts.append({"precision": mode, "outcome": f"failed: {exc}"})
            continue
        attempts.append(
            {"precision": mode, "outcome": "audit passed" if rep.audit.passed else "audit failed"}
        )
        best = rep
        if rep.audit.passed and not force_certificate:
            break
    # the exact stage runs when the floating result is not conclusively real:
    # tiny imaginary parts may be genuine or the eps^(1/m) splitting of a
    # defective real eigenvalue, which only exact arithmetic can tell apart
    unresolved = best is None or not best.audit.passed or best.max_abs_imag > REAL_TOL
    if "exact" in stages and (unresolved or force_certificate):
        try:
            certificate = reality_verdict(p, n_cells)
            attempts.append({"precision": "exact", "outcome": certificate.verdict})
        except CapExceededError as exc:
            attempts.append({"precision": "exact", "outcome": f"skipped: {exc}"})
        if certificate is not None and certificate.certified and unresolved:
            best = _exact_report(p, certificate, tol_pair)
            attempts[-1]["outcome"] += ", eigenvalues from isolated roots"
    if best is None:
        raise AuditFailedError(
            f"no precision stage of {stages} produced a spectrum: "
            + "; ".join(a["outcome"] for a in attempts)
        )
    best.attempts = attempts
    best.certificate = certificate
    if not best.audit.passed:
        best.audit_failed_at_max_precision = True
        if strict:
            raise AuditFailedError(
                f"symmetry audit failed at {best.precision_used} precision "
                f"(chiral defect {best.audit.chiral_defect:.3e}, "
                f"conjugation defect {best.audit.conjugation_defect:.3e})",
                report=best,
            )
    return best


def _floating_report(p, n_cells, mode, tol_pair, tolerances) -> SpectrumReport:
    h = open_chain(p, n_cells, mode)
    pairs = eigs_dense(h, tolerances=tolerances)
    vals = np.array([q.value for q in pairs])
    lo = None
    if mode == "quad":
        lo = np.array([complex(q.value_words[1], q.value_words[3]) for q in pairs])
    res = max(max(q.residual_right, q.residual_left) for q in pairs)
    imag = np.abs(vals.imag + (lo.imag if lo is not None else 0.0))
    return SpectrumReport(
        params=p,
        n_cells=n_cells,
        eigenvalues=vals,
        residual_max=float(res),
        max_abs_imag=float(imag.max()),
        precision_used=mode,
        audit=symmetry_audit(vals, tol_pair),
        eigenvalues_lo=lo,
    )


def certified_eigenvalues(cert: RealityCertificate) -> tuple[np.ndarray, np.ndarray, float]:
    """Real spectrum of a certified chain from the roots of q, as (hi, lo, width).

    Each positive root y of q is enclosed to relative width 2^-64 and gives
    the pair +-sqrt(y) with the root's multiplicity; the low words carry the
    double-double correction of sqrt.  ``width`` is the largest relative
    width of the enclosures of E (an a-priori error bound).
    """
    if not cert.certified:
        raise NHLabError("certified_eigenvalues needs a certified-real spectrum")
    q = list(cert.q[: len(cert.q) - cert.zero_multiplicity])
    hi_words: list[float] = [0.0] * (2 * cert.zero_multiplicity)
    lo_words: list[float] = [0.0] * (2 * cert.zero_multiplicity)
    width = 0.0
    if len(q) > 1:
        bound = cauchy_bound(q)
        for f, mult in squarefree_factors(q):
            for a, b in isolate_real_roots(f, 0, bound):
                y = (a + b) / 2
                h = float(y) ** 0.5
                lo = float((y - Fraction(h) ** 2) / (2 * Fraction(h)))
                if b:
                    width = max(width, float((b - a) / b) / 2)
                hi_words += [h, -h] * mult
                lo_words += [lo, -lo] * mult
    order = np.argsort(hi_words, kind="stable")
    return np.array(hi_words)[order] + 0j, np.array(lo_words)[order] + 0j, width


def _exact_report(p: ModelParams, cert: RealityCertificate, tol_pair: float) -> SpectrumReport:
    hi, lo, width = certified_eigenvalues(cert)
    return SpectrumReport(
        params=p,
        n_cells=cert.n_cells,
        eigenvalues=hi,
        residual_max=width,
        max_abs_imag=0.0,
        precision_used="exact",
        audit=symmetry_audit(hi, tol_pair),
        eigenvalues_lo=lo,
    )


def reality_verdict(p: ModelParams, n_cells: int, *, cap: int = EXACT_CELL_CAP) -> RealityCertificate:
    """Certify (or refute) that all 2N open-chain energies are real, exactly."""
    if n_cells < 1:
        raise NHLabError(f"n_cells must be >= 1, got {n_cells}")
    if n_cells > cap:
        raise CapExceededError(
            f"{n_cells} cells exceed the exact certificate cap of {cap}; use spectrum_report at quad precision"
        )
    h = open_chain(p, n_cells, "exact")
    coeffs = char_poly_exact(h.entries, cap=2 * cap)
    try:
        poly = RealPolynomial.from_complex_coefficients(coeffs)
    except NHLabError as exc:
        raise ModelConstructionError(f"characteristic polynomial is not real: {exc}") from exc
    c = poly.coefficients
    odd = [i for i in range(1, len(c), 2) if c[i] != 0]
    if len(c) != 2 * n_cells + 1 or odd:
        raise ModelConstructionError("characteristic polynomial is not even in x")
    q = list(c[0::2])
    m0 = 0
    while len(q) > 1 and q[-1] == 0:
        q.pop()
        m0 += 1
    distinct = 0
    counted = 0
    if len(q) > 1:
        bound = cauchy_bound(q)
        for f, mult in squarefree_factors(q):
            n = sturm_real_root_count(f, 0, bound)
            distinct += n
            counted += mult * n
    real_total = 2 * counted + 2 * m0
    return RealityCertificate(
        n_cells=n_cells,
        char_poly=tuple(c),
        q=tuple(c[0::2]),
        zero_multiplicity=m0,
        positive_roots_distinct=distinct,
        real_roots_with_multiplicity=real_total,
        certified=real_total == 2 * n_cells,
    )


def size_sweep(p: ModelParams, sizes=DEFAULT_SIZES, policy=None, **kw) -> SweepReport:
    sizes = list(sizes)
    if not sizes:
        raise NHLabError("size_sweep needs at least one size")
    reports = [spectrum_report(p, int(n), policy, **kw) for n in sizes]
    rows = [
        {
            "n_cells": r.n_cells,
            "max_abs_imag": r.max_abs_imag,
            "audit_passed": r.audit.passed,
            "precision_used": r.precision_used,
        }
        for r in reports
    ]
    return SweepReport(p, rows, reports)


def hausdorff_distance(a, b) -> float:
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def pbc_vs_obc(
    p: ModelParams,
    n_cells: int,
    policy=None,
    *,
    imag_threshold: float = BREAKDOWN_IMAG,
    real_tol: float = REAL_TOL,
    **kw,
) -> PbcObcComparison:
    """Periodic versus open spectra; flags complex PBC bands over a real OBC spectrum."""
    if n_cells < 3:
        raise NHLabError(f"pbc_vs_obc needs n_cells >= 3, got {n_cells}")
    pbc = np.array([q.value for q in eigs_dense(periodic_chain(p, n_cells))])
    obc = spectrum_report(p, n_cells, policy, **kw)
    pim = float(np.abs(pbc.imag).max())
    return PbcObcComparison(
        n_cells=n_cells,
        pbc_eigenvalues=pbc,
        obc=obc,
        hausdorff=hausdorff_distance(pbc, obc.eigenvalues),
        pbc_max_abs_imag=pim,
        obc_max_abs_imag=obc.max_abs_imag,
        breakdown=pim > imag_threshold and obc.max_abs_imag < real_tol,
    )
