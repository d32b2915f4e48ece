import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhlab.audit import (
    DEFAULT_POLICY,
    certified_eigenvalues,
    hausdorff_distance,
    pbc_vs_obc,
    reality_verdict,
    resolve_policy,
    size_sweep,
    spectrum_report,
    symmetry_audit,
)
from nhlab.errors import AuditFailedError, CapExceededError, NHLabError
from nhlab.kernel import QI, char_poly_exact
from nhlab.model import ModelParams, open_chain
from oracles import polyroots_high_precision, sympy_real_roots

BASE = ModelParams("13/25", "1/2", "1")
rat = st.fractions(min_value=-2, max_value=2, max_denominator=8)
nonzero = rat.filter(lambda x: x != 0)
gain = st.fractions(min_value=0, max_value=2, max_denominator=8)


# ---------------------------------------------------------------- pairing


def test_symmetric_spectrum_passes_with_zero_defect():
    a = symmetry_audit([2, -2, 0.3 + 0.4j, 0.3 - 0.4j, -0.3 + 0.4j, -0.3 - 0.4j])
    assert a.chiral_defect == 0 and a.conjugation_defect == 0 and a.passed
    assert a.diameter == pytest.approx(4)


def test_asymmetric_fixture_fails():
    a = symmetry_audit([1, -1, 0.5 + 0.1j, 0.5 - 0.1j])
    assert not a.passed
    assert a.chiral_defect >= 1
    assert a.conjugation_defect == 0


def test_odd_counts_and_self_pairs():
    assert symmetry_audit([0]).passed
    assert symmetry_audit([0, 0]).passed
    assert symmetry_audit([1j, -1j, 0]).passed
    assert not symmetry_audit([1j, -1j, 0.1]).passed


def test_pairing_is_optimal_not_greedy():
    # greedy nearest-partner pairing would reuse -1 for both 1 and 1.1
    a = symmetry_audit([1, 1.1, -1, -1.1])
    assert a.chiral_defect < 1e-15


def test_audit_validation():
    with pytest.raises(NHLabError):
        symmetry_audit([])
    with pytest.raises(NHLabError):
        symmetry_audit([1, np.nan])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
def test_quartet_closure_passes(zs):
    spec = [s * (z.conjugate() if c else z) for z in zs for s in (1, -1) for c in (0, 1)]
    a = symmetry_audit(spec)
    assert a.chiral_defect <= 1e-12 * max(1, a.diameter)
    assert a.conjugation_defect <= 1e-12 * max(1, a.diameter)


def test_exact_roots_pair_with_zero_defect():
    # the exact char poly is even and real, so its roots pair exactly; at 60
    # digits the matched defect is zero to far below double precision
    for p, n in [(BASE, 5), (ModelParams("1/4", "1/2", "1"), 5), (ModelParams("-2/3", "3/4", "1/3"), 4)]:
        roots = polyroots_high_precision(char_poly_exact(open_chain(p, n, "exact").entries))
        a = symmetry_audit(roots)
        assert a.chiral_defect <= 1e-14 * a.diameter and a.conjugation_defect <= 1e-14 * a.diameter


# --------------------------------------------------------- spectrum report


def test_fig_parameters_n40_quad():
    rep = spectrum_report(BASE, 40, ("quad",))
    assert rep.audit.passed and rep.max_abs_imag < 1e-10
    assert len(rep.eigenvalues) == 80
    assert rep.residual_max < 1e-28
    assert rep.precision_used == "quad"


def test_complex_regime_still_passes():
    rep = spectrum_report(ModelParams("0.3", "0.5", "1"), 20, ("double",))
    assert rep.audit.passed
    assert rep.max_abs_imag > 0.1


def test_single_nilpotent_cell():
    rep = spectrum_report(ModelParams("0.5", "0.5", "1"), 1, ("double",))
    assert np.allclose(rep.eigenvalues, [0, 0], atol=1e-7)
    assert rep.audit.passed


def test_escalation_stops_at_first_passing_stage():
    rep = spectrum_report(BASE, 10)
    assert rep.precision_used == "double"
    assert rep.attempts == [{"precision": "double", "outcome": "audit passed"}]
    assert rep.certificate is None


def test_escalation_goes_up_when_audit_fails():
    # beyond the exact cap nothing rescues a defective spectrum, so the ladder
    # ends with a flagged quad report
    p = ModelParams("-1/2", "1/2", "1")
    rep = spectrum_report(p, 25, strict=False)
    assert [a["precision"] for a in rep.attempts] == list(DEFAULT_POLICY)
    assert rep.attempts[-1]["outcome"].startswith("skipped")
    assert rep.precision_used == "quad"
    assert rep.audit_failed_at_max_precision
    with pytest.raises(AuditFailedError) as info:
        spectrum_report(p, 25, ("quad",))
    assert info.value.report.audit_failed_at_max_precision


def test_exact_stage_rescues_defective_real_spectrum():
    # at v = -gamma/2 the real eigenvalues +-r are defective; floating
    # eigenvalues split by ~eps^(1/m) off the real axis at any precision
    p = ModelParams("-1/2", "1/2", "1")
    quad = spectrum_report(p, 6, ("quad",), strict=False)
    assert quad.max_abs_imag > 1e-10 and quad.certificate is None
    rep = spectrum_report(p, 6)
    assert rep.precision_used == "exact"
    assert rep.max_abs_imag == 0 and rep.audit.passed and not rep.audit_failed_at_max_precision
    assert rep.certificate.certified
    assert rep.attempts[-1]["outcome"] == "certified real, eigenvalues from isolated roots"
    assert rep.residual_max < 1e-18
    want = sorted([-0.5] * 5 + [0.0] * 2 + [0.5] * 5)
    assert np.allclose(rep.eigenvalues.real, want, atol=1e-18)
    assert len(rep.eigenvalues_lo) == 12


def test_certified_eigenvalues_match_high_precision_roots():
    for p, n in [(BASE, 6), (ModelParams("0.3", "0.5", "0"), 5), (ModelParams("1/2", "1/2", "1"), 4)]:
        c = reality_verdict(p, n)
        hi, lo, width = certified_eigenvalues(c)
        roots = sympy_real_roots(c.char_poly)
        assert np.allclose(hi.real, roots, atol=1e-14)
        assert width < 1e-19
    with pytest.raises(NHLabError):
        certified_eigenvalues(reality_verdict(ModelParams("1/4", "1/2", "1"), 3))


def test_exact_only_policy_means_quad_plus_certificate():
    rep = spectrum_report(BASE, 8, ("exact",))
    assert rep.precision_used == "quad"
    assert rep.certificate.certified
    assert [a["precision"] for a in rep.attempts] == ["quad", "exact"]


def test_exact_stage_beyond_cap_is_skipped():
    rep = spectrum_report(BASE, 30, ("exact",))
    assert rep.certificate is None
    assert rep.attempts[-1]["outcome"].startswith("skipped")


def test_policy_environment_override(monkeypatch):
    monkeypatch.setenv("NHLAB_PRECISION", "quad")
    assert resolve_policy() == ("quad",)
    assert spectrum_report(BASE, 5).precision_used == "quad"
    monkeypatch.setenv("NHLAB_PRECISION", "double, quad")
    assert resolve_policy() == ("double", "quad")
    assert resolve_policy(("exact",)) == ("exact",)
    monkeypatch.setenv("NHLAB_PRECISION", "octuple")
    with pytest.raises(NHLabError):
        resolve_policy()
    monkeypatch.delenv("NHLAB_PRECISION")
    assert resolve_policy() == DEFAULT_POLICY


def test_report_validation():
    with pytest.raises(NHLabError):
        spectrum_report(BASE, 0)


# ------------------------------------------------------------- certificate


def test_certificate_fig_parameters():
    c = reality_verdict(BASE, 8)
    assert c.certified and c.verdict == "certified real"
    assert c.real_roots_with_multiplicity == 16
    assert c.positive_roots_distinct == 8
    assert len(c.q) == 9 and c.zero_multiplicity == 0
    assert all(isinstance(x, Fraction) for x in c.char_poly)


def test_certificate_complex_regime():
    c = reality_verdict(ModelParams("1/4", "1/2", "1"), 6)
    assert not c.certified and c.verdict == "not certified"
    assert c.real_roots_with_multiplicity < 12


@pytest.mark.parametrize("v, r, n", [("0.3", "0.5", 6), ("0.8", "0.5", 5), ("-1/3", "2", 4), ("1/2", "1/2", 4)])
def test_hermitian_always_certified(v, r, n):
    assert reality_verdict(ModelParams(v, r, 0), n).certified


def test_certificate_counts_zero_roots():
    # nilpotent single cell: x^2 = 0, both roots real with q(y) = y
    c = reality_verdict(ModelParams("1/2", "1/2", "1"), 1)
    assert c.zero_multiplicity == 1 and c.certified
    # v = gamma/2: E = 0 has algebraic multiplicity 2 at any N
    c = reality_verdict(ModelParams("1/2", "1/2", "1"), 5)
    assert c.zero_multiplicity == 1 and c.certified


def test_certificate_matches_high_precision_roots():
    for p, n in [(BASE, 4), (ModelParams("1/4", "1/2", "1"), 4), (ModelParams("3/5", "1/3", "7/4"), 3)]:
        c = reality_verdict(p, n)
        roots = polyroots_high_precision([QI(x) for x in c.char_poly])
        assert c.certified == all(abs(z.imag) < 1e-20 for z in roots)


def test_certificate_cap():
    with pytest.raises(CapExceededError):
        reality_verdict(BASE, 25)
    assert reality_verdict(BASE, 3, cap=3).certified


@st.composite
def chain_points(draw):
    # a third of the draws sit on the defective lines v = +-gamma/2
    g, r = draw(gain), draw(nonzero)
    v = draw(st.one_of(rat, st.sampled_from([g / 2, -g / 2])))
    return ModelParams(v, r, g)


@settings(max_examples=60, deadline=None)
@given(chain_points(), st.integers(1, 7))
def test_certificate_consistency(p, n):
    c = reality_verdict(p, n)
    rep = spectrum_report(p, n, ("quad", "exact"), strict=False)
    assert rep.audit.passed
    if c.certified:
        assert rep.max_abs_imag < 1e-10
    else:
        assert rep.max_abs_imag > 1e-10


def test_floating_audit_passes_when_residuals_are_small():
    # defective points (|v| = gamma/2) are excluded: there a backward-stable
    # residual does not bound the eigenvalue error
    for v in np.linspace(-1.2, 1.2, 9):
        for g in np.linspace(0, 2, 6):
            if abs(abs(v) - g / 2) < 1e-6:
                continue
            rep = spectrum_report(ModelParams(float(v), 0.5, float(g)), 8, ("double",), strict=False)
            if rep.residual_max < 1e-10:
                assert rep.audit.passed, (v, g)


def test_small_residual_does_not_imply_passing_audit_at_defective_point():
    rep = spectrum_report(ModelParams("-3/5", "1/2", "6/5"), 8, ("double",), strict=False)
    assert rep.residual_max < 1e-10
    assert not rep.audit.passed


# ---------------------------------------------------------- sweeps and PBC


def test_size_sweep_rows():
    sw = size_sweep(BASE, (10, 20), ("quad",))
    assert [r["n_cells"] for r in sw.rows] == [10, 20]
    assert all(r["audit_passed"] and r["max_abs_imag"] < 1e-10 for r in sw.rows)
    sw = size_sweep(ModelParams("0.3", "0.5", "1"), (10, 20), ("double",))
    assert all(r["audit_passed"] and r["max_abs_imag"] > 0.1 for r in sw.rows)
    assert len(size_sweep(BASE, (1,), ("double",)).rows) == 1
    with pytest.raises(NHLabError):
        size_sweep(BASE, ())


def test_pbc_vs_obc_breakdown_signature():
    cmp = pbc_vs_obc(BASE, 40, ("quad",))
    assert cmp.pbc_max_abs_imag == pytest.approx(math.sqrt(0.25 - 0.02**2), abs=1e-3)
    assert cmp.obc_max_abs_imag < 1e-10
    assert cmp.breakdown
    assert len(cmp.pbc_eigenvalues) == 80


def test_pbc_vs_obc_hermitian_converges():
    d = [pbc_vs_obc(ModelParams("0.8", "0.5", "0"), n).hausdorff for n in (10, 20, 40)]
    assert d[0] > d[1] > d[2]
    assert not pbc_vs_obc(ModelParams("0.8", "0.5", "0"), 10).breakdown


def test_pbc_vs_obc_minimal():
    cmp = pbc_vs_obc(BASE, 3)
    assert len(cmp.pbc_eigenvalues) == len(cmp.obc.eigenvalues) == 6
    with pytest.raises(NHLabError):
        pbc_vs_obc(BASE, 2)


def test_hausdorff_distance():
    assert hausdorff_distance([0, 1], [0, 1]) == 0
    assert hausdorff_distance([0], [0, 3]) == 3
