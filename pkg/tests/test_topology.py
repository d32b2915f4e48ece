import math

import numpy as np
import pytest

from nhlab.errors import ExceptionalPointError, GapClosedError, NHLabError
from nhlab.model import ModelParams, bloch_hamiltonian, ep_encirclement
from nhlab.topology import (
    GAUGES,
    band_transport,
    berry_phase_closed,
    berry_phase_open_2pi,
    gauge_reference,
    hermitian_consistency,
    pauli_trajectory,
)
from oracles import brute_winding

BASE = ModelParams("0.52", "0.5", "1")
TRIVIAL = ModelParams("1.0", "0.5", "0.2")
SSH_TOPO = ModelParams("0.3", "0.5", "0")
SSH_TRIV = ModelParams("0.8", "0.5", "0")


# --------------------------------------------------------------- transport


def test_transport_residuals_and_biorthogonal_norm():
    t = band_transport(BASE, "4pi", 256)
    for s in t.states[::17]:
        h = bloch_hamiltonian(BASE, s.k).matrix
        assert np.linalg.norm(h @ s.right - s.eigenvalue * s.right) < 1e-13
        assert np.linalg.norm(s.left.conj() @ h - s.eigenvalue * s.left.conj()) < 1e-13
        assert abs(s.biorthogonal_norm) > 1e-3
        assert np.linalg.norm(s.right) == pytest.approx(1)


def test_grid_is_offset_by_half_a_step():
    t = band_transport(BASE, "2pi", 64)
    h = 2 * math.pi / 64
    assert t.k[0] == pytest.approx(h / 2)
    assert np.min(np.abs(np.sin(t.k))) > 0.04


def test_one_sweep_lands_on_the_other_band():
    t = band_transport(BASE, "2pi", 4096)
    assert t.final.eigenvalue == pytest.approx(-t.eigenvalues[0], abs=1e-3)
    assert t.closure_defect > 0.1


def test_two_sweeps_close():
    t = band_transport(BASE, "4pi", 4096)
    assert t.closure_defect < 1e-6
    assert t.final.eigenvalue == pytest.approx(t.eigenvalues[0], abs=1e-3)


def test_hermitian_single_sweep_closes():
    assert band_transport(SSH_TRIV, "2pi", 4096).closure_defect < 1e-8


@pytest.mark.parametrize("p", [BASE, TRIVIAL, SSH_TOPO])
def test_transport_involution(p):
    once = band_transport(p, "4pi", 1024)
    first = band_transport(p, "2pi", 512)
    second = band_transport(p, "2pi", 512, start=first.final, k_start=2 * math.pi)
    assert np.allclose(second.k, once.k[512:], atol=1e-12)
    assert np.allclose(second.right, once.right[512:], atol=1e-10)
    assert np.linalg.norm(second.final.right - once.final.right) < 1e-10
    assert second.final.eigenvalue == pytest.approx(once.final.eigenvalue, abs=1e-12)


def test_transport_validation():
    with pytest.raises(NHLabError):
        band_transport(BASE, "3pi", 256)
    with pytest.raises(NHLabError):
        band_transport(BASE, "4pi", 32)
    with pytest.raises(NHLabError):
        band_transport(BASE, "4pi", 130)
    with pytest.raises(NHLabError):
        band_transport(ModelParams(0.3, 0, 1), "4pi", 256)


def test_exceptional_point_is_named():
    # gamma/2 = v - r puts a coalescence at k = pi, which the unshifted grid
    # hits up to the rounding of pi (biorthogonal norm ~ 1e-8 there)
    p = ModelParams("0.75", "0.5", "0.5")
    with pytest.raises(ExceptionalPointError, match="k = 3.14159"):
        band_transport(p, "2pi", 64, offset=0.0, threshold=1e-6)
    band_transport(p, "2pi", 64)


# ------------------------------------------------------------ Berry phases


def test_closed_phase_half_integer_winding():
    b = berry_phase_closed(BASE, 4096)
    assert b.phase == pytest.approx(math.pi, abs=1e-6)
    assert b.winding == pytest.approx(0.5, abs=1e-6)
    assert b.sweep_count == 2 and b.span == "4pi"
    assert b.closure_defect < 1e-6
    assert b.distance_to_half_integer < 1e-6
    assert b.loop_period == "4pi"


def test_closed_phase_without_encirclement_is_integer():
    b = berry_phase_closed(TRIVIAL, 4096)
    assert b.distance_to_integer < 1e-6
    assert b.loop_period == "2pi"


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_closed_phase_is_gauge_invariant(seed):
    ref = berry_phase_closed(BASE, 1024).phase
    assert berry_phase_closed(BASE, 1024, rescale_seed=seed).phase == pytest.approx(ref, abs=1e-10)


def test_half_integer_dichotomy_on_grid():
    for v in np.linspace(-1.05, 1.05, 15):
        for g in np.linspace(0.0, 2.4, 15):
            p = ModelParams(float(v), 0.5, float(g))
            enc = ep_encirclement(p).encircled
            b = berry_phase_closed(p, 1024)
            if enc:
                assert b.distance_to_half_integer < 1e-4, (v, g, b.winding)
            else:
                assert b.distance_to_integer < 1e-4, (v, g, b.winding)


def test_open_phase_is_gauge_dependent_when_encircled():
    a = berry_phase_open_2pi(BASE, "first-component-real", 4096)
    b = berry_phase_open_2pi(BASE, "second-component-real", 4096)
    c = berry_phase_open_2pi(BASE, "random-seeded", 4096, seed=0)
    assert abs(a.phase - b.phase) > 0.1
    assert abs(a.phase - c.phase) > 0.1
    assert a.loop_period == "open"
    assert a.winding == pytest.approx(a.phase / math.pi)
    for r in (a, b, c):
        assert -math.pi / 2 <= r.phase < 3 * math.pi / 2
    assert c.gauge_tag == "random-seeded(seed=0)"


def test_open_phase_random_gauge_is_reproducible():
    a = berry_phase_open_2pi(BASE, "random-seeded", 512, seed=5)
    b = berry_phase_open_2pi(BASE, "random-seeded", 512, seed=5)
    assert a.phase == b.phase
    assert not np.allclose(gauge_reference("random-seeded", 1), gauge_reference("random-seeded", 2))
    with pytest.raises(NHLabError):
        gauge_reference("landau")


@pytest.mark.parametrize("p, w", [(SSH_TOPO, 1), (SSH_TRIV, 0)])
def test_open_phase_hermitian_is_gauge_independent(p, w):
    closed = berry_phase_closed(p, 4096)
    phases = [berry_phase_open_2pi(p, g, 4096, seed=3).phase for g in GAUGES]
    assert max(phases) - min(phases) < 1e-8
    assert round(closed.winding) == w
    assert berry_phase_open_2pi(p, GAUGES[0], 4096).winding == pytest.approx(closed.winding, abs=1e-8)


@pytest.mark.parametrize("gauge", GAUGES)
def test_open_phase_converged_in_grid(gauge):
    a = berry_phase_open_2pi(BASE, gauge, 2048).phase
    b = berry_phase_open_2pi(BASE, gauge, 4096).phase
    assert abs(a - b) < 1e-6


@pytest.mark.parametrize("p", [BASE, ModelParams("0.3", "0.5", "0.2"), TRIVIAL])
def test_discretization_convergence(p):
    # differences must at least halve per doubling, down to the rounding floor
    for fn in (
        lambda m: berry_phase_closed(p, m).phase,
        lambda m: berry_phase_open_2pi(p, "first-component-real", m).phase,
    ):
        ph = [fn(m) for m in (128, 256, 512, 1024)]
        d = [abs(x - y) for x, y in zip(ph, ph[1:])]
        for prev, cur in zip(d, d[1:]):
            assert cur <= max(prev / 2, 1e-12)


# ------------------------------------------------------------ trajectories


def test_pauli_trajectory_encircling_loop():
    tr = pauli_trajectory(BASE, 4096)
    assert tr.status == "ok" and tr.winding == 1 and tr.loop_period == "4pi"
    assert tr.projection == "real parts"
    pts = np.array([complex(p.sx.real, p.sz.real) for p in tr.points])
    assert round(brute_winding(pts)) == 1


def test_pauli_trajectory_hermitian():
    tr = pauli_trajectory(SSH_TOPO, 4096)
    assert tr.winding == 1 and tr.loop_period == "2pi"
    assert all(abs(p.sx.imag) < 1e-12 and abs(p.sz.imag) < 1e-12 for p in tr.points)
    assert pauli_trajectory(SSH_TRIV, 4096).winding == 0


def test_pauli_expectations_equal_d_over_e():
    t = band_transport(BASE, "4pi", 512)
    tr = pauli_trajectory(BASE, 512)
    for pt, e in zip(tr.points, t.eigenvalues):
        b = bloch_hamiltonian(BASE, pt.k)
        assert pt.sx == pytest.approx(b.d_x / e, abs=1e-8)
        assert pt.sz == pytest.approx(b.d_z_tilde / e, abs=1e-8)


def test_pauli_trajectory_through_origin_is_indeterminate():
    # any curve passes within eps of the origin when eps is huge
    assert pauli_trajectory(BASE, 256, eps=10.0).status == "indeterminate winding"
    assert pauli_trajectory(BASE, 256, eps=10.0).winding is None


# --------------------------------------------------------------- Hermitian


@pytest.mark.parametrize("p, w", [(SSH_TOPO, 1), (SSH_TRIV, 0)])
def test_hermitian_consistency(p, w):
    rep = hermitian_consistency(p)
    assert rep.agree
    assert rep.integer_closed == rep.integer_open == w


def test_hermitian_consistency_errors():
    with pytest.raises(GapClosedError):
        hermitian_consistency(ModelParams("0.5", "0.5", "0"))
    with pytest.raises(NHLabError):
        hermitian_consistency(BASE)
