"""Band transport, biorthogonal Berry phases and winding numbers of H_k.

H_k is complex symmetric, so the left eigenvector of the right eigenvector
``u`` is ``conj(u)`` and the biorthogonal norm is ``u^T u``.  All 2x2
eigenproblems are solved in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nhlab.errors import ExceptionalPointError, GapClosedError, NHLabError
from nhlab.model import ModelParams, discriminant

SPANS = {"2pi": 2 * math.pi, "4pi": 4 * math.pi}
GAUGES = ("first-component-real", "second-component-real", "random-seeded")
BIORTHOGONAL_THRESHOLD = 1e-8
# phases are reported in [-pi/2, 3pi/2) so that the quantized value pi never wraps
PHASE_WINDOW_LOW = -math.pi / 2


@dataclass(frozen=True)
class BandState:
    k: float
    eigenvalue: complex
    right: np.ndarray
    left: np.ndarray
    biorthogonal_norm: complex


@dataclass(frozen=True)
class Transport:
    """States at the m grid nodes plus the state continued to ``k_0 + span``."""

    span: str
    k: np.ndarray
    eigenvalues: np.ndarray
    right: np.ndarray  # shape (m, 2)
    final: BandState
    closure_defect: float

    @property
    def states(self) -> list[BandState]:
        return [self.state(j) for j in range(len(self.k))]

    def state(self, j: int) -> BandState:
        u = self.right[j]
        return BandState(float(self.k[j]), complex(self.eigenvalues[j]), u, u.conj(), complex(u @ u))


@dataclass(frozen=True)
class BerryPhaseResult:
    span: str
    sweep_count: int
    phase: float
    winding: float
    gauge_tag: str
    closure_defect: float
    m_points: int
    loop_period: str = "4pi"
    distance_to_integer: float = field(init=False)
    distance_to_half_integer: float = field(init=False)

    def __post_init__(self):
        w = self.winding
        object.__setattr__(self, "distance_to_integer", abs(w - round(w)))
        object.__setattr__(self, "distance_to_half_integer", abs(w - (math.floor(w) + 0.5)))


@dataclass(frozen=True)
class TrajectoryPoint:
    k: float
    sx: complex
    sz: complex


@dataclass(frozen=True)
class Trajectory:
    """Biorthogonal Pauli expectations along the 4pi transport.

    ``winding`` counts turns of the planar curve (Re sx, Re sz) over one
    period of the eigenvector (2pi if it closes after one sweep, else 4pi);
    it is ``None`` with ``status == "indeterminate winding"`` when the curve
    passes too close to the origin.
    """

    points: list[TrajectoryPoint]
    winding: int | None
    winding_raw: float | None
    loop_period: str
    status: str
    projection: str = "real parts"


@dataclass(frozen=True)
class HermitianConsistency:
    winding_closed: float
    winding_open: float
    integer_closed: int
    integer_open: int
    agree: bool


def _wrap(phase: float) -> float:
    return (phase - PHASE_WINDOW_LOW) % (2 * math.pi) + PHASE_WINDOW_LOW


def _right_vectors(dx: np.ndarray, dz: np.ndarray, e: np.ndarray) -> np.ndarray:
    # both (dz + E, dx) and (dx, E - dz) solve H u = E u; keep the larger one
    u1 = np.stack([dz + e, dx + 0j], axis=1)
    u2 = np.stack([dx + 0j, e - dz], axis=1)
    n1 = np.linalg.norm(u1, axis=1)
    n2 = np.linalg.norm(u2, axis=1)
    u = np.where((n1 >= n2)[:, None], u1, u2)
    return u / np.maximum(n1, n2)[:, None]


def _grid(span: float, m: int, offset: float | None, k_start: float) -> np.ndarray:
    h = span / m
    off = h / 2 if offset is None else offset
    return k_start + off + h * np.arange(m + 1)


def band_transport(
    p: ModelParams,
    span: str = "4pi",
    m_points: int = 4096,
    *,
    start: BandState | None = None,
    k_start: float = 0.0,
    offset: float | None = None,
    threshold: float = BIORTHOGONAL_THRESHOLD,
) -> Transport:
    """Continue one band of H_k along ``k_j = k_start + offset + j * span / m``.

    ``offset`` defaults to half a grid step, which keeps nodes away from
    k = 0 and pi when ``m_points`` is a multiple of 4.  The eigenvalue branch
    follows the nearest of +-sqrt(Delta) and eigenvector phases follow
    parallel transport (real positive overlap with the predecessor).  The
    first node takes the branch with positive real part, or the branch and
    phase closest to ``start`` if given.
    """
    if span not in SPANS:
        raise NHLabError(f"span must be one of {sorted(SPANS)}, got {span!r}")
    if m_points < 64 or m_points % 4:
        raise NHLabError(f"m_points must be a multiple of 4 and >= 64, got {m_points}")
    p.require_topological()
    v, r, g = p.floats()
    k = _grid(SPANS[span], m_points, offset, k_start)
    dx = v + r * np.cos(k)
    dz = r * np.sin(k) + 0.5j * g
    root = np.sqrt(discriminant(p, k))

    e = np.empty_like(root)
    if start is None:
        z = complex(root[0])
        prev = z if (z.real, z.imag) >= (0.0, 0.0) else -z
    else:
        z = complex(root[0])
        prev = z if abs(z - start.eigenvalue) <= abs(z + start.eigenvalue) else -z
    rl = root.tolist()
    out = [0j] * len(rl)
    for j, z in enumerate(rl):
        prev = z if abs(z - prev) <= abs(z + prev) else -z
        out[j] = prev
    e[:] = out

    u = _right_vectors(dx, dz, e)
    bio = np.einsum("ij,ij->i", u, u)
    bad = np.flatnonzero(np.abs(bio) < threshold)
    if bad.size:
        kb = float(k[bad[0]])
        raise ExceptionalPointError(
            f"biorthogonal norm {abs(bio[bad[0]]):.2e} below {threshold:.0e} at k = {kb:.6g}: "
            "too close to an exceptional point"
        )
    ovl = np.einsum("ij,ij->i", u[:-1].conj(), u[1:])
    step = np.conj(ovl) / np.abs(ovl)
    phase0 = 1.0 + 0j
    if start is not None:
        o = np.vdot(u[0], start.right)
        phase0 = o / abs(o) if abs(o) > 0 else 1.0 + 0j
    phases = phase0 * np.concatenate([[1.0 + 0j], np.cumprod(step)])
    u = u * phases[:, None]

    uf = u[-1]
    o = np.vdot(u[0], uf)
    c = o / abs(o) if abs(o) > 0 else 1.0
    closure = float(np.linalg.norm(uf - c * u[0]))
    final = BandState(float(k[-1]), complex(e[-1]), uf, uf.conj(), complex(uf @ uf))
    return Transport(span, k[:-1], e[:-1], u[:-1], final, closure)


def _loop_phase(u: np.ndarray) -> float:
    """-sum_j arg(<<u_j|u_{j+1}> / <<u_j|u_j>) around a closed loop (u_M = u_0)."""
    nxt = np.roll(u, -1, axis=0)
    num = np.einsum("ij,ij->i", u, nxt)  # conj(u_j)^H u_{j+1} = u_j^T u_{j+1}
    den = np.einsum("ij,ij->i", u, u)
    return float(-np.sum(np.angle(num / den)))


def _open_phase(u: np.ndarray) -> float:
    num = np.einsum("ij,ij->i", u[:-1], u[1:])
    den = np.einsum("ij,ij->i", u[:-1], u[:-1])
    return float(-np.sum(np.angle(num / den)))


def _closes_after_one_sweep(t: Transport) -> bool:
    half = len(t.k) // 2
    e0, eh = t.eigenvalues[0], t.eigenvalues[half]
    return abs(eh - e0) < abs(eh + e0)


def berry_phase_closed(
    p: ModelParams,
    m_points: int = 4096,
    *,
    rescale_seed: int | None = None,
) -> BerryPhaseResult:
    """Biorthogonal Berry phase of the closed 4pi loop and w = phase / (2 pi).

    The loop is evaluated over the minimal period of the transported
    eigenvector: if the band returns to itself after one sweep the 2pi loop
    is closed, its holonomy is reduced into [-pi/2, 3pi/2) and doubled (two
    identical sweeps); otherwise the 4pi loop holonomy is reduced directly.
    ``rescale_seed`` multiplies each node's right vector by a random nonzero
    complex number (and the left by the reciprocal conjugate) to exhibit
    gauge invariance.
    """
    t = band_transport(p, "4pi", m_points)
    u = t.right
    tag = "gauge-invariant"
    if rescale_seed is not None:
        rng = np.random.default_rng(rescale_seed)
        s = rng.uniform(0.5, 2.0, len(u)) * np.exp(2j * np.pi * rng.random(len(u)))
        u = u * s[:, None]
        tag = f"random-rescaled(seed={rescale_seed})"
    if _closes_after_one_sweep(t):
        period = "2pi"
        phase = 2 * _wrap(_loop_phase(u[: len(u) // 2]))
    else:
        period = "4pi"
        phase = _wrap(_loop_phase(u))
    return BerryPhaseResult(
        span="4pi",
        sweep_count=2,
        phase=phase,
        winding=phase / (2 * math.pi),
        gauge_tag=tag,
        closure_defect=t.closure_defect,
        m_points=m_points,
        loop_period=period,
    )


def gauge_reference(gauge: str, seed: int = 0) -> np.ndarray:
    """Reference vector c of a gauge rule: the projection c^T u is made real positive."""
    if gauge == "first-component-real":
        return np.array([1.0, 0.0], dtype=complex)
    if gauge == "second-component-real":
        return np.array([0.0, 1.0], dtype=complex)
    if gauge == "random-seeded":
        z = np.random.default_rng(seed).normal(size=(2, 2))
        c = z[0] + 1j * z[1]
        return c / np.linalg.norm(c)
    raise NHLabError(f"gauge must be one of {GAUGES}, got {gauge!r}")


def _fix_gauge(u: np.ndarray, c: np.ndarray, gauge: str) -> np.ndarray:
    ref = u @ c
    if np.any(np.abs(ref) < 1e-12):
        raise NHLabError(f"gauge {gauge!r} is singular on this grid (vanishing projection)")
    return u * (np.conj(ref) / np.abs(ref))[:, None]


def berry_phase_open_2pi(
    p: ModelParams,
    gauge: str = "first-component-real",
    m_points: int = 4096,
    *,
    seed: int = 0,
) -> BerryPhaseResult:
    """Berry phase over one sweep k in [0, 2pi] with an explicit gauge, w = phase / pi.

    Nodes are k_j = 2 pi j / m for j = 0..m.  A gauge rule fixes the phase of
    every node, endpoint included, by making ``c^T u`` real positive for a
    reference vector ``c`` (see :func:`gauge_reference`); the random gauge
    draws ``c`` from ``seed``.  When the loop encircles an
    exceptional point the band does not return to itself after one sweep, so
    the path is open and the phase depends on the gauge.  The phase is
    reported in [-pi/2, 3pi/2).
    """
    c = gauge_reference(gauge, seed)
    t = band_transport(p, "2pi", m_points, offset=0.0)
    u = np.vstack([t.right, t.final.right[None, :]])
    u = _fix_gauge(u, c, gauge)
    phase = _wrap(_open_phase(u))
    tag = f"{gauge}(seed={seed})" if gauge == "random-seeded" else gauge
    return BerryPhaseResult(
        span="2pi",
        sweep_count=1,
        phase=phase,
        winding=phase / math.pi,
        gauge_tag=tag,
        closure_defect=t.closure_defect,
        m_points=m_points,
        loop_period="open" if t.closure_defect > 1e-6 else "2pi",
    )


def pauli_trajectory(p: ModelParams, m_points: int = 4096, *, eps: float = 1e-9) -> Trajectory:
    """<sx> and <sz> along the 4pi transport and the planar winding of their real parts."""
    t = band_transport(p, "4pi", m_points)
    u = t.right
    norm = np.einsum("ij,ij->i", u, u)
    sx = 2 * u[:, 0] * u[:, 1] / norm
    sz = (u[:, 0] ** 2 - u[:, 1] ** 2) / norm
    points = [TrajectoryPoint(float(k), complex(a), complex(b)) for k, a, b in zip(t.k, sx, sz)]
    if _closes_after_one_sweep(t):
        period, n = "2pi", len(u) // 2
    else:
        period, n = "4pi", len(u)
    x, y = sx.real[:n], sz.real[:n]
    if np.min(np.hypot(x, y)) < eps:
        return Trajectory(points, None, None, period, "indeterminate winding")
    ang = np.arctan2(y, x)
    turns = np.diff(np.concatenate([ang, ang[:1]]))
    turns = (turns + np.pi) % (2 * np.pi) - np.pi
    raw = float(np.sum(turns) / (2 * np.pi))
    return Trajectory(points, int(round(raw)), raw, period, "ok")


def hermitian_consistency(p: ModelParams, m_points: int = 4096) -> HermitianConsistency:
    """Winding from the closed 4pi loop versus the 2pi formula at gamma = 0."""
    if p.gamma != 0:
        raise NHLabError("hermitian_consistency needs gamma = 0")
    if abs(p.v) == abs(p.r):
        raise GapClosedError(f"gap closes at |v| = |r| = {abs(p.v)}")
    closed = berry_phase_closed(p, m_points)
    opened = berry_phase_open_2pi(p, "first-component-real", m_points)
    ic, io = round(closed.winding), round(opened.winding)
    ok = (
        ic == io
        and abs(closed.winding - ic) < 1e-6
        and abs(opened.winding - io) < 1e-6
    )
    return HermitianConsistency(closed.winding, opened.winding, ic, io, ok)
