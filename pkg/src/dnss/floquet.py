"""Floquet analysis of one-period propagators.

Covers period propagators, eigenphase spectra tracked across a tau grid,
the residual x rotation ``theta`` of the pulse-only propagator, crossing
gaps between branches, and the fixed-point prediction of the two DNSS dip
positions.
"""

import dataclasses
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from . import kernel
from .errors import (
    BranchTrackingLost,
    InvalidParams,
    NegativeDuration,
    OutOfRegime,
)
from .seqdsl import realize
from .spinsys import (
    KET_DOWN,
    KET_UP,
    KET_XMINUS,
    KET_XPLUS,
    SYMMETRY_STATES,
    drive_operator,
    segment_propagator,
    static_hamiltonian,
)

BRANCH_NAMES = ("X+up", "X+down", "X-up", "X-down")
LABEL_THRESHOLD = 0.99
REGIME_AXIS_X2 = 0.99
_DEGENERATE = 1e-7


def _wrap(x):
    return np.mod(np.asarray(x) + np.pi, 2 * np.pi) - np.pi


# --- propagators ------------------------------------------------------------

def period_propagator(p, seg):
    """Time-ordered product of the segment propagators of one period."""
    u = np.eye(4, dtype=complex)
    for s in seg.period:
        u = segment_propagator(p, s) @ u
    return u


def period_propagators(p, seglists):
    """Stack of period propagators, one per compiled ``SegmentList``.

    Segment lists that share the same Hamiltonians position by position
    (only durations differ, e.g. a tau scan) are exponentiated in one pass.
    """
    seglists = list(seglists)
    if not seglists:
        return np.zeros((0, 4, 4), dtype=complex)
    keys = [tuple(s.key() for s in sl.period) for sl in seglists]
    if any(k != keys[0] for k in keys):
        return np.array([period_propagator(p, sl) for sl in seglists])
    n = len(seglists)
    h0 = static_hamiltonian(p)
    out = np.broadcast_to(np.eye(4, dtype=complex), (n, 4, 4))
    for j, s in enumerate(seglists[0].period):
        if s.is_delta:
            step = kernel.expm_i(s.angle_rad * drive_operator(s.phase_rad), 1.0)
        else:
            h = h0 if s.kind == "free" else h0 + s.rabi_rad_s * drive_operator(s.phase_rad)
            durations = np.array([sl.period[j].duration_s for sl in seglists])
            step = kernel.expm_i(h, durations)
        out = step @ out
    return np.array(out)


def pulse_propagator(p, seg):
    """Electron 2x2 block of the period propagator with no nuclear terms."""
    bare = p.replace(larmor_hz=0.0, a_perp_hz=0.0, a_par_hz=0.0, bz_gauss=None, species=None)
    return period_propagator(bare, seg)[::2, ::2]


# --- theta ------------------------------------------------------------------

def pulse_rotation(p, program, tau, bindings=None, timing="center"):
    """Axis-angle form of ``-U_p(T)``, the pulse-only period propagator."""
    seg = realize(program, p, tau, bindings, timing)
    return kernel.su2_axis_angle(-pulse_propagator(p, seg))


def extract_theta(p, program, tau, bindings=None, timing="center"):
    """Signed residual x rotation of the pulse-only period propagator.

    With ``-U_p(T) = exp(-i*theta*sigma_x)`` up to a global phase, returns
    theta (radians). Raises ``OutOfRegime`` when the rotation axis is not
    predominantly x.
    """
    rot = pulse_rotation(p, program, tau, bindings, timing)
    if rot.angle < 1e-12:
        return 0.0
    if rot.axis[0] ** 2 < REGIME_AXIS_X2:
        raise OutOfRegime(
            f"pulse rotation axis {np.round(rot.axis, 4).tolist()} is not along x "
            f"(tau={tau:.6g} s, detuning={p.detuning_hz:g} Hz, tp={p.pulse_width_s:g} s)"
        )
    return 0.5 * rot.angle * rot.axis[0]


@dataclasses.dataclass
class ThetaCurve:
    tau_s: np.ndarray
    theta_rad: np.ndarray
    in_regime: np.ndarray
    axis_x2: np.ndarray
    detuning_hz: float
    pulse_width_s: float
    metadata: dict = dataclasses.field(default_factory=dict)


def theta_curve(p, program, tau_grid, bindings=None, timing="center"):
    """theta over a tau grid; out-of-regime points hold NaN."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    theta = np.full(tau_grid.shape, np.nan)
    ax2 = np.empty(tau_grid.shape)
    for i, tau in enumerate(tau_grid):
        rot = pulse_rotation(p, program, tau, bindings, timing)
        ax2[i] = rot.axis[0] ** 2
        if rot.angle < 1e-12:
            theta[i], ax2[i] = 0.0, 1.0
        elif ax2[i] >= REGIME_AXIS_X2:
            theta[i] = 0.5 * rot.angle * rot.axis[0]
    return ThetaCurve(
        tau_grid, theta, ax2 >= REGIME_AXIS_X2, ax2, p.detuning_hz, p.pulse_width_s,
        {"timing": timing, **p.metadata()},
    )


# --- dip prediction ---------------------------------------------------------

class DipPrediction(NamedTuple):
    harmonic_k: int
    tau_plus_s: float
    tau_minus_s: float
    theta_at_dip_rad: float
    converged: bool
    iterations: int


def predict_dips(p, program, harmonic_k=1, bindings=None, timing="center",
                 max_iter=200, tol_s=1e-15):
    """Solve ``tau = ((2k-1)*pi +/- |theta(tau)|) / |omega_L|`` by iteration.

    Starts both branches at ``(2k-1)*pi/|omega_L|``. Non-convergence is
    reported through ``converged=False`` with the last iterate.
    """
    if harmonic_k < 1:
        raise ValueError("harmonic_k must be >= 1")
    wl = abs(p.omega_l)
    if wl == 0:
        raise InvalidParams("Larmor frequency must be non-zero")
    base = (2 * harmonic_k - 1) * np.pi

    def theta_abs(tau):
        try:
            return abs(extract_theta(p, program, tau, bindings, timing))
        except NegativeDuration as exc:
            raise OutOfRegime(f"dip iteration reached tau={tau:g} s shorter than the pulses") from exc

    result, iters, converged = {}, 0, True
    for sign in (1, -1):
        tau = base / wl
        done = False
        for n in range(1, max_iter + 1):
            nxt = (base + sign * theta_abs(tau)) / wl
            step = abs(nxt - tau)
            tau = nxt
            if step < tol_s:
                done = True
                break
        iters = max(iters, n)
        converged &= done
        result[sign] = tau
    theta_mid = 0.5 * (result[1] - result[-1]) * wl
    return DipPrediction(harmonic_k, result[1], result[-1], theta_mid, converged, iters)


# --- spectra ----------------------------------------------------------------

@dataclasses.dataclass
class FloquetSpectrum:
    """Eigenphase branches of U(T) over a tau grid.

    ``phases[i, b]`` is the unwrapped phase of branch ``b`` at ``tau_s[i]``
    (principal value plus ``2*pi*winding[i, b]``); ``vectors[i, :, b]`` its
    eigenvector; ``labels[i, b]`` a symmetry label or ``"mixed"``.
    """

    tau_s: np.ndarray
    phases: np.ndarray
    winding: np.ndarray
    vectors: np.ndarray
    labels: np.ndarray
    names: tuple
    metadata: dict = dataclasses.field(default_factory=dict)

    @property
    def principal(self):
        w = _wrap(self.phases)
        return np.where(w <= -np.pi, w + 2 * np.pi, w)

    def index(self, branch):
        return self.names.index(branch) if isinstance(branch, str) else int(branch)

    def gap(self, a, b):
        """Circular distance between two branches at every grid point."""
        ia, ib = self.index(a), self.index(b)
        return np.abs(_wrap(self.phases[:, ia] - self.phases[:, ib]))

    def min_gap(self, a, b):
        g = self.gap(a, b)
        i = int(np.argmin(g))
        return float(self.tau_s[i]), float(g[i])


def _label(vec):
    for name, state in SYMMETRY_STATES.items():
        if abs(np.vdot(state, vec)) ** 2 >= LABEL_THRESHOLD:
            return name
    return "mixed"


def _orthonormalize(vectors):
    # Loewdin keeps each vector as close as possible to its input
    u, _, vh = np.linalg.svd(vectors, full_matrices=False)
    return u @ vh


def _align_degenerate(phases, vectors, prev):
    """Inside clusters of (near-)degenerate phases, rotate the eigenbasis to
    follow the previous grid point's vectors."""
    vectors = vectors.copy()
    order = np.argsort(phases)
    clusters, cur = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if abs(_wrap(phases[b] - phases[a])) < _DEGENERATE:
            cur.append(b)
        else:
            clusters.append(cur)
            cur = [b]
    clusters.append(cur)
    if len(clusters) > 1 and abs(_wrap(phases[order[0]] - phases[order[-1]])) < _DEGENERATE:
        clusters[0] = clusters.pop() + clusters[0]
    for c in clusters:
        if len(c) < 2:
            continue
        basis = vectors[:, c]
        weights = np.linalg.norm(kernel.dagger(basis) @ prev, axis=0)
        chosen = np.argsort(-weights, kind="stable")[: len(c)]
        proj = basis @ (kernel.dagger(basis) @ prev[:, chosen])
        vectors[:, c] = _orthonormalize(proj)
    return vectors


def track_branches(tau, unitaries, initial_reference=None, min_overlap=0.5):
    """Follow eigenphase branches of a stack of unitaries by eigenvector overlap."""
    n = len(tau)
    if len(unitaries) != n:
        raise ValueError("need one unitary per tau value")
    if n > 1 and not np.all(np.diff(tau) > 0):
        raise ValueError("tau grid must be strictly increasing")
    phases = np.empty((n, 4))
    winding = np.zeros((n, 4), dtype=int)
    vectors = np.empty((n, 4, 4), dtype=complex)
    labels = np.empty((n, 4), dtype=object)
    ref = initial_reference if initial_reference is not None else np.column_stack(
        [SYMMETRY_STATES[b] for b in BRANCH_NAMES]
    )
    prev_vecs, prev_phase = None, None
    for i in range(n):
        ph, vec = kernel.unitary_phases(unitaries[i])
        if prev_vecs is None:
            vec = _align_degenerate(ph, vec, ref)
            _, perm = linear_sum_assignment(-np.abs(kernel.dagger(ref) @ vec))
        else:
            vec = _align_degenerate(ph, vec, prev_vecs)
            overlap = np.abs(kernel.dagger(prev_vecs) @ vec)
            rows, perm = linear_sum_assignment(-overlap)
            worst = overlap[rows, perm].min()
            if worst < min_overlap:
                raise BranchTrackingLost(
                    f"eigenvector overlap {worst:.3f} < {min_overlap} at tau={tau[i]:.6g} s; refine the grid"
                )
        ph, vec = ph[perm], vec[:, perm]
        if prev_phase is None:
            k = np.zeros(4, dtype=int)
        else:
            k = np.rint((prev_phase - ph) / (2 * np.pi)).astype(int)
        phases[i] = ph + 2 * np.pi * k
        winding[i] = k
        vectors[i] = vec
        labels[i] = [_label(vec[:, b]) for b in range(4)]
        prev_vecs, prev_phase = vec, phases[i]
    return phases, winding, vectors, labels


def _dominant_names(labels):
    names = []
    for b in range(labels.shape[1]):
        vals, counts = np.unique(
            [l for l in labels[:, b] if l != "mixed"] or ["mixed"], return_counts=True
        )
        names.append(str(vals[np.argmax(counts)]))
    if len(set(names)) != len(names):
        names = [f"branch{b}" for b in range(labels.shape[1])]
    return tuple(names)


def full_spectrum(p, program, tau_grid, bindings=None, timing="center"):
    """Branch-tracked eigenphases of the full period propagator."""
    tau = np.asarray(tau_grid, dtype=float)
    seglists = [realize(program, p, t, bindings, timing) for t in tau]
    us = period_propagators(p, seglists)
    phases, winding, vectors, labels = track_branches(tau, us)
    meta = {"spectrum": "full", "timing": timing, **p.metadata()}
    return FloquetSpectrum(tau, phases, winding, vectors, labels, _dominant_names(labels), meta)


def unperturbed_spectrum(p, program, tau_grid, bindings=None, timing="center"):
    """Eigenphases with the hyperfine coupling removed.

    The period propagator factorizes into the pulse-only electron part and
    free nuclear precession, so branches are built directly from the two
    factors: electron eigenvectors near ``|X+>``/``|X->`` times nuclear
    up/down. Branch order is ``BRANCH_NAMES``.
    """
    p0 = p.unperturbed()
    tau = np.asarray(tau_grid, dtype=float)
    n = len(tau)
    phases = np.empty((n, 4))
    vectors = np.empty((n, 4, 4), dtype=complex)
    xbasis = np.column_stack([KET_XPLUS, KET_XMINUS])
    for i, t in enumerate(tau):
        seg = realize(program, p0, t, bindings, timing)
        ue = pulse_propagator(p0, seg)
        eph, evec = kernel.unitary_phases(ue)
        if abs(_wrap(eph[0] - eph[1])) < _DEGENERATE:
            evec = xbasis
            eph = -np.angle(np.diag(kernel.dagger(xbasis) @ ue @ xbasis))
        else:
            _, perm = linear_sum_assignment(-np.abs(kernel.dagger(xbasis) @ evec))
            eph, evec = eph[perm], evec[:, perm]
        nuc_phase = {"up": p0.omega_l * seg.period_duration_s / 2,
                     "down": -p0.omega_l * seg.period_duration_s / 2}
        for b, name in enumerate(BRANCH_NAMES):
            e = 0 if name.startswith("X+") else 1
            nuc = "up" if name.endswith("up") else "down"
            phases[i, b] = eph[e] + nuc_phase[nuc]
            vectors[i, :, b] = np.kron(evec[:, e], KET_UP if nuc == "up" else KET_DOWN)
    principal = _wrap(phases)
    principal = np.where(principal <= -np.pi, principal + 2 * np.pi, principal)
    winding = np.zeros((n, 4), dtype=int)
    unwrapped = principal.copy()
    for i in range(1, n):
        winding[i] = np.rint((unwrapped[i - 1] - principal[i]) / (2 * np.pi)).astype(int)
        unwrapped[i] = principal[i] + 2 * np.pi * winding[i]
    labels = np.array([[_label(vectors[i, :, b]) for b in range(4)] for i in range(n)], dtype=object)
    meta = {"spectrum": "unperturbed", "timing": timing, **p0.metadata()}
    return FloquetSpectrum(tau, unwrapped, winding, vectors, labels, BRANCH_NAMES, meta)


# --- crossing gaps ----------------------------------------------------------

class CrossingGap(NamedTuple):
    tau_s: float
    gap_rad: float
    true_crossing: bool


def _pair_difference(p, program, tau, ref_a, ref_b, bindings, timing):
    u = period_propagator(p, realize(program, p, tau, bindings, timing))
    ph, vec = kernel.unitary_phases(u)
    wa = np.abs(np.conj(ref_a) @ vec) ** 2
    wb = np.abs(np.conj(ref_b) @ vec) ** 2
    top = np.argsort(-(wa + wb), kind="stable")[:2]
    i1, i2 = (top[0], top[1]) if wa[top[0]] >= wa[top[1]] else (top[1], top[0])
    return float(_wrap(ph[i1] - ph[i2]))


def measure_gap(p, program, tau_lo, tau_hi, pair=("X+up", "X-down"),
                bindings=None, timing="center"):
    """Smallest phase gap between the two branches spanning ``pair`` in a bracket.

    ``pair`` names two symmetry states (or gives two kets); the bracket must
    contain only the one crossing of interest. A sign change of the ordered
    phase difference marks a true crossing, located with a root finder.
    """
    ref_a, ref_b = (SYMMETRY_STATES[x] if isinstance(x, str) else np.asarray(x, complex) for x in pair)

    def signed(t):
        return _pair_difference(p, program, t, ref_a, ref_b, bindings, timing)

    scale = abs(tau_hi)
    res = minimize_scalar(lambda t: abs(signed(t)), bounds=(tau_lo, tau_hi),
                          method="bounded", options={"xatol": 1e-14 * scale})
    best_tau, best_gap = float(res.x), float(abs(signed(res.x)))
    s_lo, s_hi = signed(tau_lo), signed(tau_hi)
    if s_lo * s_hi < 0:
        root = brentq(signed, tau_lo, tau_hi, xtol=1e-22, rtol=4 * np.finfo(float).eps, maxiter=500)
        g = abs(signed(root))
        if g < best_gap:
            best_tau, best_gap = float(root), float(g)
    return CrossingGap(best_tau, best_gap, best_gap < 1e-8)
