"""State preparation, pulse-train evolution and observables.

Coherence is ``L = <2 S_x>`` and nuclear polarization ``P = <2 I_z>``, both
read directly from the rotating-frame density matrix.
"""

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy.linalg

from . import kernel
from .floquet import period_propagators
from .seqdsl import format_program, realize
from .spinsys import KET_D, KET_DOWN, KET_UP, KET_XMINUS, KET_XPLUS, OPS

ELECTRON_STATES = {"xplus": KET_XPLUS, "xminus": KET_XMINUS, "zero": KET_D}
NUCLEAR_STATES = {
    "mixed": np.eye(2, dtype=complex) / 2,
    "up": np.outer(KET_UP, KET_UP.conj()),
    "down": np.outer(KET_DOWN, KET_DOWN.conj()),
}
N_INIT_FRACTION = 0.999


def _density(spec, table):
    if isinstance(spec, str):
        try:
            v = table[spec]
        except KeyError:
            raise ValueError(f"unknown state {spec!r}; choose from {sorted(table)}") from None
        return np.outer(v, v.conj()) if v.ndim == 1 else v
    rho = kernel.as_cmat(spec, dims=(2,))
    if abs(np.trace(rho) - 1) > 1e-10 or np.linalg.norm(rho - rho.conj().T) > 1e-10:
        raise ValueError("custom 2x2 density must be Hermitian with unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-12:
        raise ValueError("custom 2x2 density must be positive semidefinite")
    return rho


def initial_state(electron="xplus", nuclear="mixed"):
    """Product density matrix; each factor is a name or a 2x2 density."""
    return np.kron(_density(electron, ELECTRON_STATES), _density(nuclear, NUCLEAR_STATES))


def _expect(rho, op):
    val = np.einsum("...ij,ji->...", rho, op)
    if np.max(np.abs(val.imag), initial=0.0) > 1e-10:
        raise ValueError("expectation value has a non-negligible imaginary part")
    return val.real


def coherence(rho):
    return _expect(rho, 2 * OPS.sx)


def polarization(rho):
    return _expect(rho, 2 * OPS.iz)


def evolve(rho0, p, seg, n_periods):
    """Apply ``n_periods`` repetitions of the period propagator to ``rho0``."""
    if n_periods < 0:
        raise ValueError("n_periods must be >= 0")
    u = unitary_power(period_propagators(p, [seg])[0], int(n_periods))
    return u @ rho0 @ kernel.dagger(u)


def unitary_power(u, n):
    """``u**n`` through its eigenphases, so rounding does not grow with ``n``."""
    if n == 0:
        return np.eye(u.shape[0], dtype=complex)
    ph, vec = kernel.unitary_phases(u)
    w, _, vh = np.linalg.svd(vec)
    vec = w @ vh
    return (vec * np.exp(-1j * n * ph)) @ kernel.dagger(vec)


def electron_reset(rho):
    """Put the electron back in ``|d>`` (ms = 0), keeping the nuclear state."""
    rho_n = kernel.partial_trace(rho, "nuclear")
    return np.kron(np.outer(KET_D, KET_D.conj()), rho_n)


# --- independent fine-step path --------------------------------------------

def oracle_evolve(rho0, p, seg, n_periods, dt_max):
    """Reference evolution built from scratch with Pade exponentials.

    Every finite segment is cut into equal steps no longer than ``dt_max``;
    each step uses its own Hamiltonian assembled here from Pauli matrices.
    Shares no propagator code with :func:`evolve`.
    """
    if dt_max <= 0:
        raise ValueError("dt_max must be positive")
    one = np.eye(2)
    px = np.array([[0.0, 1.0], [1.0, 0.0]])
    py = np.array([[0.0, -1j], [1j, 0.0]])
    pz = np.array([[1.0, 0.0], [0.0, -1.0]])
    proj_u = np.array([[1.0, 0.0], [0.0, 0.0]])
    w = 2 * math.pi
    h_static = (
        w * p.larmor_hz * np.kron(one, pz / 2)
        + w * p.a_perp_hz * np.kron(proj_u, px / 2)
        + w * p.a_par_hz * np.kron(proj_u, pz / 2)
        + w * p.detuning_hz * np.kron(proj_u, one)
    )
    u_period = np.eye(4, dtype=complex)
    for s in seg.period:
        drive = np.kron(math.cos(s.phase_rad) * px / 2 + math.sin(s.phase_rad) * py / 2, one)
        if s.kind == "pulse" and s.duration_s == 0:
            u_period = scipy.linalg.expm(-1j * s.angle_rad * drive) @ u_period
            continue
        if s.duration_s == 0:
            continue
        h = h_static + (s.rabi_rad_s * drive if s.kind == "pulse" else 0)
        steps = max(1, math.ceil(s.duration_s / dt_max))
        u_step = scipy.linalg.expm(-1j * h * (s.duration_s / steps))
        for _ in range(steps):
            u_period = u_step @ u_period
    rho = np.array(rho0, dtype=complex)
    for _ in range(int(n_periods)):
        rho = u_period @ rho @ u_period.conj().T
    return rho


# --- results ----------------------------------------------------------------

@dataclasses.dataclass
class TraceResult:
    """Coherence over a tau grid, or a (detuning x tau) map when 2-D."""

    tau_s: np.ndarray
    coherence: np.ndarray
    detuning_hz: np.ndarray = None
    metadata: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class PolarizationScan:
    pulse_counts: np.ndarray
    polarization: np.ndarray
    coherence: np.ndarray
    n_init: int = None
    fidelity: float = None
    metadata: dict = dataclasses.field(default_factory=dict)


def _n_periods(seg, n_pulses):
    if n_pulses is None:
        return seg.repetitions
    if n_pulses % seg.pulses_per_period:
        raise ValueError(
            f"n_pulses={n_pulses} is not a multiple of {seg.pulses_per_period} pulses per period"
        )
    return n_pulses // seg.pulses_per_period


def _initial(initial):
    if isinstance(initial, np.ndarray) and initial.shape == (4, 4):
        return initial.astype(complex)
    electron, nuclear = initial
    return initial_state(electron, nuclear)


def _trace_values(p, program, tau, n_pulses, rho0, bindings, timing):
    seglists = [realize(program, p, t, bindings, timing) for t in tau]
    n = _n_periods(seglists[0], n_pulses)
    us = np.linalg.matrix_power(period_propagators(p, seglists), n)
    return coherence(us @ rho0 @ kernel.dagger(us)), n * seglists[0].pulses_per_period


def _meta(p, program, timing, **extra):
    meta = dict(extra)
    meta["frequency_convention"] = "ordinary"
    meta["timing"] = timing
    meta.update(p.metadata())
    meta["sequence"] = " ".join(format_program(program).split())
    return meta


def coherence_trace(p, program, tau_grid, n_pulses=None, initial=("xplus", "mixed"),
                    bindings=None, timing="center"):
    """``L`` after ``n_pulses`` pulses at every tau of ``tau_grid``."""
    tau = np.asarray(tau_grid, dtype=float)
    rho0 = _initial(initial)
    values, total = _trace_values(p, program, tau, n_pulses, rho0, bindings, timing)
    init = initial if isinstance(initial, tuple) else ("custom", "custom")
    return TraceResult(tau, values, None, _meta(
        p, program, timing, experiment="trace", n_pulses=total,
        initial_electron=init[0], initial_nuclear=init[1],
    ))


def _sweep_row(args):
    p, program, tau, n_pulses, rho0, bindings, timing = args
    return _trace_values(p, program, tau, n_pulses, rho0, bindings, timing)[0]


def detuning_sweep(p, program, tau_grid, delta_grid_hz, n_pulses=None, tp_list=None,
                   initial=("xplus", "mixed"), bindings=None, timing="center", jobs=1):
    """One (detuning x tau) coherence map per pulse width in ``tp_list``.

    Rows are independent and may be spread over ``jobs`` processes; the
    result does not depend on the worker count.
    """
    tau = np.asarray(tau_grid, dtype=float)
    deltas = np.asarray(delta_grid_hz, dtype=float)
    if tau.size == 0 or deltas.size == 0:
        raise ValueError("grids must be non-empty")
    tp_list = [p.pulse_width_s] if tp_list is None else list(tp_list)
    rho0 = _initial(initial)
    results = []
    for tp in tp_list:
        rows = [
            (p.replace(pulse_width_s=float(tp), detuning_hz=float(d)), program, tau, n_pulses,
             rho0, bindings, timing)
            for d in deltas
        ]
        if jobs and jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                maps = list(pool.map(_sweep_row, rows))
        else:
            maps = [_sweep_row(r) for r in rows]
        p_tp = p.replace(pulse_width_s=float(tp))
        n_total = _n_periods(realize(program, p_tp, tau[-1], bindings, timing), n_pulses)
        results.append(TraceResult(tau, np.array(maps), deltas, _meta(
            p_tp, program, timing, experiment="sweep",
            n_pulses=n_total * realize(program, p_tp, tau[-1], bindings, timing).pulses_per_period,
        )))
    return results


# --- dip location -----------------------------------------------------------

def dip_center(tau, values, baseline=1.0):
    """Centre of the single dip inside the given window.

    Uses the midpoint of the outermost half-depth crossings (linearly
    interpolated), which stays centred for over-rotated dips that split
    into symmetric side lobes.
    """
    tau = np.asarray(tau, dtype=float)
    values = np.asarray(values, dtype=float)
    i = int(np.argmin(values))
    half = 0.5 * (baseline + values[i])
    below = np.flatnonzero(values < half)
    lo, hi = below[0], below[-1]
    if lo == 0 or hi == len(values) - 1:
        raise ValueError("dip is not contained in the window")

    def cross(a, b):
        return tau[a] + (half - values[a]) * (tau[b] - tau[a]) / (values[b] - values[a])

    return 0.5 * (cross(lo - 1, lo) + cross(hi + 1, hi))


def dip_depth(values, baseline=1.0):
    return float(baseline - np.min(values))


# --- polarization -----------------------------------------------------------

def pulse_number_scan(p, program, tau, n_max, initial=("xplus", "mixed"),
                      bindings=None, timing="center"):
    """``P`` and ``L`` after every whole number of periods up to ``n_max`` pulses.

    ``n_init`` is the smallest pulse count reaching 0.999 of the largest
    ``|P|``; ``fidelity`` is the nuclear flip fidelity there.
    """
    seg = realize(program, p, tau, bindings, timing)
    per = seg.pulses_per_period
    u = period_propagators(p, [seg])[0]
    ud = kernel.dagger(u)
    rho = _initial(initial)
    counts, pol, coh = [], [], []
    for k in range(n_max // per + 1):
        if k:
            rho = u @ rho @ ud
        counts.append(k * per)
        pol.append(polarization(rho))
        coh.append(coherence(rho))
    counts, pol, coh = np.array(counts), np.array(pol), np.array(coh)
    peak = np.max(np.abs(pol))
    n_init = int(counts[np.argmax(np.abs(pol) >= N_INIT_FRACTION * peak)]) if peak > 0 else None
    electron = initial[0] if isinstance(initial, tuple) else "xplus"
    fid = None
    if n_init:
        fid = nuclear_gate_fidelity(p, program, tau, n_init, "flip", electron=electron,
                                    bindings=bindings, timing=timing)
    init = initial if isinstance(initial, tuple) else ("custom", "custom")
    return PolarizationScan(counts, pol, coh, n_init, fid, _meta(
        p, program, timing, experiment="polarize", tau_s=tau, n_max=n_max,
        initial_electron=init[0], initial_nuclear=init[1],
        n_init_rule=f"smallest N with |P| >= {N_INIT_FRACTION} max|P|",
    ))


def nuclear_gate_fidelity(p, program, tau, n_pulses, target="flip", electron="xplus",
                          direction=None, bindings=None, timing="center"):
    """Population-based fidelity of a nuclear gate made of ``n_pulses`` pulses.

    ``flip``: probability that a pure nuclear input ends in the opposite
    state, for ``direction`` "up" (up to down) or "down", or the better of
    the two when ``direction`` is None. ``polarize_up``/``polarize_down``:
    target population from a mixed nuclear input after an electron reset.
    """
    seg = realize(program, p, tau, bindings, timing)
    n = _n_periods(seg, n_pulses)
    if target == "flip":
        dirs = ("up", "down") if direction is None else (direction,)
        best = 0.0
        for d in dirs:
            rho = evolve(initial_state(electron, d), p, seg, n)
            rho_n = kernel.partial_trace(rho, "nuclear")
            best = max(best, float(rho_n[1, 1].real if d == "up" else rho_n[0, 0].real))
        return best
    if target in ("polarize_up", "polarize_down"):
        rho = electron_reset(evolve(initial_state(electron, "mixed"), p, seg, n))
        rho_n = kernel.partial_trace(rho, "nuclear")
        return float(rho_n[0, 0].real if target == "polarize_up" else rho_n[1, 1].real)
    raise ValueError(f"unknown target {target!r}")
