"""Simulation of nuclear-spin-state selective dynamical decoupling."""

from .spinsys import SpinSystemParams, larmor_from_field
from .seqdsl import parse, preset, compile_program, realize, format_program
from .floquet import (
    extract_theta,
    full_spectrum,
    measure_gap,
    period_propagator,
    predict_dips,
    theta_curve,
    unperturbed_spectrum,
)
from .dynamics import (
    coherence,
    coherence_trace,
    detuning_sweep,
    electron_reset,
    evolve,
    initial_state,
    nuclear_gate_fidelity,
    oracle_evolve,
    polarization,
    pulse_number_scan,
)

__version__ = "0.1.0"
