"""Operators and piecewise-constant Hamiltonians for one electron-nuclear pair.

Basis ordering is ``|u,up>, |u,down>, |d,up>, |d,down>`` with the electron
factor first. ``|u>`` is the driven level (ms = -1 for an NV), ``|d>`` is
ms = 0. The electron z operator is the projector ``|u><u|`` so that a
detuning adds energy only to ``|u>``.

All user-facing frequencies are ordinary frequencies in Hz; everything is
converted to angular units (rad/s) when Hamiltonians are built.
"""

import dataclasses
from typing import NamedTuple, Optional

import numpy as np
from scipy import constants

from . import kernel
from .errors import InvalidParams, UnknownSpecies

TWO_PI = 2 * np.pi

# gamma / 2pi in Hz per gauss
GYROMAGNETIC_HZ_PER_GAUSS = {
    "H1": constants.physical_constants["proton gyromag. ratio in MHz/T"][0] * 1e6 * 1e-4,
    "C13": 10.7084e6 * 1e-4,
}

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_EYE2 = np.eye(2, dtype=complex)


class Operators(NamedTuple):
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    iz: np.ndarray


def operators():
    return Operators(
        sx=kernel.kron(_PAULI_X / 2, _EYE2),
        sy=kernel.kron(_PAULI_Y / 2, _EYE2),
        sz=kernel.kron((_PAULI_Z + _EYE2) / 2, _EYE2),
        ix=kernel.kron(_EYE2, _PAULI_X / 2),
        iy=kernel.kron(_EYE2, _PAULI_Y / 2),
        iz=kernel.kron(_EYE2, _PAULI_Z / 2),
    )


OPS = operators()

KET_U = np.array([1, 0], dtype=complex)
KET_D = np.array([0, 1], dtype=complex)
KET_XPLUS = (KET_U + KET_D) / np.sqrt(2)
KET_XMINUS = (KET_U - KET_D) / np.sqrt(2)
KET_UP = np.array([1, 0], dtype=complex)
KET_DOWN = np.array([0, 1], dtype=complex)


def larmor_from_field(species, bz_gauss, gamma_hz_per_gauss=None):
    """Nuclear Larmor frequency (Hz) of ``species`` in a field of ``bz_gauss``.

    ``species="custom"`` requires ``gamma_hz_per_gauss``.
    """
    if species == "custom":
        if gamma_hz_per_gauss is None:
            raise UnknownSpecies("custom species needs gamma_hz_per_gauss")
        gamma = gamma_hz_per_gauss
    else:
        try:
            gamma = GYROMAGNETIC_HZ_PER_GAUSS[species]
        except KeyError:
            raise UnknownSpecies(f"unknown nuclear species {species!r}") from None
    return gamma * bz_gauss


@dataclasses.dataclass(frozen=True)
class SpinSystemParams:
    """Physical constants of one electron-nuclear pair (ordinary frequencies, Hz).

    Either give ``larmor_hz`` directly, or ``species`` and ``bz_gauss``. If
    both are given they must agree to 1e-6 relative. ``rabi_hz=None`` means
    the drive strength is set so that a nominal pi pulse lasts exactly
    ``pulse_width_s``. A zero pulse width selects instantaneous pulses.
    """

    larmor_hz: Optional[float] = None
    a_perp_hz: float = 0.0
    a_par_hz: float = 0.0
    detuning_hz: float = 0.0
    rabi_hz: Optional[float] = None
    pulse_width_s: float = 0.0
    bz_gauss: Optional[float] = None
    species: Optional[str] = None
    gamma_hz_per_gauss: Optional[float] = None

    def __post_init__(self):
        derived = None
        if self.species is not None and self.bz_gauss is not None:
            derived = larmor_from_field(self.species, self.bz_gauss, self.gamma_hz_per_gauss)
        if self.larmor_hz is None:
            if derived is None:
                raise InvalidParams("need larmor_hz, or species together with bz_gauss")
            object.__setattr__(self, "larmor_hz", float(derived))
        elif derived is not None:
            scale = max(abs(derived), abs(self.larmor_hz))
            if scale > 0 and abs(derived - self.larmor_hz) > 1e-6 * scale:
                raise InvalidParams(
                    f"larmor_hz={self.larmor_hz} inconsistent with {self.species} "
                    f"at {self.bz_gauss} G ({derived} Hz)"
                )
        for name in ("larmor_hz", "a_perp_hz", "a_par_hz", "detuning_hz", "pulse_width_s"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidParams(f"{name} must be finite")
        if self.pulse_width_s < 0:
            raise InvalidParams("pulse_width_s must be >= 0")
        if self.rabi_hz is not None and not (np.isfinite(self.rabi_hz) and self.rabi_hz > 0):
            raise InvalidParams("rabi_hz must be positive (or None for auto)")

    @property
    def omega_l(self):
        return TWO_PI * self.larmor_hz

    @property
    def a_perp(self):
        return TWO_PI * self.a_perp_hz

    @property
    def a_par(self):
        return TWO_PI * self.a_par_hz

    @property
    def detuning(self):
        return TWO_PI * self.detuning_hz

    def rabi_for_angle(self, angle):
        """Angular drive strength for a top-hat pulse of nominal ``angle``."""
        if self.pulse_width_s == 0:
            return 0.0
        if self.rabi_hz is None:
            return angle / self.pulse_width_s
        return TWO_PI * self.rabi_hz * angle / np.pi

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def unperturbed(self):
        """Same system with the hyperfine coupling switched off."""
        return dataclasses.replace(self, a_perp_hz=0.0, a_par_hz=0.0)

    def metadata(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


@dataclasses.dataclass(frozen=True)
class Segment:
    """One piecewise-constant stretch of the control.

    Pulses with zero duration are instantaneous rotations by ``angle_rad``.
    """

    kind: str
    duration_s: float
    phase_rad: float = 0.0
    rabi_rad_s: float = 0.0
    angle_rad: float = 0.0

    def __post_init__(self):
        if self.kind not in ("free", "pulse"):
            raise ValueError(f"segment kind must be 'free' or 'pulse', got {self.kind!r}")
        if not self.duration_s >= 0:
            raise ValueError("segment duration must be >= 0")

    @property
    def is_delta(self):
        return self.kind == "pulse" and self.duration_s == 0

    def key(self):
        """Hashable identity of the segment's Hamiltonian (duration excluded)."""
        if self.kind == "free":
            return ("free",)
        if self.is_delta:
            return ("delta", self.phase_rad, self.angle_rad)
        return ("pulse", self.phase_rad, self.rabi_rad_s)


def static_hamiltonian(p):
    """Larmor + hyperfine + detuning terms (rad/s), active at all times."""
    o = OPS
    return (
        p.omega_l * o.iz
        + o.sz @ (p.a_perp * o.ix + p.a_par * o.iz)
        + p.detuning * o.sz
    )


def drive_operator(phase_rad):
    return np.cos(phase_rad) * OPS.sx + np.sin(phase_rad) * OPS.sy


def segment_hamiltonian(p, s):
    if s.is_delta:
        raise ValueError("instantaneous pulses have no finite Hamiltonian")
    h = static_hamiltonian(p)
    if s.kind == "pulse":
        h = h + s.rabi_rad_s * drive_operator(s.phase_rad)
    return h


def segment_propagator(p, s):
    if s.is_delta:
        return kernel.expm_i(s.angle_rad * drive_operator(s.phase_rad), 1.0)
    return kernel.expm_i(segment_hamiltonian(p, s), s.duration_s)


def product_state(electron, nuclear):
    """Ket for an electron ket times a nuclear ket."""
    return np.kron(np.asarray(electron, dtype=complex), np.asarray(nuclear, dtype=complex))


SYMMETRY_STATES = {
    "X+up": product_state(KET_XPLUS, KET_UP),
    "X+down": product_state(KET_XPLUS, KET_DOWN),
    "X-up": product_state(KET_XMINUS, KET_UP),
    "X-down": product_state(KET_XMINUS, KET_DOWN),
}
