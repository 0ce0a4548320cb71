import math

import numpy as np
import pytest

from dnss import SpinSystemParams, larmor_from_field
from dnss.errors import InvalidParams, UnknownSpecies
from dnss.spinsys import (
    OPS, SYMMETRY_STATES, Segment, drive_operator, segment_hamiltonian, segment_propagator,
    static_hamiltonian,
)


def test_operator_algebra():
    o = OPS
    assert np.allclose(o.sx @ o.sy - o.sy @ o.sx, 1j * (o.sz - (np.eye(4) - o.sz)) / 2)
    assert np.allclose(o.ix @ o.iy - o.iy @ o.ix, 1j * o.iz)
    assert np.allclose(o.sz @ o.sz, o.sz)
    # electron and nuclear operators commute
    for e in (o.sx, o.sy, o.sz):
        for n in (o.ix, o.iy, o.iz):
            assert np.allclose(e @ n, n @ e)


def test_bare_larmor_hamiltonian():
    p = SpinSystemParams(larmor_hz=2.1e6)
    h = segment_hamiltonian(p, Segment("free", 1e-7))
    assert np.array_equal(h, p.omega_l * OPS.iz)


def test_proton_free_hamiltonian_entries():
    p = SpinSystemParams(larmor_hz=2.1e6, a_perp_hz=44e3)
    h = static_hamiltonian(p)
    assert np.allclose(np.diag(h).real, [math.pi * 2.1e6, -math.pi * 2.1e6] * 2)
    assert abs(h[0, 1] - math.pi * 4.4e4) < 1e-9
    assert h[2, 3] == 0


def test_drive_phase_gives_sy():
    assert np.allclose(drive_operator(math.pi / 2), OPS.sy)
    p = SpinSystemParams(larmor_hz=1e6, pulse_width_s=40e-9)
    s = Segment("pulse", 40e-9, math.pi / 2, p.rabi_for_angle(math.pi))
    assert np.allclose(segment_hamiltonian(p, s) - static_hamiltonian(p), s.rabi_rad_s * OPS.sy)


def test_delta_pi_pulse():
    p = SpinSystemParams(larmor_hz=2.1e6, a_perp_hz=44e3)
    u = segment_propagator(p, Segment("pulse", 0.0, 0.0, 0.0, math.pi))
    sx = np.array([[0, 1], [1, 0]])
    assert np.allclose(u, np.kron(-1j * sx, np.eye(2)), atol=1e-15)


def test_zero_free_segment():
    p = SpinSystemParams(larmor_hz=2.1e6, a_perp_hz=44e3)
    assert np.array_equal(segment_propagator(p, Segment("free", 0.0)), np.eye(4))


def test_half_larmor_period():
    p = SpinSystemParams(larmor_hz=2.1e6)
    u = segment_propagator(p, Segment("free", 1 / (2 * 2.1e6)))
    assert np.allclose(np.diag(u), [-1j, 1j, -1j, 1j], atol=1e-12)


def test_finite_pi_pulse_is_exact_without_detuning():
    p = SpinSystemParams(larmor_hz=0.0, pulse_width_s=40e-9)
    s = Segment("pulse", 40e-9, 0.0, p.rabi_for_angle(math.pi))
    u = segment_propagator(p, s)
    assert np.allclose(u[::2, ::2], [[0, -1j], [-1j, 0]], atol=1e-14)


def test_explicit_rabi():
    p = SpinSystemParams(larmor_hz=1e6, rabi_hz=12.5e6, pulse_width_s=40e-9)
    assert math.isclose(p.rabi_for_angle(math.pi), 2 * math.pi * 12.5e6)
    assert math.isclose(p.rabi_for_angle(math.pi / 2), math.pi * 12.5e6)


def test_larmor_from_field():
    assert abs(larmor_from_field("C13", 400) - 428.2e3) / 428.2e3 < 1e-3
    assert larmor_from_field("H1", 0) == 0
    assert abs(larmor_from_field("H1", 493.2) - 2.1e6) / 2.1e6 < 1e-3
    assert larmor_from_field("custom", 10, 5.0) == 50.0
    with pytest.raises(UnknownSpecies):
        larmor_from_field("custom", 10)
    with pytest.raises(UnknownSpecies):
        larmor_from_field("Xe129", 10)


def test_params_validation():
    p = SpinSystemParams(species="C13", bz_gauss=400)
    assert p.larmor_hz == larmor_from_field("C13", 400)
    SpinSystemParams(larmor_hz=p.larmor_hz, species="C13", bz_gauss=400)
    with pytest.raises(InvalidParams):
        SpinSystemParams(larmor_hz=1e6, species="C13", bz_gauss=400)
    with pytest.raises(InvalidParams):
        SpinSystemParams()
    with pytest.raises(InvalidParams):
        SpinSystemParams(larmor_hz=1e6, pulse_width_s=-1e-9)
    with pytest.raises(InvalidParams):
        SpinSystemParams(larmor_hz=1e6, rabi_hz=0)
    with pytest.raises(InvalidParams):
        SpinSystemParams(larmor_hz=float("nan"))


def test_unit_conversion_is_two_pi():
    p = SpinSystemParams(larmor_hz=2.1e6, a_perp_hz=44e3, a_par_hz=5e3, detuning_hz=1e6)
    assert p.omega_l == 2 * math.pi * 2.1e6
    assert p.a_perp == 2 * math.pi * 44e3
    assert p.a_par == 2 * math.pi * 5e3
    assert p.detuning == 2 * math.pi * 1e6
    assert p.unperturbed().a_perp_hz == 0 and p.unperturbed().a_par_hz == 0


def test_symmetry_states_orthonormal():
    basis = np.column_stack(list(SYMMETRY_STATES.values()))
    assert np.allclose(basis.conj().T @ basis, np.eye(4))


def test_segment_validation():
    with pytest.raises(ValueError):
        Segment("idle", 1e-9)
    with pytest.raises(ValueError):
        Segment("free", -1e-9)
    with pytest.raises(ValueError):
        segment_hamiltonian(SpinSystemParams(larmor_hz=1.0), Segment("pulse", 0.0, angle_rad=1.0))
