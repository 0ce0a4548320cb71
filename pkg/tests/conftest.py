import numpy as np
import pytest

from dnss import SpinSystemParams

PROTON = dict(larmor_hz=2.1e6, a_perp_hz=44e3)
DNSS = dict(PROTON, detuning_hz=1e6, pulse_width_s=40e-9)


def random_hermitian(rng, d=4, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, d=4):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def proton():
    return SpinSystemParams(**PROTON)


@pytest.fixture
def dnss_params():
    return SpinSystemParams(**DNSS)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(test_acceptance.RESULTS):
        passed, detail = test_acceptance.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
