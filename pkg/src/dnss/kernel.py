"""Dense complex linear algebra for the 2x2 and 4x4 matrices of the model.

Matrices are plain ``numpy`` complex arrays. Only the two Hilbert-space sizes
of the electron-nuclear problem are accepted; everything here is a pure
function of its inputs.
"""

from typing import NamedTuple

import numpy as np

from .errors import BadTrace, Diverged, NotHermitian, NotUnitary

ALLOWED_DIMS = (2, 4)

# Hermitian pencil weights for unitary diagonalization; the second is only
# tried if the first produces an accidental degeneracy.
_PENCIL_MU = (0.6180339887, -0.4142135624)


class HermEig(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


class UnitaryPhases(NamedTuple):
    """Eigenphases ``phi`` with ``U @ v = exp(-1j * phi) * v``, phi in (-pi, pi]."""

    phases: np.ndarray
    vectors: np.ndarray


class AxisAngle(NamedTuple):
    angle: float
    axis: np.ndarray
    global_phase: float


def as_cmat(a, dims=ALLOWED_DIMS):
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in dims:
        raise ValueError(f"expected a square matrix of size {dims}, got shape {m.shape}")
    return m


def dagger(a):
    return np.swapaxes(np.conj(a), -1, -2)


def frobenius(a):
    return float(np.linalg.norm(a))


def _check_hermitian(h, rtol=1e-10):
    scale = max(np.linalg.norm(h, axis=(-2, -1)).max(initial=0.0), 1.0)
    if np.linalg.norm(h - dagger(h), axis=(-2, -1)).max(initial=0.0) > rtol * scale:
        raise NotHermitian("matrix is not Hermitian")


def _check_unitary(u, tol=1e-10):
    eye = np.eye(u.shape[-1])
    if np.linalg.norm(dagger(u) @ u - eye) > tol:
        raise NotUnitary("matrix is not unitary")


def fix_phases(vectors):
    """Make the first nonzero component of each column real-positive.

    Components below 1e-10 of the column's largest modulus count as zero so
    that rounding noise cannot pick the reference entry.
    """
    v = np.array(vectors, dtype=complex)
    for j in range(v.shape[1]):
        col = v[:, j]
        mags = np.abs(col)
        k = int(np.argmax(mags > mags.max() * 1e-10))
        if mags[k] > 0:
            v[:, j] = col * (np.conj(col[k]) / mags[k])
    return v


def herm_eig(h):
    """Eigen-decomposition of a Hermitian matrix, ascending eigenvalues."""
    h = as_cmat(h)
    _check_hermitian(h)
    values, vectors = np.linalg.eigh(0.5 * (h + dagger(h)))
    return HermEig(values, fix_phases(vectors))


def expm_i(h, t=1.0):
    """Return ``exp(-1j * h * t)``.

    ``h`` may carry leading batch dimensions; ``t`` broadcasts against them.
    A zero time gives the identity exactly.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2] or h.shape[-1] not in ALLOWED_DIMS:
        raise ValueError(f"expected (..., d, d) with d in {ALLOWED_DIMS}, got {h.shape}")
    _check_hermitian(h)
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("time must be finite")
    values, vectors = np.linalg.eigh(0.5 * (h + dagger(h)))
    phase = np.exp(-1j * values * t[..., None])
    out = (vectors * phase[..., None, :]) @ dagger(vectors)
    zero = np.broadcast_to(t == 0, out.shape[:-2])
    if np.any(zero):
        out = np.array(out)
        out[zero] = np.eye(h.shape[-1])
    return out


def _eigvec_residuals(u, vectors):
    lam = np.einsum("ij,ik,kj->j", np.conj(vectors), u, vectors)
    return np.linalg.norm(u @ vectors - vectors * lam, axis=0)


def _refine_degenerate(u, values, vectors, tol):
    # C-eigenvalue clusters may hide distinct U-eigenvalues; re-diagonalize
    # the anti-Hermitian and Hermitian parts restricted to each cluster.
    out = vectors.copy()
    order = np.argsort(values)
    groups, current = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if abs(values[b] - values[a]) < 1e-6:
            current.append(b)
        else:
            groups.append(current)
            current = [b]
    groups.append(current)
    k_part = (u - dagger(u)) / 2j
    r_part = (u + dagger(u)) / 2
    for g in groups:
        if len(g) == 1:
            continue
        basis = vectors[:, g]
        sub = dagger(basis) @ (k_part + 0.1234567 * r_part) @ basis
        _, w = np.linalg.eigh(0.5 * (sub + dagger(sub)))
        out[:, g] = basis @ w
    if np.max(_eigvec_residuals(u, out)) > tol:
        raise Diverged("unitary diagonalization failed residual check")
    return out


def unitary_phases(u, tol=1e-10):
    """Eigenphases of a unitary via a Hermitian pencil of its two parts."""
    u = as_cmat(u)
    _check_unitary(u)
    hermitian = (u + dagger(u)) / 2
    skew = (u - dagger(u)) / 2j
    vectors = None
    for mu in _PENCIL_MU:
        c = hermitian + mu * skew
        values, cand = np.linalg.eigh(0.5 * (c + dagger(c)))
        if np.max(_eigvec_residuals(u, cand)) < tol:
            vectors = cand
            break
    if vectors is None:
        vectors = _refine_degenerate(u, values, cand, tol)
    lam = np.einsum("ij,ik,kj->j", np.conj(vectors), u, vectors)
    phases = -np.angle(lam)
    phases[phases <= -np.pi] += 2 * np.pi
    order = np.argsort(phases, kind="stable")
    return UnitaryPhases(phases[order], fix_phases(vectors[:, order]))


def _wrap(angle):
    """Map an angle into (-pi, pi]."""
    w = np.mod(angle + np.pi, 2 * np.pi) - np.pi
    return float(np.pi if w <= -np.pi + 1e-15 else w)


def su2_axis_angle(u):
    """Write a 2x2 unitary as ``exp(-1j*g) * exp(-1j*(angle/2)*(axis . sigma))``."""
    u = as_cmat(u, dims=(2,))
    _check_unitary(u)
    gamma = -np.angle(np.linalg.det(u)) / 2
    w = np.exp(1j * gamma) * u
    c = (w[0, 0] + w[1, 1]).real / 2
    n = np.array([
        (1j * (w[0, 1] + w[1, 0]) / 2).real,
        ((w[1, 0] - w[0, 1]) / 2).real,
        (1j * (w[0, 0] - w[1, 1]) / 2).real,
    ])
    if c < 0:
        c, n, gamma = -c, -n, gamma + np.pi
    s = float(np.linalg.norm(n))
    if s < 1e-15:
        return AxisAngle(0.0, np.array([1.0, 0.0, 0.0]), _wrap(gamma))
    axis = n / s
    if c < 1e-15:
        # rotation by pi: n and -n are equivalent, keep first nonzero entry positive
        first = axis[np.flatnonzero(np.abs(axis) > 1e-12)[0]]
        if first < 0:
            axis, gamma = -axis, gamma + np.pi
    return AxisAngle(float(2 * np.arctan2(s, c)), axis, _wrap(gamma))


def kron(a, b):
    """Electron (first) x nuclear (second) product of two 2x2 matrices."""
    return np.kron(as_cmat(a, dims=(2,)), as_cmat(b, dims=(2,)))


def partial_trace(rho, keep):
    """Reduce a 4x4 electron-nuclear operator to one factor.

    ``keep`` is ``"electron"`` or ``"nuclear"``.
    """
    rho = as_cmat(rho, dims=(4,))
    tr = np.trace(rho)
    if abs(tr - 1) > 1e-10:
        raise BadTrace(f"trace is {tr}, expected 1")
    r = rho.reshape(2, 2, 2, 2)
    if keep == "nuclear":
        return np.einsum("ijik->jk", r)
    if keep == "electron":
        return np.einsum("ijkj->ik", r)
    raise ValueError(f"keep must be 'electron' or 'nuclear', got {keep!r}")
