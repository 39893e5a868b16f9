"""Two-spin operator algebra, canonical states and the correlation metric.

Basis ordering is ``|00>, |01>, |10>, |11>`` with spin 1 as the left tensor
factor. Operators are in units of hbar (eigenvalues of single-spin generators
are +-1/2). States and density matrices are plain ``numpy`` arrays.
"""
from __future__ import annotations

import itertools

import numpy as np

from .errors import DegenerateStateError, DomainError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_SLACK = 1e-10

SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

IDENTITY = np.eye(4, dtype=complex)


def on_spin(op2: np.ndarray, spin: int) -> np.ndarray:
    """Embed a 2x2 operator on spin 1 or spin 2 of the pair."""
    if spin == 1:
        return np.kron(op2, SIGMA["I"])
    if spin == 2:
        return np.kron(SIGMA["I"], op2)
    raise DomainError(f"spin must be 1 or 2, got {spin}")


IX1, IY1, IZ1 = (on_spin(SIGMA[a] / 2, 1) for a in "XYZ")
IX2, IY2, IZ2 = (on_spin(SIGMA[a] / 2, 2) for a in "XYZ")
IX, IY, IZ = IX1 + IX2, IY1 + IY2, IZ1 + IZ2
I1_DOT_I2 = IX1 @ IX2 + IY1 @ IY2 + IZ1 @ IZ2


def spin_operator(axis: str, spin: int) -> np.ndarray:
    """Single-spin angular momentum ``I_axis`` of the given spin."""
    return on_spin(SIGMA[axis.upper()] / 2, spin)


def _ket(*amps) -> np.ndarray:
    v = np.asarray(amps, dtype=complex)
    return v / np.linalg.norm(v)


def canonical_states() -> dict[str, np.ndarray]:
    """Singlet/triplet, Bell and computational basis kets, plus the product state ``|++>``.

    The singlet is ``(|01> - |10>)/sqrt(2)``; every ket has its first nonzero
    amplitude real and positive.
    """
    return {
        "S0": _ket(0, 1, -1, 0),
        "T+1": _ket(1, 0, 0, 0),
        "T0": _ket(0, 1, 1, 0),
        "T-1": _ket(0, 0, 0, 1),
        "psi+": _ket(0, 1, 1, 0),
        "psi-": _ket(0, 1, -1, 0),
        "phi+": _ket(1, 0, 0, 1),
        "phi-": _ket(1, 0, 0, -1),
        "00": _ket(1, 0, 0, 0),
        "01": _ket(0, 1, 0, 0),
        "10": _ket(0, 0, 1, 0),
        "11": _ket(0, 0, 0, 1),
        "++": _ket(1, 1, 1, 1),
    }


def get_state(label: str) -> np.ndarray:
    states = canonical_states()
    try:
        return states[label]
    except KeyError:
        raise DomainError(f"unknown state {label!r}; known: {sorted(states)}") from None


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def pseudopure(psi: np.ndarray, epsilon: float = 1.0) -> np.ndarray:
    """``(1 - eps)/4 * 1 + eps |psi><psi|`` for ``0 < eps <= 1``."""
    if not 0.0 < epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon}")
    psi = np.asarray(psi, dtype=complex)
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-12:
        raise DomainError("psi is not normalized")
    return (1.0 - epsilon) / 4.0 * IDENTITY + epsilon * projector(psi)


def thermal_state(epsilon: float) -> np.ndarray:
    """High-temperature equilibrium ``1/4 + eps (I_z^1 + I_z^2)``."""
    return IDENTITY / 4.0 + epsilon * IZ


def deviation(rho: np.ndarray) -> np.ndarray:
    """Traceless part ``rho - tr(rho)/4 * 1``."""
    rho = np.asarray(rho, dtype=complex)
    return rho - np.trace(rho) / 4.0 * IDENTITY


def correlation(rho: np.ndarray, target: np.ndarray) -> float:
    """Normalized Frobenius overlap between the deviations of ``rho`` and ``|target><target|``.

    Only traceless parts enter, so the value is unchanged by any positive
    rescaling of ``rho`` or by adding identity (the pseudopure ``epsilon``
    drops out).
    """
    a = deviation(rho)
    b = deviation(projector(target))
    na = np.linalg.norm(a)
    if na < 1e-14:
        raise DegenerateStateError("state has no traceless part")
    nb = np.linalg.norm(b)
    c = float(np.real(np.vdot(b, a)) / (na * nb))
    return min(1.0, max(-1.0, c))


PAULI_LABELS = tuple(
    a + b for a, b in itertools.product("IXYZ", repeat=2) if a + b != "II"
)
_PAULI_OPS = {lab: np.kron(SIGMA[lab[0]], SIGMA[lab[1]]) for lab in PAULI_LABELS}


def pauli_expectations(rho: np.ndarray) -> dict[str, float]:
    """Expectations ``tr(rho sigma_a x sigma_b)`` of the 15 traceless products.

    Labels read left to right as spin 1, spin 2 (``"ZI"`` is sigma_z on spin 1).
    """
    rho = np.asarray(rho, dtype=complex)
    return {lab: float(np.real(np.trace(rho @ op))) for lab, op in _PAULI_OPS.items()}


def from_pauli_expectations(values: dict[str, float], trace: float = 1.0) -> np.ndarray:
    rho = trace * IDENTITY / 4.0
    for lab, v in values.items():
        rho = rho + v * _PAULI_OPS[lab] / 4.0
    return rho


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return float(np.max(np.abs(m - m.conj().T))) <= tol


def check_density_matrix(rho: np.ndarray) -> None:
    """Raise ``DomainError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise DomainError(f"expected a 4x4 matrix, got shape {rho.shape}")
    if not is_hermitian(rho):
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise DomainError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -POSITIVITY_SLACK:
        raise DomainError("density matrix has a negative eigenvalue")
