"""
Gate library and state-vector application.

Gates are plain complex ndarrays.  Single-qubit exponentials of Pauli-like
involutions use the closed form ``exp(i t P) = cos t I + i sin t P``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import InvariantViolation
from .qstate import PureState, QubitRegister

UNITARY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1, 1j]).astype(complex)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

for _m in (I2, X, Y, Z, H, S, P0, P1):
    _m.flags.writeable = False


def kron(*ms: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ms)


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


def check_unitary(u: np.ndarray, what: str = "gate") -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise InvariantViolation(f"{what} is not unitary")
    return u


def coupling_angle(phi: float) -> float:
    """Validate a coupling angle in radians; the legal range is [0, pi]."""
    phi = float(phi)
    if not math.isfinite(phi) or phi < 0.0 or phi > math.pi + 1e-12:
        raise ValueError(f"coupling angle {phi!r} outside [0, pi]")
    return min(phi, math.pi)


def pauli_exp(theta: float, p: np.ndarray) -> np.ndarray:
    """``exp(i theta P)`` for an involution ``P`` (``P @ P == I``)."""
    p = np.asarray(p, dtype=complex)
    eye = np.eye(p.shape[0])
    if np.max(np.abs(p @ p - eye)) > 1e-12:
        raise ValueError("pauli_exp needs an involution (P^2 = I)")
    return math.cos(theta) * eye + 1j * math.sin(theta) * p


def rx(phi: float) -> np.ndarray:
    """``exp(-i phi/2 sigma_x)``; no range check (used for inverses too)."""
    return pauli_exp(-phi / 2, X)


def controlled(u: np.ndarray) -> np.ndarray:
    """4x4 matrix of ``u`` controlled on the first (high) qubit being 1."""
    return kron(P0, I2) + kron(P1, np.asarray(u, dtype=complex))


CNOT = controlled(X)
CNOT.flags.writeable = False


def apply_unitary(s: PureState, u: np.ndarray, roles: Sequence[str]) -> PureState:
    """Apply a ``2^k x 2^k`` matrix to the listed roles (first role = high bit)."""
    roles = list(roles)
    if len(set(roles)) != len(roles):
        raise ValueError(f"repeated role in {roles}")
    k = len(roles)
    u = np.asarray(u, dtype=complex)
    if u.shape != (2**k, 2**k):
        raise ValueError(f"matrix shape {u.shape} does not act on {k} qubit(s)")
    axes = [s.register.index_of(r) for r in roles]
    psi = s.tensor_view()
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot leaves the acted-on axes in front; move them back
    out = np.moveaxis(out, list(range(k)), axes)
    return PureState(s.register, out.reshape(-1))


def apply_single(s: PureState, u: np.ndarray, q: str) -> PureState:
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError("single-qubit gate must be 2x2")
    check_unitary(u)
    return apply_unitary(s, u, [q])


def apply_controlled(s: PureState, u: np.ndarray, control: str, target: str) -> PureState:
    if control == target:
        raise ValueError("control and target must differ")
    check_unitary(u)
    return apply_unitary(s, controlled(u), [control, target])


def apply_cnot(s: PureState, control: str, target: str) -> PureState:
    if control == target:
        raise ValueError("control and target must differ")
    return apply_unitary(s, CNOT, [control, target])


def apply_controlled_rx(s: PureState, control: str, target: str, phi: float) -> PureState:
    """Controlled ``exp(-i phi/2 sigma_x)``; at phi = pi this is CNOT times -i on the control-1 block."""
    return apply_controlled(s, rx(coupling_angle(phi)), control, target)


def embed(u: np.ndarray, roles: Sequence[str], register: QubitRegister) -> np.ndarray:
    """Full-register matrix of ``u`` acting on ``roles``."""
    dim = register.dim
    cols = np.empty((dim, dim), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for j in range(dim):
        cols[:, j] = apply_unitary(PureState(register, eye[j]), u, roles).amplitudes
    return cols


def three_qubit_interaction(phi: float) -> np.ndarray:
    """``exp(-i phi/4 sigma_z sigma_z sigma_x)`` as a dense 8x8 unitary."""
    return pauli_exp(-coupling_angle(phi) / 4, kron(Z, Z, X))


# -- cascade / interaction equivalence ---------------------------------------
#
# Qubit order for the 8x8 matrices below is (B, N_B, M).  The cascade also
# flips N_B, which the bare interaction does not; the two agree once N_B is
# projected onto |+> (the erasure), because <+| X = <+|.

_ZZX = kron(Z, Z, X)
_ZZI = kron(Z, Z, I2)
_IIX = kron(I2, I2, X)
_PLUS_ROW = np.array([[1, 1]], dtype=complex) / math.sqrt(2)
_ERASE = kron(I2, _PLUS_ROW, I2)  # (B, M) <- (B, N_B, M)
# ZZ parity (+1 even, -1 odd) of the (B, N_B) bits of each 3-qubit column
_PARITY = np.array([1 - 2 * (((j >> 2) ^ (j >> 1)) & 1) for j in range(8)])


def cascade(phi: float | None = None) -> np.ndarray:
    """CNOT(B->N_B) followed by CNOT(N_B->M), or by controlled-rx(phi) when phi is given."""
    first = kron(CNOT, I2)
    second = kron(I2, CNOT if phi is None else controlled(rx(coupling_angle(phi))))
    return second @ first


def interaction_form(phi: float, compensation: float, sign: int = 1) -> np.ndarray:
    """``exp(-i s phi/4 ZZX) exp(i c ZZ) exp(i s phi/4 X)`` on (B, N_B, M)."""
    t = sign * phi / 4
    return pauli_exp(-t, _ZZX) @ pauli_exp(compensation, _ZZI) @ pauli_exp(t, _IIX)


def _align_global_phase(target: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    idx = np.unravel_index(np.argmax(np.abs(candidate)), candidate.shape)
    phase = target[idx] / candidate[idx]
    return candidate * (phase / abs(phase))


def erased_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """Max entrywise gap of the N_B-erased maps after quotienting a global phase."""
    a = _ERASE @ lhs
    b = _ERASE @ rhs
    return float(np.max(np.abs(a - _align_global_phase(a, b))))


@dataclass(frozen=True)
class InteractionFit:
    """Best match of a weak cascade to the von Neumann interaction form."""

    phi: float
    sign: int  # +1: exp(-i phi/4 ZZX) exp(+i phi/4 X); -1: opposite sense
    compensation: float  # angle c of the exp(i c ZZ) phase term
    residual: float


def fit_weak_interaction(phi: float) -> InteractionFit:
    """Derive the coupling sense and ZZ compensation that reproduce the weak cascade.

    For each sense, the per-parity phases needed to line the interaction up
    with the cascade are solved by least squares; their mean is a global
    phase and their half-difference is the compensation angle.  The sense
    with the smaller erased residual wins (ties go to +1).
    """
    phi = coupling_angle(phi)
    lhs = _ERASE @ cascade(phi)
    best = None
    for sign in (1, -1):
        rhs = _ERASE @ interaction_form(phi, 0.0, sign)
        lam = {}
        for parity in (1, -1):
            cols = _PARITY == parity
            num = np.vdot(rhs[:, cols], lhs[:, cols])
            lam[parity] = num / abs(num) if abs(num) > 1e-15 else 1.0
        comp = float(np.angle(lam[1] / lam[-1]) / 2)
        fitted = rhs * np.where(_PARITY == 1, lam[1], lam[-1])
        res = float(np.max(np.abs(lhs - fitted)))
        if best is None or res < best.residual - 1e-12:
            best = InteractionFit(phi, sign, comp, res)
    return best


def decomposition_check(phi: float | None = None) -> float:
    """Residual of the cascade-equals-interaction identity.

    With ``phi=None`` the two CNOTs are compared against
    ``exp(-i pi/4 ZZX) exp(i pi/4 ZZ) exp(i pi/4 X)``.  With a coupling
    angle, the second CNOT becomes controlled-``exp(-i phi/2 sigma_x)`` and
    the matching interaction is derived by :func:`fit_weak_interaction`.
    """
    if phi is None:
        return erased_residual(cascade(None), interaction_form(math.pi, math.pi / 4, 1))
    return fit_weak_interaction(phi).residual
