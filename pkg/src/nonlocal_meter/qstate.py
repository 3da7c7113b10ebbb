"""
Dense state vectors and density matrices over small named-qubit registers.

Basis ordering: the role listed first in a register is the most significant
bit of the basis index, so ``|01>`` on register ``("A", "B")`` means A=0,
B=1 and sits at index 1.  Reshaping an amplitude vector to ``(2,) * n`` puts
role ``i`` on axis ``i``; every routine here relies on that.

States are immutable: the arrays they hold are flagged read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvariantViolation

MAX_QUBITS = 8

INPUT_NORM_TOL = 1e-6
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-8


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class QubitRegister:
    """Ordered, uniquely named qubit roles."""

    roles: tuple[str, ...]

    def __post_init__(self):
        roles = tuple(self.roles)
        object.__setattr__(self, "roles", roles)
        if len(set(roles)) != len(roles):
            raise ValueError(f"duplicate roles in register {roles}")
        if len(roles) > MAX_QUBITS:
            raise ValueError(f"register has {len(roles)} qubits, limit is {MAX_QUBITS}")
        for r in roles:
            if not isinstance(r, str) or not r:
                raise ValueError(f"role labels must be non-empty strings, got {r!r}")

    @property
    def n(self) -> int:
        return len(self.roles)

    @property
    def dim(self) -> int:
        return 2 ** len(self.roles)

    def index_of(self, role: str) -> int:
        try:
            return self.roles.index(role)
        except ValueError:
            raise KeyError(f"role {role!r} not in register {self.roles}") from None

    def without(self, *roles: str) -> "QubitRegister":
        for r in roles:
            self.index_of(r)
        return QubitRegister(tuple(r for r in self.roles if r not in roles))

    def __add__(self, other: "QubitRegister") -> "QubitRegister":
        clash = set(self.roles) & set(other.roles)
        if clash:
            raise ValueError(f"role collision: {sorted(clash)}")
        return QubitRegister(self.roles + other.roles)

    def __contains__(self, role: object) -> bool:
        return role in self.roles

    def __iter__(self):
        return iter(self.roles)

    def __len__(self) -> int:
        return len(self.roles)


RegisterLike = Union[QubitRegister, Sequence[str], str]


def as_register(reg: RegisterLike) -> QubitRegister:
    if isinstance(reg, QubitRegister):
        return reg
    if isinstance(reg, str):
        return QubitRegister((reg,))
    return QubitRegister(tuple(reg))


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector of length ``2**n`` over a register.

    Direct construction checks the engine tolerance (1e-10); use
    :func:`new_pure` for user input, which accepts slightly off-norm
    vectors and renormalizes them.
    """

    register: QubitRegister
    amplitudes: np.ndarray

    def __post_init__(self):
        reg = as_register(self.register)
        object.__setattr__(self, "register", reg)
        amps = _frozen(np.ravel(self.amplitudes))
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (reg.dim,):
            raise ValueError(
                f"expected {reg.dim} amplitudes for {reg.n} qubits, got {amps.size}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes contain NaN or Inf")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InvariantViolation(f"state norm^2 drifted to {norm2!r}")

    @property
    def n(self) -> int:
        return self.register.n

    @property
    def roles(self) -> tuple[str, ...]:
        return self.register.roles

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n)

    def amplitude(self, bits: str) -> complex:
        """Amplitude of a basis string such as ``"0110"`` (register order)."""
        if len(bits) != self.n or set(bits) - {"0", "1"}:
            raise ValueError(f"bad basis string {bits!r} for {self.n} qubits")
        return complex(self.amplitudes[int(bits, 2)]) if bits else complex(self.amplitudes[0])

    def reorder(self, roles: Sequence[str]) -> "PureState":
        """Same state, relabelled so that the register reads ``roles``."""
        roles = tuple(roles)
        if sorted(roles) != sorted(self.roles):
            raise ValueError(f"{roles} is not a permutation of {self.roles}")
        perm = [self.register.index_of(r) for r in roles]
        amps = np.transpose(self.tensor_view(), perm).reshape(-1)
        return PureState(QubitRegister(roles), amps)

    def inner(self, other: "PureState") -> complex:
        """``<self|other>``; registers must carry the same roles."""
        if other.roles != self.roles:
            other = other.reorder(self.roles)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self) -> str:
        return f"PureState(roles={self.roles}, amplitudes={np.round(self.amplitudes, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix over a register."""

    register: QubitRegister
    matrix: np.ndarray

    def __post_init__(self):
        reg = as_register(self.register)
        object.__setattr__(self, "register", reg)
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.shape != (reg.dim, reg.dim):
            raise ValueError(f"expected {reg.dim}x{reg.dim} matrix, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix contains NaN or Inf")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise InvariantViolation("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"density matrix trace is {tr!r}")
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min < -PSD_TOL:
            raise InvariantViolation(f"density matrix has eigenvalue {lam_min:.3e}")

    @property
    def n(self) -> int:
        return self.register.n

    @property
    def roles(self) -> tuple[str, ...]:
        return self.register.roles

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def new_pure(register: RegisterLike, amplitudes: Iterable[complex]) -> PureState:
    """Validate user amplitudes, renormalize exactly, and wrap them.

    Raises ``ValueError`` on a length mismatch, a zero vector, non-finite
    entries, or a norm further than 1e-6 from one.
    """
    reg = as_register(register)
    amps = np.asarray(list(amplitudes), dtype=complex)
    if amps.shape != (reg.dim,):
        raise ValueError(f"expected {reg.dim} amplitudes for {reg.n} qubits, got {amps.size}")
    if not np.all(np.isfinite(amps)):
        raise ValueError("amplitudes contain NaN or Inf")
    norm = np.linalg.norm(amps)
    if norm == 0.0:
        raise ValueError("zero vector is not a state")
    if abs(norm**2 - 1.0) > INPUT_NORM_TOL:
        raise ValueError(f"amplitudes have norm^2 {norm**2:.9g}, expected 1 within {INPUT_NORM_TOL}")
    return PureState(reg, amps / norm)


def normalized(register: RegisterLike, amplitudes: Iterable[complex]) -> PureState:
    """Like :func:`new_pure` but rescales any nonzero vector."""
    amps = np.asarray(list(amplitudes), dtype=complex)
    norm = np.linalg.norm(amps)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("cannot normalize a zero or non-finite vector")
    return new_pure(register, amps / norm)


def basis_state(register: RegisterLike, bits: str) -> PureState:
    reg = as_register(register)
    if len(bits) != reg.n:
        raise ValueError(f"basis string {bits!r} does not match {reg.n} qubits")
    amps = np.zeros(reg.dim, dtype=complex)
    amps[int(bits, 2) if bits else 0] = 1.0
    return PureState(reg, amps)


def tensor(*states: PureState) -> PureState:
    """Kronecker product; the left factor's roles become the high bits."""
    if not states:
        raise ValueError("tensor of nothing")
    reg = states[0].register
    amps = states[0].amplitudes
    for s in states[1:]:
        reg = reg + s.register
        amps = np.kron(amps, s.amplitudes)
    return PureState(reg, amps)


def to_density(s: PureState) -> DensityMatrix:
    return DensityMatrix(s.register, np.outer(s.amplitudes, s.amplitudes.conj()))


def mixture(register: RegisterLike, weighted: Iterable[tuple[float, np.ndarray]]) -> DensityMatrix:
    """Convex combination of matrices; weights are renormalized to sum to one."""
    reg = as_register(register)
    total = 0.0
    acc = np.zeros((reg.dim, reg.dim), dtype=complex)
    for w, m in weighted:
        total += w
        acc = acc + w * np.asarray(m, dtype=complex)
    if total <= 0:
        raise ValueError("mixture weights sum to zero")
    return DensityMatrix(reg, acc / total)


def partial_trace(rho: DensityMatrix | PureState, keep: Iterable[str]) -> DensityMatrix:
    """Reduce to the roles in ``keep``; kept roles retain their register order."""
    if isinstance(rho, PureState):
        rho = to_density(rho)
    keep = set(keep)
    if not keep:
        raise ValueError("keep set is empty")
    missing = keep - set(rho.roles)
    if missing:
        raise KeyError(f"roles {sorted(missing)} not in register {rho.roles}")
    n = rho.n
    kept = [i for i, r in enumerate(rho.roles) if r in keep]
    t = rho.matrix.reshape((2,) * (2 * n))
    # row axes 0..n-1, column axes n..2n-1; traced roles share a label
    row = list(range(n))
    col = [n + i if i in kept else i for i in range(n)]
    out = [i for i in kept] + [n + i for i in kept]
    reduced = np.einsum(t, row + col, out)
    d = 2 ** len(kept)
    return DensityMatrix(QubitRegister(tuple(rho.roles[i] for i in kept)), reduced.reshape(d, d))


def _matrix(x: DensityMatrix | PureState) -> tuple[tuple[str, ...], np.ndarray]:
    if isinstance(x, PureState):
        return x.roles, np.outer(x.amplitudes, x.amplitudes.conj())
    return x.roles, x.matrix


def fidelity(rho_exp: DensityMatrix | PureState, rho_ideal: DensityMatrix | PureState) -> float:
    """Overlap fidelity ``Tr(rho_exp rho_ideal)``.

    This is the linear overlap used for comparing a reconstruction against
    a pure target, not the Uhlmann fidelity.
    """
    roles_a, a = _matrix(rho_exp)
    roles_b, b = _matrix(rho_ideal)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if roles_a != roles_b:
        raise ValueError(f"register mismatch: {roles_a} vs {roles_b}")
    value = np.sum(a * b.T)  # Tr(AB) without forming the product
    if abs(value.imag) > 1e-10:
        raise InvariantViolation(f"fidelity has imaginary part {value.imag:.3e}")
    return float(min(max(value.real, 0.0), 1.0))


def state_overlap(a: PureState, b: PureState) -> float:
    """``|<a|b>|^2``, insensitive to global phase."""
    return abs(a.inner(b)) ** 2


def entropy_bits(rho: DensityMatrix) -> float:
    lam = np.clip(rho.eigenvalues(), 0.0, None)
    lam = lam[lam > 1e-15]
    return float(-np.sum(lam * np.log2(lam)))
