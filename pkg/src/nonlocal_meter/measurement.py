"""
Projective measurement, post-selection and projector-valued Kraus channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence, Union

import numpy as np

from .errors import ImpossibleOutcome, InvariantViolation
from .gates import kron, P0, P1
from .qstate import PureState, QubitRegister, RegisterLike, as_register

ZERO_PROB = 1e-12

Z_BASIS = np.eye(2, dtype=complex)
X_BASIS = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
Y_BASIS = np.array([[1, 1], [1j, -1j]], dtype=complex) / math.sqrt(2)
BASES = {"Z": Z_BASIS, "X": X_BASIS, "Y": Y_BASIS}

BasisLike = Union[str, np.ndarray]


def as_basis(basis: BasisLike) -> np.ndarray:
    """A 2x2 matrix whose columns are the two basis kets."""
    if isinstance(basis, str):
        try:
            return BASES[basis.upper()]
        except KeyError:
            raise ValueError(f"unknown basis {basis!r}") from None
    b = np.asarray(basis, dtype=complex)
    if b.shape != (2, 2) or np.max(np.abs(b.conj().T @ b - np.eye(2))) > 1e-10:
        raise ValueError("basis must be a 2x2 matrix with orthonormal columns")
    return b


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: Hashable
    probability: float
    post_state: Optional[PureState]

    @property
    def possible(self) -> bool:
        return self.post_state is not None


def _branch(s: PureState, q: str, ket: np.ndarray) -> tuple[float, np.ndarray, QubitRegister]:
    axis = s.register.index_of(q)
    branch = np.tensordot(ket.conj(), s.tensor_view(), axes=([0], [axis]))
    amps = branch.reshape(-1)
    return float(np.vdot(amps, amps).real), amps, s.register.without(q)


def project(s: PureState, q: str, basis: BasisLike, outcome_index: int) -> MeasurementRecord:
    """Measure ``q`` in ``basis`` and keep branch ``outcome_index``.

    The measured qubit is removed from the register.  Raises
    :class:`ImpossibleOutcome` when the branch probability is below 1e-12.
    """
    if outcome_index not in (0, 1):
        raise ValueError(f"outcome_index must be 0 or 1, got {outcome_index!r}")
    b = as_basis(basis)
    p, amps, reg = _branch(s, q, b[:, outcome_index])
    if p < ZERO_PROB:
        raise ImpossibleOutcome(f"outcome {outcome_index} on {q!r} has probability {p:.3e}")
    return MeasurementRecord(outcome_index, p, PureState(reg, amps / math.sqrt(p)))


def project_all(s: PureState, q: str, basis: BasisLike) -> list[MeasurementRecord]:
    """Both branches of a single-qubit measurement; impossible ones carry no state."""
    b = as_basis(basis)
    out = []
    for k in (0, 1):
        p, amps, reg = _branch(s, q, b[:, k])
        state = PureState(reg, amps / math.sqrt(p)) if p >= ZERO_PROB else None
        out.append(MeasurementRecord(k, p if state is not None else 0.0, state))
    return out


@dataclass(frozen=True)
class KrausSet:
    """Labelled orthogonal projectors summing to identity on ``register``."""

    register: QubitRegister
    labels: tuple
    operators: tuple

    def __post_init__(self):
        reg = as_register(self.register)
        object.__setattr__(self, "register", reg)
        ops = []
        for k in self.operators:
            k = np.array(k, dtype=complex)
            k.flags.writeable = False
            ops.append(k)
        object.__setattr__(self, "operators", tuple(ops))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(ops) != len(self.labels):
            raise ValueError("labels and operators differ in length")
        eye = np.eye(reg.dim)
        total = np.zeros_like(eye, dtype=complex)
        for k in ops:
            if k.shape != eye.shape:
                raise ValueError(f"operator shape {k.shape} does not match register")
            if np.max(np.abs(k - k.conj().T)) > 1e-10 or np.max(np.abs(k @ k - k)) > 1e-10:
                raise InvariantViolation("Kraus operator is not a projector")
            total += k.conj().T @ k
        if np.max(np.abs(total - eye)) > 1e-10:
            raise InvariantViolation("Kraus operators are not complete")

    def conjugated(self, u: np.ndarray) -> "KrausSet":
        """Projectors ``U^dag K U``: measuring these equals rotating by U, then measuring K."""
        u = np.asarray(u, dtype=complex)
        return KrausSet(self.register, self.labels, tuple(u.conj().T @ k @ u for k in self.operators))


def sigma_zz_kraus(roles: RegisterLike = ("A", "B")) -> KrausSet:
    """{+1: |00><00| + |11><11|, -1: |01><01| + |10><10|}."""
    reg = as_register(roles)
    if reg.n != 2:
        raise ValueError("sigma_z x sigma_z acts on two qubits")
    plus = kron(P0, P0) + kron(P1, P1)
    minus = kron(P0, P1) + kron(P1, P0)
    return KrausSet(reg, (+1, -1), (plus, minus))


def kraus_apply(s: PureState, ks: KrausSet) -> list[MeasurementRecord]:
    """One record per label; zero-probability outcomes get ``post_state=None``."""
    if s.roles != ks.register.roles:
        s = s.reorder(ks.register.roles)
    records = []
    for label, k in zip(ks.labels, ks.operators):
        branch = k @ s.amplitudes
        p = float(np.vdot(branch, branch).real)
        if p < ZERO_PROB:
            records.append(MeasurementRecord(label, 0.0, None))
        else:
            records.append(MeasurementRecord(label, p, PureState(s.register, branch / math.sqrt(p))))
    total = sum(r.probability for r in records)
    if abs(total - 1.0) > 1e-10:
        raise InvariantViolation(f"outcome probabilities sum to {total!r}")
    return records


def sample_outcome(records: Sequence[MeasurementRecord], rng: np.random.Generator):
    """Draw one outcome label with the records' probabilities."""
    probs = np.array([r.probability for r in records], dtype=float)
    if probs.size == 0 or np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ValueError("malformed outcome distribution")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
    idx = rng.choice(len(records), p=probs / probs.sum())
    return records[int(idx)].outcome


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for ``stream`` derived from a 64-bit root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))
