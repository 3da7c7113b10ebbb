"""
Nonlocal measurement of sigma_z x sigma_z through a shared Bell pair and a
local meter qubit, plus its weak-coupling variant and rotated observables.

Register roles: system qubits ``A`` (Alice) and ``B`` (Bob), ancilla pair
``N_A``/``N_B`` prepared in (|00> + |11>)/sqrt(2), and Bob's meter ``M``.

Circuit::

    CNOT(A -> N_A); keep N_A = |0>
    CNOT(B -> N_B); CNOT(N_B -> M)      # or controlled-rx(phi) for weak coupling
    measure N_B in {|+>, |->}           # erasure
    read M: |0> -> +1, |1> -> -1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional

import numpy as np

from . import gates
from .errors import InvariantViolation
from .gates import H, X, Y, Z, kron
from .measurement import Y_BASIS, project, project_all
from .qstate import (
    PureState,
    QubitRegister,
    basis_state,
    mixture,
    new_pure,
    normalized,
    tensor,
    to_density,
)

SYSTEM = QubitRegister(("A", "B"))
FULL = QubitRegister(("A", "B", "N_A", "N_B", "M"))

ErasurePolicy = Literal["keep-plus", "keep-both"]


@dataclass(frozen=True)
class SystemInput:
    """Amplitudes of a1|00> + a2|01> + a3|10> + a4|11> on (A, B)."""

    a1: complex
    a2: complex
    a3: complex
    a4: complex

    def __post_init__(self):
        amps = np.array([self.a1, self.a2, self.a3, self.a4], dtype=complex)
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm2 = float(np.vdot(amps, amps).real)
        if norm2 == 0.0:
            raise ValueError("degenerate input: zero vector")
        if abs(norm2 - 1.0) > 1e-6:
            raise ValueError(f"input norm^2 is {norm2:.9g}; use SystemInput.normalized")
        for name, a in zip(("a1", "a2", "a3", "a4"), amps):
            object.__setattr__(self, name, complex(a))

    @classmethod
    def normalized(cls, amplitudes: Iterable[complex]) -> "SystemInput":
        amps = list(amplitudes)
        if len(amps) != 4:
            raise ValueError(f"need 4 amplitudes, got {len(amps)}")
        return cls.from_state(normalized(SYSTEM, amps))

    @classmethod
    def from_state(cls, s: PureState) -> "SystemInput":
        if s.n != 2:
            raise ValueError("system input is a two-qubit state")
        return cls(*s.amplitudes)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4], dtype=complex)

    def state(self) -> PureState:
        return new_pure(SYSTEM, self.amplitudes)

    @property
    def p_plus(self) -> float:
        return abs(self.a1) ** 2 + abs(self.a4) ** 2

    @property
    def p_minus(self) -> float:
        return abs(self.a2) ** 2 + abs(self.a3) ** 2


_R2 = math.sqrt(2)
PRESETS = {
    # |+>|H>
    "phi1": SystemInput(1 / _R2, 0, 1 / _R2, 0),
    # |+>|+>
    "phi2": SystemInput(0.5, 0.5, 0.5, 0.5),
    # |+>|R>, R = (|H> + i|V>)/sqrt(2)
    "phi3": SystemInput(0.5, 0.5j, 0.5, 0.5j),
    # (sqrt2|H> + |V>)(sqrt2|H> + |V>)/3
    "phi4": SystemInput(2 / 3, _R2 / 3, _R2 / 3, 1 / 3),
}


def bell_pair(roles=("N_A", "N_B")) -> PureState:
    return new_pure(roles, np.array([1, 0, 0, 1]) / _R2)


def initial_state(inp: SystemInput) -> PureState:
    """|psi>_AB (x) |psi>_N (x) |0>_M on (A, B, N_A, N_B, M)."""
    return tensor(inp.state(), bell_pair(), basis_state("M", "0"))


def expected_psi4(inp: SystemInput) -> PureState:
    """Closed form after the meter CNOT, on (A, B, N_B, M):
    a1|00>|0>|0> + a2|01>|1>|1> + a3|10>|1>|1> + a4|11>|0>|0>."""
    amps = np.zeros(16, dtype=complex)
    for ab, a in enumerate(inp.amplitudes):
        parity = (ab >> 1) ^ (ab & 1)
        amps[(ab << 2) | (parity << 1) | parity] = a
    return PureState(("A", "B", "N_B", "M"), amps)


# -- meter pointer ------------------------------------------------------------


@dataclass(frozen=True)
class MeterPointer:
    """Meter qubit and its Bloch zenith angle ``q`` (the pointer position)."""

    state: PureState
    zenith_q: float = field(init=False)

    def __post_init__(self):
        if self.state.n != 1:
            raise ValueError("meter pointer is a single qubit")
        a0, a1 = self.state.amplitudes
        z = abs(a0) ** 2 - abs(a1) ** 2
        object.__setattr__(self, "zenith_q", float(math.acos(min(1.0, max(-1.0, z)))))

    @classmethod
    def at(cls, q: float, role: str = "M") -> "MeterPointer":
        """Pointer ``exp(i q/2 sigma_x)|0>``, which sits at zenith ``q`` for q in [0, pi]."""
        return cls(PureState((role,), gates.pauli_exp(q / 2, X) @ np.array([1, 0])))

    def evolve(self, u: np.ndarray) -> "MeterPointer":
        return MeterPointer(gates.apply_single(self.state, u, self.state.roles[0]))


# -- strong protocol ----------------------------------------------------------


@dataclass(frozen=True)
class ProtocolResult:
    outcome: int  # +1 or -1
    probability: float
    conditional_state: Optional[PureState]
    step2_success_prob: float
    erasure_outcome: str  # "+" or "-"
    erasure_prob: float


def _check_psi4(psi4: PureState, inp: SystemInput) -> None:
    ref = expected_psi4(inp)
    if np.max(np.abs(psi4.reorder(ref.roles).amplitudes - ref.amplitudes)) > 1e-10:
        raise InvariantViolation("state after the meter coupling deviates from the closed form")


def _couple(s: PureState, phi: float | None) -> PureState:
    s = gates.apply_cnot(s, "B", "N_B")
    if phi is None:
        return gates.apply_cnot(s, "N_B", "M")
    return gates.apply_controlled_rx(s, "N_B", "M", phi)


def _step2(inp: SystemInput) -> tuple[float, PureState]:
    s = gates.apply_cnot(initial_state(inp), "A", "N_A")
    rec = project(s, "N_A", "Z", 0)
    return rec.probability, rec.post_state


def _erasure_indices(policy: ErasurePolicy) -> tuple[int, ...]:
    if policy == "keep-plus":
        return (0,)
    if policy == "keep-both":
        return (0, 1)
    raise ValueError(f"unknown erasure policy {policy!r}")


def run_strong(inp: SystemInput, erasure_policy: ErasurePolicy = "keep-both") -> list[ProtocolResult]:
    """Run the six-step circuit; two results (+1, -1) per kept erasure branch."""
    p2, s = _step2(inp)
    psi4 = _couple(s, None)
    _check_psi4(psi4, inp)
    results = []
    for k in _erasure_indices(erasure_policy):
        erased = project_all(psi4, "N_B", "X")[k]
        if erased.post_state is None:
            continue
        for rec in project_all(erased.post_state, "M", "Z"):
            results.append(
                ProtocolResult(
                    outcome=+1 if rec.outcome == 0 else -1,
                    probability=rec.probability,
                    conditional_state=rec.post_state,
                    step2_success_prob=p2,
                    erasure_outcome="+-"[k],
                    erasure_prob=erased.probability,
                )
            )
    return results


def erased_state(inp: SystemInput, erasure_outcome: str = "+") -> PureState:
    """System plus meter on (A, B, M) right after the erasure step."""
    _, s = _step2(inp)
    return project(_couple(s, None), "N_B", "X", "+-".index(erasure_outcome)).post_state


# -- weak protocol ------------------------------------------------------------


@dataclass(frozen=True)
class WeakResult:
    phi: float
    p_meter_1: float
    predicted_p_meter_1: float
    step2_success_prob: float
    # meter outcome (0 or 1) -> system state averaged over erasure outcomes
    conditional_states: dict
    # (erasure outcome, meter outcome) -> (joint probability, pure system state or None);
    # "-" branch states already carry the Z_A Z_B feed-forward correction
    branches: dict


def run_weak(inp: SystemInput, phi: float) -> WeakResult:
    """Replace the meter CNOT with controlled-exp(-i phi/2 sigma_x) and read the meter.

    Both erasure ports are kept. On the "-" port a local Z on A and on B
    is applied before averaging, otherwise the two ports would dephase the
    system whenever the coupling is partial.
    """
    phi = gates.coupling_angle(phi)
    p2, s = _step2(inp)
    coupled = _couple(s, phi)
    branches = {}
    per_meter = {0: [], 1: []}
    for erased in project_all(coupled, "N_B", "X"):
        if erased.post_state is None:
            continue
        sign = "+-"[erased.outcome]
        after = erased.post_state
        if sign == "-":
            # the "-" port imprints (-1)^(a xor b); undo it locally so both ports agree
            after = gates.apply_single(gates.apply_single(after, Z, "A"), Z, "B")
        for rec in project_all(after, "M", "Z"):
            joint = erased.probability * rec.probability
            branches[(sign, rec.outcome)] = (joint, rec.post_state)
            if rec.post_state is not None:
                per_meter[rec.outcome].append((joint, to_density(rec.post_state).matrix))
    p1 = sum(w for w, _ in per_meter[1])
    conditional = {m: (mixture(SYSTEM, per_meter[m]) if per_meter[m] else None) for m in (0, 1)}
    return WeakResult(
        phi=phi,
        p_meter_1=p1,
        predicted_p_meter_1=inp.p_minus * math.sin(phi / 2) ** 2,
        step2_success_prob=p2,
        conditional_states=conditional,
        branches=branches,
    )


# -- rotated product observables ---------------------------------------------

PAULI_LABELS = ("X", "Y", "Z")

# columns of each matrix are the +1 / -1 eigenvectors; the rotation is its adjoint
_EIGENBASES = {
    "Z": np.eye(2, dtype=complex),
    "X": H,
    "Y": Y_BASIS,  # |R> = (|0> + i|1>)/sqrt(2) -> |0>, |L> -> |1>
}


@dataclass(frozen=True)
class ObservableSpec:
    pauli_A: str = "Z"
    pauli_B: str = "Z"

    def __post_init__(self):
        for p in (self.pauli_A, self.pauli_B):
            if p not in PAULI_LABELS:
                raise ValueError(f"unknown Pauli label {p!r}")

    @classmethod
    def parse(cls, text: str) -> "ObservableSpec":
        text = text.strip().upper()
        if len(text) != 2:
            raise ValueError(f"observable must be two Pauli letters, got {text!r}")
        return cls(text[0], text[1])

    def matrix(self) -> np.ndarray:
        return kron({"X": X, "Y": Y, "Z": Z}[self.pauli_A], {"X": X, "Y": Y, "Z": Z}[self.pauli_B])

    def __str__(self) -> str:
        return self.pauli_A + self.pauli_B


@dataclass(frozen=True)
class BasisRotation:
    pre_rotations: dict
    post_rotations: dict

    def pre_matrix(self) -> np.ndarray:
        return kron(self.pre_rotations["A"], self.pre_rotations["B"])


def rotate_observable(spec: ObservableSpec) -> BasisRotation:
    """Local unitaries R_A, R_B with R P R^dag = sigma_z, applied before and undone after."""
    pre = {role: _EIGENBASES[p].conj().T.copy() for role, p in (("A", spec.pauli_A), ("B", spec.pauli_B))}
    post = {role: u.conj().T for role, u in pre.items()}
    return BasisRotation(pre, post)


def run_observable(
    inp: SystemInput, spec: ObservableSpec, erasure_policy: ErasurePolicy = "keep-both"
) -> list[ProtocolResult]:
    """Measure ``pauli_A (x) pauli_B`` by conjugating the sigma_z sigma_z circuit."""
    rot = rotate_observable(spec)
    rotated = SystemInput.from_state(
        gates.apply_single(gates.apply_single(inp.state(), rot.pre_rotations["A"], "A"), rot.pre_rotations["B"], "B")
    )
    out = []
    for r in run_strong(rotated, erasure_policy):
        state = r.conditional_state
        if state is not None:
            state = gates.apply_single(state, rot.post_rotations["A"], "A")
            state = gates.apply_single(state, rot.post_rotations["B"], "B")
        out.append(
            ProtocolResult(r.outcome, r.probability, state, r.step2_success_prob, r.erasure_outcome, r.erasure_prob)
        )
    return out


# -- closed-form oracle -------------------------------------------------------


@dataclass(frozen=True)
class AnalyticExpectation:
    p_plus: float
    p_minus: float
    psi_plus: Optional[PureState]
    psi_minus: Optional[PureState]

    def probability(self, outcome: int) -> float:
        return self.p_plus if outcome == +1 else self.p_minus

    def state(self, outcome: int) -> Optional[PureState]:
        return self.psi_plus if outcome == +1 else self.psi_minus


def analytic_expected(inp: SystemInput, spec: ObservableSpec | None = None) -> AnalyticExpectation:
    """Outcome probabilities and post-measurement states from the spectral projectors.

    Uses ``(I +/- P (x) Q)/2`` applied directly to the input vector; no
    circuit is simulated.
    """
    obs = (spec or ObservableSpec()).matrix()
    psi = inp.amplitudes
    out = {}
    for sign in (+1, -1):
        branch = 0.5 * (psi + sign * (obs @ psi))
        p = float(np.vdot(branch, branch).real)
        state = PureState(SYSTEM, branch / math.sqrt(p)) if p >= 1e-12 else None
        out[sign] = (p if state is not None else 0.0, state)
    return AnalyticExpectation(out[1][0], out[-1][0], out[1][1], out[-1][1])
