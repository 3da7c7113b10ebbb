"""
Linear-optics realization with two photons, each carrying three qubits:

* polarization  H=0, V=1   (system qubit: photon 1 is A, photon 2 is B)
* path          d=0, u=1   (Bob: the meter, initially |d>)
* OAM           r=0, l=1   (the shared ancilla pair, (|rr> - |ll>)/sqrt(2))

Bob's path and OAM swap jobs relative to the abstract circuit: the PBS
writes B into the path, the Dove prism in the up arm writes the path into
the OAM, the path is erased in (|d> + |u>)/sqrt(2), and the OAM is read as
the outcome (r -> +1, l -> -1).

Detectors are modelled as projections that keep the qubit in the register
(pinned to the detected value), so the state stays on the fixed 6-qubit
register throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import gates
from .errors import ImpossibleOutcome
from .gates import I2, X, Z, kron, P0, P1
from .protocol import SystemInput
from .qstate import DensityMatrix, PureState, QubitRegister, fidelity, partial_trace, tensor, new_pure

ROLES = ("P1pol", "P1path", "P1oam", "P2pol", "P2path", "P2oam")
REGISTER = QubitRegister(ROLES)
POLARIZATION = ("P1pol", "P2pol")

H_, V_ = 0, 1
D_, U_ = 0, 1
R_, L_ = 0, 1

ELEMENT_KINDS = ("PBS", "HWP", "QWP", "DovePrism", "SPP", "BS_OAM", "PathPrismBS", "Compensator")


@dataclass(frozen=True)
class OpticalElement:
    kind: str
    photon: int
    theta: float = 0.0  # wave-plate fast-axis angle from H, radians
    arm: Optional[str] = None  # "d" or "u" for elements that sit in one arm
    note: str = ""

    def roles(self) -> tuple[str, ...]:
        p = f"P{self.photon}"
        if self.kind in ("HWP", "QWP"):
            return (p + "pol",)
        if self.kind == "PBS":
            return (p + "pol", p + "path")
        if self.kind in ("DovePrism", "BS_OAM"):
            return (p + "path", p + "oam")
        if self.kind in ("PathPrismBS", "Compensator"):
            return (p + "path",)
        if self.kind == "SPP":
            return (p + "oam",)
        raise ValueError(f"unknown element kind {self.kind!r}")


@dataclass(frozen=True)
class Detection:
    """Post-selection on a mode value (a detector click in that port)."""

    photon: int
    mode: str  # "path" or "oam"
    value: int
    note: str = ""

    @property
    def role(self) -> str:
        return f"P{self.photon}{self.mode}"


@dataclass(frozen=True)
class PortReadout:
    """Final outcome read from which port fired."""

    photon: int
    mode: str
    outcomes: tuple  # outcome label for value 0, value 1

    @property
    def role(self) -> str:
        return f"P{self.photon}{self.mode}"


Step = Union[OpticalElement, Detection, PortReadout]


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def hwp(theta: float) -> np.ndarray:
    return _rot(theta) @ np.diag([1, -1]).astype(complex) @ _rot(-theta)


def qwp(theta: float) -> np.ndarray:
    return _rot(theta) @ np.diag([1, 1j]) @ _rot(-theta)


def element_unitary(e: OpticalElement) -> np.ndarray:
    """Matrix over ``e.roles()`` (first role is the high bit)."""
    k = e.kind
    if k == "HWP":
        return hwp(e.theta)
    if k == "QWP":
        return qwp(e.theta)
    if k == "PBS":
        # H transmits, V reflects: V toggles the arm
        return gates.CNOT.copy()
    if k == "DovePrism":
        if e.arm == "u":
            return gates.controlled(X)
        if e.arm == "d":
            return kron(P0, X) + kron(P1, I2)
        raise ValueError("Dove prism needs arm 'd' or 'u'")
    if k == "SPP":
        # |r> -> |G> relabels the detectable mode; no change on the qubit
        return I2.copy()
    if k == "Compensator":
        return I2.copy()
    if k == "BS_OAM":
        # transmitted amplitude keeps its OAM, reflected one gets i and flips r <-> l
        return (kron(I2, I2) + 1j * kron(X, X)) / math.sqrt(2)
    if k == "PathPrismBS":
        # prism phase -i on the up arm, then a 50:50 BS; port d projects onto (|d>+|u>)/sqrt(2)
        bs = np.array([[1, 1j], [1j, 1]], dtype=complex) / math.sqrt(2)
        return bs @ np.diag([1, -1j])
    raise ValueError(f"unknown element kind {k!r}")


def apply_element(s: PureState, e: OpticalElement) -> PureState:
    return gates.apply_unitary(s, element_unitary(e), e.roles())


def assemble_alice() -> list[Step]:
    deg45 = math.pi / 4
    return [
        OpticalElement("PBS", 1),
        OpticalElement("Compensator", 1, arm="d"),
        OpticalElement("DovePrism", 1, arm="u"),
        OpticalElement("HWP", 1, deg45),
        OpticalElement("PBS", 1, note="recombines both arms into the up port"),
        OpticalElement("HWP", 1, deg45),
        # the source pair carries a relative minus sign; a 0-degree HWP (sigma_z) removes it
        OpticalElement("HWP", 1, 0.0, note="source sign compensation"),
        OpticalElement("SPP", 1),
        Detection(1, "oam", R_, note="Alice's OAM in r"),
    ]


def assemble_bob() -> list[Step]:
    return [
        OpticalElement("PBS", 2),
        OpticalElement("DovePrism", 2, arm="u"),
        OpticalElement("PathPrismBS", 2),
        Detection(2, "path", D_, note="erasure port (|d>+|u>)/sqrt(2)"),
        OpticalElement("BS_OAM", 2),
        OpticalElement("SPP", 2),
        Detection(2, "oam", R_, note="fibre-coupled Gaussian mode"),
        PortReadout(2, "path", (+1, -1)),
    ]


def assembly_unitary(steps: Sequence[Step]) -> np.ndarray:
    """64x64 product of every optical element in ``steps`` (detections skipped)."""
    u = np.eye(REGISTER.dim, dtype=complex)
    for e in steps:
        if isinstance(e, OpticalElement):
            u = gates.embed(element_unitary(e), e.roles(), REGISTER) @ u
    return u


def encode_initial(inp: SystemInput) -> PureState:
    """Polarization amplitudes (x) (|rr> - |ll>)/sqrt(2) (x) both photons on path d."""
    pol = new_pure(POLARIZATION, inp.amplitudes)
    oam = new_pure(("P1oam", "P2oam"), np.array([1, 0, 0, -1]) / math.sqrt(2))
    path = new_pure(("P1path", "P2path"), np.array([1, 0, 0, 0]))
    return tensor(pol, oam, path).reorder(ROLES)


def _pin(s: PureState, role: str, value: int) -> tuple[float, Optional[PureState]]:
    """Project ``role`` onto ``value`` without removing it; returns (prob, state)."""
    t = np.array(s.tensor_view())
    axis = s.register.index_of(role)
    idx = [slice(None)] * s.n
    idx[axis] = 1 - value
    t[tuple(idx)] = 0.0
    amps = t.reshape(-1)
    p = float(np.vdot(amps, amps).real)
    if p < 1e-12:
        return 0.0, None
    return p, PureState(s.register, amps / math.sqrt(p))


def evolve(s: PureState, steps: Sequence[Step]) -> tuple[PureState, list[float]]:
    """Run elements and detections up to (not including) a port readout."""
    probs = []
    for e in steps:
        if isinstance(e, OpticalElement):
            s = apply_element(s, e)
        elif isinstance(e, Detection):
            p, s = _pin(s, e.role, e.value)
            if s is None:
                raise ImpossibleOutcome(f"detector {e.role}={e.value} never fires")
            probs.append(p)
        else:
            break
    return s, probs


def dephase(rho: DensityMatrix, role: str, visibility: float) -> DensityMatrix:
    """``v rho + (1 - v) D(rho)`` with D the dephasing of ``role`` in its H/V basis."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility {visibility!r} outside [0, 1]")
    zr = gates.embed(Z, [role], rho.register)
    m = rho.matrix
    return DensityMatrix(rho.register, 0.5 * (1 + visibility) * m + 0.5 * (1 - visibility) * zr @ m @ zr)


@dataclass(frozen=True)
class OpticsOutcome:
    outcome: int
    probability: float  # among detected coincidences
    state: Optional[DensityMatrix]  # polarization of (P1pol, P2pol)


@dataclass(frozen=True)
class SetupResult:
    outcomes: dict  # +1 / -1 -> OpticsOutcome
    alice_herald_prob: float
    erasure_prob: float
    readout_efficiency: float
    counts: Optional[dict] = None

    @property
    def herald_prob(self) -> float:
        return self.alice_herald_prob * self.erasure_prob


def run_setup(
    inp: SystemInput,
    seed: Optional[int] = None,
    *,
    visibility: Union[float, tuple[float, float]] = 1.0,
    shots: Optional[float] = None,
) -> SetupResult:
    """Evolve the encoded pair through both assemblies and read Bob's port.

    ``visibility`` (one value, or one per interferometer) dephases the
    polarization qubit passing through that interferometer.  With ``shots``
    and ``seed`` the result also carries Poisson coincidence counts per
    outcome, with mean ``shots`` times the outcome probability.
    """
    v_a, v_b = (visibility, visibility) if np.isscalar(visibility) else visibility
    s = encode_initial(inp)
    s, p_alice = evolve(s, assemble_alice())
    bob = assemble_bob()
    s, p_bob = evolve(s, bob)
    readout = bob[-1]
    # p_bob = [erasure port, readout detection]
    erasure_p, detect_p = p_bob
    outcomes = {}
    for value, label in enumerate(readout.outcomes):
        p, branch = _pin(s, readout.role, value)
        if branch is None:
            outcomes[label] = OpticsOutcome(label, 0.0, None)
            continue
        rho = partial_trace(branch, POLARIZATION)
        if v_a < 1.0:
            rho = dephase(rho, "P1pol", v_a)
        if v_b < 1.0:
            rho = dephase(rho, "P2pol", v_b)
        outcomes[label] = OpticsOutcome(label, p, rho)
    # the readout loses half the photons independently of the outcome
    efficiency = detect_p
    counts = None
    if shots is not None:
        if seed is None:
            raise ValueError("sampling coincidences needs a seed")
        rng = np.random.default_rng(seed)
        counts = {lab: int(rng.poisson(shots * o.probability)) for lab, o in outcomes.items()}
    return SetupResult(outcomes, p_alice[0], erasure_p, efficiency, counts)


def compare_with_protocol(result: SetupResult, expected) -> tuple[float, float]:
    """(total-variation distance, minimum state fidelity) against an analytic expectation."""
    tv = 0.5 * sum(abs(result.outcomes[o].probability - expected.probability(o)) for o in (+1, -1))
    fids = []
    for o in (+1, -1):
        ideal = expected.state(o)
        got = result.outcomes[o].state
        if ideal is None or got is None:
            continue
        fids.append(fidelity(got, PureState(POLARIZATION, ideal.amplitudes)))
    return tv, min(fids)


def source_coincidence_state() -> tuple[float, PureState]:
    """Two H, r photons meeting on the OAM beam splitter, one per output port.

    Photon 1 enters port d, photon 2 port u.  Post-selecting one photon per
    port and labelling photons by output port gives the OAM pair state on
    (port-d photon, port-u photon).  Returns (coincidence probability, state).
    """
    bs = (kron(I2, I2) + 1j * kron(X, X)) / math.sqrt(2)
    ph1 = bs @ np.array([1, 0, 0, 0], dtype=complex)  # (path, oam) = (d, r)
    ph2 = bs @ np.array([0, 0, 1, 0], dtype=complex)  # (u, r)
    two = np.kron(ph1, ph2).reshape(2, 2, 2, 2)  # path1, oam1, path2, oam2
    out = np.zeros((2, 2), dtype=complex)  # oam of port-d photon, oam of port-u photon
    out += two[D_, :, U_, :]
    out += two[U_, :, D_, :].T
    amps = out.reshape(-1)
    p = float(np.vdot(amps, amps).real)
    return p, PureState(("P1oam", "P2oam"), amps / math.sqrt(p))
