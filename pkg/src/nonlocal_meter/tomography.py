"""
Two-qubit polarization tomography on the 36 products of the six
single-photon eigenstates H, V, D, A, R, L.

Counts are Poisson per setting.  Reconstruction normalizes counts within
each of the nine basis pairs, inverts linearly by least squares on the
Pauli coefficients, then clips negative eigenvalues and renormalizes.
Everything past count generation is vectorized over a leading batch axis
so bootstrap resamples run as a single array computation.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .gates import I2, X, Y, Z, kron
from .qstate import DensityMatrix, PureState, QubitRegister, as_register, to_density

LABELS = ("H", "V", "D", "A", "R", "L")
_S2 = math.sqrt(2)
KETS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) / _S2,
    "A": np.array([1, -1], dtype=complex) / _S2,
    "R": np.array([1, 1j], dtype=complex) / _S2,
    "L": np.array([1, -1j], dtype=complex) / _S2,
}
BASIS_OF = {"H": "Z", "V": "Z", "D": "X", "A": "X", "R": "Y", "L": "Y"}

DEFAULT_REGISTER = QubitRegister(("P1pol", "P2pol"))


@dataclass(frozen=True, order=True)
class TomographySetting:
    basis_A: str
    basis_B: str

    def __post_init__(self):
        for b in (self.basis_A, self.basis_B):
            if b not in LABELS:
                raise ValueError(f"unknown projector label {b!r}")

    def projector(self) -> np.ndarray:
        ket = np.kron(KETS[self.basis_A], KETS[self.basis_B])
        return np.outer(ket, ket.conj())

    @property
    def group(self) -> tuple[str, str]:
        return BASIS_OF[self.basis_A], BASIS_OF[self.basis_B]

    def __str__(self) -> str:
        return self.basis_A + self.basis_B


ALL_SETTINGS = tuple(TomographySetting(a, b) for a, b in itertools.product(LABELS, LABELS))
HV_BLOCK = tuple(TomographySetting(a, b) for a, b in itertools.product("HV", "HV"))

_PAULI_BASIS = [kron(p, q) for p in (I2, X, Y, Z) for q in (I2, X, Y, Z)]
# design[k, j] = Tr(P_j Pi_k) / 4, so that p_k = design @ c with rho = sum_j c_j P_j / 4
_DESIGN = np.array(
    [[np.real(np.trace(pj @ s.projector())) / 4 for pj in _PAULI_BASIS] for s in ALL_SETTINGS]
)
_PINV = np.linalg.pinv(_DESIGN)
_PAULI_STACK = np.array(_PAULI_BASIS)
_GROUPS = sorted({s.group for s in ALL_SETTINGS})
_GROUP_INDEX = np.array([_GROUPS.index(s.group) for s in ALL_SETTINGS])
_HV_INDEX = np.array([ALL_SETTINGS.index(s) for s in HV_BLOCK])


@dataclass(frozen=True)
class CountsTable:
    """Coincidence counts per setting.

    Counts are integers when sampled; :func:`expected_counts` fills in
    their exact (real) means for noiseless checks.
    """

    counts: Mapping[TomographySetting, float]
    mean_shots: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        for s, c in self.counts.items():
            if not isinstance(s, TomographySetting):
                raise TypeError(f"count keys must be TomographySetting, got {s!r}")
            if c < 0 or not math.isfinite(c):
                raise ValueError(f"bad count {c!r} for {s}")

    def vector(self) -> np.ndarray:
        missing = [str(s) for s in ALL_SETTINGS if s not in self.counts]
        if missing:
            raise ValueError(f"incomplete tomography: missing settings {missing}")
        return np.array([self.counts[s] for s in ALL_SETTINGS], dtype=float)

    def total(self, settings: Sequence[TomographySetting] = HV_BLOCK) -> float:
        return float(sum(self.counts.get(s, 0) for s in settings))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["basisA", "basisB", "count"])
        for s in sorted(self.counts):
            c = self.counts[s]
            w.writerow([s.basis_A, s.basis_B, int(c) if float(c).is_integer() else repr(float(c))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CountsTable":
        counts = {}
        for row in csv.DictReader(io.StringIO(text)):
            c = float(row["count"])
            counts[TomographySetting(row["basisA"], row["basisB"])] = int(c) if c.is_integer() else c
        return cls(counts)


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def __str__(self) -> str:
        return f"{self.value:.6f} +/- {self.sigma:.6f}"


@dataclass(frozen=True)
class BranchEstimates:
    F_plus: EstimateWithError
    F_minus: EstimateWithError
    P_plus: EstimateWithError
    P_minus: EstimateWithError
    rho_plus: DensityMatrix = field(repr=False)
    rho_minus: DensityMatrix = field(repr=False)


def _rho_matrix(rho: Union[DensityMatrix, PureState, np.ndarray]) -> np.ndarray:
    if isinstance(rho, PureState):
        rho = to_density(rho)
    if isinstance(rho, DensityMatrix):
        if rho.n != 2:
            raise ValueError("tomography handles two-qubit states")
        return rho.matrix
    m = np.asarray(rho, dtype=complex)
    DensityMatrix(DEFAULT_REGISTER, m)  # validates
    return m


def setting_probabilities(rho, settings: Sequence[TomographySetting] = ALL_SETTINGS) -> np.ndarray:
    m = _rho_matrix(rho)
    return np.array([max(0.0, float(np.real(np.trace(m @ s.projector())))) for s in settings])


def expected_counts(rho, mean_shots: float, settings: Sequence[TomographySetting] = ALL_SETTINGS) -> CountsTable:
    """Noise-free counts: each setting gets exactly ``mean_shots * Tr(rho Pi)``."""
    probs = setting_probabilities(rho, settings)
    return CountsTable(dict(zip(settings, mean_shots * probs)), mean_shots)


def simulate_counts(
    rho, settings: Sequence[TomographySetting] = ALL_SETTINGS, mean_shots: float = 1e5, seed: int = 0
) -> CountsTable:
    if not mean_shots > 0:
        raise ValueError("mean_shots must be positive")
    probs = setting_probabilities(rho, settings)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_shots * probs)
    return CountsTable({s: int(c) for s, c in zip(settings, counts)}, mean_shots, seed)


def _frequencies(counts: np.ndarray) -> np.ndarray:
    """Normalize (batch, 36) counts within each basis pair; empty groups become uniform."""
    freqs = np.empty_like(counts, dtype=float)
    for g in range(len(_GROUPS)):
        cols = _GROUP_INDEX == g
        tot = counts[:, cols].sum(axis=1, keepdims=True)
        safe = np.where(tot > 0, tot, 1.0)
        freqs[:, cols] = np.where(tot > 0, counts[:, cols] / safe, 0.25)
    return freqs


def _invert(counts: np.ndarray) -> np.ndarray:
    """(batch, 36) counts -> (batch, 4, 4) PSD unit-trace matrices."""
    coeffs = _frequencies(counts) @ _PINV.T
    rho = np.einsum("bj,jkl->bkl", coeffs.astype(complex), _PAULI_STACK) / 4
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    w = w / w.sum(axis=1, keepdims=True)
    return np.einsum("bij,bj,bkj->bik", v, w, v.conj())


def reconstruct(counts: CountsTable, register=DEFAULT_REGISTER) -> DensityMatrix:
    vec = counts.vector()
    if vec.sum() <= 0:
        raise ValueError("all counts are zero")
    return DensityMatrix(as_register(register), _invert(vec[None, :])[0])


def _fid_batch(rhos: np.ndarray, ideal: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("bij,ji->b", rhos, ideal))


def estimate_fidelity_and_probability(
    counts_plus: CountsTable,
    counts_minus: CountsTable,
    ideal_plus,
    ideal_minus,
    resamples: int = 200,
    seed: int = 0,
) -> BranchEstimates:
    """Fidelities of both reconstructed branches and the branch probabilities.

    Probabilities come from summed H/V-block coincidences,
    ``P+ = N+ / (N+ + N-)``.  Errors are the standard deviation over a
    parametric bootstrap that redraws every count as Poisson around its
    observed value and reruns the whole pipeline.
    """
    if resamples < 100:
        raise ValueError("need at least 100 bootstrap resamples")
    cp, cm = counts_plus.vector(), counts_minus.vector()
    if cp.sum() + cm.sum() <= 0:
        raise ValueError("zero total counts")
    ip, im = _rho_matrix(ideal_plus), _rho_matrix(ideal_minus)

    def pipeline(bp: np.ndarray, bm: np.ndarray):
        fp = _fid_batch(_invert(bp), ip)
        fm = _fid_batch(_invert(bm), im)
        npl, nmi = bp[:, _HV_INDEX].sum(axis=1), bm[:, _HV_INDEX].sum(axis=1)
        tot = npl + nmi
        pp = np.where(tot > 0, npl / np.where(tot > 0, tot, 1.0), 0.5)
        return fp, fm, pp

    fp, fm, pp = pipeline(cp[None, :], cm[None, :])
    if cp[_HV_INDEX].sum() + cm[_HV_INDEX].sum() <= 0:
        raise ValueError("zero total counts in the H/V block")
    rng = np.random.default_rng(seed)
    bp = rng.poisson(np.broadcast_to(cp, (resamples, cp.size)))
    bm = rng.poisson(np.broadcast_to(cm, (resamples, cm.size)))
    sfp, sfm, spp = (x.std(ddof=1) for x in pipeline(bp.astype(float), bm.astype(float)))
    reg = DEFAULT_REGISTER
    return BranchEstimates(
        F_plus=EstimateWithError(float(fp[0]), float(sfp)),
        F_minus=EstimateWithError(float(fm[0]), float(sfm)),
        P_plus=EstimateWithError(float(pp[0]), float(spp)),
        P_minus=EstimateWithError(float(1 - pp[0]), float(spp)),
        rho_plus=reconstruct(counts_plus, reg) if cp.sum() > 0 else None,
        rho_minus=reconstruct(counts_minus, reg) if cm.sum() > 0 else None,
    )


def apply_depolarizing(rho: DensityMatrix, p: float) -> DensityMatrix:
    """``(1 - p) rho + p I/d``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing strength {p!r} outside [0, 1]")
    d = rho.register.dim
    return DensityMatrix(rho.register, (1 - p) * rho.matrix + p * np.eye(d) / d)
