import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_meter.errors import InvariantViolation
from nonlocal_meter.qstate import (
    DensityMatrix,
    PureState,
    QubitRegister,
    basis_state,
    entropy_bits,
    fidelity,
    new_pure,
    partial_trace,
    tensor,
    to_density,
)

from oracles import haar_state, partial_trace_loop

R2 = math.sqrt(2)


def seeds():
    return st.integers(min_value=0, max_value=2**32 - 1)


class TestRegister:
    def test_roles_must_be_unique(self):
        with pytest.raises(ValueError):
            QubitRegister(("A", "A"))

    def test_size_limit(self):
        QubitRegister(tuple("abcdefgh"))
        with pytest.raises(ValueError):
            QubitRegister(tuple("abcdefghi"))

    def test_index_of(self):
        reg = QubitRegister(("A", "B", "N_A", "N_B", "M"))
        assert reg.index_of("N_B") == 3
        with pytest.raises(KeyError):
            reg.index_of("Q")


class TestNewPure:
    def test_basis_state(self):
        s = new_pure(("A", "B"), [1, 0, 0, 0])
        assert s.amplitude("00") == 1

    def test_phi4_amplitudes(self):
        s = new_pure(("A", "B"), np.array([2, R2, R2, 1]) / 3)
        assert np.isclose(np.linalg.norm(s.amplitudes), 1, atol=1e-12)
        assert np.isclose(s.amplitude("11"), 1 / 3)

    def test_renormalizes_near_unit_input(self):
        s = new_pure("A", [0.6, 0.8j * (1 + 1e-7)])
        assert abs(np.linalg.norm(s.amplitudes) - 1) < 1e-12

    @pytest.mark.parametrize(
        "amps",
        [[1, 0, 0], [0, 0, 0, 0], [np.nan, 0, 0, 1], [2, 0, 0, 0]],
        ids=["length", "zero", "nan", "off-norm"],
    )
    def test_rejects(self, amps):
        with pytest.raises(ValueError):
            new_pure(("A", "B"), amps)

    def test_immutable(self):
        s = basis_state(("A",), "0")
        with pytest.raises(ValueError):
            s.amplitudes[0] = 0

    def test_direct_construction_checks_drift(self):
        with pytest.raises(InvariantViolation):
            PureState(("A",), [1.0, 1e-4])


class TestTensor:
    def test_basis_kron(self):
        s = tensor(basis_state("A", "0"), basis_state("B", "1"))
        assert s.roles == ("A", "B")
        assert s.amplitude("01") == 1

    def test_uniform(self):
        plus = new_pure("A", [1 / R2, 1 / R2])
        s = tensor(plus, new_pure("B", [1 / R2, 1 / R2]))
        np.testing.assert_allclose(s.amplitudes, 0.5, atol=1e-15)

    def test_five_qubit_initial_state(self):
        sys_ = new_pure(("A", "B"), np.array([2, R2, R2, 1]) / 3)
        bell = new_pure(("N_A", "N_B"), np.array([1, 0, 0, 1]) / R2)
        s = tensor(sys_, bell, basis_state("M", "0"))
        assert s.roles == ("A", "B", "N_A", "N_B", "M")
        # a4 |11>_AB |11>_N |0>_M
        assert np.isclose(s.amplitude("11110"), 1 / 3 / R2)
        assert np.isclose(s.amplitude("00000"), 2 / 3 / R2)
        assert s.amplitude("00010") == 0

    def test_role_collision(self):
        with pytest.raises(ValueError):
            tensor(basis_state("A", "0"), basis_state("A", "1"))

    @settings(max_examples=30, deadline=None)
    @given(seeds())
    def test_associative(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (new_pure(r, haar_state(rng, 2)) for r in ("A", "B", "C"))
        left = tensor(tensor(a, b), c).amplitudes
        right = tensor(a, tensor(b, c)).amplitudes
        np.testing.assert_allclose(left, right, atol=1e-14)


class TestDensity:
    def test_basis(self):
        np.testing.assert_array_equal(to_density(basis_state("A", "0")).matrix, [[1, 0], [0, 0]])

    def test_bell_rank_one(self):
        rho = to_density(new_pure(("A", "B"), np.array([1, 0, 0, 1]) / R2))
        assert np.isclose(np.trace(rho.matrix), 1)
        assert np.linalg.matrix_rank(rho.matrix, tol=1e-10) == 1

    def test_phi4_plus_branch(self):
        # outer product of (2, 0, 0, 1)/sqrt(5), worked by hand
        rho = to_density(new_pure(("A", "B"), np.array([2, 0, 0, 1]) / math.sqrt(5)))
        np.testing.assert_allclose(np.diag(rho.matrix).real, [0.8, 0, 0, 0.2], atol=1e-15)
        assert np.isclose(rho.matrix[0, 3], 0.4) and np.isclose(rho.matrix[3, 0], 0.4)

    def test_validation(self):
        with pytest.raises(InvariantViolation):
            DensityMatrix(("A",), np.diag([0.5, 0.4]))
        with pytest.raises(InvariantViolation):
            DensityMatrix(("A",), [[0.5, 0.5], [0, 0.5]])
        with pytest.raises(InvariantViolation):
            DensityMatrix(("A",), np.diag([1.1, -0.1]))
        DensityMatrix(("A",), np.diag([1 + 1e-9, -1e-9]))  # tolerated tiny negative


class TestPartialTrace:
    def test_bell_gives_maximally_mixed(self):
        rho = partial_trace(new_pure(("A", "B"), np.array([1, 0, 0, 1]) / R2), {"A"})
        np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-15)

    def test_psi4_reduced(self):
        a = np.array([2, R2, R2, 1]) / 3
        # a1|00>|0>|0> + a2|01>|1>|1> + a3|10>|1>|1> + a4|11>|0>|0> on (A, B, N_B, M)
        psi4 = np.zeros(16, dtype=complex)
        psi4[0b0000], psi4[0b0111], psi4[0b1011], psi4[0b1100] = a
        rho = np.outer(psi4, psi4.conj())
        expected = partial_trace_loop(rho, 4, [0, 1])
        got = partial_trace(PureState(("A", "B", "N_B", "M"), psi4), {"A", "B"})
        np.testing.assert_allclose(got.matrix, expected, atol=1e-12)
        # coherence survives only inside each parity block
        assert abs(got.matrix[0, 3]) > 0.1 and abs(got.matrix[1, 2]) > 0.1
        assert abs(got.matrix[0, 1]) < 1e-15 and abs(got.matrix[0, 2]) < 1e-15

    def test_keeps_register_order(self):
        s = tensor(basis_state("A", "0"), basis_state("B", "1"), basis_state("C", "1"))
        rho = partial_trace(s, {"C", "A"})
        assert rho.roles == ("A", "C")
        assert np.isclose(rho.matrix[1, 1], 1)

    def test_empty_keep(self):
        with pytest.raises(ValueError):
            partial_trace(basis_state("A", "0"), set())

    @settings(max_examples=40, deadline=None)
    @given(seeds(), st.integers(1, 3), st.integers(1, 3))
    def test_product_recovers_factor(self, seed, na, nb):
        rng = np.random.default_rng(seed)
        ra = [f"a{i}" for i in range(na)]
        rb = [f"b{i}" for i in range(nb)]
        a = new_pure(ra, haar_state(rng, 2**na))
        b = new_pure(rb, haar_state(rng, 2**nb))
        reduced = partial_trace(to_density(tensor(a, b)), ra)
        np.testing.assert_allclose(reduced.matrix, to_density(a).matrix, atol=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(seeds())
    def test_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        roles = ["q0", "q1", "q2", "q3"]
        s = new_pure(roles, haar_state(rng, 16))
        keep = sorted(rng.choice(4, size=2, replace=False).tolist())
        got = partial_trace(s, {roles[k] for k in keep})
        rho = np.outer(s.amplitudes, s.amplitudes.conj())
        np.testing.assert_allclose(got.matrix, partial_trace_loop(rho, 4, keep), atol=1e-12)
        assert abs(np.trace(got.matrix) - 1) < 1e-12


class TestFidelity:
    def test_self(self):
        rho = to_density(new_pure(("A", "B"), np.array([1, 0, 0, 1]) / R2))
        assert fidelity(rho, rho) == pytest.approx(1, abs=1e-12)

    def test_orthogonal(self):
        r00 = to_density(basis_state(("A", "B"), "00"))
        r01 = to_density(basis_state(("A", "B"), "01"))
        assert fidelity(r00, r01) == 0

    def test_maximally_mixed(self, rng):
        mixed = DensityMatrix(("A", "B"), np.eye(4) / 4)
        pure = to_density(new_pure(("A", "B"), haar_state(rng, 4)))
        assert fidelity(mixed, pure) == pytest.approx(0.25, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fidelity(to_density(basis_state("A", "0")), to_density(basis_state(("A", "B"), "00")))

    @settings(max_examples=30, deadline=None)
    @given(seeds())
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        pure = to_density(new_pure(("A", "B"), haar_state(rng, 4)))
        w = rng.dirichlet(np.ones(3))
        vs = [haar_state(rng, 4) for _ in range(3)]
        mixed = DensityMatrix(("A", "B"), sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vs)))
        assert abs(fidelity(pure, mixed) - fidelity(mixed, pure)) < 1e-12


def test_entropy_of_bell_half():
    rho = partial_trace(new_pure(("A", "B"), np.array([0, 1, 1, 0]) / R2), {"A"})
    assert entropy_bits(rho) == pytest.approx(1.0, abs=1e-12)
