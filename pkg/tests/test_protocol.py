import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_meter import gates
from nonlocal_meter.measurement import kraus_apply, sigma_zz_kraus
from nonlocal_meter.protocol import (
    PRESETS,
    MeterPointer,
    ObservableSpec,
    SystemInput,
    analytic_expected,
    erased_state,
    rotate_observable,
    run_observable,
    run_strong,
    run_weak,
)
from nonlocal_meter.qstate import fidelity, new_pure, state_overlap, to_density

from oracles import SX, SY, SZ, haar_state, kron_all, weak_protocol_bruteforce

R2 = math.sqrt(2)
PHI_GRID = [k * math.pi / 8 for k in range(9)]


def by_outcome(results, erasure="+"):
    return {r.outcome: r for r in results if r.erasure_outcome == erasure}


def overlap(state, ket):
    ket = np.asarray(ket, dtype=complex)
    return abs(np.vdot(ket / np.linalg.norm(ket), state.amplitudes)) ** 2


def haar_input(rng):
    return SystemInput(*haar_state(rng, 4))


class TestSystemInput:
    def test_norm_tolerance(self):
        SystemInput(1 + 1e-7, 0, 0, 0)
        with pytest.raises(ValueError):
            SystemInput(1.01, 0, 0, 0)

    def test_zero(self):
        with pytest.raises(ValueError):
            SystemInput(0, 0, 0, 0)
        with pytest.raises(ValueError):
            SystemInput.normalized([0, 0, 0, 0])

    def test_normalized(self):
        inp = SystemInput.normalized([2, R2, R2, 1])
        assert inp.p_plus == pytest.approx(5 / 9)


class TestRunStrong:
    def test_phi4(self):
        res = by_outcome(run_strong(PRESETS["phi4"]))
        assert res[1].probability == pytest.approx(5 / 9, abs=1e-10)
        assert res[-1].probability == pytest.approx(4 / 9, abs=1e-10)
        assert overlap(res[1].conditional_state, [2, 0, 0, 1]) == pytest.approx(1, abs=1e-10)
        assert overlap(res[-1].conditional_state, [0, 1, 1, 0]) == pytest.approx(1, abs=1e-10)

    def test_eigenstate(self):
        res = by_outcome(run_strong(SystemInput(1, 0, 0, 0)))
        assert res[1].probability == pytest.approx(1)
        assert res[-1].probability == 0 and res[-1].conditional_state is None

    def test_plus_r(self):
        # |+>|R> = (|0> + |1>)(|0> + i|1>)/2
        inp = SystemInput(0.5, 0.5j, 0.5, 0.5j)
        res = by_outcome(run_strong(inp))
        assert res[1].probability == pytest.approx(0.5, abs=1e-10)
        assert overlap(res[1].conditional_state, [1, 0, 0, 1j]) == pytest.approx(1, abs=1e-10)
        assert overlap(res[-1].conditional_state, [0, 1j, 1, 0]) == pytest.approx(1, abs=1e-10)

    def test_listed_amplitudes_for_plus_r_are_a_different_state(self):
        # (1/2, 1/2, 1/2, i/2) is not a product state, and its minus branch is |01> + |10>
        inp = SystemInput(0.5, 0.5, 0.5, 0.5j)
        res = by_outcome(run_strong(inp))
        assert overlap(res[-1].conditional_state, [0, 1j, 1, 0]) == pytest.approx(0.5, abs=1e-10)

    def test_keep_plus_policy(self):
        res = run_strong(PRESETS["phi2"], "keep-plus")
        assert {r.erasure_outcome for r in res} == {"+"} and len(res) == 2

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            run_strong(PRESETS["phi2"], "keep-minus")

    def test_erased_state_has_meter(self):
        s = erased_state(PRESETS["phi4"])
        assert s.roles == ("A", "B", "M")

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_bookkeeping(self, seed):
        inp = haar_input(np.random.default_rng(seed))
        res = run_strong(inp)
        assert len(res) == 4
        for r in res:
            assert abs(r.step2_success_prob - 0.5) < 1e-10
            assert abs(r.erasure_prob - 0.5) < 1e-10
        plus, minus = by_outcome(res, "+"), by_outcome(res, "-")
        for o in (1, -1):
            assert abs(plus[o].probability - minus[o].probability) < 1e-10
            if plus[o].conditional_state is not None:
                assert state_overlap(plus[o].conditional_state, minus[o].conditional_state) > 1 - 1e-10

    def test_haar_against_analytic(self, rng):
        for _ in range(200):
            inp = haar_input(rng)
            exp = analytic_expected(inp)
            for r in run_strong(inp):
                assert abs(r.probability - exp.probability(r.outcome)) < 1e-9
                assert state_overlap(r.conditional_state, exp.state(r.outcome)) > 1 - 1e-9


class TestAnalytic:
    def test_eigenstate(self):
        exp = analytic_expected(SystemInput(1, 0, 0, 0))
        assert exp.p_plus == 1 and exp.psi_minus is None

    def test_phi2_row(self):
        exp = analytic_expected(SystemInput(0, 1 / R2, 1 / R2, 0))
        assert exp.p_minus == pytest.approx(1)
        assert overlap(exp.psi_minus, [0, 1, 1, 0]) == pytest.approx(1)

    def test_phi4(self):
        exp = analytic_expected(PRESETS["phi4"])
        assert (exp.p_plus, exp.p_minus) == pytest.approx((5 / 9, 4 / 9), abs=1e-12)


class TestWeak:
    def test_zero_coupling(self, rng):
        inp = haar_input(rng)
        w = run_weak(inp, 0.0)
        assert w.p_meter_1 == pytest.approx(0, abs=1e-15)
        assert fidelity(w.conditional_states[0], to_density(inp.state())) == pytest.approx(1, abs=1e-10)
        assert w.conditional_states[1] is None

    def test_full_coupling_matches_strong(self):
        inp = PRESETS["phi4"]
        w = run_weak(inp, math.pi)
        assert w.p_meter_1 == pytest.approx(4 / 9, abs=1e-10)
        strong = by_outcome(run_strong(inp))
        for m, o in ((0, 1), (1, -1)):
            f = fidelity(w.conditional_states[m], to_density(strong[o].conditional_state))
            assert f == pytest.approx(1, abs=1e-10)

    def test_odd_eigenstate_half_pi(self):
        w = run_weak(SystemInput(0, 1, 0, 0), math.pi / 2)
        assert w.p_meter_1 == pytest.approx(0.5, abs=1e-12)
        assert w.p_meter_1 == pytest.approx(weak_protocol_bruteforce([0, 1, 0, 0], math.pi / 2), abs=1e-12)
        rho0 = w.conditional_states[0].matrix
        assert rho0[1, 1].real == pytest.approx(1, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            run_weak(PRESETS["phi1"], -0.1)
        with pytest.raises(ValueError):
            run_weak(PRESETS["phi1"], math.pi + 0.1)

    def test_law_against_bruteforce(self, rng):
        for _ in range(10):
            inp = haar_input(rng)
            prev = -1.0
            for phi in PHI_GRID:
                w = run_weak(inp, phi)
                brute = weak_protocol_bruteforce(inp.amplitudes, phi)
                assert abs(w.p_meter_1 - brute) < 1e-9
                assert abs(w.p_meter_1 - inp.p_minus * math.sin(phi / 2) ** 2) < 1e-9
                assert w.p_meter_1 >= prev - 1e-12
                prev = w.p_meter_1

    def test_eigenstates_not_disturbed(self, rng):
        # sigma_z sigma_z eigenstates keep their state whatever the meter reads
        for amps in ([0.6, 0, 0, 0.8j], [0, 0.8, -0.6, 0]):
            inp = SystemInput(*amps)
            w = run_weak(inp, 1.1)
            ideal = to_density(inp.state())
            for m in (0, 1):
                if w.conditional_states[m] is not None:
                    assert fidelity(w.conditional_states[m], ideal) == pytest.approx(1, abs=1e-10)

    def test_branch_weights_sum(self, rng):
        w = run_weak(haar_input(rng), 0.9)
        assert sum(p for p, _ in w.branches.values()) == pytest.approx(1, abs=1e-12)


class TestMeterPointer:
    def test_positions(self):
        assert MeterPointer.at(0.0).zenith_q == pytest.approx(0)
        assert MeterPointer.at(math.pi).zenith_q == pytest.approx(math.pi)

    @pytest.mark.parametrize("sign", [+1, -1])
    def test_quarter_turn_shifts_by_half_pi(self, sign):
        start = MeterPointer.at(math.pi / 2)
        assert start.zenith_q == pytest.approx(math.pi / 2, abs=1e-12)
        moved = start.evolve(gates.pauli_exp(sign * math.pi / 4, gates.X))
        assert moved.zenith_q == pytest.approx(math.pi / 2 + sign * math.pi / 2, abs=1e-10)

    def test_rejects_two_qubits(self):
        with pytest.raises(ValueError):
            MeterPointer(new_pure(("a", "b"), [1, 0, 0, 0]))


class TestObservables:
    def test_parse(self):
        assert str(ObservableSpec.parse("xz")) == "XZ"
        with pytest.raises(ValueError):
            ObservableSpec.parse("XQ")
        with pytest.raises(ValueError):
            ObservableSpec.parse("XYZ")

    def test_zz_rotation_is_identity(self):
        rot = rotate_observable(ObservableSpec("Z", "Z"))
        np.testing.assert_allclose(rot.pre_matrix(), np.eye(4))

    def test_xz_on_plus_zero(self):
        rot = rotate_observable(ObservableSpec("X", "Z"))
        np.testing.assert_allclose(rot.pre_rotations["A"], gates.H, atol=1e-15)
        inp = SystemInput(1 / R2, 0, 1 / R2, 0)
        res = by_outcome(run_observable(inp, ObservableSpec("X", "Z")))
        assert res[1].probability == pytest.approx(1, abs=1e-12)

    def test_xx_singlet(self):
        inp = SystemInput(0, 1 / R2, -1 / R2, 0)
        res = by_outcome(run_observable(inp, ObservableSpec("X", "X")))
        assert res[-1].probability == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("pa", "XYZ")
    @pytest.mark.parametrize("pb", "XYZ")
    def test_conjugated_kraus_are_spectral_projectors(self, pa, pb):
        paulis = {"X": SX, "Y": SY, "Z": SZ}
        obs = kron_all(paulis[pa], paulis[pb])
        ks = sigma_zz_kraus().conjugated(rotate_observable(ObservableSpec(pa, pb)).pre_matrix())
        np.testing.assert_allclose(ks.operators[0], (np.eye(4) + obs) / 2, atol=1e-12)
        np.testing.assert_allclose(ks.operators[1], (np.eye(4) - obs) / 2, atol=1e-12)

    def test_y_rotation_sends_r_to_zero(self):
        pre = rotate_observable(ObservableSpec("Y", "Z")).pre_rotations["A"]
        np.testing.assert_allclose(pre @ np.array([1, 1j]) / R2, [1, 0], atol=1e-15)

    def test_rotated_circuit_matches_spectral_oracle(self, rng):
        for spec in ("XZ", "YX", "YY", "ZX"):
            spec = ObservableSpec.parse(spec)
            for _ in range(10):
                inp = haar_input(rng)
                exp = analytic_expected(inp, spec)
                for r in run_observable(inp, spec):
                    assert abs(r.probability - exp.probability(r.outcome)) < 1e-9
                    if r.conditional_state is not None:
                        assert state_overlap(r.conditional_state, exp.state(r.outcome)) > 1 - 1e-9

    def test_post_state_repeats_under_observable(self, rng):
        spec = ObservableSpec("Y", "X")
        obs = spec.matrix()
        for r in run_observable(haar_input(rng), spec):
            v = r.conditional_state.amplitudes
            assert np.vdot(v, obs @ v).real == pytest.approx(r.outcome, abs=1e-10)


def test_kraus_identity_completeness_on_identity():
    ks = sigma_zz_kraus()
    assert np.max(np.abs(sum(k.conj().T @ k for k in ks.operators) - np.eye(4))) < 1e-12
    recs = kraus_apply(new_pure(("A", "B"), [0.5, 0.5, 0.5, 0.5]), ks)
    assert [r.outcome for r in recs] == [1, -1]
