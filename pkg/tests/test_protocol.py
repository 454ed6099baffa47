"""Tests for stage timing, state preparation, detection and the MC runner."""

import math
import numpy as np
import pytest
from pydantic import ValidationError

from app.qtel.analytics.formulas import (Reading, alpha, efficiency_corrected,
                                         entangled_state,
                                         fidelity_first_principles,
                                         p_nd_alice, p_nd_bob, p_success,
                                         post_jump_state, teleported_rho,
                                         EntangledReading)
from app.qtel.analytics.haar import (average_over_inputs,
                                     weighted_average_over_inputs)
from app.qtel.dynamics.trajectory import (Channel, make_rng, no_jump_evolve,
                                          sample_jump)
from app.qtel.errors import ContractViolation
from app.qtel.hilbert.model import (ATOM1, ATOM2, CAV_B, E_LEVEL, FOCK_0,
                                    FOCK_1, G_LEVEL, PureState, qubit_label)
from app.qtel.hilbert.ops import (basis_state, overlap, tensor, to_density,
                                  trace_distance)
from app.qtel.protocol.detection import (CORRECTIONS, detection_stage,
                                         post_correction)
from app.qtel.protocol.model import (InputQubit, ProtocolOutcome, StageTimes,
                                     Status, TimingConvention)
from app.qtel.protocol.runner import run_entanglement, run_teleportation
from app.qtel.protocol.stages import (ALICE_COMPENSATION, detection_schedule,
                                      prep_schedule, prepare_alice,
                                      prepare_bob, solve_stage_times,
                                      teleportation_prep, zeeman_duration,
                                      zeeman_phase)


def _joint(q: InputQubit, p) -> PureState:
    alice, _ = prepare_alice(q, p)
    bob, _ = prepare_bob(p)
    atom1 = basis_state(qubit_label(ATOM1), {ATOM1: G_LEVEL})
    return tensor(tensor(atom1, alice), bob)


class TestInputQubit:

    def test_norm_checked(self):
        with pytest.raises(ValidationError):
            InputQubit(a=1.0, b=0.1)

    def test_normalize(self):
        q = InputQubit.normalize(3, 4j)
        assert q.pa == pytest.approx(0.36)
        assert q.b == pytest.approx(0.8j)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            InputQubit.normalize(0, 0)

    def test_haar_population_is_uniform(self, rng):
        pops = [InputQubit.haar_random(rng).pa for _ in range(4000)]
        assert np.mean(pops) == pytest.approx(0.5, abs=0.02)
        assert np.var(pops) == pytest.approx(1 / 12, abs=0.01)


class TestStageTimes:
    """Tests for the timing roots of the preparations."""

    def test_reference_roots(self, params):
        times = solve_stage_times(params)
        assert times.t_i == pytest.approx(0.250799, abs=1e-6)
        assert times.t_e == pytest.approx(0.375401, abs=1e-6)
        assert times.t_e > times.t_i

    def test_printed_root_differs_for_bob(self, params):
        printed = solve_stage_times(params, TimingConvention.AS_PRINTED)
        balanced = solve_stage_times(params)
        assert printed.t_i == balanced.t_i
        assert printed.t_e != pytest.approx(balanced.t_e, abs=1e-6)
        assert printed.t_e > printed.t_i

    def test_prep_duration(self):
        assert StageTimes(t_i=1.0, t_e=2.0).prep_duration == 2.0

    def test_lossless_limit(self, params):
        lossless = params.replace(kappa=0.0)
        e = 2 * math.pi
        times = solve_stage_times(lossless)
        assert times.t_i == pytest.approx(math.pi / (2 * e))
        assert times.t_e == pytest.approx(3 * math.pi / (4 * e))

    def test_negative_window_rejected(self, params):
        with pytest.raises(ValidationError):
            solve_stage_times(params).with_detection(-1.0)


class TestZeemanPhase:

    def test_duration(self, params):
        t = zeeman_duration(params, -1j)
        assert t == pytest.approx(1.5 * math.pi / params.delta_e)
        assert zeeman_duration(params, 1.0) == 0.0

    def test_relative_phase(self, params):
        q = InputQubit.normalize(1, 1)
        out = zeeman_phase(q.state(ATOM2), params, ATOM2, 1j)
        ratio = out.amplitudes[G_LEVEL] / out.amplitudes[E_LEVEL]
        assert ratio == pytest.approx(1j)

    def test_not_unimodular(self, params):
        with pytest.raises(ValueError):
            zeeman_duration(params, 2.0)


class TestPreparation:
    """Tests for Alice's mapping and Bob's atom-cavity entanglement."""

    @pytest.mark.parametrize("a,b", [(0.6, 0.8), (0.8j, 0.6), (1, 0), (0, 1)])
    def test_alice_mapping(self, params, a, b):
        """Cavity A holds ∝ aα|1⟩ + b|0⟩ with weight |a|²α² + |b|²."""
        q = InputQubit(a=a, b=b)
        cavity, survival = prepare_alice(q, params)
        al = alpha(params)
        assert survival == pytest.approx(q.pa * al**2 + q.pb, abs=1e-9)
        expected = np.zeros(2, dtype=np.complex128)
        expected[FOCK_1] = q.a * al
        expected[FOCK_0] = q.b
        target = PureState(label=cavity.label, amplitudes=expected)
        assert overlap(cavity, target) == pytest.approx(1.0, abs=1e-9)

    def test_bob_state(self, params):
        bob, survival = prepare_bob(params)
        ideal = np.zeros(4, dtype=np.complex128)
        ideal[2 * E_LEVEL + FOCK_0] = 1 / math.sqrt(2)
        ideal[2 * G_LEVEL + FOCK_1] = 1j / math.sqrt(2)
        target = PureState(label=bob.label, amplitudes=ideal)
        assert overlap(bob, target) == pytest.approx(1.0, abs=1e-9)
        assert survival == pytest.approx(p_nd_bob(params), abs=1e-10)
        assert abs(survival - 0.98) < 0.01

    def test_printed_timing_unbalances_bob(self, params):
        bob, _ = prepare_bob(params, TimingConvention.AS_PRINTED)
        e0 = abs(bob.amplitude({ATOM2: E_LEVEL, CAV_B: FOCK_0}))**2
        assert e0 != pytest.approx(0.5, abs=1e-6)

    def test_schedule_ends_together(self, params):
        times = solve_stage_times(params)
        stages = prep_schedule(params, times)
        assert [s.name for s in stages] == ["alice-phase", "bob-lead", "joint-prep"]
        assert stages[0].duration == pytest.approx(
            zeeman_duration(params, ALICE_COMPENSATION))
        assert stages[1].duration + stages[2].duration == pytest.approx(times.t_e)

    def test_schedule_matches_separate_preparations(self, params):
        """Running the joint schedule without jumps reproduces the product state."""
        q = InputQubit(a=0.6, b=0.8j)
        initial, schedule = teleportation_prep(q, params,
                                               solve_stage_times(params))
        psi = initial
        for stage in schedule:
            psi, _ = no_jump_evolve(psi, stage.h_eff, stage.duration)
        assert overlap(psi, _joint(q, params)) == pytest.approx(1.0, abs=1e-9)


class TestDetection:

    def test_post_jump_state(self, params):
        """The sampled post-click state matches the closed form for any t_j."""
        rng = make_rng(17)
        stage = detection_schedule(params, 200.0)[0]
        checked = 0
        for _ in range(100):
            q = InputQubit.haar_random(rng)
            sample = sample_jump(_joint(q, params), stage, rng, 200.0)
            if sample is None:
                continue
            expected = post_jump_state(sample.time, q, params, sample.channel)
            assert overlap(sample.state, expected) == pytest.approx(1.0, abs=1e-9)
            checked += 1
        assert checked > 50

    def test_zero_efficiency_never_succeeds(self, params, rng):
        q = InputQubit(a=0.6, b=0.8)
        out = detection_stage(_joint(q, params), 50.0, 0.0, rng, params)
        assert out.status == Status.NO_CLICK
        assert out.detector is None

    def test_correction_needs_detector(self, params):
        rho = to_density(InputQubit(a=0.6, b=0.8).state(ATOM2))
        with pytest.raises(ContractViolation):
            post_correction(rho, None, params)

    def test_corrections_undo_detector_phase(self, params):
        q = InputQubit(a=0.6, b=0.8)
        for channel, phase in CORRECTIONS.items():
            sign = 1j if channel == Channel.PLUS else -1j
            amps = np.array([q.a, sign * q.b])
            state = PureState(label=qubit_label(ATOM2), amplitudes=amps)
            fixed = post_correction(state, channel, params)
            assert overlap(fixed, q.state(ATOM2)) == pytest.approx(1.0)
            assert abs(phase) == 1.0

    def test_outcome_consistency(self):
        with pytest.raises(ValidationError):
            ProtocolOutcome(status=Status.SUCCESS)


class TestTeleportationRunner:
    """Monte-Carlo runs checked against the closed forms."""

    def test_ideal_detectors_fixed_input(self, params):
        q = InputQubit(a=0.6, b=0.8j)
        t_d = 50.0
        summary = run_teleportation(q, params, t_d, 4000, 7)
        stats = summary.stats
        expected = p_success(t_d, q, params, Reading.AS_NORM)
        assert abs(stats.success_rate - expected) < 3 * stats.success_stderr
        assert summary.fidelity_mc == pytest.approx(
            fidelity_first_principles(t_d, q, params), abs=1e-6)
        assert trace_distance(summary.mean_bob_rho,
                              teleported_rho(t_d, q, params)) < 1e-6

    def test_zero_efficiency(self, params):
        summary = run_teleportation(InputQubit(a=0.6, b=0.8), params, 50.0, 300,
                                    1, eta=0.0)
        assert summary.stats.counts[Status.SUCCESS] == 0
        assert summary.fidelity_mc is None

    def test_records_are_reproducible(self, params):
        a = run_teleportation(None, params, 20.0, 60, 5)
        b = run_teleportation(None, params, 20.0, 60, 5, workers=3)
        assert a.records == b.records

    def test_prep_decay_is_reported(self, params):
        """A strongly leaking cavity aborts some preparations."""
        lossy = params.replace(kappa=params.kappa * 100)
        summary = run_teleportation(InputQubit(a=1, b=0), lossy, 5.0, 400, 3)
        assert summary.stats.counts[Status.PREP_DECAY] > 0
        assert all(r.actual_clicks == 0 for r in summary.records
                   if r.status == Status.PREP_DECAY)

    @pytest.mark.slow
    def test_prep_success_follows_norm_reading(self, params):
        q = InputQubit(a=1, b=0)
        summary = run_teleportation(q, params, 1.0, 20_000, 11)
        stats = summary.stats
        norm = p_nd_alice(q, params, Reading.AS_NORM) * p_nd_bob(params)
        printed = p_nd_alice(q, params, Reading.AS_PRINTED) * p_nd_bob(params)
        assert abs(stats.prep_success_rate - norm) < 3 * stats.prep_success_stderr
        assert abs(stats.prep_success_rate - norm) < abs(stats.prep_success_rate -
                                                         printed)

    @pytest.mark.slow
    def test_haar_inputs(self, params):
        t_d = 50.0
        summary = run_teleportation(None, params, t_d, 10_000, 20240601)
        stats = summary.stats
        expected = average_over_inputs(
            lambda qi: p_success(t_d, qi, params, Reading.AS_NORM))
        assert abs(stats.success_rate - expected) < 3 * stats.success_stderr
        assert summary.fidelity_mc > 0.99

    @pytest.mark.slow
    def test_lossy_detectors(self, params):
        t_d = 50.0
        eta = 0.6
        summary = run_teleportation(None, params, t_d, 30_000, 99, eta=eta)

        def rep(qi):
            return efficiency_corrected(t_d, qi, params, eta)

        expected = weighted_average_over_inputs(lambda qi: rep(qi).f_eta,
                                                lambda qi: rep(qi).p_total)
        assert abs(summary.fidelity_mc - expected) < 3 * summary.fidelity_stderr


class TestEntanglementRunner:

    @pytest.mark.slow
    def test_heralded_state(self, params):
        t_d = 50.0
        eta = 0.6
        run = run_entanglement(params, t_d, 10_000, 4, eta=eta)
        exact = entangled_state(t_d, eta, params,
                                EntangledReading.FIRST_PRINCIPLES)
        assert trace_distance(run.mean_rho, exact) < 0.03

    def test_ideal_detectors(self, params):
        run = run_entanglement(params, 50.0, 400, 8, eta=1.0)
        assert run.mean_rho is not None
        psi = np.zeros(4, dtype=np.complex128)
        psi[2 * E_LEVEL + G_LEVEL] = psi[2 * G_LEVEL + E_LEVEL] = 1 / math.sqrt(2)
        bell = float(np.vdot(psi, run.mean_rho.matrix @ psi).real)
        assert bell > 0.95
