"""Tests for the closed-form probabilities, fidelities and Haar averages."""

import math
import numpy as np
import pytest

from app.qtel.analytics.formulas import (EntangledReading, Reading, alpha,
                                         bell_weight, beta,
                                         efficiency_corrected,
                                         entangled_state, fidelity_printed,
                                         fidelity_first_principles,
                                         fidelity_report, p_nd_alice,
                                         p_nd_bob, p_no_decay, p_one_decay,
                                         p_success, p_two_decay,
                                         post_jump_state, teleported_rho)
from app.qtel.analytics.haar import (average_over_inputs, input_from_population,
                                     sample_average,
                                     weighted_average_over_inputs)
from app.qtel.dynamics.trajectory import Channel
from app.qtel.hilbert.model import ATOM2, E_LEVEL, G_LEVEL
from app.qtel.hilbert.ops import fidelity, partial_trace, to_density
from app.qtel.protocol.model import InputQubit

T_D = 50.0


class TestAmplitudes:

    def test_alpha(self, params):
        a = alpha(params)
        assert a == pytest.approx(0.992152, abs=1e-6)
        assert abs(a - a * a) < 0.01

    def test_bob_no_decay(self, params):
        assert p_nd_bob(params) == pytest.approx(0.97184, abs=1e-4)
        assert beta(params)**2 == p_nd_bob(params)

    def test_readings(self, params):
        q = InputQubit(a=1, b=0)
        assert p_nd_alice(q, params, Reading.AS_PRINTED) == pytest.approx(
            alpha(params))
        assert p_nd_alice(q, params, Reading.AS_NORM) == pytest.approx(
            alpha(params)**2)


class TestDetectionStatistics:
    """Tests for the click-count probabilities of the detection window."""

    @pytest.mark.parametrize("t_d", [0.0, 1.0, 10.0, 50.0, 500.0])
    @pytest.mark.parametrize("pa", [0.0, 0.3, 1.0])
    def test_probabilities_sum_to_one(self, params, t_d, pa):
        q = input_from_population(pa)
        total = (p_no_decay(t_d, q, params) + p_one_decay(t_d, q, params) +
                 p_two_decay(t_d, q, params))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_empty_window(self, params):
        q = InputQubit(a=0.6, b=0.8)
        assert p_no_decay(0.0, q, params) == pytest.approx(1.0)
        assert p_success(0.0, q, params) == 0.0

    def test_success_factorizes(self, params):
        q = InputQubit(a=0.6, b=0.8j)
        eff = efficiency_corrected(T_D, q, params, 1.0)
        assert eff.p_total == pytest.approx(p_success(T_D, q, params), rel=1e-12)

    def test_success_grows_with_window(self, params):
        q = InputQubit(a=0.6, b=0.8)
        values = [p_success(t, q, params) for t in (0.0, 1.0, 10.0, 50.0, 500.0)]
        assert values == sorted(values)
        assert values[-1] < 0.5

    def test_negative_window(self, params):
        with pytest.raises(ValueError):
            p_success(-1.0, InputQubit(a=1, b=0), params)


class TestFidelity:
    """Tests for single-input fidelities."""

    def test_ground_input_is_perfect(self, params):
        q = InputQubit(a=0, b=1)
        assert fidelity_printed(T_D, q, params) == pytest.approx(1.0)
        assert fidelity_first_principles(T_D, q, params) == pytest.approx(1.0)

    def test_density_matches_formula(self, params):
        q = InputQubit(a=0.6, b=0.8j)
        rho = teleported_rho(T_D, q, params)
        assert rho.trace == pytest.approx(1.0)
        assert fidelity(rho, q.state(ATOM2)) == pytest.approx(
            fidelity_first_principles(T_D, q, params), abs=1e-12)

    def test_printed_reading_density(self, params):
        q = InputQubit(a=0.6, b=0.8)
        rho = teleported_rho(T_D, q, params, Reading.AS_PRINTED)
        assert rho.trace == pytest.approx(1.0)

    def test_fidelity_improves_with_window(self, params):
        q = InputQubit(a=0.8, b=0.6)
        values = [fidelity_printed(t, q, params) for t in (0.0, 5.0, 20.0, 50.0)]
        assert values == sorted(values)

    def test_report(self, params):
        q = InputQubit(a=0.6, b=0.8)
        rep = fidelity_report(T_D, q, params, 1.0)
        assert rep.f_eta == pytest.approx(rep.f_first_principles, abs=1e-12)
        assert rep.p_suc_eta == pytest.approx(rep.p_suc_as_norm, rel=1e-12)


class TestHaarAverages:
    """Haar averages at the reference parameters."""

    def test_quadrature_is_exact_for_polynomials(self):
        assert average_over_inputs(lambda q: q.pa**3) == pytest.approx(0.25)

    def test_success_probability(self, params):
        avg = average_over_inputs(lambda q: p_success(T_D, q, params))
        assert abs(avg - 0.49) < 0.01

    def test_fidelity(self, params):
        for f in (fidelity_printed, fidelity_first_principles):
            assert average_over_inputs(lambda q, f=f: f(T_D, q, params)) > 0.99

    def test_weighted_efficiency(self, params):
        """The heralded average at η = 0.6 sits near 0.81."""
        for reading in Reading:

            def rep(q, reading=reading):
                return efficiency_corrected(T_D, q, params, 0.6, reading)

            avg = weighted_average_over_inputs(lambda q: rep(q).f_eta,
                                               lambda q: rep(q).p_total)
            assert abs(avg - 0.81) < 0.01

    def test_ideal_efficiency_reduces(self, params):
        avg_eta = average_over_inputs(lambda q: efficiency_corrected(
            T_D, q, params, 1.0, Reading.AS_PRINTED).f_eta)
        avg = average_over_inputs(lambda q: fidelity_printed(T_D, q, params))
        assert avg_eta == pytest.approx(avg, abs=1e-12)

    def test_zero_efficiency(self, params):
        rep = efficiency_corrected(T_D, InputQubit(a=0.6, b=0.8), params, 0.0)
        assert rep.p_total == 0.0
        assert rep.f_eta is None
        assert weighted_average_over_inputs(
            lambda q: efficiency_corrected(T_D, q, params, 0.0).f_eta,
            lambda q: efficiency_corrected(T_D, q, params, 0.0).p_total) is None

    def test_sample_average(self):
        mean, err = sample_average(np.array([1.0, 2.0, 3.0]))
        assert mean == 2.0
        assert err == pytest.approx(1 / math.sqrt(3))
        with pytest.raises(ValueError):
            sample_average(np.array([]))


class TestPostJumpState:

    @pytest.mark.parametrize("channel", list(Channel))
    def test_bob_reduction(self, params, channel):
        """Bob's atom after the click is ∝ aα|e⟩ ± ib|g⟩ plus a |g⟩ admixture."""
        q = InputQubit(a=0.6, b=0.8)
        t_j = 3.0
        psi = post_jump_state(t_j, q, params, channel)
        rho = partial_trace(to_density(psi), ATOM2).matrix
        a = alpha(params)
        sign = 1 if channel == Channel.PLUS else -1
        photon = 2 * (math.exp(-params.kappa * t_j) * 0.6 * a)**2
        norm = (0.6 * a)**2 + 0.64 + photon
        assert rho[E_LEVEL, E_LEVEL].real == pytest.approx((0.6 * a)**2 / norm)
        assert rho[G_LEVEL, G_LEVEL].real == pytest.approx((0.64 + photon) / norm)
        assert rho[E_LEVEL, G_LEVEL] == pytest.approx(
            0.6 * a * np.conj(sign * 0.8j) / norm)

    def test_negative_time(self, params):
        with pytest.raises(ValueError):
            post_jump_state(-1.0, InputQubit(a=1, b=0), params, Channel.PLUS)


class TestEntangledState:
    """Tests for the heralded atom-atom state."""

    def test_printed_weights(self, params):
        eps = math.exp(-2 * params.kappa * T_D)
        w_bell = 0.6 * (1 - eps * eps) / 4
        w_gg = 0.6 * 0.4 * (1 - eps)**2 / 2
        assert bell_weight(T_D, 0.6, params) == pytest.approx(w_bell /
                                                              (w_bell + w_gg))

    def test_first_principles_ideal_detectors(self, params):
        eps = math.exp(-2 * params.kappa * T_D)
        lam = bell_weight(T_D, 1.0, params, EntangledReading.FIRST_PRINCIPLES)
        assert lam == pytest.approx(1 / (1 + eps))

    def test_density(self, params):
        for reading in EntangledReading:
            rho = entangled_state(T_D, 0.6, params, reading)
            assert rho.trace == pytest.approx(1.0)
            assert rho.matrix[3, 3].real == pytest.approx(
                1 - bell_weight(T_D, 0.6, params, reading))

    def test_no_heralding(self, params):
        with pytest.raises(ValueError):
            entangled_state(T_D, 0.0, params)
        with pytest.raises(ValueError):
            entangled_state(0.0, 1.0, params)
