"""Tests for the physical parameters and the effective-model operators."""

import math
import numpy as np
import pytest
from pydantic import ValidationError

from app.qtel.errors import OverdampedRegimeError
from app.qtel.hilbert.model import (ATOM1, CAV_A, CAV_B, E_LEVEL, FOCK_0,
                                    FOCK_1, G_LEVEL, TELEPORT_LABEL,
                                    Operator, qubit_label)
from app.qtel.hilbert.ops import basis_state, evolve
from app.qtel.model.operators import (collapse_operators, h_eff,
                                      hamiltonian_h1, hamiltonian_h2,
                                      jump_operators, number_operator,
                                      truncation_leak)
from app.qtel.model.params import (PhysicalParams, RegimeThresholds,
                                   effective_params, validate_regime)


class TestPhysicalParams:
    """Tests for unit handling and range checks."""

    def test_reference_values(self, params):
        """E = gΩ/Δ is 2π·1 MHz for the reference parameters."""
        eff = effective_params(params)
        assert eff.e == pytest.approx(2 * math.pi)
        assert eff.omega_kappa == pytest.approx(
            math.sqrt(4 * eff.e**2 - params.kappa**2))

    def test_mhz_round_trip(self, params):
        mhz = params.to_mhz()
        assert mhz["g"] == pytest.approx(10.0)
        assert mhz["kappa"] == pytest.approx(0.01)
        assert mhz["eta"] == 1.0

    def test_replace(self, params):
        p = params.replace(eta=0.6)
        assert p.eta == 0.6
        assert p.g == params.g

    @pytest.mark.parametrize("field,value", [("g", 0.0), ("kappa", -1.0),
                                             ("eta", 1.5),
                                             ("delta", math.inf)])
    def test_out_of_range(self, params, field, value):
        with pytest.raises(ValidationError):
            params.replace(**{field: value})

    def test_overdamped(self, params):
        e = effective_params(params).e
        with pytest.raises(OverdampedRegimeError):
            effective_params(params.replace(kappa=2 * e + 1e-6))


class TestRegime:

    def test_reference_is_clean(self, params):
        assert validate_regime(params) == []

    def test_strong_decay_warns(self, params):
        e = effective_params(params).e
        warnings = validate_regime(params.replace(kappa=e))
        assert [w.name for w in warnings] == ["rabi"]

    def test_small_detuning_warns(self, params):
        names = {w.name for w in validate_regime(params.replace(delta=params.g))}
        assert {"adiabatic", "detuning"} <= names

    def test_thresholds_are_configurable(self, params):
        strict = RegimeThresholds(min_rabi_ratio=1e6)
        assert [w.name for w in validate_regime(params, strict)] == ["rabi"]

    def test_values_at_threshold_do_not_warn(self, params):
        at = RegimeThresholds(
            max_adiabatic=params.g * params.omega / (params.delta * params.delta),
            min_detuning_ratio=params.delta / params.gamma,
            min_rabi_ratio=effective_params(params).omega_kappa / params.kappa)
        assert validate_regime(params, at) == []


class TestHamiltonians:
    """Tests for H⁽¹⁾, H⁽²⁾ and the non-Hermitian generator."""

    def test_h1_hermitian(self):
        assert hamiltonian_h1(1.3, "a", "c").is_hermitian()

    def test_h1_couples_e0_and_g1_only(self):
        h = hamiltonian_h1(2.0, "a", "c")
        e0 = basis_state(h.label, {"a": E_LEVEL, "c": FOCK_0}).amplitudes
        g1 = basis_state(h.label, {"a": G_LEVEL, "c": FOCK_1}).amplitudes
        assert np.vdot(g1, h.matrix @ e0) == pytest.approx(2.0)
        g0 = basis_state(h.label, {"a": G_LEVEL, "c": FOCK_0}).amplitudes
        np.testing.assert_allclose(h.matrix @ g0, 2.0 * g0)

    def test_lossless_rabi_transfer(self):
        """|e0⟩ → |g1⟩ completely after t = π/(2E) without decay."""
        e = 2 * math.pi
        h = hamiltonian_h1(e, "a", "c")
        out = evolve(basis_state(h.label, {"a": E_LEVEL, "c": FOCK_0}), h,
                     math.pi / (2 * e))
        assert abs(out.amplitude({"a": G_LEVEL, "c": FOCK_1}))**2 == \
            pytest.approx(1.0, abs=1e-12)

    def test_h2_phase(self):
        h = hamiltonian_h2(0.5, "a")
        assert h.matrix[E_LEVEL, E_LEVEL] == 0.5
        assert h.matrix[G_LEVEL, G_LEVEL] == 0.0

    def test_h_eff_anti_hermitian_part(self):
        kappa = 0.3
        h = Operator(label=TELEPORT_LABEL,
                     matrix=np.zeros((16, 16), dtype=np.complex128))
        gen = h_eff(h, kappa, (CAV_A, CAV_B))
        n = number_operator(TELEPORT_LABEL, CAV_A) + number_operator(
            TELEPORT_LABEL, CAV_B)
        np.testing.assert_allclose(gen.matrix, -1j * kappa * n.matrix)


class TestJumpOperators:

    def test_collapse_reproduces_decay(self):
        """Σ C†C/2 equals κ(n_A + n_B)."""
        kappa = 0.2
        cs = collapse_operators(TELEPORT_LABEL, kappa)
        total = sum((c.dagger() @ c).matrix for c in cs) / 2
        n = number_operator(TELEPORT_LABEL, CAV_A) + number_operator(
            TELEPORT_LABEL, CAV_B)
        np.testing.assert_allclose(total, kappa * n.matrix, atol=1e-15)

    def test_detector_modes(self):
        """A photon in cavity A alone reaches both detectors equally."""
        jp, jm = jump_operators(TELEPORT_LABEL)
        psi = basis_state(TELEPORT_LABEL, {
            ATOM1: G_LEVEL,
            CAV_A: FOCK_1,
            "atom2": G_LEVEL,
            CAV_B: FOCK_0
        }).amplitudes
        assert np.vdot(jp.matrix @ psi, jp.matrix @ psi).real == pytest.approx(0.5)
        assert np.vdot(jm.matrix @ psi, jm.matrix @ psi).real == pytest.approx(0.5)

    def test_truncation_leak(self):
        label = qubit_label("a", "c")
        assert truncation_leak(basis_state(label, {"a": E_LEVEL, "c": FOCK_1}),
                               "a", "c") == 1.0
        assert truncation_leak(basis_state(label, {"a": E_LEVEL, "c": FOCK_0}),
                               "a", "c") == 0.0
