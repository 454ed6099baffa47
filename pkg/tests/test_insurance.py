"""Tests for the insurance encoding and the recovery of failed runs."""

import math
import numpy as np
import pytest

from app.qtel.errors import ContractViolation
from app.qtel.hilbert.model import ATOM1, ATOM_R, E_LEVEL, G_LEVEL
from app.qtel.hilbert.ops import fidelity
from app.qtel.protocol.insurance import (RECOVERY_TABLE, Correction,
                                         identify_correction,
                                         insurance_branches, insurance_encode,
                                         insurance_recover, insurance_target)
from app.qtel.protocol.model import InputQubit, Status


class TestEncoding:

    def test_layout(self):
        q = InputQubit(a=0.6, b=0.8j)
        psi = insurance_encode(q)
        assert psi.label.names == (ATOM1, ATOM_R)
        assert psi.is_normalized
        s = 1 / math.sqrt(2)
        assert psi.amplitude({ATOM1: E_LEVEL, ATOM_R: G_LEVEL}) == \
            pytest.approx(0.6 * s)
        assert psi.amplitude({ATOM1: E_LEVEL, ATOM_R: E_LEVEL}) == \
            pytest.approx(0.8j * s)

    def test_target(self):
        t = insurance_target(InputQubit(a=0.6, b=0.8))
        assert t.amplitudes[G_LEVEL] == pytest.approx(0.6)
        assert t.amplitudes[E_LEVEL] == pytest.approx(0.8)


class TestBranches:
    """Tests for the heralding records of the encoded protocol."""

    def test_probabilities(self, params):
        branches = insurance_branches(InputQubit(a=0.6, b=0.8), params, 1.0)
        probs = {b.status: b.probability for b in branches}
        assert sum(probs.values()) == pytest.approx(1.0)
        assert probs[Status.SUCCESS] == pytest.approx(0.5)
        assert probs[Status.NO_CLICK] == pytest.approx(0.25)
        assert probs[Status.TWO_CLICKS] == pytest.approx(0.25)

    def test_lossy_detectors_shift_weight(self, params):
        branches = insurance_branches(InputQubit(a=0.6, b=0.8), params, 0.6)
        probs = {b.status: b.probability for b in branches}
        assert sum(probs.values()) == pytest.approx(1.0)
        assert probs[Status.NO_CLICK] > 0.25

    def test_cavity_decay_does_not_enter(self, params):
        """Branches are taken for a lossless mapping and an unbounded window."""
        q = InputQubit(a=0.6, b=0.8j)
        reference = insurance_branches(q, params, 1.0)
        leaky = insurance_branches(q, params.replace(kappa=20 * params.kappa),
                                   1.0)
        assert [b.status for b in leaky] == [b.status for b in reference]
        for a, b in zip(reference, leaky):
            assert b.probability == pytest.approx(a.probability, abs=1e-12)
            np.testing.assert_allclose(b.reserve.matrix, a.reserve.matrix,
                                       atol=1e-12)

    def test_eta_range(self, params):
        with pytest.raises(ValueError):
            insurance_branches(InputQubit(a=1, b=0), params, -0.1)


class TestRecovery:
    """Tests for the correction table."""

    def test_random_inputs(self, params, rng):
        for _ in range(20):
            q = InputQubit.haar_random(rng)
            target = insurance_target(q)
            for branch in insurance_branches(q, params, 1.0):
                if branch.status == Status.SUCCESS:
                    continue
                rec = insurance_recover(branch)
                assert fidelity(rec.state, target) == pytest.approx(1.0, abs=1e-9)
                assert not rec.degraded
                best, _ = identify_correction(branch.reserve, target)
                assert best == RECOVERY_TABLE[branch.status]

    @pytest.mark.parametrize("a,b", [(1, 0), (0, 1)])
    def test_basis_inputs(self, params, a, b):
        q = InputQubit(a=a, b=b)
        target = insurance_target(q)
        for branch in insurance_branches(q, params, 1.0):
            if branch.status == Status.SUCCESS:
                continue
            rec = insurance_recover(branch)
            assert fidelity(rec.state, target) == pytest.approx(1.0, abs=1e-9)

    def test_table(self):
        assert RECOVERY_TABLE[Status.NO_CLICK] == Correction.BIT_FLIP
        assert RECOVERY_TABLE[Status.TWO_CLICKS] == Correction.IDENTITY

    def test_success_has_no_recovery(self, params):
        branch = next(b for b in insurance_branches(InputQubit(a=0.6, b=0.8),
                                                    params, 1.0)
                      if b.status == Status.SUCCESS)
        with pytest.raises(ContractViolation):
            insurance_recover(branch)

    def test_lossy_detectors_degrade(self, params):
        q = InputQubit(a=0.6, b=0.8)
        target = insurance_target(q)
        recovered = [insurance_recover(b)
                     for b in insurance_branches(q, params, 0.6)
                     if b.status != Status.SUCCESS]
        assert all(r.degraded for r in recovered)
        fids = [fidelity(r.state, target) for r in recovered]
        assert min(fids) < 1.0 - 1e-3
        assert np.isfinite(fids).all()
