from enum import Enum
from itertools import product
from typing import Dict, List, Optional, Tuple
import math
import numpy as np
from pydantic import BaseModel

from app.qtel import slog
from app.qtel.errors import ContractViolation
from app.qtel.hilbert.model import (ATOM1, ATOM2, ATOM_R, CAV_A, CAV_B,
                                    E_LEVEL, FOCK_0, G_LEVEL, DensityMatrix,
                                    Operator, PureState, qubit_label)
from app.qtel.hilbert.ops import (apply, basis_state, conjugate, embed,
                                  factor_out, fidelity, partial_trace,
                                  propagator, tensor, to_density)
from app.qtel.model.operators import (hamiltonian_h1, jump_operators,
                                      number_operator)
from app.qtel.model.params import PhysicalParams, effective_params
from app.qtel.protocol.model import InputQubit, Status
from app.qtel.protocol.stages import (ALICE_COMPENSATION, prepare_bob,
                                      solve_stage_times, zeeman_phase)

INSURANCE_LABEL = qubit_label(ATOM_R, CAV_A, ATOM2, CAV_B)

PAULI = {
    "identity": np.eye(2, dtype=np.complex128),
    "bit_flip": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "phase_flip": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "both": np.array([[0, -1], [1, 0]], dtype=np.complex128),
}


class Correction(str, Enum):
    IDENTITY = "identity"
    BIT_FLIP = "bit_flip"
    PHASE_FLIP = "phase_flip"
    BOTH = "both"


# failure record -> Pauli correction on the reserve atom
RECOVERY_TABLE: Dict[Status, Correction] = {
    Status.NO_CLICK: Correction.BIT_FLIP,
    Status.TWO_CLICKS: Correction.IDENTITY,
}


class InsuranceBranch(BaseModel):
    status: Status
    probability: float
    eta: float
    reserve: DensityMatrix

    class Config:
        frozen = True


class RecoveredQubit(BaseModel):
    status: Status
    correction: Correction
    state: DensityMatrix
    degraded: bool

    class Config:
        frozen = True


def insurance_encode(q: InputQubit) -> PureState:
    """
    [a(|eg⟩ + |ge⟩) + b(|gg⟩ + |ee⟩)]/√2 on (atom1, atom_r)
    """
    label = qubit_label(ATOM1, ATOM_R)
    amps = np.zeros(4, dtype=np.complex128)
    s = 1.0 / math.sqrt(2.0)
    for l1, lr in product((E_LEVEL, G_LEVEL), repeat=2):
        idx = 2 * l1 + lr
        amps[idx] = (q.a if l1 != lr else q.b) * s
    return PureState(label=label, amplitudes=amps)


def _encoded_joint(q: InputQubit, p: PhysicalParams) -> PureState:
    """
    Lossless mapping of atom1 into cavity A followed by Bob's preparation,
    on (atom_r, cavA, atom2, cavB). The mapping runs at κ = 0 whatever `p`
    says; only E and δE are taken from `p`.
    """
    lossless = p.replace(kappa=0.0)
    times = solve_stage_times(lossless)
    psi = tensor(insurance_encode(q),
                 basis_state(qubit_label(CAV_A), {CAV_A: FOCK_0}))
    psi = zeeman_phase(psi, lossless, ATOM1, ALICE_COMPENSATION)
    h1 = embed(hamiltonian_h1(effective_params(lossless).e, ATOM1, CAV_A),
               (ATOM1, CAV_A), psi.label)
    psi = apply(propagator(h1, times.t_i), psi)
    rest = factor_out(psi, ATOM1, G_LEVEL).normalized()
    bob, _ = prepare_bob(lossless)
    return tensor(rest, bob)


def _sector(psi: PureState, k: int) -> PureState:
    n = number_operator(psi.label, CAV_A) + number_operator(psi.label, CAV_B)
    diag = np.diagonal(n.matrix).real
    amps = np.where(np.isclose(diag, k), psi.amplitudes, 0)
    return PureState(label=psi.label, amplitudes=amps)


def insurance_branches(q: InputQubit, p: PhysicalParams,
                       eta: Optional[float] = None) -> List[InsuranceBranch]:
    """
    Every heralding record of the encoded protocol in the long-window limit.

    The branches describe the lossless mapping (κ = 0 during preparation)
    and t_D → ∞, so the configured κ does not enter; only η does.

    All photons eventually leave; a k-photon sector splits into ordered
    detector records J_{s_k}…J_{s_1}P_kψ of weight ‖·‖²/k!. Each photon is
    seen with probability η, and the branches are grouped by the number of
    observed clicks.
    """
    eta = p.eta if eta is None else eta
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1]; get {eta}")
    psi = _encoded_joint(q, p)
    jumps = jump_operators(psi.label, CAV_A, CAV_B)
    weights: Dict[Status, float] = {}
    mats: Dict[Status, np.ndarray] = {}
    for k in range(3):
        sector = _sector(psi, k)
        for record in product(range(2), repeat=k):
            branch = sector
            for s in record:
                branch = apply(jumps[s], branch)
            w = branch.norm2 / math.factorial(k)
            if w <= 1e-15:
                continue
            reserve = partial_trace(to_density(branch), ATOM_R).matrix
            for m in range(k + 1):
                # number of ways m of the k photons are the observed ones
                pw = w * math.comb(k, m) * eta**m * (1 - eta)**(k - m)
                if pw <= 0.0:
                    continue
                status = (Status.NO_CLICK, Status.SUCCESS,
                          Status.TWO_CLICKS)[min(m, 2)]
                weights[status] = weights.get(status, 0.0) + pw
                mats[status] = mats.get(status, 0.0) + pw * reserve
    out = []
    for status in (Status.SUCCESS, Status.NO_CLICK, Status.TWO_CLICKS):
        if status not in weights:
            continue
        m = mats[status] / weights[status]
        out.append(
            InsuranceBranch(status=status,
                            probability=weights[status],
                            eta=eta,
                            reserve=DensityMatrix(label=qubit_label(ATOM_R),
                                                  matrix=0.5 * (m + m.conj().T))))
    slog().debug("insurance branches",
                 probabilities={b.status.value: b.probability for b in out})
    return out


def apply_correction(rho: DensityMatrix, correction: Correction) -> DensityMatrix:
    return conjugate(Operator(label=rho.label, matrix=PAULI[correction.value]),
                     rho)


def insurance_target(q: InputQubit) -> PureState:
    """
    a|g⟩ + b|e⟩, the state the reserve atom is corrected to
    """
    amps = np.zeros(2, dtype=np.complex128)
    amps[G_LEVEL] = q.a
    amps[E_LEVEL] = q.b
    return PureState(label=qubit_label(ATOM_R), amplitudes=amps)


def identify_correction(rho: DensityMatrix,
                        target: PureState) -> Tuple[Correction, float]:
    """
    the Pauli correction bringing ``rho`` closest to ``target``
    """
    scored = [(c, fidelity(apply_correction(rho, c), target))
              for c in Correction]
    return max(scored, key=lambda cf: cf[1])


def insurance_recover(branch: InsuranceBranch) -> RecoveredQubit:
    """
    Restores the input on the reserve atom after a failed teleportation.
    With η < 1 a lost photon mislabels the record and the result is flagged
    degraded.
    """
    correction = RECOVERY_TABLE.get(branch.status)
    if correction is None:
        raise ContractViolation(
            f"no recovery is defined for a {branch.status.value} record")
    return RecoveredQubit(status=branch.status,
                          correction=correction,
                          state=apply_correction(branch.reserve, correction),
                          degraded=branch.eta < 1.0)
