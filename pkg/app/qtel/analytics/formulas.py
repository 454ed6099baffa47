"""
Closed-form expressions of the protocol in the ideal-detection, one-photon
picture.

Two readings of Alice's no-decay probability coexist. ``AS_PRINTED`` uses
|a|²α + |b|², the expression quoted with the fidelity formula; ``AS_NORM``
uses |a|²α² + |b|², the squared norm of the mapped state, which is what the
dynamics produce and what Monte-Carlo runs converge to.
"""
from enum import Enum
from typing import Optional
import math
import numpy as np
from pydantic import BaseModel

from app.qtel.dynamics.trajectory import Channel
from app.qtel.hilbert.model import (ATOM1, ATOM2, CAV_A, CAV_B, E_LEVEL,
                                    FOCK_0, FOCK_1, G_LEVEL, TELEPORT_LABEL,
                                    DensityMatrix, PureState, qubit_label)
from app.qtel.model.params import PhysicalParams, effective_params
from app.qtel.protocol.model import InputQubit, TimingConvention
from app.qtel.protocol.stages import solve_stage_times


class Reading(str, Enum):
    AS_PRINTED = "as_printed"
    AS_NORM = "as_norm"


class EntangledReading(str, Enum):
    # normalized Bell kets with the printed weights
    AS_PRINTED = "as_printed"
    # weights of the mixture the jump dynamics actually herald
    FIRST_PRINCIPLES = "first_principles"


def _decay_factor(t_d: float, p: PhysicalParams) -> float:
    if t_d < 0:
        raise ValueError(f"detection window must be >= 0; get {t_d}")
    return math.exp(-2.0 * p.kappa * t_d)


def alpha(p: PhysicalParams) -> float:
    """
    amplitude kept by the |e0⟩ → |g1⟩ transfer at t_I
    """
    eff = effective_params(p)
    t_i = solve_stage_times(p).t_i
    theta = 0.5 * eff.omega_kappa * t_i
    return math.exp(-0.5 * p.kappa * t_i) * (2.0 * eff.e /
                                              eff.omega_kappa) * math.sin(theta)


def beta(p: PhysicalParams,
         convention: TimingConvention = TimingConvention.BALANCED) -> float:
    """
    √ of Bob's no-decay probability at t_E
    """
    eff = effective_params(p)
    om = eff.omega_kappa
    t_e = solve_stage_times(p, convention).t_e
    theta = 0.5 * om * t_e
    ce = math.cos(theta) + (p.kappa / om) * math.sin(theta)
    cg = (2.0 * eff.e / om) * math.sin(theta)
    return math.exp(-0.5 * p.kappa * t_e) * math.sqrt(ce * ce + cg * cg)


def p_nd_alice(q: InputQubit,
               p: PhysicalParams,
               reading: Reading = Reading.AS_NORM) -> float:
    a = alpha(p)
    match reading:
        case Reading.AS_PRINTED:
            return q.pa * a + q.pb
        case Reading.AS_NORM:
            return q.pa * a * a + q.pb


def p_nd_bob(p: PhysicalParams,
             convention: TimingConvention = TimingConvention.BALANCED) -> float:
    return beta(p, convention)**2


def _photon_weight(t_d: float, q: InputQubit, p: PhysicalParams) -> float:
    # 2|a|²α²e^{−2κt_D}: weight of the branch still holding a photon
    return 2.0 * q.pa * alpha(p)**2 * _decay_factor(t_d, p)


def _p_alice_photon(q: InputQubit, p: PhysicalParams) -> float:
    a2 = alpha(p)**2
    return q.pa * a2 / (q.pa * a2 + q.pb)


def p_no_decay(t_d: float, q: InputQubit, p: PhysicalParams) -> float:
    """
    no photon leaves either cavity during the detection window, given a
    successful preparation
    """
    eps = _decay_factor(t_d, p)
    return (1.0 - _p_alice_photon(q, p) * (1.0 - eps)) * (1.0 + eps) / 2.0


def p_one_decay(t_d: float, q: InputQubit, p: PhysicalParams) -> float:
    eps = _decay_factor(t_d, p)
    return (1.0 - eps) * (1.0 + 2.0 * _p_alice_photon(q, p) * eps) / 2.0


def p_two_decay(t_d: float, q: InputQubit, p: PhysicalParams) -> float:
    eps = _decay_factor(t_d, p)
    return _p_alice_photon(q, p) * (1.0 - eps)**2 / 2.0


def p_success(t_d: float,
              q: InputQubit,
              p: PhysicalParams,
              reading: Reading = Reading.AS_NORM) -> float:
    """
    (P_ND(A) + 2|a|²α²e^{−2κt_D})·P_ND(B)·(1 − e^{−2κt_D})/2
    """
    eps = _decay_factor(t_d, p)
    return ((p_nd_alice(q, p, reading) + _photon_weight(t_d, q, p)) *
            p_nd_bob(p) * (1.0 - eps) / 2.0)


def teleported_rho(t_d: float,
                   q: InputQubit,
                   p: PhysicalParams,
                   reading: Reading = Reading.AS_NORM) -> DensityMatrix:
    """
    Bob's corrected state after a single click:
    [P·|φ⟩⟨φ| + 2|a|²α²e^{−2κt_D}|g⟩⟨g|]/(P + 2|a|²α²e^{−2κt_D}) with
    φ ∝ aα|e⟩ + b|g⟩ normalized and P Alice's no-decay probability
    """
    a = alpha(p)
    phi = np.zeros(2, dtype=np.complex128)
    phi[E_LEVEL] = q.a * a
    phi[G_LEVEL] = q.b
    phi /= np.linalg.norm(phi)
    pnd = p_nd_alice(q, p, reading)
    c = _photon_weight(t_d, q, p)
    m = pnd * np.outer(phi, phi.conj())
    m[G_LEVEL, G_LEVEL] += c
    return DensityMatrix(label=qubit_label(ATOM2), matrix=m / (pnd + c))


def fidelity_printed(t_d: float,
                   q: InputQubit,
                   p: PhysicalParams,
                   reading: Reading = Reading.AS_PRINTED) -> float:
    """
    {P(|a|²α + |b|²) + 2|a|²α²e^{−2κt_D}|b|²}/{P + 2|a|²α²e^{−2κt_D}}
    """
    pnd = p_nd_alice(q, p, reading)
    c = _photon_weight(t_d, q, p)
    return (pnd * (q.pa * alpha(p) + q.pb) + c * q.pb) / (pnd + c)


def fidelity_first_principles(t_d: float, q: InputQubit,
                              p: PhysicalParams) -> float:
    overlap = q.pa * alpha(p) + q.pb
    c = _photon_weight(t_d, q, p)
    return (overlap * overlap + c * q.pb) / (p_nd_alice(q, p, Reading.AS_NORM) + c)


def _one_click_fidelity(t_d: float, q: InputQubit, p: PhysicalParams,
                        reading: Reading) -> float:
    match reading:
        case Reading.AS_PRINTED:
            return fidelity_printed(t_d, q, p, reading)
        case Reading.AS_NORM:
            return fidelity_first_principles(t_d, q, p)


class EfficiencyReport(BaseModel):
    # success probability of the detection stage alone
    p_suc_eta: float
    # probability that neither preparation decayed
    p_prep: float
    f_eta: Optional[float] = None

    class Config:
        frozen = True

    @property
    def p_total(self) -> float:
        return self.p_prep * self.p_suc_eta


def efficiency_corrected(t_d: float,
                         q: InputQubit,
                         p: PhysicalParams,
                         eta: float,
                         reading: Reading = Reading.AS_NORM) -> EfficiencyReport:
    """
    Heralding with lossy detectors: a single observed click comes either from
    a genuine one-photon event or from a two-photon event with one photon
    missed, in which case Bob's atom is left in |g⟩.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1]; get {eta}")
    p1 = p_one_decay(t_d, q, p)
    p2 = p_two_decay(t_d, q, p)
    one = eta * p1
    two = 2.0 * eta * (1.0 - eta) * p2
    p_suc = one + two
    p_prep = p_nd_alice(q, p, reading) * p_nd_bob(p)
    if p_suc <= 0.0:
        return EfficiencyReport(p_suc_eta=0.0, p_prep=p_prep, f_eta=None)
    f1 = _one_click_fidelity(t_d, q, p, reading)
    return EfficiencyReport(p_suc_eta=p_suc,
                            p_prep=p_prep,
                            f_eta=(one * f1 + two * q.pb) / p_suc)


class FidelityReport(BaseModel):
    t_d: float
    eta: float
    f_as_printed: float
    f_first_principles: float
    p_suc_as_printed: float
    p_suc_as_norm: float
    p_suc_eta: float
    f_eta: Optional[float] = None

    class Config:
        frozen = True


def fidelity_report(t_d: float, q: InputQubit, p: PhysicalParams,
                    eta: float) -> FidelityReport:
    eff = efficiency_corrected(t_d, q, p, eta, Reading.AS_NORM)
    return FidelityReport(t_d=t_d,
                          eta=eta,
                          f_as_printed=fidelity_printed(t_d, q, p),
                          f_first_principles=fidelity_first_principles(
                              t_d, q, p),
                          p_suc_as_printed=p_success(t_d, q, p,
                                                     Reading.AS_PRINTED),
                          p_suc_as_norm=p_success(t_d, q, p, Reading.AS_NORM),
                          p_suc_eta=eff.p_total,
                          f_eta=eff.f_eta)


def post_jump_state(t_j: float, q: InputQubit, p: PhysicalParams,
                    detector: Channel) -> PureState:
    """
    Normalized joint state right after the first click at ``t_j``:
    (aα|e⟩ ± ib|g⟩)|00⟩ + i e^{−κt_j}aα|g⟩(|01⟩ ± |10⟩) for Bob's atom and
    the (A, B) cavities, Alice's atom in |g⟩
    """
    if t_j < 0:
        raise ValueError(f"jump time must be >= 0; get {t_j}")
    sign = 1.0 if detector == Channel.PLUS else -1.0
    a = alpha(p)
    decay = math.exp(-p.kappa * t_j)
    amps = np.zeros(TELEPORT_LABEL.dim, dtype=np.complex128)

    def put(atom2: int, cav_a: int, cav_b: int, value: complex) -> None:
        idx = np.ravel_multi_index((G_LEVEL, cav_a, atom2, cav_b),
                                   TELEPORT_LABEL.dims)
        amps[idx] += value

    put(E_LEVEL, FOCK_0, FOCK_0, q.a * a)
    put(G_LEVEL, FOCK_0, FOCK_0, sign * 1j * q.b)
    put(G_LEVEL, FOCK_0, FOCK_1, 1j * decay * q.a * a)
    put(G_LEVEL, FOCK_1, FOCK_0, sign * 1j * decay * q.a * a)
    return PureState(label=TELEPORT_LABEL, amplitudes=amps).normalized()


def entangled_state(t_d: float,
                    eta: float,
                    p: PhysicalParams,
                    reading: EntangledReading = EntangledReading.AS_PRINTED
                    ) -> DensityMatrix:
    """
    λ|ψ⁺⟩⟨ψ⁺| + (1 − λ)|gg⟩⟨gg| on (atom1, atom2), ψ⁺ = (|eg⟩ + |ge⟩)/√2
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1]; get {eta}")
    lam = bell_weight(t_d, eta, p, reading)
    label = qubit_label(ATOM1, ATOM2)
    psi = np.zeros(4, dtype=np.complex128)
    psi[2 * E_LEVEL + G_LEVEL] = psi[2 * G_LEVEL + E_LEVEL] = 1.0 / math.sqrt(2)
    m = lam * np.outer(psi, psi.conj())
    m[3, 3] += 1.0 - lam
    return DensityMatrix(label=label, matrix=m)


def bell_weight(t_d: float, eta: float, p: PhysicalParams,
                reading: EntangledReading = EntangledReading.AS_PRINTED) -> float:
    eps = _decay_factor(t_d, p)
    match reading:
        case EntangledReading.AS_PRINTED:
            w_bell = eta * (1.0 - eps * eps) / 4.0
            w_gg = eta * (1.0 - eta) * (1.0 - eps)**2 / 2.0
        case EntangledReading.FIRST_PRINCIPLES:
            w_bell = eta * (1.0 - eps) / 2.0
            w_gg = eta * (1.0 - eps) * (eps + (1.0 - eta) * (1.0 - eps)) / 2.0
    total = w_bell + w_gg
    if total <= 0.0:
        raise ValueError("no heralded pair: η = 0 or an empty detection window")
    return w_bell / total
