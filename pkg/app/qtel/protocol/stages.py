from typing import List, Tuple, TypeVar
import cmath
import math
import numpy as np

from app.qtel import slog
from app.qtel.dynamics.trajectory import Channel, Stage
from app.qtel.errors import ContractViolation
from app.qtel.hilbert.model import (ATOM1, ATOM2, CAV_A, CAV_B, E_LEVEL,
                                    FOCK_0, G_LEVEL, TELEPORT_LABEL,
                                    DensityMatrix, Operator, PureState,
                                    SpaceLabel, qubit_label)
from app.qtel.hilbert.ops import (apply, basis_state, conjugate, embed,
                                  factor_out, propagator, tensor)
from app.qtel.model.operators import (hamiltonian_h1, hamiltonian_h2, h_eff,
                                      jump_operators, truncation_leak)
from app.qtel.model.params import PhysicalParams, effective_params, validate_regime
from app.qtel.protocol.model import InputQubit, StageTimes, TimingConvention

S = TypeVar("S", PureState, DensityMatrix)

TRUNCATION_TOL = 1e-12
# e^{iδE t} on |g⟩ relative to |e⟩ that turns Alice's mapped state into
# aα|1⟩ + b|0⟩ without the −i the Raman transfer leaves on |e⟩
ALICE_COMPENSATION = -1j


def solve_stage_times(
        p: PhysicalParams,
        convention: TimingConvention = TimingConvention.BALANCED
) -> StageTimes:
    """
    Smallest positive roots of the mapping (Alice) and entangling (Bob)
    conditions. Raises :class:`OverdampedRegimeError` when 4E² ≤ κ².
    """
    eff = effective_params(p)
    om = eff.omega_kappa
    t_i = (2.0 / om) * (math.pi - math.atan2(om, p.kappa))
    match convention:
        case TimingConvention.BALANCED:
            denom = 2.0 * eff.e + p.kappa
        case TimingConvention.AS_PRINTED:
            denom = 2.0 * eff.e - p.kappa
    t_e = (2.0 / om) * (math.pi - math.atan2(om, denom))
    return StageTimes(t_i=t_i, t_e=t_e)


def zeeman_duration(p: PhysicalParams, relative_phase: complex) -> float:
    """
    H⁽²⁾ pulse length giving |g⟩ the phase ``relative_phase`` relative to |e⟩
    """
    if abs(abs(relative_phase) - 1.0) > 1e-12:
        raise ValueError(f"relative phase must be unimodular; get {relative_phase}")
    angle = cmath.phase(relative_phase) % (2.0 * math.pi)
    return angle / p.delta_e


def zeeman_phase(state: S, p: PhysicalParams, factor: str,
                 relative_phase: complex) -> S:
    """
    Drives H⁽²⁾ on ``factor`` until |g⟩ has picked up ``relative_phase``
    relative to |e⟩
    """
    t = zeeman_duration(p, relative_phase)
    u = propagator(embed(hamiltonian_h2(p.delta_e, factor), factor,
                         state.label), t)
    match state:
        case PureState():
            return apply(u, state)
        case DensityMatrix():
            return conjugate(u, state)
        case _:
            raise TypeError(f"cannot rotate {type(state).__name__}")


def _check_truncation(state: PureState, atom: str, cavity: str) -> None:
    leak = truncation_leak(state, atom, cavity)
    if leak > TRUNCATION_TOL:
        raise ContractViolation(
            f"population {leak} on |e,1⟩ of {atom}/{cavity} would leave the "
            "one-photon truncation")


def _no_jump(state: PureState, generator: Operator,
             t: float) -> Tuple[PureState, float]:
    out = apply(propagator(generator, t), state)
    return out, out.norm2 / state.norm2


def prepare_alice(
    q: InputQubit,
    p: PhysicalParams,
    convention: TimingConvention = TimingConvention.BALANCED
) -> Tuple[PureState, float]:
    """
    Maps Alice's atom onto her cavity: returns the normalized conditional
    cavity state ∝ aα|1⟩ + b|0⟩ and the no-decay probability |a|²α² + |b|².
    """
    validate_regime(p)
    times = solve_stage_times(p, convention)
    psi = tensor(q.state(ATOM1), basis_state(qubit_label(CAV_A), {CAV_A: FOCK_0}))
    psi = zeeman_phase(psi, p, ATOM1, ALICE_COMPENSATION)
    _check_truncation(psi, ATOM1, CAV_A)
    gen = h_eff(hamiltonian_h1(effective_params(p).e, ATOM1, CAV_A), p.kappa,
                CAV_A)
    out, survival = _no_jump(psi, gen, times.t_i)
    cavity = factor_out(out, ATOM1, G_LEVEL)
    slog().debug("alice prepared", p_nd=survival, t_i=times.t_i)
    return cavity.normalized(), survival


def prepare_bob(
    p: PhysicalParams,
    convention: TimingConvention = TimingConvention.BALANCED,
    atom: str = ATOM2,
    cavity: str = CAV_B
) -> Tuple[PureState, float]:
    """
    Entangles Bob's atom with his cavity starting from |e⟩|0⟩; returns the
    normalized state ≈ (|e0⟩ + i|g1⟩)/√2 and the no-decay probability β²
    """
    times = solve_stage_times(p, convention)
    psi = basis_state(qubit_label(atom, cavity), {atom: E_LEVEL, cavity: FOCK_0})
    _check_truncation(psi, atom, cavity)
    gen = h_eff(hamiltonian_h1(effective_params(p).e, atom, cavity), p.kappa,
                cavity)
    out, survival = _no_jump(psi, gen, times.t_e)
    # strip the common e^{−iEt} so the |e0⟩ amplitude is real and positive
    e0 = out.amplitude({atom: E_LEVEL, cavity: FOCK_0})
    if abs(e0) > 0:
        out = PureState(label=out.label,
                        amplitudes=out.amplitudes * (abs(e0) / e0))
    slog().debug("bob prepared", p_nd=survival, t_e=times.t_e)
    return out.normalized(), survival


def _detector_jumps(label: SpaceLabel) -> Tuple[Tuple[Channel, Operator], ...]:
    jp, jm = jump_operators(label, CAV_A, CAV_B)
    return ((Channel.PLUS, jp), (Channel.MINUS, jm))


def _leak(label: SpaceLabel, kappa: float) -> Operator:
    zero = Operator(label=label,
                    matrix=np.zeros((label.dim, label.dim), dtype=np.complex128))
    return h_eff(zero, kappa, (CAV_A, CAV_B))


def teleportation_prep(
    q: InputQubit,
    p: PhysicalParams,
    times: StageTimes,
) -> Tuple[PureState, List[Stage]]:
    """
    Initial joint state (a|e⟩+b|g⟩)|0⟩ ⊗ |e⟩|0⟩ and the preparation schedule.

    Alice's phase pre-compensation runs first; the longer of the two
    preparations then starts early so that both end together.
    """
    label = TELEPORT_LABEL
    bob0 = basis_state(qubit_label(ATOM2, CAV_B), {ATOM2: E_LEVEL, CAV_B: FOCK_0})
    alice0 = tensor(q.state(ATOM1),
                    basis_state(qubit_label(CAV_A), {CAV_A: FOCK_0}))
    initial = tensor(alice0, bob0)
    return initial, prep_schedule(p, times, label, alice_mapping=True)


def entanglement_prep(p: PhysicalParams,
                      times: StageTimes) -> Tuple[PureState, List[Stage]]:
    label = TELEPORT_LABEL
    initial = basis_state(label, {
        ATOM1: E_LEVEL,
        CAV_A: FOCK_0,
        ATOM2: E_LEVEL,
        CAV_B: FOCK_0
    })
    return initial, prep_schedule(p, times, label, alice_mapping=False)


def prep_schedule(p: PhysicalParams,
                  times: StageTimes,
                  label: SpaceLabel = TELEPORT_LABEL,
                  alice_mapping: bool = True) -> List[Stage]:
    e = effective_params(p).e
    jumps = _detector_jumps(label)
    leak = _leak(label, p.kappa)
    h1a = embed(hamiltonian_h1(e, ATOM1, CAV_A), (ATOM1, CAV_A), label)
    h1b = embed(hamiltonian_h1(e, ATOM2, CAV_B), (ATOM2, CAV_B), label)
    if not alice_mapping:
        return [
            Stage(name="entangle", h_eff=h1a + h1b + leak, duration=times.t_e,
                  jumps=jumps)
        ]
    h2a = embed(hamiltonian_h2(p.delta_e, ATOM1), ATOM1, label)
    stages = [
        Stage(name="alice-phase",
              h_eff=h2a + leak,
              duration=zeeman_duration(p, ALICE_COMPENSATION),
              jumps=jumps)
    ]
    if times.t_e > times.t_i:
        stages.append(
            Stage(name="bob-lead", h_eff=h1b + leak,
                  duration=times.t_e - times.t_i, jumps=jumps))
    elif times.t_i > times.t_e:
        stages.append(
            Stage(name="alice-lead", h_eff=h1a + leak,
                  duration=times.t_i - times.t_e, jumps=jumps))
    stages.append(
        Stage(name="joint-prep",
              h_eff=h1a + h1b + leak,
              duration=min(times.t_i, times.t_e),
              jumps=jumps))
    return stages


def detection_schedule(p: PhysicalParams, t_d: float,
                       label: SpaceLabel = TELEPORT_LABEL) -> List[Stage]:
    """
    H = 0 while both cavities leak through the beam splitter
    """
    if t_d < 0:
        raise ValueError(f"detection window must be >= 0; get {t_d}")
    return [
        Stage(name="detection",
              h_eff=_leak(label, p.kappa),
              duration=t_d,
              jumps=_detector_jumps(label))
    ]
