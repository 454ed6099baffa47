from typing import TypeVar
from numpy.random import Generator

from app.qtel.dynamics.trajectory import Channel, Trajectory, run_trajectory
from app.qtel.errors import ContractViolation
from app.qtel.hilbert.model import ATOM2, DensityMatrix, PureState
from app.qtel.hilbert.ops import partial_trace, to_density
from app.qtel.model.params import PhysicalParams
from app.qtel.protocol.model import ProtocolOutcome, Status
from app.qtel.protocol.stages import detection_schedule, zeeman_phase

S = TypeVar("S", PureState, DensityMatrix)

# phase put on |g⟩ relative to |e⟩ after a click, per detector
CORRECTIONS = {Channel.PLUS: -1j, Channel.MINUS: 1j}


def classify(traj: Trajectory, prep_offset: float = 0.0) -> ProtocolOutcome:
    """
    Reads the heralding record of a detection-stage trajectory
    """
    observed = traj.observed
    match len(observed):
        case 0:
            return ProtocolOutcome(status=Status.NO_CLICK,
                                   joint_state=traj.final_state,
                                   events=traj.events)
        case 1:
            click = observed[0]
            return ProtocolOutcome(status=Status.SUCCESS,
                                   detector=click.channel,
                                   t_click=click.time - prep_offset,
                                   bob_state=partial_trace(
                                       to_density(traj.final_state), ATOM2),
                                   joint_state=traj.final_state,
                                   events=traj.events)
        case _:
            return ProtocolOutcome(status=Status.TWO_CLICKS,
                                   joint_state=traj.final_state,
                                   events=traj.events)


def detection_stage(joint: PureState,
                    t_d: float,
                    eta: float,
                    rng: Generator,
                    p: PhysicalParams,
                    start_time: float = 0.0) -> ProtocolOutcome:
    """
    Lets both cavities leak into the detectors for ``t_d``.

    Exactly one observed click heralds success; Bob's reduced state is
    returned uncorrected.
    """
    traj = run_trajectory(joint,
                          detection_schedule(p, t_d, joint.label),
                          rng,
                          eta=eta,
                          start_time=start_time)
    return classify(traj, prep_offset=start_time)


def post_correction(state: S, detector: Channel | None, p: PhysicalParams,
                    factor: str = ATOM2) -> S:
    """
    H⁽²⁾ pulse on Bob's atom that removes the detector-dependent ±i on |g⟩
    """
    if detector is None:
        raise ContractViolation("no correction exists for a failed run")
    return zeeman_phase(state, p, factor, CORRECTIONS[detector])
