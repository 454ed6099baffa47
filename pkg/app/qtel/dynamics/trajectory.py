from enum import Enum
from typing import List, Optional, Sequence, Tuple
import numpy as np
from numpy.random import Generator, PCG64
from pydantic import BaseModel, model_validator
from scipy.optimize import bisect

from app.qtel.errors import NumericalError
from app.qtel.hilbert.model import Operator, PureState
from app.qtel.hilbert.ops import exp_apply

WAITING_TIME_XTOL = 1e-9


class Channel(str, Enum):
    PLUS = "D+"
    MINUS = "D-"


class JumpEvent(BaseModel):
    time: float
    channel: Channel
    observed: bool
    # uniform draw compared against η; kept so a record can be re-thinned
    draw: float

    class Config:
        frozen = True


class Stage(BaseModel):
    """
    A constant-generator interval of a schedule. ``jumps`` pairs each detector
    channel with its jump operator.
    """
    name: str
    h_eff: Operator
    duration: float
    jumps: Tuple[Tuple[Channel, Operator], ...] = ()

    class Config:
        frozen = True

    @model_validator(mode="after")  # type: ignore
    def _check(self) -> "Stage":
        if not self.duration >= 0:
            raise ValueError(f"stage {self.name}: duration must be >= 0")
        for _, j in self.jumps:
            if j.label != self.h_eff.label:
                raise ValueError(
                    f"stage {self.name}: jump operator space differs")
        return self


class StageMark(BaseModel):
    name: str
    end_time: float

    class Config:
        frozen = True


class Trajectory(BaseModel):
    seed: Optional[int] = None
    events: Tuple[JumpEvent, ...]
    final_state: PureState
    stage_marks: Tuple[StageMark, ...]

    class Config:
        frozen = True

    @model_validator(mode="after")  # type: ignore
    def _check_order(self) -> "Trajectory":
        times = [e.time for e in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("jump times must be strictly increasing")
        return self

    @property
    def actual_clicks(self) -> int:
        return len(self.events)

    @property
    def observed(self) -> List[JumpEvent]:
        return [e for e in self.events if e.observed]


class JumpSample(BaseModel):
    time: float
    channel: Channel
    state: PureState

    class Config:
        frozen = True


def _survival(h: np.ndarray, psi: np.ndarray, t: float) -> float:
    out = exp_apply(h, psi, t)
    return float(np.vdot(out, out).real)


def no_jump_evolve(state: PureState, h_eff: Operator,
                   t: float) -> Tuple[PureState, float]:
    """
    Conditional no-jump evolution.

    The propagated vector exp(−iH_eff t)ψ is not normalized; its squared norm
    relative to ‖ψ‖² is the survival probability. The returned state is that
    vector renormalized, paired with the survival. A zero-norm result returns
    the input state with survival 0.
    """
    if t < 0:
        raise ValueError(f"evolution time must be >= 0; get {t}")
    out = exp_apply(h_eff.matrix, state.amplitudes, t)
    n2 = float(np.vdot(out, out).real)
    if not np.isfinite(n2):
        raise NumericalError("no-jump evolution produced non-finite amplitudes")
    survival = n2 / state.norm2
    if n2 <= 0.0:
        return state, 0.0
    return PureState(label=state.label, amplitudes=out / np.sqrt(n2)), survival


def _sample(psi: np.ndarray, stage: Stage, rng: Generator,
            t_max: float) -> Optional[Tuple[float, int, np.ndarray]]:
    h = stage.h_eff.matrix
    if len(stage.jumps) == 0:
        return None
    r = rng.random()
    if _survival(h, psi, t_max) >= r:
        return None
    t_j = bisect(lambda t: _survival(h, psi, t) - r,
                 0.0,
                 t_max,
                 xtol=WAITING_TIME_XTOL)
    at_jump = exp_apply(h, psi, t_j)
    branches = [j.matrix @ at_jump for _, j in stage.jumps]
    rates = np.array([float(np.vdot(b, b).real) for b in branches])
    total = rates.sum()
    if not total > 0.0:
        raise NumericalError(
            f"stage {stage.name}: zero jump rate at sampled time {t_j}")
    k = int(np.searchsorted(np.cumsum(rates) / total, rng.random(),
                            side="right"))
    k = min(k, len(branches) - 1)
    post = branches[k] / np.sqrt(rates[k])
    return t_j, k, post


def sample_jump(state: PureState, stage: Stage, rng: Generator,
                t_max: float) -> Optional[JumpSample]:
    """
    Draws the first jump of ``stage`` within ``t_max``.

    Inverse-transform sampling: the jump happens when the no-jump survival
    drops below a uniform draw r; the channel is then chosen with probability
    proportional to ‖J_i ψ(t_j)‖². ``None`` means no jump before ``t_max``.
    """
    psi = state.normalized().amplitudes
    res = _sample(psi, stage, rng, t_max)
    if res is None:
        return None
    t_j, k, post = res
    return JumpSample(time=t_j,
                      channel=stage.jumps[k][0],
                      state=PureState(label=state.label, amplitudes=post))


def make_rng(seed: int) -> Generator:
    return Generator(PCG64(seed))


def run_trajectory(initial: PureState,
                   schedule: Sequence[Stage],
                   rng: Generator | int,
                   eta: float = 1.0,
                   start_time: float = 0.0) -> Trajectory:
    """
    One quantum-jump trajectory through a piecewise-constant schedule.

    Every actual jump is recorded; it is observed with probability ``eta``.
    The draw order per jump is fixed (waiting time, channel, efficiency) so a
    seed reproduces the whole record.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1]; get {eta}")
    seed: Optional[int] = None
    if isinstance(rng, int):
        seed = rng
        rng = make_rng(rng)
    for stage in schedule:
        if stage.h_eff.label != initial.label:
            raise ValueError(f"stage {stage.name} acts on another space")
    psi = initial.normalized().amplitudes
    clock = start_time
    events: List[JumpEvent] = []
    marks: List[StageMark] = []
    for stage in schedule:
        elapsed = 0.0
        while True:
            remaining = stage.duration - elapsed
            res = _sample(psi, stage, rng, remaining)
            if res is None:
                out = exp_apply(stage.h_eff.matrix, psi, remaining)
                n2 = float(np.vdot(out, out).real)
                if not n2 > 0.0:
                    raise NumericalError(
                        f"stage {stage.name}: state vanished without a jump")
                psi = out / np.sqrt(n2)
                break
            t_j, k, psi = res
            elapsed += t_j
            draw = float(rng.random())
            events.append(
                JumpEvent(time=clock + elapsed,
                          channel=stage.jumps[k][0],
                          observed=draw < eta,
                          draw=draw))
        clock += stage.duration
        marks.append(StageMark(name=stage.name, end_time=clock))
    return Trajectory(seed=seed,
                      events=tuple(events),
                      final_state=PureState(label=initial.label,
                                            amplitudes=psi),
                      stage_marks=tuple(marks))
