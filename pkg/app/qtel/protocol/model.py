from enum import Enum
from typing import Any, Optional, Tuple
import math
import numpy as np
from numpy.random import Generator
from pydantic import BaseModel, validator, model_validator

from app.qtel.dynamics.trajectory import Channel, JumpEvent
from app.qtel.hilbert.model import (E_LEVEL, G_LEVEL, DensityMatrix,
                                    PureState, qubit_label)

INPUT_NORM_TOL = 1e-12


class InputQubit(BaseModel):
    """
    a|e⟩ + b|g⟩
    """
    a: complex
    b: complex

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("a", "b", pre=True)
    def _to_complex(cls, v: Any) -> complex:
        c = complex(v)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError(f"amplitude must be finite; get {v}")
        return c

    @model_validator(mode="after")  # type: ignore
    def _check_norm(self) -> "InputQubit":
        n2 = abs(self.a)**2 + abs(self.b)**2
        if abs(n2 - 1.0) >= INPUT_NORM_TOL:
            raise ValueError(f"|a|² + |b|² = {n2}, expected 1")
        return self

    @classmethod
    def normalize(cls, a: complex, b: complex) -> "InputQubit":
        n = math.sqrt(abs(a)**2 + abs(b)**2)
        if n == 0:
            raise ValueError("input qubit amplitudes are both zero")
        return cls(a=a / n, b=b / n)

    @classmethod
    def haar_random(cls, rng: Generator) -> "InputQubit":
        """
        Uniform on the Bloch sphere: |a|² uniform on [0, 1], independent phases
        """
        u = rng.random()
        phi_a, phi_b = rng.random(2) * 2.0 * math.pi
        return cls.normalize(
            math.sqrt(u) * complex(math.cos(phi_a), math.sin(phi_a)),
            math.sqrt(1.0 - u) * complex(math.cos(phi_b), math.sin(phi_b)))

    @property
    def pa(self) -> float:
        return abs(self.a)**2

    @property
    def pb(self) -> float:
        return abs(self.b)**2

    def state(self, atom: str) -> PureState:
        amps = np.zeros(2, dtype=np.complex128)
        amps[E_LEVEL] = self.a
        amps[G_LEVEL] = self.b
        return PureState(label=qubit_label(atom), amplitudes=amps)


class TimingConvention(str, Enum):
    # root of tan(Ω_κ t/2) = −Ω_κ/(2E+κ): Bob ends exactly in (|e0⟩+i|g1⟩)/√2
    BALANCED = "balanced"
    # root of tan(Ω_κ t/2) = −Ω_κ/(2E−κ) as printed
    AS_PRINTED = "as_printed"


class StageTimes(BaseModel):
    t_i: float
    t_e: float
    t_d: Optional[float] = None

    class Config:
        frozen = True

    @model_validator(mode="after")  # type: ignore
    def _check(self) -> "StageTimes":
        if not (self.t_i > 0 and self.t_e > 0):
            raise ValueError("stage times must be > 0")
        if self.t_d is not None and self.t_d < 0:
            raise ValueError(f"detection window must be >= 0; get {self.t_d}")
        return self

    def with_detection(self, t_d: float) -> "StageTimes":
        return StageTimes(t_i=self.t_i, t_e=self.t_e, t_d=t_d)

    @property
    def prep_duration(self) -> float:
        return max(self.t_i, self.t_e)


class Status(str, Enum):
    SUCCESS = "success"
    NO_CLICK = "no_click"
    TWO_CLICKS = "two_clicks"
    PREP_DECAY = "prep_decay"


class ProtocolOutcome(BaseModel):
    status: Status
    detector: Optional[Channel] = None
    t_click: Optional[float] = None
    bob_state: Optional[DensityMatrix] = None
    joint_state: Optional[PureState] = None
    events: Tuple[JumpEvent, ...] = ()

    class Config:
        frozen = True

    @model_validator(mode="after")  # type: ignore
    def _check(self) -> "ProtocolOutcome":
        success = self.status == Status.SUCCESS
        if success != (self.detector is not None):
            raise ValueError("a detector is reported iff the run succeeded")
        if success != (self.t_click is not None):
            raise ValueError("a click time is reported iff the run succeeded")
        return self

    @property
    def succeeded(self) -> bool:
        return self.status == Status.SUCCESS


def haar_random_qubit(rng: Generator) -> InputQubit:
    return InputQubit.haar_random(rng)
