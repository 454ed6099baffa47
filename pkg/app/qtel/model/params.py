from typing import Final, List
from typing_extensions import Self
import math
from pydantic import BaseModel, model_validator

from app.qtel import slog
from app.qtel.errors import OverdampedRegimeError

TWO_PI: Final[float] = 2.0 * math.pi


class PhysicalParams(BaseModel):
    """
    Cavity-QED parameters in angular units (rad/μs).

    ``g`` vacuum coupling, ``omega`` classical Raman field, ``kappa`` cavity
    field decay, ``gamma`` atomic spontaneous emission, ``delta`` Raman
    detuning, ``delta_e`` Zeeman splitting driven by H⁽²⁾, ``eta`` detector
    efficiency.
    """
    g: float
    omega: float
    kappa: float
    gamma: float
    delta: float
    delta_e: float
    eta: float = 1.0

    class Config:
        frozen = True

    @model_validator(mode="after")  # type: ignore
    def _check_ranges(self) -> "PhysicalParams":
        for name in ("g", "omega", "delta", "delta_e"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0; get {v}")
        for name in ("kappa", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0; get {v}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1]; get {self.eta}")
        return self

    @classmethod
    def from_mhz(cls,
                 g: float,
                 omega: float,
                 kappa: float,
                 gamma: float,
                 delta: float,
                 delta_e: float,
                 eta: float = 1.0) -> "PhysicalParams":
        """
        frequencies given as value/2π in MHz
        """
        return cls(g=TWO_PI * g,
                   omega=TWO_PI * omega,
                   kappa=TWO_PI * kappa,
                   gamma=TWO_PI * gamma,
                   delta=TWO_PI * delta,
                   delta_e=TWO_PI * delta_e,
                   eta=eta)

    @classmethod
    def reference(cls, eta: float = 1.0) -> "PhysicalParams":
        # (g:Ω:κ:γ:Δ)/2π = (10:10:0.01:1:100) MHz
        return cls.from_mhz(10.0, 10.0, 0.01, 1.0, 100.0, 1.0, eta)

    def replace(self, **changes: float) -> Self:
        return type(self)(**{**self.model_dump(), **changes})

    def to_mhz(self) -> dict:
        return {
            k: (v if k == "eta" else v / TWO_PI)
            for k, v in self.model_dump().items()
        }


class EffectiveParams(BaseModel):
    e: float
    omega_kappa: float

    class Config:
        frozen = True


def effective_params(p: PhysicalParams) -> EffectiveParams:
    """
    E = gΩ/Δ and Ω_κ = √(4E² − κ²)
    """
    e = p.g * p.omega / p.delta
    disc = 4.0 * e * e - p.kappa * p.kappa
    if disc <= 0.0:
        raise OverdampedRegimeError(
            f"4E² ≤ κ² (E={e}, κ={p.kappa}): no real timing solution")
    return EffectiveParams(e=e, omega_kappa=math.sqrt(disc))


class RegimeThresholds(BaseModel):
    max_adiabatic: float = 0.05
    min_detuning_ratio: float = 20.0
    min_rabi_ratio: float = 50.0

    class Config:
        frozen = True


class RegimeWarning(BaseModel):
    name: str
    value: float
    threshold: float
    message: str

    class Config:
        frozen = True


def validate_regime(
        p: PhysicalParams,
        thresholds: RegimeThresholds = RegimeThresholds()
) -> List[RegimeWarning]:
    """
    Checks the approximations the effective model relies on.

    Adiabatic elimination needs gΩ/Δ² ≪ 1 and Δ ≫ γ; the bad-cavity picture of
    the mapping needs Ω_κ ≫ κ. Raises :class:`OverdampedRegimeError` when the
    mapping cannot be timed at all.
    """
    log = slog()
    eff = effective_params(p)
    warnings: List[RegimeWarning] = []
    adiabatic = p.g * p.omega / (p.delta * p.delta)
    if adiabatic > thresholds.max_adiabatic:
        warnings.append(
            RegimeWarning(name="adiabatic",
                          value=adiabatic,
                          threshold=thresholds.max_adiabatic,
                          message="gΩ/Δ² is not small"))
    detuning = math.inf if p.gamma == 0 else p.delta / p.gamma
    if detuning < thresholds.min_detuning_ratio:
        warnings.append(
            RegimeWarning(name="detuning",
                          value=detuning,
                          threshold=thresholds.min_detuning_ratio,
                          message="Δ/γ is not large"))
    rabi = math.inf if p.kappa == 0 else eff.omega_kappa / p.kappa
    if rabi < thresholds.min_rabi_ratio:
        warnings.append(
            RegimeWarning(name="rabi",
                          value=rabi,
                          threshold=thresholds.min_rabi_ratio,
                          message="Ω_κ/κ is not large"))
    for w in warnings:
        log.warning("regime", check=w.name, value=w.value,
                    threshold=w.threshold)
    return warnings
