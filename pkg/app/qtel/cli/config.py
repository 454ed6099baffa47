from typing import Any, Dict, List, Optional, Tuple
import math
import numpy as np
from pydantic import BaseModel, validator
from result import Result, Ok, Err
from jsonschema import validate, ValidationError
from typeguard import check_type, TypeCheckError
from typing_extensions import Self
import orjson as json

from app.qtel import slog
from app.qtel.analytics.entropy import OptimizerSettings
from app.qtel.errors import ConfigError
from app.qtel.model.params import PhysicalParams, RegimeThresholds
from app.qtel.protocol.model import InputQubit, TimingConvention

INPUT_RENORMALIZE_WARN = 1e-6

JsonSchemaDict = Dict[str, Any]

_NUMBER = {"type": "number"}
_GRID = {
    "oneOf": [{
        "type": "array",
        "items": _NUMBER,
        "minItems": 1
    }, {
        "type": "object",
        "required": ["start", "stop", "num"],
        "properties": {
            "start": _NUMBER,
            "stop": _NUMBER,
            "num": {
                "type": "integer",
                "minimum": 1
            }
        },
        "additionalProperties": False
    }]
}

CONFIG_SCHEMA: JsonSchemaDict = {
    "type": "object",
    "required": ["params_mhz", "t_d_us", "eta", "trajectories", "seed"],
    "properties": {
        "params_mhz": {
            "type": "object",
            "required": ["g", "omega", "kappa", "gamma", "delta", "delta_e"],
            "properties": {
                k: _NUMBER
                for k in ("g", "omega", "kappa", "gamma", "delta", "delta_e")
            },
            "additionalProperties": False
        },
        "t_d_us": {
            "type": "number",
            "minimum": 0
        },
        "eta": {
            "type": "number",
            "minimum": 0,
            "maximum": 1
        },
        "trajectories": {
            "type": "integer",
            "minimum": 1
        },
        "seed": {
            "type": "integer",
            "minimum": 0,
            "maximum": 2**64 - 1
        },
        "input_qubit": {
            "oneOf": [{
                "type": "null"
            }, {
                "type": "array",
                "items": _NUMBER,
                "minItems": 4,
                "maxItems": 4
            }]
        },
        "t_d_grid": _GRID,
        "eta_grid": _GRID,
        "timing": {
            "enum": [c.value for c in TimingConvention]
        },
        "fig3_mc": {
            "type": "boolean"
        },
        "fig3_mc_trajectories": {
            "type": "integer",
            "minimum": 1
        },
        "fig3_mc_every": {
            "type": "integer",
            "minimum": 1
        },
        "workers": {
            "type": "integer",
            "minimum": 1
        },
        "thresholds": {
            "type": "object",
            "properties": {
                k: _NUMBER
                for k in RegimeThresholds.model_fields
            },
            "additionalProperties": False
        },
        "optimizer": {
            "type": "object",
            "properties": {
                k: _NUMBER
                for k in OptimizerSettings.model_fields
            },
            "additionalProperties": False
        },
    },
    "additionalProperties": False
}


class RunConfig(BaseModel):
    params: PhysicalParams
    t_d_us: float
    eta: float
    trajectories: int
    seed: int
    input_qubit: Optional[InputQubit] = None
    t_d_grid: Tuple[float, ...] = tuple(np.linspace(0.0, 50.0, 50).tolist())
    eta_grid: Tuple[float, ...] = tuple(np.linspace(0.1, 1.0, 10).tolist())
    timing: TimingConvention = TimingConvention.BALANCED
    fig3_mc: bool = False
    fig3_mc_trajectories: int = 2000
    fig3_mc_every: int = 5
    workers: int = 1
    thresholds: RegimeThresholds = RegimeThresholds()
    optimizer: OptimizerSettings = OptimizerSettings()
    # parse-time notes (e.g. a renormalized input qubit)
    notes: Tuple[str, ...] = ()
    echo: Dict[str, Any] = {}

    class Config:
        frozen = True

    @validator("t_d_grid", "eta_grid")
    def _check_grid(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(v) == 0:
            raise ValueError("grid must not be empty")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"grid must be strictly increasing; get {v}")
        if any(not math.isfinite(x) for x in v):
            raise ValueError("grid values must be finite")
        return v

    @validator("eta_grid")
    def _check_eta_grid(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if v[0] < 0 or v[-1] > 1:
            raise ValueError("efficiency grid must lie in [0, 1]")
        return v

    @validator("t_d_grid")
    def _check_td_grid(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if v[0] < 0:
            raise ValueError("detection windows must be >= 0")
        return v

    @validator("t_d_us")
    def _check_td(cls, v: float) -> float:
        if v < 0 or not math.isfinite(v):
            raise ValueError(f"t_d_us must be finite and >= 0; get {v}")
        return v

    @validator("trajectories", "workers")
    def _check_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"must be >= 1; get {v}")
        return v

    def with_overrides(self, **overrides: Any) -> Self:
        """
        CLI flag overrides; ``None`` values are ignored
        """
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return self
        echo = {**self.echo, **changes}
        if "eta" in changes:
            changes["params"] = self.params.replace(eta=changes["eta"])
        return type(self)(**{**dict(self), **changes, "echo": echo})


def _expand_grid(raw: Any) -> Tuple[float, ...]:
    if isinstance(raw, dict):
        return tuple(
            np.linspace(float(raw["start"]), float(raw["stop"]),
                        int(raw["num"])).tolist())
    check_type(raw, List[float | int])
    return tuple(float(x) for x in raw)


def _parse_input(raw: Optional[List[float]],
                 notes: List[str]) -> Optional[InputQubit]:
    if raw is None:
        return None
    re_a, im_a, re_b, im_b = (float(x) for x in raw)
    a = complex(re_a, im_a)
    b = complex(re_b, im_b)
    n2 = abs(a)**2 + abs(b)**2
    if n2 == 0:
        raise ConfigError("input_qubit: both amplitudes are zero")
    if abs(n2 - 1.0) > INPUT_RENORMALIZE_WARN:
        msg = f"input_qubit: |a|²+|b|² = {n2}; renormalized"
        slog().warning("config", note=msg)
        notes.append(msg)
    return InputQubit.normalize(a, b)


def verify_with_schema(data: Dict[str, Any],
                       schema: JsonSchemaDict = CONFIG_SCHEMA
                       ) -> Result[None, Exception]:
    try:
        validate(data, schema)
        return Ok(None)
    except ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path) or "<root>"
        return Err(ConfigError(f"{path}: {e.message}"))


def parse_config(data: Dict[str, Any]) -> Result[RunConfig, Exception]:
    """
    Turns a raw JSON document into a :class:`RunConfig`
    """
    match verify_with_schema(data):
        case Err(e):
            return Err(e)
        case Ok(_):
            pass
    notes: List[str] = []
    try:
        p = data["params_mhz"]
        params = PhysicalParams.from_mhz(g=p["g"],
                                         omega=p["omega"],
                                         kappa=p["kappa"],
                                         gamma=p["gamma"],
                                         delta=p["delta"],
                                         delta_e=p["delta_e"],
                                         eta=data["eta"])
        fields: Dict[str, Any] = dict(
            params=params,
            t_d_us=float(data["t_d_us"]),
            eta=float(data["eta"]),
            trajectories=data["trajectories"],
            seed=data["seed"],
            input_qubit=_parse_input(data.get("input_qubit"), notes),
        )
        for key in ("t_d_grid", "eta_grid"):
            if key in data:
                fields[key] = _expand_grid(data[key])
        for key in ("fig3_mc", "fig3_mc_trajectories", "fig3_mc_every",
                    "workers"):
            if key in data:
                fields[key] = data[key]
        if "timing" in data:
            fields["timing"] = TimingConvention(data["timing"])
        if "thresholds" in data:
            fields["thresholds"] = RegimeThresholds(**data["thresholds"])
        if "optimizer" in data:
            fields["optimizer"] = OptimizerSettings(**data["optimizer"])
        return Ok(RunConfig(**fields, notes=tuple(notes), echo=data))
    except (ValueError, TypeError, KeyError, TypeCheckError) as e:
        if isinstance(e, ConfigError):
            return Err(e)
        return Err(ConfigError(str(e)))


def load_config(path: str) -> Result[RunConfig, Exception]:
    try:
        with open(path, "rb") as f:
            res = json.loads(f.read())  # pylint: disable=maybe-no-member
    except OSError as e:
        return Err(ConfigError(f"cannot read config {path}: {e}"))
    except json.JSONDecodeError as e:  # pylint: disable=maybe-no-member
        return Err(ConfigError(f"config {path} is not valid JSON: {e}"))
    if not isinstance(res, dict):
        return Err(
            ConfigError("config must be a JSON object; get {}".format(
                type(res).__name__)))
    return parse_config(res)
