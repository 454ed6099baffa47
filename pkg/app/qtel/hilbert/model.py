from typing import Dict, Final, Iterable, Sequence, Tuple
from math import prod
import numpy as np
from pydantic import BaseModel, validator, model_validator

# atomic levels
E_LEVEL: Final[int] = 0
G_LEVEL: Final[int] = 1
# cavity Fock levels
FOCK_0: Final[int] = 0
FOCK_1: Final[int] = 1

ATOM1: Final[str] = "atom1"
CAV_A: Final[str] = "cavA"
ATOM2: Final[str] = "atom2"
CAV_B: Final[str] = "cavB"
ATOM_R: Final[str] = "atom_r"

NORM_TOL: Final[float] = 1e-12
HERMITIAN_TOL: Final[float] = 1e-10
TRACE_TOL: Final[float] = 1e-10


def _frozen_array(value, ndim: int) -> np.ndarray:
    arr = np.array(value, dtype=np.complex128, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array; get shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array contains non-finite entries")
    arr.setflags(write=False)
    return arr


class Factor(BaseModel):
    name: str
    dim: int

    class Config:
        frozen = True

    @validator("dim")
    def _check_dim(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"factor dimension must be >= 2; get {v}")
        return v


class SpaceLabel(BaseModel):
    """
    Ordered tensor-factor layout of a Hilbert space.

    The first factor is the most significant one in the flattened index, the
    same convention as ``numpy.kron``.
    """
    factors: Tuple[Factor, ...]

    class Config:
        frozen = True

    @validator("factors")
    def _check_factors(cls, v: Tuple[Factor, ...]) -> Tuple[Factor, ...]:
        if len(v) == 0:
            raise ValueError("a space needs at least one factor")
        names = [f.name for f in v]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate factor name in {names}")
        return v

    @classmethod
    def of(cls, *pairs: Tuple[str, int]) -> "SpaceLabel":
        return cls(factors=tuple(Factor(name=n, dim=d) for n, d in pairs))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown factor: {name}") from None

    def dim_of(self, name: str) -> int:
        return self.factors[self.index(name)].dim

    def sub(self, names: Iterable[str]) -> "SpaceLabel":
        """
        the sub-space made of ``names``, kept in this label's order
        """
        wanted = set(names)
        for n in wanted:
            self.index(n)
        return SpaceLabel(
            factors=tuple(f for f in self.factors if f.name in wanted))

    def without(self, name: str) -> "SpaceLabel":
        self.index(name)
        return SpaceLabel(
            factors=tuple(f for f in self.factors if f.name != name))


def qubit_label(*names: str) -> SpaceLabel:
    return SpaceLabel.of(*[(n, 2) for n in names])


TELEPORT_LABEL: Final[SpaceLabel] = qubit_label(ATOM1, CAV_A, ATOM2, CAV_B)


class PureState(BaseModel):
    label: SpaceLabel
    amplitudes: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("amplitudes", pre=True)
    def _check_amplitudes(cls, v) -> np.ndarray:
        return _frozen_array(v, 1)

    @model_validator(mode="after")  # type: ignore
    def _check_shape(self) -> "PureState":
        if self.amplitudes.shape != (self.label.dim, ):
            raise ValueError(
                f"amplitudes of shape {self.amplitudes.shape} do not fit a "
                f"space of dimension {self.label.dim}")
        return self

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm2 - 1.0) < NORM_TOL

    def normalized(self) -> "PureState":
        n2 = self.norm2
        if n2 <= 0.0:
            raise ValueError("cannot normalize the zero vector")
        return PureState(label=self.label,
                         amplitudes=self.amplitudes / np.sqrt(n2))

    def amplitude(self, levels: Dict[str, int]) -> complex:
        idx = np.ravel_multi_index(tuple(levels[n] for n in self.label.names),
                                   self.label.dims)
        return complex(self.amplitudes[idx])


class Operator(BaseModel):
    label: SpaceLabel
    matrix: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("matrix", pre=True)
    def _check_matrix(cls, v) -> np.ndarray:
        return _frozen_array(v, 2)

    @model_validator(mode="after")  # type: ignore
    def _check_shape(self) -> "Operator":
        d = self.label.dim
        if self.matrix.shape != (d, d):
            raise ValueError(
                f"matrix of shape {self.matrix.shape} does not fit a space of "
                f"dimension {d}")
        return self

    def _same_space(self, other: "Operator") -> None:
        if other.label != self.label:
            raise ValueError(
                f"operator spaces differ: {self.label.names} vs {other.label.names}"
            )

    def __add__(self, other: "Operator") -> "Operator":
        self._same_space(other)
        return Operator(label=self.label, matrix=self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._same_space(other)
        return Operator(label=self.label, matrix=self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(label=self.label, matrix=self.matrix * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._same_space(other)
        return Operator(label=self.label, matrix=self.matrix @ other.matrix)

    def dagger(self) -> "Operator":
        return Operator(label=self.label, matrix=self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    @property
    def is_diagonal(self) -> bool:
        off = self.matrix - np.diag(np.diagonal(self.matrix))
        return not np.any(off)


class DensityMatrix(BaseModel):
    """
    Hermitian positive semi-definite matrix; unit trace when ``normalized``.
    """
    label: SpaceLabel
    matrix: np.ndarray
    normalized: bool = True

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator("matrix", pre=True)
    def _check_matrix(cls, v) -> np.ndarray:
        return _frozen_array(v, 2)

    @model_validator(mode="after")  # type: ignore
    def _check_density(self) -> "DensityMatrix":
        m = self.matrix
        d = self.label.dim
        if m.shape != (d, d):
            raise ValueError(
                f"matrix of shape {m.shape} does not fit a space of dimension {d}"
            )
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        scale = max(1.0, float(np.trace(m).real))
        if np.linalg.eigvalsh(m).min() < -HERMITIAN_TOL * scale:
            raise ValueError("density matrix is not positive semi-definite")
        if self.normalized and abs(np.trace(m).real - 1.0) > TRACE_TOL:
            raise ValueError(
                f"density matrix trace is {np.trace(m).real}, expected 1")
        return self

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def population(self, index: int) -> float:
        return float(self.matrix[index, index].real)


def stack_labels(labels: Sequence[SpaceLabel]) -> SpaceLabel:
    factors = tuple(f for label in labels for f in label.factors)
    return SpaceLabel(factors=factors)
