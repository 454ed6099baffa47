from typing import Mapping, Sequence, TypeVar
import math
import numpy as np
from scipy.linalg import expm

from app.qtel.errors import NumericalError
from app.qtel.hilbert.model import (DensityMatrix, Operator, PureState,
                                    SpaceLabel, stack_labels)

T = TypeVar("T", PureState, Operator, DensityMatrix)


def tensor(a: T, b: T) -> T:
    """
    Kronecker product; the factors of ``a`` come first
    """
    label = stack_labels([a.label, b.label])
    match a, b:
        case PureState(), PureState():
            return PureState(label=label,
                             amplitudes=np.kron(a.amplitudes, b.amplitudes))
        case DensityMatrix(), DensityMatrix():
            return DensityMatrix(label=label,
                                 matrix=np.kron(a.matrix, b.matrix),
                                 normalized=a.normalized and b.normalized)
        case Operator(), Operator():
            return Operator(label=label, matrix=np.kron(a.matrix, b.matrix))
        case _:
            raise TypeError(
                f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def _permute_operator(matrix: np.ndarray, order: Sequence[str],
                      target: SpaceLabel) -> np.ndarray:
    n = len(order)
    dims = [target.dim_of(name) for name in order]
    t = matrix.reshape(dims + dims)
    perm = [list(order).index(name) for name in target.names]
    t = t.transpose(perm + [p + n for p in perm])
    return t.reshape(target.dim, target.dim)


def embed(op: Operator, factors: str | Sequence[str],
          target: SpaceLabel) -> Operator:
    """
    Lifts ``op`` acting on ``factors`` to the whole ``target`` space, identity
    on the remaining factors
    """
    names = (factors, ) if isinstance(factors, str) else tuple(factors)
    for n in names:
        if n not in target:
            raise ValueError(f"unknown factor: {n}")
    dims = tuple(target.dim_of(n) for n in names)
    if dims != op.label.dims:
        raise ValueError(
            f"operator dimensions {op.label.dims} do not match factors {names} {dims}"
        )
    rest = [f.name for f in target.factors if f.name not in names]
    rest_dim = math.prod(target.dim_of(n) for n in rest)
    full = np.kron(op.matrix, np.eye(rest_dim, dtype=np.complex128))
    return Operator(label=target,
                    matrix=_permute_operator(full,
                                             list(names) + rest, target))


def partial_trace(rho: DensityMatrix, keep: str | Sequence[str]) -> DensityMatrix:
    names = (keep, ) if isinstance(keep, str) else tuple(keep)
    if len(names) == 0:
        raise ValueError("partial trace must keep at least one factor")
    kept = rho.label.sub(names)
    traced = [n for n in rho.label.names if n not in kept.names]
    order = list(kept.names) + traced
    n = len(order)
    dims = [rho.label.dim_of(name) for name in order]
    t = rho.matrix.reshape(list(rho.label.dims) * 2)
    src = [rho.label.index(name) for name in order]
    t = t.transpose(src + [s + n for s in src])
    dk = kept.dim
    dr = math.prod(dims[len(kept.names):])
    t = t.reshape(dk, dr, dk, dr)
    reduced = np.einsum("arbr->ab", t)
    return DensityMatrix(label=kept,
                         matrix=0.5 * (reduced + reduced.conj().T),
                         normalized=rho.normalized)


def exp_apply(matrix: np.ndarray, amplitudes: np.ndarray,
              t: float) -> np.ndarray:
    """
    exp(-i M t) applied to a vector; closed form when M is diagonal
    """
    if not math.isfinite(t):
        raise NumericalError(f"non-finite evolution time {t}")
    diag = np.diagonal(matrix)
    if not np.any(matrix - np.diag(diag)):
        return np.exp(-1j * diag * t) * amplitudes
    return expm(-1j * t * matrix) @ amplitudes


def propagator(generator: Operator, t: float) -> Operator:
    if not math.isfinite(t):
        raise NumericalError(f"non-finite evolution time {t}")
    if generator.is_diagonal:
        return Operator(label=generator.label,
                        matrix=np.diag(
                            np.exp(-1j * np.diagonal(generator.matrix) * t)))
    return Operator(label=generator.label,
                    matrix=expm(-1j * t * generator.matrix))


def evolve(state: PureState, generator: Operator, t: float) -> PureState:
    """
    exp(-i A t)|ψ⟩ for any (possibly non-Hermitian) generator; the result is
    not renormalized
    """
    if state.label != generator.label:
        raise ValueError("state and generator live on different spaces")
    if t < 0:
        raise ValueError(f"evolution time must be >= 0; get {t}")
    out = exp_apply(generator.matrix, state.amplitudes, t)
    if not np.all(np.isfinite(out)):
        raise NumericalError("evolution produced non-finite amplitudes")
    return PureState(label=state.label, amplitudes=out)


def apply(op: Operator, state: PureState) -> PureState:
    if state.label != op.label:
        raise ValueError("state and operator live on different spaces")
    return PureState(label=state.label, amplitudes=op.matrix @ state.amplitudes)


def conjugate(op: Operator, rho: DensityMatrix) -> DensityMatrix:
    """
    U ρ U† for a unitary ``op``
    """
    if rho.label != op.label:
        raise ValueError("density matrix and operator live on different spaces")
    m = op.matrix @ rho.matrix @ op.matrix.conj().T
    return DensityMatrix(label=rho.label,
                         matrix=0.5 * (m + m.conj().T),
                         normalized=rho.normalized)


def expectation(op: Operator, state: PureState | DensityMatrix) -> complex:
    if state.label != op.label:
        raise ValueError("state and operator live on different spaces")
    match state:
        case PureState():
            psi = state.normalized().amplitudes
            return complex(np.vdot(psi, op.matrix @ psi))
        case DensityMatrix():
            return complex(np.trace(op.matrix @ state.matrix))
        case _:
            raise TypeError(f"cannot take an expectation in {type(state).__name__}")


def to_density(state: PureState) -> DensityMatrix:
    psi = state.normalized()
    return DensityMatrix(label=state.label,
                         matrix=np.outer(psi.amplitudes,
                                         psi.amplitudes.conj()))


def mix(states: Sequence[DensityMatrix],
        weights: Sequence[float] | None = None) -> DensityMatrix:
    if len(states) == 0:
        raise ValueError("nothing to mix")
    label = states[0].label
    if any(s.label != label for s in states):
        raise ValueError("cannot mix states of different spaces")
    w = np.ones(len(states)) if weights is None else np.asarray(weights, float)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("mixing weights must be non-negative and not all zero")
    w = w / w.sum()
    m = np.einsum("k,kij->ij", w, np.stack([s.matrix for s in states]))
    return DensityMatrix(label=label, matrix=m)


def basis_state(label: SpaceLabel, levels: Mapping[str, int]) -> PureState:
    missing = set(label.names) - set(levels)
    if missing:
        raise ValueError(f"missing levels for factors {sorted(missing)}")
    amps = np.zeros(label.dim, dtype=np.complex128)
    idx = np.ravel_multi_index(tuple(levels[n] for n in label.names),
                               label.dims)
    amps[idx] = 1.0
    return PureState(label=label, amplitudes=amps)


def factor_out(state: PureState, factor: str, level: int) -> PureState:
    """
    Removes ``factor`` from a product state where it sits in ``level``; the
    remainder is returned unnormalized
    """
    axis = state.label.index(factor)
    t = state.amplitudes.reshape(state.label.dims)
    rest = np.take(t, level, axis=axis)
    other = np.delete(t, level, axis=axis)
    scale = max(1.0, float(np.max(np.abs(t))))
    if other.size and np.max(np.abs(other)) > 1e-12 * scale:
        raise ValueError(f"factor {factor} is not in level {level}")
    return PureState(label=state.label.without(factor),
                     amplitudes=rest.reshape(-1))


def fidelity(rho: DensityMatrix, psi: PureState) -> float:
    """
    ⟨ψ|ρ|ψ⟩ for a normalized target ψ
    """
    if rho.label.dims != psi.label.dims:
        raise ValueError("state and target live on different spaces")
    if abs(psi.norm2 - 1.0) > 1e-10:
        raise ValueError(f"target state is not normalized (norm² {psi.norm2})")
    value = float(np.vdot(psi.amplitudes, rho.matrix @ psi.amplitudes).real)
    return min(1.0, max(0.0, value))


def overlap(a: PureState, b: PureState) -> float:
    """
    |⟨a|b⟩|² after normalizing both; insensitive to global phase
    """
    if a.label.dims != b.label.dims:
        raise ValueError("states live on different spaces")
    return float(
        abs(np.vdot(a.amplitudes, b.amplitudes))**2 / (a.norm2 * b.norm2))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.label.dims != sigma.label.dims:
        raise ValueError("density matrices live on different spaces")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho.matrix -
                                                         sigma.matrix))))
