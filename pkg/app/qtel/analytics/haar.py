from typing import Callable, Optional
import math
import numpy as np
from numpy.polynomial.legendre import leggauss

from app.qtel.protocol.model import InputQubit

DEFAULT_NODES = 64


def input_from_population(u: float) -> InputQubit:
    """
    √u|e⟩ + √(1−u)|g⟩; every closed form here depends on the input only
    through |a|², which is uniform on [0, 1] for Haar-random qubits
    """
    return InputQubit.normalize(math.sqrt(u), math.sqrt(1.0 - u))


def _nodes(n: int):
    if n < 1:
        raise ValueError(f"quadrature needs at least one node; get {n}")
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def average_over_inputs(f: Callable[[InputQubit], float],
                        nodes: int = DEFAULT_NODES) -> float:
    u, w = _nodes(nodes)
    return float(sum(wi * f(input_from_population(ui)) for ui, wi in zip(u, w)))


def weighted_average_over_inputs(f: Callable[[InputQubit], Optional[float]],
                                 weight: Callable[[InputQubit], float],
                                 nodes: int = DEFAULT_NODES) -> Optional[float]:
    """
    ∫ weight·f / ∫ weight, the average seen by an experiment that only keeps
    heralded runs; ``None`` when the total weight vanishes
    """
    u, w = _nodes(nodes)
    num = 0.0
    den = 0.0
    for ui, wi in zip(u, w):
        q = input_from_population(ui)
        wq = weight(q)
        if wq <= 0.0:
            continue
        value = f(q)
        if value is None:
            continue
        num += wi * wq * value
        den += wi * wq
    if den <= 0.0:
        return None
    return num / den


def sample_average(values: np.ndarray) -> tuple[float, float]:
    """
    mean and standard error of a Monte-Carlo sample
    """
    n = len(values)
    if n == 0:
        raise ValueError("empty sample")
    mean = float(np.mean(values))
    err = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, err
