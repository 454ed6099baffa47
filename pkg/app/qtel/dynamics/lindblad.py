from typing import Optional, Sequence
import math
import numpy as np

from app.qtel.errors import NumericalError
from app.qtel.hilbert.model import DensityMatrix, Operator

MAX_STEPS = 10_000_000


def lindblad_rhs(rho: np.ndarray, h: np.ndarray,
                 jumps: Sequence[np.ndarray]) -> np.ndarray:
    """
    dρ/dt = −i[H, ρ] + Σ L ρ L† − ½{L†L, ρ}
    """
    out = -1j * (h @ rho - rho @ h)
    for l in jumps:
        ld = l.conj().T
        ldl = ld @ l
        out += l @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl)
    return out


def lindblad_evolve(rho: DensityMatrix,
                    h: Operator,
                    jumps: Sequence[Operator],
                    t: float,
                    max_step: Optional[float] = None) -> DensityMatrix:
    """
    Fixed-step RK4 integration of the master equation; the step never exceeds
    1/(100·max(‖H‖, ‖L†L‖)).
    """
    if t < 0 or not math.isfinite(t):
        raise ValueError(f"evolution time must be finite and >= 0; get {t}")
    if any(l.label != rho.label for l in jumps) or h.label != rho.label:
        raise ValueError("operators and state live on different spaces")
    hm = h.matrix
    ls = [l.matrix for l in jumps]
    scale = max([np.linalg.norm(hm, 2)] +
                [np.linalg.norm(l.conj().T @ l, 2) for l in ls] + [1e-300])
    step = 1.0 / (100.0 * scale)
    if max_step is not None:
        step = min(step, max_step)
    if t == 0:
        return rho
    n = math.ceil(t / step)
    if n > MAX_STEPS:
        raise NumericalError(
            f"step-size underflow: {n} RK4 steps needed for t={t}")
    dt = t / n
    m = rho.matrix.copy()
    for _ in range(n):
        k1 = lindblad_rhs(m, hm, ls)
        k2 = lindblad_rhs(m + 0.5 * dt * k1, hm, ls)
        k3 = lindblad_rhs(m + 0.5 * dt * k2, hm, ls)
        k4 = lindblad_rhs(m + dt * k3, hm, ls)
        m = m + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(m)):
        raise NumericalError("master-equation integration diverged")
    return DensityMatrix(label=rho.label,
                         matrix=0.5 * (m + m.conj().T),
                         normalized=rho.normalized)
