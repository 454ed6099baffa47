from typing import Callable, List, Optional, Sequence, TypeVar
import numpy as np
import anyio
from anyio import to_thread, CapacityLimiter
import xxhash

from app.qtel import slog
from app.qtel.hilbert.model import DensityMatrix, PureState

T = TypeVar("T")

MAX_SEED = 2**64


def trajectory_seed(master_seed: int, index: int) -> int:
    """
    Independent per-trajectory seed, a function of (master seed, index) only
    """
    if not 0 <= master_seed < MAX_SEED:
        raise ValueError(f"master seed must fit in 64 bits; get {master_seed}")
    if index < 0:
        raise ValueError(f"trajectory index must be >= 0; get {index}")
    hsh = xxhash.xxh64()
    hsh.update(master_seed.to_bytes(8, byteorder="big"))
    hsh.update(index.to_bytes(8, byteorder="big"))
    return hsh.intdigest()


def _chunks(n: int, workers: int) -> List[range]:
    size = max(1, -(-n // (4 * workers)))
    return [range(i, min(n, i + size)) for i in range(0, n, size)]


def run_ensemble(task: Callable[[int, int], T],
                 n: int,
                 master_seed: int,
                 workers: int = 1) -> List[T]:
    """
    Runs ``task(index, seed)`` for every trajectory index.

    Results come back in index order whatever ``workers`` is, so reductions
    over them are reproducible.
    """
    if n < 0:
        raise ValueError(f"trajectory count must be >= 0; get {n}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1; get {workers}")
    log = slog().bind(trajectories=n, workers=workers)
    if workers == 1 or n < 2:
        log.debug("ensemble starts")
        return [task(i, trajectory_seed(master_seed, i)) for i in range(n)]

    results: List[Optional[T]] = [None] * n
    limiter = CapacityLimiter(workers)

    async def run_chunk(indices: range) -> None:

        def work():
            return [(i, task(i, trajectory_seed(master_seed, i)))
                    for i in indices]

        for i, r in await to_thread.run_sync(work, limiter=limiter):
            results[i] = r

    async def run_all() -> None:
        async with anyio.create_task_group() as tg:
            for chunk in _chunks(n, workers):
                tg.start_soon(run_chunk, chunk)

    log.debug("ensemble starts")
    anyio.run(run_all)
    return results  # type: ignore


def ensemble_density(states: Sequence[PureState]) -> DensityMatrix:
    if len(states) == 0:
        raise ValueError("cannot average an empty ensemble")
    label = states[0].label
    amps = np.stack([s.normalized().amplitudes for s in states])
    m = amps.T @ amps.conj() / len(states)
    return DensityMatrix(label=label, matrix=0.5 * (m + m.conj().T))
