from typing import Dict, List, Optional, Tuple
import math
import numpy as np
from pydantic import BaseModel

from app.qtel import slog
from app.qtel.analytics.haar import sample_average
from app.qtel.dynamics.ensemble import run_ensemble
from app.qtel.dynamics.trajectory import Channel, make_rng, run_trajectory
from app.qtel.hilbert.model import ATOM1, ATOM2, DensityMatrix, qubit_label
from app.qtel.hilbert.ops import fidelity, partial_trace, to_density
from app.qtel.model.params import PhysicalParams
from app.qtel.protocol.detection import classify, post_correction
from app.qtel.protocol.model import (InputQubit, Status, TimingConvention)
from app.qtel.protocol.stages import (detection_schedule, entanglement_prep,
                                      solve_stage_times, teleportation_prep,
                                      zeeman_phase)


class TrajectoryRecord(BaseModel):
    index: int
    seed: int
    status: Status
    detector: Optional[Channel] = None
    t_click: Optional[float] = None
    actual_clicks: int
    observed_clicks: int
    fidelity: Optional[float] = None
    a: Tuple[float, float]
    b: Tuple[float, float]

    class Config:
        frozen = True


class RunStats(BaseModel):
    n: int
    counts: Dict[Status, int]
    success_rate: float
    success_stderr: float
    prep_success_rate: float
    prep_success_stderr: float
    # actual (not observed) detection-stage clicks among runs whose
    # preparation survived
    detection_clicks: Dict[int, int]

    class Config:
        frozen = True


class TeleportationSummary(BaseModel):
    eta: float
    t_d: float
    stats: RunStats
    fidelity_mc: Optional[float] = None
    fidelity_stderr: Optional[float] = None
    mean_bob_rho: Optional[DensityMatrix] = None
    records: Tuple[TrajectoryRecord, ...]

    class Config:
        frozen = True


class EntanglementRun(BaseModel):
    eta: float
    t_d: float
    stats: RunStats
    mean_rho: Optional[DensityMatrix] = None

    class Config:
        frozen = True


def _binomial_stderr(k: int, n: int) -> float:
    if n == 0:
        return 0.0
    p = k / n
    return math.sqrt(p * (1.0 - p) / n)


def _stats(statuses: List[Status], actual: List[int]) -> RunStats:
    n = len(statuses)
    counts = {s: 0 for s in Status}
    for s in statuses:
        counts[s] += 1
    survived = n - counts[Status.PREP_DECAY]
    clicks: Dict[int, int] = {}
    for s, a in zip(statuses, actual):
        if s != Status.PREP_DECAY:
            clicks[a] = clicks.get(a, 0) + 1
    return RunStats(n=n,
                    counts=counts,
                    success_rate=counts[Status.SUCCESS] / n if n else 0.0,
                    success_stderr=_binomial_stderr(counts[Status.SUCCESS], n),
                    prep_success_rate=survived / n if n else 0.0,
                    prep_success_stderr=_binomial_stderr(survived, n),
                    detection_clicks=dict(sorted(clicks.items())))


def run_teleportation(q: Optional[InputQubit],
                      p: PhysicalParams,
                      t_d: float,
                      n: int,
                      master_seed: int,
                      eta: Optional[float] = None,
                      convention: TimingConvention = TimingConvention.BALANCED,
                      workers: int = 1) -> TeleportationSummary:
    """
    Monte-Carlo ensemble of the full protocol.

    ``q=None`` draws a Haar-random input per trajectory. Any actual jump
    during preparation aborts the run; otherwise exactly one observed click
    in the detection window heralds success and Bob's atom is corrected and
    compared with the input.
    """
    eta = p.eta if eta is None else eta
    times = solve_stage_times(p, convention).with_detection(t_d)
    detection = detection_schedule(p, t_d)
    log = slog().bind(command="teleport", trajectories=n, eta=eta, t_d=t_d)

    def task(index: int, seed: int) -> Tuple[TrajectoryRecord, Optional[np.ndarray]]:
        rng = make_rng(seed)
        qi = InputQubit.haar_random(rng) if q is None else q
        initial, schedule = teleportation_prep(qi, p, times)
        prep = run_trajectory(initial, schedule, rng, eta=eta)
        common = dict(index=index,
                      seed=seed,
                      a=(qi.a.real, qi.a.imag),
                      b=(qi.b.real, qi.b.imag))
        if prep.events:
            return TrajectoryRecord(status=Status.PREP_DECAY,
                                    actual_clicks=0,
                                    observed_clicks=0,
                                    **common), None
        traj = run_trajectory(prep.final_state, detection, rng, eta=eta)
        outcome = classify(traj)
        if not outcome.succeeded:
            return TrajectoryRecord(status=outcome.status,
                                    actual_clicks=len(traj.events),
                                    observed_clicks=len(traj.observed),
                                    **common), None
        assert outcome.bob_state is not None
        bob = post_correction(outcome.bob_state, outcome.detector, p)
        f = fidelity(bob, qi.state(ATOM2))
        return TrajectoryRecord(status=Status.SUCCESS,
                                detector=outcome.detector,
                                t_click=outcome.t_click,
                                actual_clicks=len(traj.events),
                                observed_clicks=1,
                                fidelity=f,
                                **common), bob.matrix

    log.info("ensemble starts")
    results = run_ensemble(task, n, master_seed, workers)
    records = tuple(r for r, _ in results)
    stats = _stats([r.status for r in records],
                   [r.actual_clicks for r in records])
    fids = np.array([r.fidelity for r in records if r.fidelity is not None])
    rhos = [m for _, m in results if m is not None]
    fidelity_mc = fidelity_stderr = None
    mean_rho = None
    if len(fids) > 0:
        fidelity_mc, fidelity_stderr = sample_average(fids)
        m = np.mean(np.stack(rhos), axis=0)
        mean_rho = DensityMatrix(label=qubit_label(ATOM2),
                                 matrix=0.5 * (m + m.conj().T))
    log.info("ensemble done",
             success_rate=stats.success_rate,
             fidelity=fidelity_mc)
    return TeleportationSummary(eta=eta,
                                t_d=t_d,
                                stats=stats,
                                fidelity_mc=fidelity_mc,
                                fidelity_stderr=fidelity_stderr,
                                mean_bob_rho=mean_rho,
                                records=records)


def run_entanglement(p: PhysicalParams,
                     t_d: float,
                     n: int,
                     master_seed: int,
                     eta: Optional[float] = None,
                     convention: TimingConvention = TimingConvention.BALANCED,
                     workers: int = 1) -> EntanglementRun:
    """
    Both parties prepare atom-cavity entanglement and the cavities are
    measured; a single observed click leaves the atoms in ψ⁺ after a π
    phase on atom 2 for D₋.
    """
    eta = p.eta if eta is None else eta
    times = solve_stage_times(p, convention)
    initial, schedule = entanglement_prep(p, times)
    detection = detection_schedule(p, t_d)
    log = slog().bind(command="entangle", trajectories=n, eta=eta, t_d=t_d)

    def task(index: int, seed: int) -> Tuple[Status, int, Optional[np.ndarray]]:
        rng = make_rng(seed)
        prep = run_trajectory(initial, schedule, rng, eta=eta)
        if prep.events:
            return Status.PREP_DECAY, 0, None
        traj = run_trajectory(prep.final_state, detection, rng, eta=eta)
        outcome = classify(traj)
        if not outcome.succeeded:
            return outcome.status, len(traj.events), None
        atoms = partial_trace(to_density(traj.final_state), (ATOM1, ATOM2))
        if outcome.detector == Channel.MINUS:
            atoms = zeeman_phase(atoms, p, ATOM2, -1.0)
        return Status.SUCCESS, len(traj.events), atoms.matrix

    log.info("ensemble starts")
    results = run_ensemble(task, n, master_seed, workers)
    stats = _stats([s for s, _, _ in results], [a for _, a, _ in results])
    rhos = [m for _, _, m in results if m is not None]
    mean_rho = None
    if rhos:
        m = np.mean(np.stack(rhos), axis=0)
        mean_rho = DensityMatrix(label=qubit_label(ATOM1, ATOM2),
                                 matrix=0.5 * (m + m.conj().T))
    log.info("ensemble done", success_rate=stats.success_rate)
    return EntanglementRun(eta=eta, t_d=t_d, stats=stats, mean_rho=mean_rho)
