from pathlib import Path
from typing import Any, Callable, Dict, List, Optional
import math
import numpy as np

from app.qtel import slog
from app.qtel.analytics.entropy import (EntanglementReport,
                                        bell_gg_closed_form,
                                        relative_entropy_of_entanglement)
from app.qtel.analytics.formulas import (EntangledReading, Reading, alpha,
                                         bell_weight, beta,
                                         efficiency_corrected,
                                         entangled_state, fidelity_printed,
                                         fidelity_first_principles,
                                         p_nd_alice, p_nd_bob, p_no_decay,
                                         p_one_decay, p_two_decay,
                                         teleported_rho)
from app.qtel.analytics.haar import (average_over_inputs,
                                     weighted_average_over_inputs)
from app.qtel.cli.config import RunConfig
from app.qtel.cli.output import (CommandReport, PlotContent, Series,
                                 TableContent, matrix_json)
from app.qtel.dynamics.ensemble import trajectory_seed
from app.qtel.hilbert.ops import fidelity, trace_distance
from app.qtel.model.params import effective_params, validate_regime
from app.qtel.protocol.insurance import (identify_correction,
                                         insurance_branches,
                                         insurance_recover, insurance_target)
from app.qtel.protocol.model import InputQubit, Status, TimingConvention
from app.qtel.protocol.runner import run_entanglement, run_teleportation
from app.qtel.protocol.stages import solve_stage_times

SIGMA_LIMIT = 3.0
REFERENCE_ETA = 0.6
DEFAULT_INSURANCE_INPUT = InputQubit(a=0.6, b=0.8)


def _z(mc: Optional[float], analytic: Optional[float],
       stderr: Optional[float]) -> Optional[float]:
    """
    difference in units of the Monte-Carlo standard error
    """
    if mc is None or analytic is None or not stderr:
        return None
    return (mc - analytic) / stderr


def _average(f: Callable[[InputQubit], Optional[float]]) -> Optional[float]:
    values: List[float] = []

    def collect(q: InputQubit) -> float:
        v = f(q)
        if v is None:
            values.append(math.nan)
            return math.nan
        return v

    avg = average_over_inputs(collect)
    return None if values else avg


def cmd_validate(config: RunConfig, out: Path) -> CommandReport:
    p = config.params
    eff = effective_params(p)
    times = {c: solve_stage_times(p, c) for c in TimingConvention}
    regime = validate_regime(p, config.thresholds)
    results = {
        "units": "rad/us",
        "params_mhz": p.to_mhz(),
        "E": eff.e,
        "omega_kappa": eff.omega_kappa,
        "timing": config.timing.value,
        "t_i_us": times[config.timing].t_i,
        "t_e_us": times[config.timing].t_e,
        "t_e_us_by_convention": {c.value: t.t_e for c, t in times.items()},
        "alpha": alpha(p),
        "beta": beta(p, config.timing),
        "p_nd_bob": p_nd_bob(p, config.timing),
        "regime": [w.model_dump() for w in regime],
    }
    warnings = list(config.notes) + [
        f"{w.message}: {w.name}={w.value:.6g} (threshold {w.threshold:.6g})"
        for w in regime
    ]
    TableContent(data={
        "quantity": ["E", "omega_kappa", "t_i_us", "t_e_us", "alpha", "beta"],
        "value": [
            eff.e, eff.omega_kappa, results["t_i_us"], results["t_e_us"],
            results["alpha"], results["beta"]
        ],
    }).write(out / "validate.csv")
    PlotContent(plot_type="bar",
                series=[
                    Series(label="value / threshold",
                           x=[0.0, 1.0, 2.0],
                           y=[
                               p.g * p.omega / p.delta**2 /
                               config.thresholds.max_adiabatic,
                               config.thresholds.min_detuning_ratio /
                               (math.inf if p.gamma == 0 else p.delta / p.gamma),
                               config.thresholds.min_rabi_ratio /
                               (math.inf if p.kappa == 0 else eff.omega_kappa /
                                p.kappa),
                           ])
                ],
                title="regime checks (warn above 1)",
                xlabel="check (0 adiabatic, 1 detuning, 2 rabi)",
                ylabel="ratio").write(out / "validate.svg")
    return CommandReport(command="validate",
                         config_echo=config.echo,
                         results=results,
                         warnings=warnings,
                         exit_code=2 if regime else 0)


def _teleport_analytic(config: RunConfig) -> Dict[str, Any]:
    p = config.params
    q = config.input_qubit
    t_d = config.t_d_us
    eta = config.eta
    bob = p_nd_bob(p, config.timing)

    def report(qi: InputQubit):
        return efficiency_corrected(t_d, qi, p, eta, Reading.AS_NORM)

    if q is not None:
        r = report(q)
        out = {
            "input": "fixed",
            "success_rate": r.p_total,
            "fidelity": r.f_eta,
            "fidelity_as_printed": fidelity_printed(t_d, q, p),
            "prep_success": {
                rd.value: p_nd_alice(q, p, rd) * bob
                for rd in Reading
            },
            "detection_clicks": {
                "0": p_no_decay(t_d, q, p),
                "1": p_one_decay(t_d, q, p),
                "2": p_two_decay(t_d, q, p),
            },
            "bob_rho": matrix_json(teleported_rho(t_d, q, p).matrix),
        }
        return out
    return {
        "input": "haar",
        "success_rate": average_over_inputs(lambda qi: report(qi).p_total),
        "fidelity": weighted_average_over_inputs(lambda qi: report(qi).f_eta,
                                                 lambda qi: report(qi).p_total),
        "fidelity_as_printed": average_over_inputs(
            lambda qi: fidelity_printed(t_d, qi, p)),
        "prep_success": {
            rd.value: average_over_inputs(
                lambda qi, rd=rd: p_nd_alice(qi, p, rd) * bob)
            for rd in Reading
        },
        "detection_clicks": {
            "0": average_over_inputs(lambda qi: p_no_decay(t_d, qi, p)),
            "1": average_over_inputs(lambda qi: p_one_decay(t_d, qi, p)),
            "2": average_over_inputs(lambda qi: p_two_decay(t_d, qi, p)),
        },
    }


def cmd_teleport(config: RunConfig, out: Path) -> CommandReport:
    p = config.params
    summary = run_teleportation(config.input_qubit,
                                p,
                                config.t_d_us,
                                config.trajectories,
                                config.seed,
                                eta=config.eta,
                                convention=config.timing,
                                workers=config.workers)
    stats = summary.stats
    analytic = _teleport_analytic(config)
    warnings = list(config.notes)

    prep_z = {
        rd: _z(stats.prep_success_rate, v, stats.prep_success_stderr)
        for rd, v in analytic["prep_success"].items()
    }
    finite = {rd: abs(z) for rd, z in prep_z.items() if z is not None}
    selected = min(finite, key=finite.get) if finite else None
    survived = stats.n - stats.counts[Status.PREP_DECAY]
    click_freq = {
        str(k): v / survived
        for k, v in stats.detection_clicks.items()
    } if survived else {}
    audit = {
        "prep_success_mc": stats.prep_success_rate,
        "prep_success_stderr": stats.prep_success_stderr,
        "prep_success_analytic": analytic["prep_success"],
        "prep_success_sigma": prep_z,
        "selected_reading": selected,
        "within_3_sigma": {
            rd: (z is not None and abs(z) < SIGMA_LIMIT)
            for rd, z in prep_z.items()
        },
        "detection_clicks_mc": click_freq,
        "detection_clicks_analytic": analytic["detection_clicks"],
    }
    results: Dict[str, Any] = {
        "trajectories": stats.n,
        "eta": summary.eta,
        "t_d_us": summary.t_d,
        "counts": {s.value: c for s, c in stats.counts.items()},
        "success_rate_mc": stats.success_rate,
        "success_rate_stderr": stats.success_stderr,
        "success_rate_analytic": analytic["success_rate"],
        "success_rate_sigma": _z(stats.success_rate, analytic["success_rate"],
                                 stats.success_stderr),
        "fidelity_mc": summary.fidelity_mc,
        "fidelity_stderr": summary.fidelity_stderr,
        "fidelity_analytic": analytic["fidelity"],
        "fidelity_as_printed": analytic["fidelity_as_printed"],
        "fidelity_sigma": _z(summary.fidelity_mc, analytic["fidelity"],
                             summary.fidelity_stderr),
        "audit": audit,
    }
    if config.input_qubit is not None and summary.mean_bob_rho is not None:
        results["bob_rho_mc"] = matrix_json(summary.mean_bob_rho.matrix)
        results["bob_rho_analytic"] = analytic["bob_rho"]
        if config.eta == 1.0:
            results["bob_rho_trace_distance"] = trace_distance(
                summary.mean_bob_rho,
                teleported_rho(config.t_d_us, config.input_qubit, p))
    for key in ("success_rate_sigma", "fidelity_sigma"):
        z = results[key]
        if z is not None and abs(z) >= SIGMA_LIMIT:
            warnings.append(f"{key}: Monte-Carlo and analytic values differ by {z:.3g}σ")
    if selected is not None and not audit["within_3_sigma"][selected]:
        warnings.append("prep success matches neither P_ND(A) reading within 3σ")

    recs = summary.records
    TableContent(data={
        "index": [r.index for r in recs],
        "seed": [r.seed for r in recs],
        "status": [r.status.value for r in recs],
        "detector": [None if r.detector is None else r.detector.value for r in recs],
        "t_click_us": [r.t_click for r in recs],
        "actual_clicks": [r.actual_clicks for r in recs],
        "observed_clicks": [r.observed_clicks for r in recs],
        "fidelity": [r.fidelity for r in recs],
        "re_a": [r.a[0] for r in recs],
        "im_a": [r.a[1] for r in recs],
        "re_b": [r.b[0] for r in recs],
        "im_b": [r.b[1] for r in recs],
    }).write(out / "teleport.csv")
    clicks = [r.t_click for r in recs if r.t_click is not None]
    edges = np.linspace(0.0, max(config.t_d_us, 1e-9), 21)
    hist, _ = np.histogram(clicks, bins=edges)
    PlotContent(plot_type="bar",
                series=[
                    Series(label="heralding clicks",
                           x=(0.5 * (edges[1:] + edges[:-1])).tolist(),
                           y=hist.astype(float).tolist())
                ],
                title="click times of successful runs",
                xlabel="t_click (μs)",
                ylabel="runs").write(out / "teleport.svg")
    return CommandReport(command="teleport",
                         config_echo=config.echo,
                         results=results,
                         warnings=warnings)


def cmd_fig3(config: RunConfig, out: Path) -> CommandReport:
    """
    Haar-average fidelity against the detection window, ideal detectors
    """
    p = config.params.replace(eta=1.0)
    grid = list(config.t_d_grid)
    analytic = [
        average_over_inputs(lambda qi, t=t: fidelity_printed(t, qi, p))
        for t in grid
    ]
    first_principles = [
        average_over_inputs(lambda qi, t=t: fidelity_first_principles(t, qi, p))
        for t in grid
    ]
    mc: List[Optional[float]] = [None] * len(grid)
    mc_err: List[Optional[float]] = [None] * len(grid)
    heralded: List[Optional[float]] = [None] * len(grid)
    sigma: List[Optional[float]] = [None] * len(grid)
    if config.fig3_mc:
        log = slog().bind(command="fig3")
        for i, t in enumerate(grid):
            if i % config.fig3_mc_every and i != len(grid) - 1:
                continue
            log.info("overlay point", t_d=t)
            summary = run_teleportation(None,
                                        p,
                                        t,
                                        config.fig3_mc_trajectories,
                                        trajectory_seed(config.seed, i),
                                        eta=1.0,
                                        convention=config.timing,
                                        workers=config.workers)
            mc[i] = summary.fidelity_mc
            mc_err[i] = summary.fidelity_stderr
            # the overlay only sees heralded runs: compare with the
            # success-weighted average
            heralded[i] = weighted_average_over_inputs(
                lambda qi, t=t: fidelity_first_principles(t, qi, p),
                lambda qi, t=t: efficiency_corrected(t, qi, p, 1.0).p_total)
            sigma[i] = _z(mc[i], heralded[i], mc_err[i])
    monotone = all(b >= a - 1e-15 for a, b in zip(analytic, analytic[1:]))
    warnings = list(config.notes)
    if not monotone:
        warnings.append("average fidelity is not monotone in t_D")
    for t, z in zip(grid, sigma):
        if z is not None and abs(z) >= SIGMA_LIMIT:
            warnings.append(f"t_D={t:.6g}: overlay differs by {z:.3g}σ")
    TableContent(data={
        "t_d_us": grid,
        "f_avg_analytic": analytic,
        "f_avg_mc": mc,
        "f_mc_stderr": mc_err,
    }).write(out / "fig3.csv")
    plot = PlotContent(plot_type="line",
                       series=[
                           Series(label="analytic (as printed)", x=grid, y=analytic),
                           Series(label="analytic (first principles)",
                                  x=grid,
                                  y=first_principles),
                       ],
                       title="average teleportation fidelity",
                       xlabel="t_D (μs)",
                       ylabel="Haar-average fidelity")
    overlay = PlotContent(plot_type="errorbar",
                          series=[Series(label="Monte Carlo", x=grid, y=mc, yerr=mc_err)],
                          title="",
                          xlabel="",
                          ylabel="") if config.fig3_mc else None
    plot.write(out / "fig3.svg", overlay)
    return CommandReport(command="fig3",
                         config_echo=config.echo,
                         results={
                             "t_d_us": grid,
                             "f_avg_analytic": analytic,
                             "f_avg_first_principles": first_principles,
                             "f_avg_mc": mc,
                             "f_mc_stderr": mc_err,
                             "f_heralded_analytic": heralded,
                             "mc_sigma": sigma,
                             "monotone": monotone,
                             "endpoint": analytic[-1],
                         },
                         warnings=warnings)


def cmd_efficiency(config: RunConfig, out: Path) -> CommandReport:
    p = config.params
    t_d = config.t_d_us
    rows: Dict[str, List[Optional[float]]] = {
        "eta": [],
        "p_suc_eta_avg": [],
        "f_eta_avg": [],
        "f_eta_weighted": [],
    }
    first_principles: List[Optional[float]] = []
    for eta in config.eta_grid:

        def rep(qi: InputQubit, eta=eta, reading=Reading.AS_PRINTED):
            return efficiency_corrected(t_d, qi, p, eta, reading)

        rows["eta"].append(eta)
        rows["p_suc_eta_avg"].append(
            average_over_inputs(lambda qi: rep(qi).p_suc_eta))
        rows["f_eta_avg"].append(_average(lambda qi: rep(qi).f_eta))
        rows["f_eta_weighted"].append(
            weighted_average_over_inputs(lambda qi: rep(qi).f_eta,
                                         lambda qi: rep(qi).p_total))
        first_principles.append(
            weighted_average_over_inputs(
                lambda qi: rep(qi, reading=Reading.AS_NORM).f_eta,
                lambda qi: rep(qi, reading=Reading.AS_NORM).p_total))
    f_plain = [v for v in rows["f_eta_avg"] if v is not None]
    monotone = all(b >= a for a, b in zip(f_plain, f_plain[1:]))
    warnings = list(config.notes)
    if not monotone:
        warnings.append("F_eta is not monotone in η over the grid")
    TableContent(data=rows).write(out / "efficiency.csv")
    PlotContent(plot_type="line",
                series=[
                    Series(label="P_suc(η)", x=rows["eta"], y=rows["p_suc_eta_avg"]),
                    Series(label="F_η (plain average)", x=rows["eta"],
                           y=rows["f_eta_avg"]),
                    Series(label="F_η (heralded average)", x=rows["eta"],
                           y=rows["f_eta_weighted"]),
                ],
                title=f"detector efficiency, t_D = {t_d:g} μs",
                xlabel="η",
                ylabel="probability / fidelity",
                markers=[(REFERENCE_ETA, "η = 0.6")]).write(out / "efficiency.svg")
    return CommandReport(command="efficiency",
                         config_echo=config.echo,
                         results={
                             **rows,
                             "f_eta_weighted_first_principles": first_principles,
                             "monotone": monotone,
                             "t_d_us": t_d,
                         },
                         warnings=warnings)


def _report_json(r: EntanglementReport) -> Dict[str, Any]:
    return r.model_dump()


def cmd_entangle(config: RunConfig, out: Path) -> CommandReport:
    p = config.params
    t_d = config.t_d_us
    eta = config.eta
    warnings = list(config.notes)
    readings: Dict[str, Any] = {}
    analytic = {}
    for reading in EntangledReading:
        try:
            rho = entangled_state(t_d, eta, p, reading)
        except ValueError as e:
            warnings.append(f"{reading.value}: {e}")
            continue
        analytic[reading] = rho
        lam = bell_weight(t_d, eta, p, reading)
        rep = relative_entropy_of_entanglement(rho, config.optimizer, eta, t_d)
        if not rep.converged:
            warnings.append(
                f"{reading.value}: optimizer did not converge (gap {rep.gap:.3g})")
        readings[reading.value] = {
            "bell_weight": lam,
            "rho": matrix_json(rho.matrix),
            "e_r": _report_json(rep),
            "e_r_closed_form": bell_gg_closed_form(lam),
        }
    run = run_entanglement(p,
                           t_d,
                           config.trajectories,
                           config.seed,
                           eta=eta,
                           convention=config.timing,
                           workers=config.workers)
    mc: Dict[str, Any] = {
        "counts": {s.value: c for s, c in run.stats.counts.items()},
        "success_rate": run.stats.success_rate,
        "success_stderr": run.stats.success_stderr,
        "rho": None,
        "trace_distance": {},
        "matches": None,
    }
    if run.mean_rho is not None:
        mc["rho"] = matrix_json(run.mean_rho.matrix)
        distances = {
            r.value: trace_distance(run.mean_rho, rho)
            for r, rho in analytic.items()
        }
        mc["trace_distance"] = distances
        if distances:
            mc["matches"] = min(distances, key=distances.get)

    sweep: Dict[str, List[Optional[float]]] = {
        "eta": [],
        "bell_weight_as_printed": [],
        "e_r_as_printed": [],
        "bell_weight_first_principles": [],
        "e_r_first_principles": [],
    }
    for e in config.eta_grid:
        sweep["eta"].append(e)
        for reading in EntangledReading:
            try:
                rho = entangled_state(t_d, e, p, reading)
            except ValueError:
                sweep[f"bell_weight_{reading.value}"].append(None)
                sweep[f"e_r_{reading.value}"].append(None)
                continue
            rep = relative_entropy_of_entanglement(rho, config.optimizer, e, t_d)
            sweep[f"bell_weight_{reading.value}"].append(
                bell_weight(t_d, e, p, reading))
            sweep[f"e_r_{reading.value}"].append(rep.e_r)
    TableContent(data=sweep).write(out / "entangle.csv")
    PlotContent(plot_type="line",
                series=[
                    Series(label="E_R (as printed)", x=sweep["eta"],
                           y=sweep["e_r_as_printed"]),
                    Series(label="E_R (first principles)", x=sweep["eta"],
                           y=sweep["e_r_first_principles"]),
                ],
                title=f"relative entropy of entanglement, t_D = {t_d:g} μs",
                xlabel="η",
                ylabel="E_R (bits)").write(out / "entangle.svg")
    return CommandReport(command="entangle",
                         config_echo=config.echo,
                         results={
                             "eta": eta,
                             "t_d_us": t_d,
                             "readings": readings,
                             "monte_carlo": mc,
                             "sweep": sweep,
                         },
                         warnings=warnings)


def cmd_insurance(config: RunConfig, out: Path) -> CommandReport:
    p = config.params
    q = config.input_qubit or DEFAULT_INSURANCE_INPUT
    target = insurance_target(q)
    branches = insurance_branches(q, p, config.eta)
    warnings = list(config.notes)
    rows: Dict[str, List[Any]] = {
        "status": [],
        "probability": [],
        "correction": [],
        "identified_correction": [],
        "fidelity": [],
        "degraded": [],
    }
    for b in branches:
        rows["status"].append(b.status.value)
        rows["probability"].append(b.probability)
        if b.status == Status.SUCCESS:
            for key in ("correction", "identified_correction", "fidelity",
                        "degraded"):
                rows[key].append(None)
            continue
        rec = insurance_recover(b)
        best, _ = identify_correction(b.reserve, target)
        rows["correction"].append(rec.correction.value)
        rows["identified_correction"].append(best.value)
        rows["fidelity"].append(fidelity(rec.state, target))
        rows["degraded"].append(rec.degraded)
    if config.eta < 1.0:
        warnings.append(
            f"η = {config.eta:g} < 1: missed photons mislabel records, "
            "recovered fidelity is degraded")
    TableContent(data=rows).write(out / "insurance.csv")
    PlotContent(plot_type="bar",
                series=[
                    Series(label="probability",
                           x=[float(i) for i in range(len(branches))],
                           y=rows["probability"]),
                    Series(label="recovered fidelity",
                           x=[float(i) for i in range(len(branches))],
                           y=rows["fidelity"]),
                ],
                title="insurance branches (" +
                ", ".join(f"{i}: {s}" for i, s in enumerate(rows["status"])) + ")",
                xlabel="branch",
                ylabel="value").write(out / "insurance.svg")
    return CommandReport(command="insurance",
                         config_echo=config.echo,
                         results={
                             "eta": config.eta,
                             "input": [q.a, q.b],
                             # branches are taken in the lossless,
                             # long-window limit
                             "limit": {
                                 "kappa_during_mapping": 0.0,
                                 "t_d_us": "inf",
                                 "configured_kappa_used": False,
                             },
                             "branches": [{
                                 k: rows[k][i]
                                 for k in rows
                             } for i in range(len(branches))],
                         },
                         warnings=warnings)


COMMANDS: Dict[str, Callable[[RunConfig, Path], CommandReport]] = {
    "validate": cmd_validate,
    "teleport": cmd_teleport,
    "fig3": cmd_fig3,
    "efficiency": cmd_efficiency,
    "entangle": cmd_entangle,
    "insurance": cmd_insurance,
}
