"""Acceptance presets: each builds runs from one RunConfig, evaluates its checks and
returns tables, plot specs and a summary for the output writer.

Presets record every sweep point as soon as its run finishes, so a solver
failure part-way through still leaves the completed points in the results.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from app import __version__
from app.core.clock import get_utc_now
from app.core.config import RunConfig
from app.core.errors import ConfigError, DecayFitError, SimulationError, SweepAborted
from app.schemas.params import (
    ExperimentPlan,
    InitialSpec,
    ModelParams,
    SpectralGrid,
    grid_from_config,
    initial_spec_from_config,
    params_from_config,
)
from app.schemas.reports import REPORT_COLUMNS, CheckResult, EnergyReport, ExperimentSummary, RunRecord
from app.services import diagnostics, gpc_service
from app.services.model_core import make_initial_state, validate_params
from app.services.phase_space import ladder_suite
from app.services.sg_solver import SgSolver, expand_initial, run_collocation
from app.services.solver import DeterministicSolver, default_dt
from app.workers.sweep_worker import run_tasks

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-11
ROUNDOFF_FLOOR = 1e-30


@dataclass
class SeriesTable:
    name: str
    columns: Sequence[str]
    rows: np.ndarray


@dataclass
class PlotSpec:
    name: str
    title: str
    xlabel: str
    ylabel: str
    curves: list[tuple[str, np.ndarray, np.ndarray]]
    logy: bool = True


@dataclass
class ExperimentResults:
    summary: ExperimentSummary
    tables: list[SeriesTable] = field(default_factory=list)
    plots: list[PlotSpec] = field(default_factory=list)


@dataclass
class _Collected:
    records: list[RunRecord] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)
    tables: list[SeriesTable] = field(default_factory=list)
    plots: list[PlotSpec] = field(default_factory=list)
    fits: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)


@dataclass
class _Context:
    config: RunConfig
    plan: ExperimentPlan
    params: ModelParams
    grid: SpectralGrid
    spec: InitialSpec
    out: _Collected


def plan_from_config(config: RunConfig, preset: str, output_dir: str, threads: int, plots: bool = True) -> ExperimentPlan:
    return ExperimentPlan(
        preset=preset,
        eps_values=config.EPS_VALUES,
        k_values=config.K_VALUES,
        output_dir=output_dir,
        seed=config.SEED,
        threads=threads,
        plots=plots,
    )


def _eps_label(eps: float) -> str:
    return f"{eps:g}"


def _time_step(ctx: _Context, params: ModelParams, t_end: float) -> float:
    return ctx.config.DT or default_dt(params, ctx.grid, t_end)


def _run(ctx: _Context, params: ModelParams, spec: InitialSpec, t_end: float, keep_snapshots: bool = False):
    config = ctx.config
    solver = DeterministicSolver(params, ctx.grid, _time_step(ctx, params, t_end), config.NONLINEAR)
    s0 = make_initial_state(spec, params, ctx.grid)
    reporter = diagnostics.Reporter(params, ctx.grid, config.SOBOLEV_ORDER, config.LAMBDA4, reference=s0)
    return solver.run(s0, t_end, stride=config.OBSERVE_STRIDE, reporter=reporter, keep_snapshots=keep_snapshots)


def _report_table(name: str, reports: list[EnergyReport]) -> SeriesTable:
    return SeriesTable(name, REPORT_COLUMNS, np.array([r.csv_row() for r in reports]))


def _energy_plot(name: str, title: str, curves) -> PlotSpec:
    return PlotSpec(name, title, "t", "energy", curves)


def _is_monotone(values: Sequence[float], tol: float = MONOTONE_TOL) -> bool:
    return bool(np.all(np.diff(np.asarray(values)) <= tol))


# relaxation


def _band_energies(ctx: _Context, f_hat: np.ndarray) -> np.ndarray:
    """(N, bands) energy per species and Hermite band |n|_1."""
    ops = ladder_suite(ctx.params, ctx.grid)
    d = ctx.params.dim
    bands = d * (ctx.grid.n_v - 1) + 1
    spatial_axes = tuple(range(1, d + 1))
    per_hermite = np.sum(np.abs(f_hat) ** 2, axis=spatial_axes)  # (N, *hermite)
    out = np.zeros((f_hat.shape[0], bands))
    for b in range(bands):
        out[:, b] = np.sum(per_hermite[:, ops.hermite_order == b], axis=1)
    return out


def run_relaxation(ctx: _Context) -> None:
    spec = ctx.spec.model_copy(update={"profile": "homogeneous"})
    t_end = ctx.config.T_END
    eps_values = ctx.plan.eps_values
    out = ctx.out
    curves = []

    def task(eps: float):
        def run():
            params = ctx.params.model_copy(update={"epsilon": eps, "kappa": 0.0})
            result = _run(ctx, params, spec, t_end, keep_snapshots=True)
            return params, result

        return run

    def record(index: int, outcome) -> None:
        eps = eps_values[index]
        params, result = outcome
        times = np.array([s.time for s in result.snapshots])
        energies = np.stack([_band_energies(ctx, s.f_hat) for s in result.snapshots])  # (T, N, B)
        initial = energies[0]
        rates = 2.0 * np.arange(initial.shape[1])[None, :] / (params.relaxation_weights[:, None] * eps)
        exact = initial[None] * np.exp(-rates[None] * times[:, None, None])

        active = initial > 0
        resolvable = exact > 1e-200 * np.maximum(initial[None], 1e-300)
        rel = np.where(resolvable, np.abs(energies - exact) / np.where(resolvable, exact, 1.0), 0.0)
        tails = np.where(~resolvable, np.abs(energies - exact) / np.maximum(initial[None], 1e-300), 0.0)
        max_error = float(max(np.max(rel[:, active]), np.max(tails[:, active]))) if active.any() else 0.0

        columns = ["t"]
        data = [times]
        for i, b in zip(*np.nonzero(active)):
            columns += [f"s{i + 1}_band{b}", f"s{i + 1}_band{b}_exact"]
            data += [energies[:, i, b], exact[:, i, b]]
            curves.append((f"eps={_eps_label(eps)} s{i + 1} n={b}", times, energies[:, i, b]))
        name = f"series_relaxation_eps_{_eps_label(eps)}"
        out.tables.append(SeriesTable(name, columns, np.column_stack(data)))
        out.records.append(
            RunRecord(label=f"eps={_eps_label(eps)}", epsilon=eps, max_error=max_error, series_file=f"{name}.csv")
        )
        out.checks.append(
            CheckResult(
                name=f"band_relaxation_eps_{_eps_label(eps)}",
                passed=max_error <= 1e-8,
                value=max_error,
                threshold=1e-8,
            )
        )

    run_tasks(
        [task(eps) for eps in eps_values],
        ctx.plan.threads,
        labels=[f"relaxation eps={_eps_label(e)}" for e in eps_values],
        on_result=record,
    )
    out.plots.append(_energy_plot("relaxation_bands", "Hermite band energies", curves))


# decay


def run_decay(ctx: _Context) -> None:
    t_end = ctx.config.T_END
    eps_values = ctx.plan.eps_values
    out = ctx.out
    curves, rates = [], []

    def task(eps: float):
        def run():
            params = ctx.params.model_copy(update={"epsilon": eps})
            return _run(ctx, params, ctx.spec, t_end)

        return run

    def record(index: int, result) -> None:
        eps = eps_values[index]
        times = result.times
        values = [r.E_s0 for r in result.reports]
        monotone = _is_monotone(values)
        name = f"series_decay_eps_{_eps_label(eps)}"
        out.tables.append(_report_table(name, result.reports))
        curves.append((f"eps={_eps_label(eps)}", times, np.asarray(values)))
        try:
            fit = diagnostics.fit_decay_rate(times, values)
            lambda_hat, r2 = fit.lambda_hat, fit.r2
        except DecayFitError as exc:
            logger.warning("decay fit failed for eps=%g: %s", eps, exc)
            lambda_hat, r2 = float("nan"), float("nan")
        rates.append(lambda_hat)
        out.records.append(
            RunRecord(
                label=f"eps={_eps_label(eps)}",
                epsilon=eps,
                lambda_hat=lambda_hat,
                r2=r2,
                monotone=monotone,
                series_file=f"{name}.csv",
            )
        )
        out.checks.append(CheckResult(name=f"monotone_eps_{_eps_label(eps)}", passed=monotone, threshold=MONOTONE_TOL))
        out.checks.append(
            CheckResult(
                name=f"decay_fit_eps_{_eps_label(eps)}",
                passed=bool(lambda_hat > 0 and r2 > 0.99),
                value=lambda_hat,
                detail=f"R2={r2:.6f}",
            )
        )

    run_tasks(
        [task(eps) for eps in eps_values],
        ctx.plan.threads,
        labels=[f"decay eps={_eps_label(e)}" for e in eps_values],
        on_result=record,
    )

    finite = [r for r in rates if np.isfinite(r) and r > 0]
    spread = max(finite) / min(finite) if len(finite) == len(rates) and finite else float("inf")
    out.checks.append(CheckResult(name="rate_uniformity", passed=spread <= 3.0, value=spread, threshold=3.0))
    out.plots.append(_energy_plot("decay_energy", "E_s0 against time", curves))


# conservation


def run_conservation(ctx: _Context) -> None:
    result = _run(ctx, ctx.params, ctx.spec, ctx.config.T_END)
    reports = result.reports
    mass = max(max(r.mass_residual) for r in reports)
    drift = max(r.momentum_residual for r in reports)
    ubar = max(r.ubar_residual for r in reports)
    name = "series_conservation"
    out = ctx.out
    out.records.append(
        RunRecord(label="conservation", epsilon=ctx.params.epsilon, max_error=drift, series_file=f"{name}.csv")
    )
    out.tables.append(_report_table(name, reports))
    out.checks += [
        CheckResult(name="species_mass", passed=mass <= 1e-12, value=mass, threshold=1e-12),
        CheckResult(name="momentum_drift", passed=drift <= 1e-10, value=drift, threshold=1e-10),
        CheckResult(name="ubar_identity", passed=ubar <= 1e-8, value=ubar, threshold=1e-8),
    ]
    times = result.times
    curves = [
        ("momentum drift", times, np.array([max(r.momentum_residual, ROUNDOFF_FLOOR) for r in reports])),
        ("ubar residual", times, np.array([max(r.ubar_residual, ROUNDOFF_FLOOR) for r in reports])),
    ]
    out.plots.append(PlotSpec("conservation_residuals", "Conservation residuals", "t", "residual", curves))


# hydrodynamic limit


def run_hydro_sweep(ctx: _Context) -> None:
    t_end = ctx.config.HYDRO_TIME
    eps_values = sorted(ctx.plan.eps_values, reverse=True)
    out = ctx.out
    residuals = []

    def task(eps: float):
        def run():
            params = ctx.params.model_copy(update={"epsilon": eps})
            return _run(ctx, params, ctx.spec, t_end)

        return run

    def record(index: int, result) -> None:
        eps = eps_values[index]
        residual = max(result.reports[-1].hydro_residual)
        residuals.append(residual)
        name = f"series_hydro_eps_{_eps_label(eps)}"
        out.tables.append(_report_table(name, result.reports))
        out.records.append(
            RunRecord(label=f"eps={_eps_label(eps)}", epsilon=eps, hydro_residual=residual, series_file=f"{name}.csv")
        )

    run_tasks(
        [task(eps) for eps in eps_values],
        ctx.plan.threads,
        labels=[f"hydro eps={_eps_label(e)}" for e in eps_values],
        on_result=record,
    )

    for (eps, r), (eps_next, r_next) in zip(zip(eps_values, residuals), zip(eps_values[1:], residuals[1:])):
        ratio = r_next / r if r > 0 else float("inf")
        bound = 1.2 * eps_next / eps
        out.checks.append(
            CheckResult(
                name=f"hydro_ratio_{_eps_label(eps)}_to_{_eps_label(eps_next)}",
                passed=ratio <= bound,
                value=ratio,
                threshold=bound,
            )
        )
    curve = [("||J - i n u||", np.asarray(eps_values), np.asarray(residuals))]
    out.plots.append(PlotSpec("hydro_residual", "Hydrodynamic residual against epsilon", "epsilon", "residual", curve))


# gPC convergence


def _k_sweep_for(ctx: _Context, eps: float, tag: str) -> dict[int, float]:
    """Run the K sweep at one epsilon; returns max over t of E^e per K."""
    config = ctx.config
    out = ctx.out
    params = ctx.params.model_copy(update={"epsilon": eps})
    grid = ctx.grid
    measure = gpc_service.measure_from_config(config.MEASURE, config.BETA_A, config.BETA_B)
    k_values = sorted(ctx.plan.k_values)
    k_max = k_values[-1]

    q_ref = max(2 * k_max, 24)
    nodes, weights = gpc_service.gauss_rule(measure, q_ref)
    dt = _time_step(ctx, params, config.T_END)
    reference = run_collocation(
        ctx.spec, params, grid, nodes, weights, config.T_END, dt,
        stride=config.OBSERVE_STRIDE, threads=ctx.plan.threads, nonlinear=config.NONLINEAR,
    )

    growth = gpc_service.estimate_growth_exponent(gpc_service.build_basis(measure, k_max))
    q = growth.p_hat + 2.5
    if growth.degenerate:
        out.flag("growth_fit_degenerate")
    out.fits[f"{tag}_p_hat"] = growth.p_hat
    logger.info("eps=%g: p_hat=%.3f, weighting exponent q=%.3f", eps, growth.p_hat, q)

    def task(K: int):
        def run():
            basis = gpc_service.build_basis(measure, K, config.QUAD_POINTS or None)
            S0, _ = expand_initial(ctx.spec, basis, params, grid)
            result = SgSolver(params, grid, dt, config.NONLINEAR).run(
                S0, config.T_END, stride=config.OBSERVE_STRIDE, s_order=config.SOBOLEV_ORDER, q=q,
                keep_snapshots=True,
            )
            r = min(config.SR_ORDER, K - 1)
            errors, sr = [], []
            for n, S in enumerate(result.snapshots):
                errors.append(diagnostics.sg_error(S, reference.at(n), nodes, weights, params, grid, config.SOBOLEV_ORDER))
                sr.append(diagnostics.energy_sr(S, params, grid, config.SOBOLEV_ORDER, r).mean)
            return result.times, result.weighted_energy, np.asarray(errors), np.asarray(sr)

        return run

    peaks: dict[int, float] = {}
    energy_curves = []

    def record(index: int, outcome) -> None:
        K = k_values[index]
        times, weighted, errors, sr = outcome
        times = np.asarray(times)
        monotone = _is_monotone(weighted, MONOTONE_TOL * max(1.0, weighted[0]))
        name = f"series_{tag}_K_{K}"
        out.tables.append(SeriesTable(name, ("t", "E_K", "E_e", "E_sr"), np.column_stack([times, weighted, errors, sr])))
        energy_curves.append((f"K={K}", times, np.maximum(errors, ROUNDOFF_FLOOR)))
        peaks[K] = float(np.max(errors))

        lambda_hat = r2 = None
        if np.all(errors > ROUNDOFF_FLOOR) and len(errors) >= 10:
            try:
                fit = diagnostics.fit_decay_rate(times, errors)
                lambda_hat, r2 = fit.lambda_hat, fit.r2
            except DecayFitError as exc:
                logger.warning("E^e fit failed for K=%d: %s", K, exc)
        out.records.append(
            RunRecord(
                label=f"{tag} K={K}",
                epsilon=eps,
                K=K,
                lambda_hat=lambda_hat,
                r2=r2,
                monotone=monotone,
                max_error=peaks[K],
                series_file=f"{name}.csv",
            )
        )
        out.checks.append(CheckResult(name=f"{tag}_weighted_energy_monotone_K_{K}", passed=monotone))
        if lambda_hat is not None:
            out.checks.append(
                CheckResult(
                    name=f"{tag}_error_decay_K_{K}",
                    passed=bool(lambda_hat > 0 and r2 > 0.95),
                    value=lambda_hat,
                    detail=f"R2={r2:.6f}",
                )
            )
        degree = ctx.spec.z_degree
        if degree is not None and degree < K:
            out.checks.append(
                CheckResult(
                    name=f"{tag}_exact_representation_K_{K}",
                    passed=bool(errors[0] < 1e-16),
                    value=float(errors[0]),
                    threshold=1e-16,
                )
            )

    run_tasks(
        [task(K) for K in k_values],
        ctx.plan.threads,
        labels=[f"sG {tag} K={K}" for K in k_values],
        on_result=record,
    )

    first, last = peaks[k_values[0]], peaks[k_max]
    if first <= ROUNDOFF_FLOOR:
        out.checks.append(CheckResult(name=f"{tag}_k_convergence", passed=True, value=first, detail="error at round-off"))
    else:
        ratio = last / first
        out.checks.append(CheckResult(name=f"{tag}_k_convergence", passed=ratio < 1e-2, value=ratio, threshold=1e-2))

    try:
        geometric = diagnostics.fit_geometric_rate(k_values, [peaks[K] for K in k_values], ROUNDOFF_FLOOR)
        out.fits[f"{tag}_geometric_rate"] = geometric.lambda_hat
        out.fits[f"{tag}_geometric_r2"] = geometric.r2
    except DecayFitError as exc:
        logger.warning("no geometric fit of E^e against K for %s: %s", tag, exc)

    peak_curve = np.maximum([peaks[K] for K in k_values], ROUNDOFF_FLOOR)
    curve = [(f"eps={_eps_label(eps)}", np.asarray(k_values, dtype=float), peak_curve)]
    out.plots += [
        PlotSpec(f"{tag}_error_vs_K", "max over t of E^e against K", "K", "E^e", curve),
        PlotSpec(f"{tag}_error_vs_t", "E^e against time", "t", "E^e", energy_curves),
    ]
    return peaks


def run_k_sweep(ctx: _Context) -> None:
    _k_sweep_for(ctx, ctx.params.epsilon, "k_sweep")


def run_eps_sweep(ctx: _Context) -> None:
    eps_values = ctx.plan.eps_values
    k_values = sorted(ctx.plan.k_values)
    out = ctx.out
    peaks = [_k_sweep_for(ctx, eps, f"eps_{_eps_label(eps)}") for eps in eps_values]

    table = np.array([[K] + [p[K] for p in peaks] for K in k_values], dtype=float)
    columns = ["K"] + [f"E_e_max_eps_{_eps_label(eps)}" for eps in eps_values]
    out.tables.append(SeriesTable("eps_sweep_max_error", columns, table))

    worst = table[:, 1:].max(axis=1)
    if worst[0] <= ROUNDOFF_FLOOR:
        out.checks.append(CheckResult(name="eps_uniform_k_convergence", passed=True, value=worst[0], detail="error at round-off"))
    else:
        ratio = float(worst[-1] / worst[0])
        out.checks.append(CheckResult(name="eps_uniform_k_convergence", passed=ratio < 1e-2, value=ratio, threshold=1e-2))

    rates = [out.fits.get(f"eps_{_eps_label(eps)}_geometric_rate") for eps in eps_values]
    if all(r is not None and r > 0 for r in rates):
        out.fits["eps_sweep_rate_spread"] = max(rates) / min(rates)

    curves = [
        (f"eps={_eps_label(eps)}", np.asarray(k_values, dtype=float), np.maximum(table[:, n + 1], ROUNDOFF_FLOOR))
        for n, eps in enumerate(eps_values)
    ]
    out.plots.append(PlotSpec("eps_sweep_error_vs_K", "max over t of E^e against K for each epsilon", "K", "E^e", curves))


PRESETS: dict[str, Callable[[_Context], None]] = {
    "relaxation": run_relaxation,
    "decay": run_decay,
    "conservation": run_conservation,
    "hydro_sweep": run_hydro_sweep,
    "k_sweep": run_k_sweep,
    "eps_sweep": run_eps_sweep,
}


def _results(plan: ExperimentPlan, config: RunConfig, out: _Collected, error: Optional[SimulationError] = None) -> ExperimentResults:
    fits = dict(out.fits)
    for record in out.records:
        if record.lambda_hat is not None and math.isfinite(record.lambda_hat):
            fits[f"lambda_{record.label}"] = record.lambda_hat

    summary = ExperimentSummary(
        preset=plan.preset,
        version=__version__,
        created_at=get_utc_now().isoformat(),
        passed=error is None and all(c.passed for c in out.checks),
        status="complete" if error is None else "aborted",
        error=None if error is None else f"{error.code}: {error}",
        config=config.echo(),
        runs=out.records,
        checks=out.checks,
        fits=fits,
        flags=out.flags,
    )
    return ExperimentResults(summary, out.tables, out.plots if plan.plots else [])


def run_experiment(plan: ExperimentPlan, config: RunConfig) -> ExperimentResults:
    """Run one preset. A solver failure raises SweepAborted carrying the points completed before it."""
    checked = validate_params(params_from_config(config), grid_from_config(config))
    spec = initial_spec_from_config(config, seed=plan.seed)
    out = _Collected(flags=list(checked.flags))
    ctx = _Context(config, plan, checked.params, checked.grid, spec, out)

    logger.info("preset %s: eps=%s K=%s", plan.preset, plan.eps_values, plan.k_values)
    try:
        PRESETS[plan.preset](ctx)
    except ConfigError:
        raise
    except SimulationError as exc:
        logger.error("preset %s aborted after %d completed runs: %s", plan.preset, len(out.records), exc)
        raise SweepAborted(exc, _results(plan, config, out, exc)) from exc
    return _results(plan, config, out)
