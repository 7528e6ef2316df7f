"""Experiment runners: seeded grids, aggregation, and the result model.

Each experiment fans out over its parameter grid and seed list, builds the
developmental pipeline (reservoir, readout, habituation) per seed, runs the
simulations, and aggregates per-seed rows into summary statistics.  Grid by
seed cells are embarrassingly parallel; rows are merged in enumeration
order so output never depends on completion order.

RNG derivation (documented contract): every random stream is seeded by
``SeedSequence([master_seed, purpose, experiment_ordinal, *cell_tags, seed])``
where ``purpose`` separates pipeline stages (build / train / habituate) from
simulation streams (opponent / reservoir noise) and ``cell_tags`` identify
the grid cell.  Pipeline streams omit the experiment ordinal and cell tags
(they depend only on seed and reservoir dimension), so the same seed yields
the same developmental history everywhere.  Different seeds therefore own
disjoint, statistically independent streams.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.stats

from . import reservoir as rv
from .analysis import (
    action_variance,
    closed_loop_jacobian,
    closed_loop_map,
    detection_time,
    free_energy,
    kl_knn,
    recovery_time,
    solve_fixed_point,
)
from .config import (
    EXPERIMENT_IDS,
    ConfigError,
    ExperimentConfig,
    config_hash,
    parse_agent_label,
    validate_config,
)
from .game import parse_schedule
from .governance import SentinelConfig, StaticAlpha
from .simulate import AgentMaterials, AgentSpec, SimulationTrace, simulate

__all__ = ["ExperimentResult", "Table", "run_experiment", "run_simulation"]

_EXP_ORD = {eid: i for i, eid in enumerate(EXPERIMENT_IDS, start=1)}

# RNG purposes (see module docstring).
_BUILD, _TRAIN, _HABITUATE = 11, 12, 13
_OPP, _NOISE = 21, 22
_BASELINE_TAG = 9999  # cell tag reserved for habituated-baseline sampling runs


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]


@dataclass
class ExperimentResult:
    experiment_id: str
    title: str
    config: ExperimentConfig
    tables: dict[str, Table]
    summary: dict
    failures: list[str] = field(default_factory=list)

    @property
    def grid(self) -> Table:
        return self.tables["grid"]


def _pipeline_rng(config: ExperimentConfig, purpose: int, seed: int, d: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.master_seed, purpose, seed, d]))


def _sim_rngs(
    config: ExperimentConfig, seed: int, *cell_tags: int
) -> tuple[np.random.Generator, np.random.Generator]:
    ord_ = _EXP_ORD[config.experiment_id]
    make = lambda purpose: np.random.default_rng(
        np.random.SeedSequence([config.master_seed, purpose, ord_, *cell_tags, seed])
    )
    return make(_OPP), make(_NOISE)


def _ridge_lambda(config: ExperimentConfig, d: int, reg_mode: str) -> float:
    tr = config.training
    if reg_mode == "scaled" and tr.scale_ridge_with_d:
        return tr.ridge_lambda * d / tr.reference_d
    return tr.ridge_lambda


def _pipeline_base(
    config: ExperimentConfig, seed: int, d: int, reg_mode: str = "scaled"
) -> tuple[rv.ReservoirParams, rv.ReadoutWeights, float]:
    res = config.reservoir
    params = rv.build_reservoir(
        d,
        rho_target=res.spectral_radius,
        input_scale=res.input_scale,
        seed=_pipeline_rng(config, _BUILD, seed, d),
        sigma_xi=res.sigma_xi,
        bias_scale=res.bias_scale,
    )
    lam = _ridge_lambda(config, d, reg_mode)
    weights = rv.train_readout(
        params,
        coop_target=config.training.coop_target,
        defect_target=config.training.defect_target,
        n_per_class=config.training.n_per_class,
        burn_in=config.training.burn_in,
        ridge_lambda=lam,
        seed=_pipeline_rng(config, _TRAIN, seed, d),
    )
    return params, weights, lam


def _finish_materials(
    config: ExperimentConfig,
    params: rv.ReservoirParams,
    weights: rv.ReadoutWeights,
    seed: int,
    d: int,
    epochs: int,
    lam: float,
) -> AgentMaterials:
    hab_cfg = replace(config.habituation, epochs=epochs)
    hab = rv.habituate(params, hab_cfg, weights, seed=_pipeline_rng(config, _HABITUATE, seed, d))
    return AgentMaterials(
        params=hab.params,
        readout=weights,
        state_baseline=hab.state_baseline,
        output_baseline=hab.output_baseline,
        initial_state=hab.final_state,
        rho_history=hab.rho_history,
        habituation_epochs=epochs,
        ridge_lambda=lam,
    )


def build_cell_materials(
    config: ExperimentConfig,
    seed: int,
    d: int | None = None,
    epochs: int | None = None,
    reg_mode: str = "scaled",
) -> AgentMaterials:
    """Full developmental pipeline for one (seed, dimension, depth) cell."""
    d = config.reservoir.d if d is None else d
    epochs = config.habituation.epochs if epochs is None else epochs
    params, weights, lam = _pipeline_base(config, seed, d, reg_mode)
    return _finish_materials(config, params, weights, seed, d, epochs, lam)


def _agent_spec(label: str, sentinel: SentinelConfig) -> AgentSpec:
    governance, strategy, gamma = parse_agent_label(label, sentinel)
    return AgentSpec(governance=governance, strategy=strategy, ema_gamma=gamma, label=label)


def _run_case(
    config: ExperimentConfig,
    materials: AgentMaterials,
    agent: AgentSpec,
    schedule_text: str,
    rounds: int,
    burn_in: int,
    seed: int,
    *cell_tags: int,
) -> SimulationTrace:
    rng_opp, rng_noise = _sim_rngs(config, seed, *cell_tags)
    return simulate(
        materials,
        agent,
        parse_schedule(schedule_text),
        rounds,
        rng_opp,
        rng_noise,
        burn_in=burn_in,
        noise_enabled=not config.deterministic,
        state_cap=config.state_cap,
    )


def _baseline_states(
    config: ExperimentConfig, materials: AgentMaterials, seed: int, *cell_tags: int
) -> np.ndarray:
    """Sample the habituated attractor: full body governance, clean cooperation."""
    rounds = config.state_cap + max(config.burn_in, 1)
    trace = _run_case(
        config,
        materials,
        AgentSpec(StaticAlpha(1.0), "tft", label="reservoir"),
        f"coop:{rounds}",
        rounds,
        max(config.burn_in, 1),
        seed,
        *cell_tags,
        _BASELINE_TAG,
    )
    return trace.states


def run_simulation(config: ExperimentConfig, seed: int) -> SimulationTrace:
    """Run the single cell described by ``config`` for one seed.

    The config must name exactly one agent (default grids with several
    agents or parameter values are rejected so there is no ambiguity about
    which cell is meant).
    """
    validate_config(config)
    if "{L}" in config.schedule:
        raise ConfigError("run_simulation needs a concrete schedule, not a template")
    if len(config.agents) != 1:
        raise ConfigError(f"run_simulation needs exactly one agent label, got {config.agents!r}")
    materials = build_cell_materials(config, seed)
    agent = _agent_spec(config.agents[0], config.sentinel)
    return _run_case(config, materials, agent, config.schedule, config.rounds, config.burn_in, seed, 0)


# ---------------------------------------------------------------------------
# aggregation helpers


def _mean(values) -> float:
    return float(np.mean(np.asarray(values, dtype=np.float64)))


def _sem(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return 0.0
    return float(np.std(arr, ddof=1) / math.sqrt(arr.size))


def _geomean(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if np.any(arr <= 0):
        raise ValueError("geometric mean needs positive values")
    return float(np.exp(np.mean(np.log(arr))))


def _column(table: Table, name: str) -> list:
    idx = table.columns.index(name)
    return [row[idx] for row in table.rows]


def _select(table: Table, **match) -> list[tuple]:
    idx = {name: table.columns.index(name) for name in match}
    return [row for row in table.rows if all(row[idx[k]] == v for k, v in match.items())]


def _values(rows: list[tuple], columns: tuple[str, ...], name: str) -> list:
    i = columns.index(name)
    return [row[i] for row in rows]


# ---------------------------------------------------------------------------
# task execution


def _map_tasks(fn, tasks, jobs: int):
    """Run tasks preserving enumeration order; exceptions become markers."""
    results = []
    if jobs <= 1 or len(tasks) <= 1:
        for task in tasks:
            try:
                results.append(fn(task))
            except Exception as exc:  # noqa: BLE001 - cell isolation contract
                results.append(_TaskFailure(repr(exc)))
        return results
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, task) for task in tasks]
        for future in futures:
            try:
                results.append(future.result())
            except Exception as exc:  # noqa: BLE001
                results.append(_TaskFailure(repr(exc)))
    return results


@dataclass(frozen=True)
class _TaskFailure:
    message: str


# ---------------------------------------------------------------------------
# E1: self-consistent convergence


def _e1_seed(task):
    config, seed = task
    materials = build_cell_materials(config, seed)
    fp = solve_fixed_point(materials.params, materials.readout, 1.0, materials.initial_state)
    stability = closed_loop_jacobian(materials.params, materials.readout, fp.x_star)

    det_outputs = np.empty(config.rounds)
    x = np.array(materials.initial_state)
    for t in range(config.rounds):
        det_outputs[t] = rv.readout(x, materials.readout)
        x = closed_loop_map(x, materials.params, materials.readout, 1.0)
    off = np.abs(det_outputs - fp.a_star) > 0.02
    convergence_round = int(np.nonzero(off)[0][-1]) + 1 if off.any() else 0

    trace = _run_case(
        config,
        materials,
        AgentSpec(StaticAlpha(1.0), "tft", label="reservoir"),
        config.schedule,
        config.rounds,
        config.burn_in,
        seed,
        0,
    )
    window = min(100, config.rounds)
    row = (
        config.experiment_id,
        seed,
        fp.a_star,
        convergence_round,
        fp.iterations,
        fp.residual,
        stability.rho_eff,
        int(stability.stable),
        float(trace.a_body[-window:].mean()),
    )
    return {"row": row, "det_outputs": det_outputs, "noisy_outputs": trace.a_body}


_E1_COLUMNS = (
    "experiment",
    "seed",
    "a_star",
    "convergence_round",
    "fp_iterations",
    "fp_residual",
    "rho_eff",
    "stable",
    "mean_output_last100",
)


def _run_e1(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    outs = _map_tasks(_e1_seed, [(config, seed) for seed in config.seeds], jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    outs = [o for o in outs if not isinstance(o, _TaskFailure)]
    rows = tuple(o["row"] for o in outs)
    det = np.mean([o["det_outputs"] for o in outs], axis=0)
    noisy = np.mean([o["noisy_outputs"] for o in outs], axis=0)
    trace_rows = tuple(
        (config.experiment_id, t, float(noisy[t]), float(det[t])) for t in range(config.rounds)
    )
    grid = Table(_E1_COLUMNS, rows)
    a_star = _column(grid, "a_star")
    conv = _column(grid, "convergence_round")
    summary = {
        "a_star": {"mean": _mean(a_star), "sem": _sem(a_star), "min": min(a_star), "max": max(a_star)},
        "convergence_round": {"mean": _mean(conv), "max": max(conv)},
        "rho_eff_max": max(_column(grid, "rho_eff")),
        "all_stable": all(bool(s) for s in _column(grid, "stable")),
        "all_converged_fp": all(r <= 1e-10 for r in _column(grid, "fp_residual")),
        "mean_output_last100": {"mean": _mean(_column(grid, "mean_output_last100"))},
    }
    tables = {
        "grid": grid,
        "trace": Table(("experiment", "t", "a_body_noisy_mean", "a_body_deterministic_mean"), trace_rows),
    }
    return _result(config, tables, summary, failures)


# ---------------------------------------------------------------------------
# E2: receptivity landscape


def _e2_seed(task):
    config, seed = task
    materials = build_cell_materials(config, seed)
    baseline = _baseline_states(config, materials, seed)
    rows = []
    for i, alpha in enumerate(config.alphas):
        trace = _run_case(
            config,
            materials,
            AgentSpec(StaticAlpha(alpha), "tft", label=f"static:{alpha:g}"),
            config.schedule,
            config.rounds,
            config.burn_in,
            seed,
            i,
        )
        rows.append(
            (
                config.experiment_id,
                seed,
                alpha,
                kl_knn(trace.states, baseline, config.kl_k),
                action_variance(trace.a_self, config.burn_in),
                trace.mean_payoff(),
            )
        )
    return {"rows": rows}


_E2_COLUMNS = ("experiment", "seed", "alpha", "kl_knn", "action_variance", "mean_payoff")


def _alpha_landscape_summary(grid: Table, alphas, ratio_pair=(0.0, 1.0)) -> dict:
    per_alpha = {}
    for alpha in alphas:
        rows = _select(grid, alpha=alpha)
        per_alpha[f"{alpha:g}"] = {
            "kl_mean": _mean(_values(rows, grid.columns, "kl_knn")),
            "kl_sem": _sem(_values(rows, grid.columns, "kl_knn")),
            "variance_mean": _mean(_values(rows, grid.columns, "action_variance")),
            "variance_sem": _sem(_values(rows, grid.columns, "action_variance")),
            "payoff_mean": _mean(_values(rows, grid.columns, "mean_payoff")),
            "payoff_sem": _sem(_values(rows, grid.columns, "mean_payoff")),
        }
    kl_means = [per_alpha[f"{a:g}"]["kl_mean"] for a in alphas]
    argmin_alpha = float(alphas[int(np.argmin(kl_means))])
    lo, hi = ratio_pair
    seeds = sorted(set(_column(grid, "seed")))
    ratios = []
    for seed in seeds:
        var0 = _values(_select(grid, seed=seed, alpha=lo), grid.columns, "action_variance")[0]
        var1 = _values(_select(grid, seed=seed, alpha=hi), grid.columns, "action_variance")[0]
        ratios.append(var0 / var1)
    return {
        "per_alpha": per_alpha,
        "kl_argmin_alpha": argmin_alpha,
        "variance_ratio_geomean": _geomean(ratios),
        "variance_ratios": ratios,
    }


def _agg_from_alpha_summary(eid: str, summary: dict, alphas) -> Table:
    rows = []
    for alpha in alphas:
        cell = summary["per_alpha"][f"{alpha:g}"]
        rows.append(
            (
                eid,
                alpha,
                cell["kl_mean"],
                cell["kl_sem"],
                cell["variance_mean"],
                cell["variance_sem"],
                cell["payoff_mean"],
                cell["payoff_sem"],
            )
        )
    columns = (
        "experiment",
        "alpha",
        "kl_mean",
        "kl_sem",
        "variance_mean",
        "variance_sem",
        "payoff_mean",
        "payoff_sem",
    )
    return Table(columns, tuple(rows))


def _run_e2(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    outs = _map_tasks(_e2_seed, [(config, seed) for seed in config.seeds], jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs if not isinstance(o, _TaskFailure) for r in o["rows"])
    grid = Table(_E2_COLUMNS, rows)
    summary = _alpha_landscape_summary(grid, config.alphas)
    tables = {"grid": grid, "agg": _agg_from_alpha_summary(config.experiment_id, summary, config.alphas)}
    return _result(config, tables, summary, failures)


# ---------------------------------------------------------------------------
# E3: perturbation response


def _block_bounds(schedule_text: str) -> tuple[int, int]:
    """Start and end round of the first defection phase."""
    schedule = parse_schedule(schedule_text)
    start = 0
    for phase in schedule.phases:
        if phase.kind == "defect":
            return start, start + phase.length
        start += phase.length
    raise ConfigError(f"schedule {schedule_text!r} has no defection phase")


def _e3_seed(task):
    config, seed = task
    materials = build_cell_materials(config, seed)
    onset, end = _block_bounds(config.schedule)
    rows = []
    traces = {}
    for i, label in enumerate(config.agents):
        trace = _run_case(
            config,
            materials,
            _agent_spec(label, config.sentinel),
            config.schedule,
            config.rounds,
            config.burn_in,
            seed,
            i,
        )
        block = trace.a_self[onset:end]
        rows.append(
            (
                config.experiment_id,
                seed,
                label,
                float(block.min()),
                float(block.mean()),
                trace.cumulative_payoff,
            )
        )
        traces[label] = (trace.a_self, trace.alpha)
    return {"rows": rows, "traces": traces}


_E3_COLUMNS = ("experiment", "seed", "agent", "min_action_block", "mean_action_block", "cumulative_payoff")


def _run_e3(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    outs = _map_tasks(_e3_seed, [(config, seed) for seed in config.seeds], jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    outs = [o for o in outs if not isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs for r in o["rows"])
    grid = Table(_E3_COLUMNS, rows)
    trace_rows = []
    for label in config.agents:
        actions = np.mean([o["traces"][label][0] for o in outs], axis=0)
        alphas = np.mean([o["traces"][label][1] for o in outs], axis=0)
        trace_rows.extend(
            (config.experiment_id, label, t, float(actions[t]), float(alphas[t]))
            for t in range(config.rounds)
        )
    onset, end = _block_bounds(config.schedule)
    summary = {
        "defect_block": [onset, end],
        "per_agent": {
            label: {
                "mean_action_block": _mean(
                    _values(_select(grid, agent=label), grid.columns, "mean_action_block")
                ),
                "cumulative_payoff_mean": _mean(
                    _values(_select(grid, agent=label), grid.columns, "cumulative_payoff")
                ),
            }
            for label in config.agents
        },
    }
    tables = {
        "grid": grid,
        "trace": Table(("experiment", "agent", "t", "action_mean", "alpha_mean"), tuple(trace_rows)),
    }
    return _result(config, tables, summary, failures)


# ---------------------------------------------------------------------------
# E4: habituation dynamics


def _e4_seed(task):
    config, seed = task
    d = config.reservoir.d
    params, weights, lam = _pipeline_base(config, seed, d)
    hab_rng = _pipeline_rng(config, _HABITUATE, seed, d)
    window = config.habituation.baseline_window

    # Resting profile before any adaptation (checkpoint 0 baselines).
    rest = rv.habituate(params, replace(config.habituation, epochs=0), weights, seed=hab_rng)
    state_tail = list(rest.state_tail)
    output_tail = list(rest.output_tail)
    current = params
    carry = rest.carry
    rho_all: list[float] = []

    rows = []
    checkpoints = sorted(config.h_values)
    prev_h = 0
    for h in checkpoints:
        if h > prev_h:
            chunk = rv.habituate(
                current,
                replace(config.habituation, epochs=h - prev_h),
                weights,
                seed=hab_rng,
                carry=carry,
            )
            current = chunk.params
            carry = chunk.carry
            rho_all.extend(chunk.rho_history.tolist())
            state_tail = (state_tail + list(chunk.state_tail))[-window:]
            output_tail = (output_tail + list(chunk.output_tail))[-window:]
            prev_h = h
        snapshot = AgentMaterials(
            params=current,
            readout=weights,
            state_baseline=np.mean(state_tail, axis=0),
            output_baseline=float(np.mean(output_tail)),
            initial_state=np.array(carry.state),
            rho_history=np.array(rho_all),
            habituation_epochs=h,
            ridge_lambda=lam,
        )
        rho_now = rho_all[-1] if rho_all else rv.spectral_radius(current.w)
        baseline = _baseline_states(config, snapshot, seed, h)
        for j, label in enumerate(config.agents):
            trace = _run_case(
                config,
                snapshot,
                _agent_spec(label, config.sentinel),
                config.schedule,
                config.rounds,
                config.burn_in,
                seed,
                h,
                j,
            )
            rows.append(
                (
                    config.experiment_id,
                    seed,
                    label,
                    h,
                    kl_knn(trace.states, baseline, config.kl_k),
                    action_variance(trace.a_self, config.burn_in),
                    float(trace.a_body[config.burn_in :].mean()),
                    float(rho_now),
                )
            )
    return {"rows": rows, "rho_history": rho_all}


_E4_COLUMNS = (
    "experiment",
    "seed",
    "agent",
    "epoch",
    "kl_knn",
    "action_variance",
    "mean_body_output",
    "rho_w",
)


def _run_e4(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    outs = _map_tasks(_e4_seed, [(config, seed) for seed in config.seeds], jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    outs = [o for o in outs if not isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs for r in o["rows"])
    grid = Table(_E4_COLUMNS, rows)
    agg_rows = []
    for label in config.agents:
        for h in sorted(config.h_values):
            cells = _select(grid, agent=label, epoch=h)
            agg_rows.append(
                (
                    config.experiment_id,
                    label,
                    h,
                    _mean(_values(cells, grid.columns, "kl_knn")),
                    _sem(_values(cells, grid.columns, "kl_knn")),
                    _mean(_values(cells, grid.columns, "action_variance")),
                    _sem(_values(cells, grid.columns, "action_variance")),
                    _mean(_values(cells, grid.columns, "mean_body_output")),
                )
            )
    rho_histories = [o["rho_history"] for o in outs]
    finals = [h[-1] for h in rho_histories if h]
    summary = {
        "rho_final": {"mean": _mean(finals), "min": min(finals), "max": max(finals)} if finals else {},
        "rho_global_min": min(min(h) for h in rho_histories if h) if finals else None,
        "rho_global_max": max(max(h) for h in rho_histories if h) if finals else None,
        "rho_monotone_fraction": _mean(
            [float(np.all(np.diff(np.asarray(h)) <= 1e-6)) for h in rho_histories if h]
        )
        if finals
        else None,
    }
    agg = Table(
        (
            "experiment",
            "agent",
            "epoch",
            "kl_mean",
            "kl_sem",
            "variance_mean",
            "variance_sem",
            "body_output_mean",
        ),
        tuple(agg_rows),
    )
    return _result(config, {"grid": grid, "agg": agg}, summary, failures)


# ---------------------------------------------------------------------------
# E5: free energy landscape


def _e5_seed(task):
    config, seed = task
    d = config.reservoir.d
    params, weights, lam = _pipeline_base(config, seed, d)
    rows = []
    for hi, h in enumerate(config.h_values):
        materials = _finish_materials(config, params, weights, seed, d, h, lam)
        baseline = _baseline_states(config, materials, seed, hi)
        for ai, alpha in enumerate(config.alphas):
            trace = _run_case(
                config,
                materials,
                AgentSpec(StaticAlpha(alpha), "tft", label=f"static:{alpha:g}"),
                config.schedule,
                config.rounds,
                config.burn_in,
                seed,
                hi,
                ai,
            )
            rows.append(
                (
                    config.experiment_id,
                    seed,
                    h,
                    alpha,
                    kl_knn(trace.states, baseline, config.kl_k),
                    trace.mean_payoff(),
                )
            )
    return {"rows": rows}


_E5_COLUMNS = ("experiment", "seed", "h", "alpha", "kl_knn", "mean_payoff")


def _run_e5(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    outs = _map_tasks(_e5_seed, [(config, seed) for seed in config.seeds], jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs if not isinstance(o, _TaskFailure) for r in o["rows"])
    grid = Table(_E5_COLUMNS, rows)
    fe_rows = []
    argmin: dict[str, dict[str, float]] = {}
    for lam in config.lambdas:
        argmin[f"{lam:g}"] = {}
        for h in config.h_values:
            fe_means = []
            for alpha in config.alphas:
                cells = _select(grid, h=h, alpha=alpha)
                kl_mean = _mean(_values(cells, grid.columns, "kl_knn"))
                payoff_mean = _mean(_values(cells, grid.columns, "mean_payoff"))
                fe_per_seed = [
                    free_energy(p, k, lam)
                    for p, k in zip(
                        _values(cells, grid.columns, "mean_payoff"),
                        _values(cells, grid.columns, "kl_knn"),
                    )
                ]
                fe_rows.append(
                    (
                        config.experiment_id,
                        lam,
                        h,
                        alpha,
                        free_energy(payoff_mean, kl_mean, lam),
                        _sem(fe_per_seed),
                        kl_mean,
                        payoff_mean,
                    )
                )
                fe_means.append(free_energy(payoff_mean, kl_mean, lam))
            argmin[f"{lam:g}"][str(h)] = float(config.alphas[int(np.argmin(fe_means))])
    fe = Table(
        ("experiment", "lambda", "h", "alpha", "fe_mean", "fe_sem", "kl_mean", "payoff_mean"),
        tuple(fe_rows),
    )
    summary = {"fe_argmin_alpha": argmin}
    return _result(config, {"grid": grid, "fe": fe}, summary, failures)


# ---------------------------------------------------------------------------
# E6: dynamic sentinel on the multi-phase schedule


def _phase_windows(schedule_text: str) -> dict[str, tuple[int, int]]:
    schedule = parse_schedule(schedule_text)
    windows = {}
    start = 0
    for phase in schedule.phases:
        windows.setdefault(phase.kind, (start, start + phase.length))
        start += phase.length
    return windows


def _e6_seed(task):
    config, seed = task
    materials = build_cell_materials(config, seed)
    onset, end = _block_bounds(config.schedule)
    noisy_window = _phase_windows(config.schedule).get("noisy")
    threshold = config.sentinel.alpha_min + 0.01
    rows = []
    traces = {}
    for i, label in enumerate(config.agents):
        trace = _run_case(
            config,
            materials,
            _agent_spec(label, config.sentinel),
            config.schedule,
            config.rounds,
            config.burn_in,
            seed,
            i,
        )
        detect = detection_time(trace.alpha, onset, threshold) if label == "sentinel" else None
        min_alpha = float(trace.alpha[onset:end].min()) if label == "sentinel" else None
        mean_noisy = float(trace.a_self[slice(*noisy_window)].mean()) if noisy_window else None
        rows.append(
            (
                config.experiment_id,
                seed,
                label,
                trace.cumulative_payoff,
                detect,
                min_alpha,
                float(trace.a_self[onset:end].mean()),
                mean_noisy,
            )
        )
        traces[label] = (trace.alpha, trace.a_self, trace.discomfort, np.cumsum(trace.payoff))
    return {"rows": rows, "traces": traces}


_E6_COLUMNS = (
    "experiment",
    "seed",
    "agent",
    "cumulative_payoff",
    "detection_time",
    "min_alpha",
    "mean_action_defect",
    "mean_action_noisy",
)


def _run_e6(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    outs = _map_tasks(_e6_seed, [(config, seed) for seed in config.seeds], jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    outs = [o for o in outs if not isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs for r in o["rows"])
    grid = Table(_E6_COLUMNS, rows)
    trace_rows = []
    for label in config.agents:
        stacks = [o["traces"][label] for o in outs]
        alpha = np.mean([s[0] for s in stacks], axis=0)
        action = np.mean([s[1] for s in stacks], axis=0)
        disc = np.mean([s[2] for s in stacks], axis=0)
        cum = np.mean([s[3] for s in stacks], axis=0)
        trace_rows.extend(
            (config.experiment_id, label, t, float(alpha[t]), float(action[t]), float(disc[t]), float(cum[t]))
            for t in range(config.rounds)
        )
    per_agent = {}
    for label in config.agents:
        cells = _select(grid, agent=label)
        payoffs = _values(cells, grid.columns, "cumulative_payoff")
        per_agent[label] = {"cumulative_payoff_mean": _mean(payoffs), "cumulative_payoff_sem": _sem(payoffs)}
    sentinel_rows = _select(grid, agent="sentinel")
    detections = [v for v in _values(sentinel_rows, grid.columns, "detection_time") if v is not None]
    onset, end = _block_bounds(config.schedule)
    noisy_window = _phase_windows(config.schedule).get("noisy")
    summary = {
        "defect_block": [onset, end],
        "noisy_window": list(noisy_window) if noisy_window else None,
        "per_agent": per_agent,
        "detection_time": {
            "mean": _mean(detections) if detections else None,
            "max": max(detections) if detections else None,
            "count_detected": len(detections),
        },
        "min_alpha_mean": _mean(_values(sentinel_rows, grid.columns, "min_alpha")),
    }
    noisy_actions = [
        v for v in _values(sentinel_rows, grid.columns, "mean_action_noisy") if v is not None
    ]
    summary["mean_action_noisy_sentinel"] = _mean(noisy_actions) if noisy_actions else None
    if "sentinel" in config.agents and "static:0" in config.agents:
        sentinel_payoffs = _values(sentinel_rows, grid.columns, "cumulative_payoff")
        tft_payoffs = _values(_select(grid, agent="static:0"), grid.columns, "cumulative_payoff")
        if len(sentinel_payoffs) == len(tft_payoffs) and len(sentinel_payoffs) >= 5:
            test = scipy.stats.wilcoxon(
                sentinel_payoffs,
                tft_payoffs,
                alternative="two-sided",
                method="exact" if len(sentinel_payoffs) <= 25 else "auto",
            )
            summary["wilcoxon_sentinel_vs_tft"] = {
                "statistic": float(test.statistic),
                "p_value": float(test.pvalue),
            }
    tables = {
        "grid": grid,
        "trace": Table(
            ("experiment", "agent", "t", "alpha_mean", "action_mean", "discomfort_mean", "cumulative_payoff_mean"),
            tuple(trace_rows),
        ),
    }
    return _result(config, tables, summary, failures)


# ---------------------------------------------------------------------------
# E7: sentinel parameter sensitivity


def _e7_seed(task):
    config, seed = task
    materials = build_cell_materials(config, seed)
    rows = []
    for si, (name, values) in enumerate(config.sweeps):
        for vi, value in enumerate(values):
            sentinel = replace(config.sentinel, **{name: value})
            trace = _run_case(
                config,
                materials,
                AgentSpec(governance=_dynamic(sentinel), strategy="tft", label="sentinel"),
                config.schedule,
                config.rounds,
                config.burn_in,
                seed,
                si,
                vi,
            )
            rows.append(
                (
                    config.experiment_id,
                    seed,
                    name,
                    value,
                    float(trace.payoff[config.burn_in :].mean()),
                    float(trace.alpha[config.burn_in :].mean()),
                )
            )
    return {"rows": rows}


def _dynamic(sentinel: SentinelConfig):
    from .governance import DynamicSentinel

    return DynamicSentinel(sentinel)


_E7_COLUMNS = ("experiment", "seed", "parameter", "value", "mean_payoff", "mean_alpha")


def _run_e7(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    outs = _map_tasks(_e7_seed, [(config, seed) for seed in config.seeds], jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs if not isinstance(o, _TaskFailure) for r in o["rows"])
    grid = Table(_E7_COLUMNS, rows)
    agg_rows = []
    for name, values in config.sweeps:
        for value in values:
            cells = _select(grid, parameter=name, value=value)
            agg_rows.append(
                (
                    config.experiment_id,
                    name,
                    value,
                    _mean(_values(cells, grid.columns, "mean_payoff")),
                    _sem(_values(cells, grid.columns, "mean_payoff")),
                    _mean(_values(cells, grid.columns, "mean_alpha")),
                    _sem(_values(cells, grid.columns, "mean_alpha")),
                )
            )
    agg = Table(
        ("experiment", "parameter", "value", "payoff_mean", "payoff_sem", "alpha_mean", "alpha_sem"),
        tuple(agg_rows),
    )
    summary = {
        "per_parameter": {
            name: {
                f"{value:g}": {
                    "payoff_mean": row[3],
                    "alpha_mean": row[5],
                }
                for value, row in zip(values, [r for r in agg_rows if r[1] == name])
            }
            for name, values in config.sweeps
        }
    }
    return _result(config, {"grid": grid, "agg": agg}, summary, failures)


# ---------------------------------------------------------------------------
# E8: reservoir dimension sweep


def _e8_cell(task):
    config, seed, d, reg_mode = task
    params, weights, lam = _pipeline_base(config, seed, d, reg_mode)
    materials = _finish_materials(config, params, weights, seed, d, config.habituation.epochs, lam)
    di = config.d_values.index(d)
    mi = config.reg_modes.index(reg_mode)
    baseline = _baseline_states(config, materials, seed, di, mi)
    w_norm_sq = float(weights.w_out @ weights.w_out)
    rows = []
    for ai, alpha in enumerate(config.alphas):
        trace = _run_case(
            config,
            materials,
            AgentSpec(StaticAlpha(alpha), "tft", label=f"static:{alpha:g}"),
            config.schedule,
            config.rounds,
            config.burn_in,
            seed,
            di,
            mi,
            ai,
        )
        rows.append(
            (
                config.experiment_id,
                seed,
                d,
                reg_mode,
                alpha,
                kl_knn(trace.states, baseline, config.kl_k),
                action_variance(trace.a_self, config.burn_in),
                trace.mean_payoff(),
                w_norm_sq,
            )
        )
    return {"rows": rows}


_E8_COLUMNS = (
    "experiment",
    "seed",
    "d",
    "reg_mode",
    "alpha",
    "kl_knn",
    "action_variance",
    "mean_payoff",
    "w_out_norm_sq",
)


def _run_e8(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    tasks = [
        (config, seed, d, mode)
        for d in config.d_values
        for mode in config.reg_modes
        for seed in config.seeds
    ]
    outs = _map_tasks(_e8_cell, tasks, jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs if not isinstance(o, _TaskFailure) for r in o["rows"])
    grid = Table(_E8_COLUMNS, rows)
    lam_fe = config.lambdas[0] if config.lambdas else 3.0
    ratio_rows = []
    per_d: dict[str, dict] = {}
    agg_rows = []
    for d in config.d_values:
        for mode in config.reg_modes:
            sub_rows = _select(grid, d=d, reg_mode=mode)
            if not sub_rows:
                continue
            sub = Table(grid.columns, tuple(sub_rows))
            landscape = _alpha_landscape_summary(sub, config.alphas)
            fe_means = []
            for alpha in config.alphas:
                cell = landscape["per_alpha"][f"{alpha:g}"]
                fe_means.append(free_energy(cell["payoff_mean"], cell["kl_mean"], lam_fe))
                agg_rows.append(
                    (
                        config.experiment_id,
                        d,
                        mode,
                        alpha,
                        cell["kl_mean"],
                        cell["variance_mean"],
                        cell["payoff_mean"],
                        _mean(_values(_select(sub, alpha=alpha), sub.columns, "w_out_norm_sq")),
                    )
                )
            fe_argmin = float(config.alphas[int(np.argmin(fe_means))])
            ratio_rows.append(
                (
                    config.experiment_id,
                    d,
                    mode,
                    landscape["variance_ratio_geomean"],
                    fe_argmin,
                )
            )
            if mode == "scaled":
                per_d[str(d)] = {
                    "variance_ratio_geomean": landscape["variance_ratio_geomean"],
                    "fe_argmin_alpha": fe_argmin,
                    "kl_at_0_mean": landscape["per_alpha"]["0"]["kl_mean"],
                    "kl_at_1_mean": landscape["per_alpha"]["1"]["kl_mean"],
                }
    summary = {"per_d": per_d, "fe_lambda": lam_fe}
    tables = {
        "grid": grid,
        "agg": Table(
            (
                "experiment",
                "d",
                "reg_mode",
                "alpha",
                "kl_mean",
                "variance_mean",
                "payoff_mean",
                "w_out_norm_sq_mean",
            ),
            tuple(agg_rows),
        ),
        "ratio": Table(
            ("experiment", "d", "reg_mode", "variance_ratio_geomean", "fe_argmin_alpha"),
            tuple(ratio_rows),
        ),
    }
    return _result(config, tables, summary, failures)


# ---------------------------------------------------------------------------
# E9: dimension by environment-timescale phase diagram


def _e9_cell(task):
    config, seed, d = task
    materials = build_cell_materials(config, seed, d=d)
    fp = solve_fixed_point(materials.params, materials.readout, 1.0, materials.initial_state)
    di = config.d_values.index(d)
    threshold = config.sentinel.alpha_min + 0.01
    rows = []
    for li, block in enumerate(config.block_lengths):
        schedule_text = config.schedule.replace("{L}", str(block))
        schedule = parse_schedule(schedule_text)
        rounds = schedule.total_rounds
        onset, end = _block_bounds(schedule_text)
        results = {}
        for gi, label in enumerate(("sentinel", "static:0")):
            results[label] = _run_case(
                config,
                materials,
                _agent_spec(label, config.sentinel),
                schedule_text,
                rounds,
                0,
                seed,
                di,
                li,
                gi,
            )
        sentinel_trace = results["sentinel"]
        reference = float(sentinel_trace.a_self[max(0, onset - 50) : onset].mean())
        rows.append(
            (
                config.experiment_id,
                seed,
                d,
                block,
                detection_time(sentinel_trace.alpha, onset, threshold),
                float(sentinel_trace.alpha[onset:end].min()),
                recovery_time(sentinel_trace.a_self, end, reference),
                sentinel_trace.cumulative_payoff,
                results["static:0"].cumulative_payoff,
                sentinel_trace.cumulative_payoff - results["static:0"].cumulative_payoff,
                fp.iterations,
            )
        )
    return {"rows": rows}


_E9_COLUMNS = (
    "experiment",
    "seed",
    "d",
    "block_length",
    "detection_time",
    "min_alpha",
    "recovery_time",
    "sentinel_payoff",
    "tft_payoff",
    "payoff_advantage",
    "fp_iterations",
)


def _run_e9(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    tasks = [(config, seed, d) for d in config.d_values for seed in config.seeds]
    outs = _map_tasks(_e9_cell, tasks, jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs if not isinstance(o, _TaskFailure) for r in o["rows"])
    grid = Table(_E9_COLUMNS, rows)
    agg_rows = []
    advantage = {}
    detection_by_cell = {}
    for d in config.d_values:
        for block in config.block_lengths:
            cells = _select(grid, d=d, block_length=block)
            if not cells:
                continue
            adv = _values(cells, grid.columns, "payoff_advantage")
            det = [v for v in _values(cells, grid.columns, "detection_time") if v is not None]
            rec = [v for v in _values(cells, grid.columns, "recovery_time") if v is not None]
            agg_rows.append(
                (
                    config.experiment_id,
                    d,
                    block,
                    _mean(adv),
                    _sem(adv),
                    _mean(det) if det else None,
                    _mean(_values(cells, grid.columns, "min_alpha")),
                    _mean(rec) if rec else None,
                )
            )
            advantage[f"{d},{block}"] = _mean(adv)
            detection_by_cell[f"{d},{block}"] = _mean(det) if det else None
    summary = {"advantage_mean": advantage, "detection_mean": detection_by_cell}
    tables = {
        "grid": grid,
        "agg": Table(
            (
                "experiment",
                "d",
                "block_length",
                "advantage_mean",
                "advantage_sem",
                "detection_mean",
                "min_alpha_mean",
                "recovery_mean",
            ),
            tuple(agg_rows),
        ),
    }
    return _result(config, tables, summary, failures)


# ---------------------------------------------------------------------------
# E10: smoothed tit-for-tat baselines


def _e10_agents(config: ExperimentConfig) -> list[str]:
    labels = [f"ema:{gamma:g}" for gamma in config.ema_gammas]
    labels.extend(a for a in config.agents if a not in labels)
    return labels


def _e10_seed(task):
    config, seed = task
    materials = build_cell_materials(config, seed)
    perturb = config.perturbation_schedule
    onset, end = _block_bounds(perturb)
    perturb_rounds = parse_schedule(perturb).total_rounds
    rows = []
    for i, label in enumerate(_e10_agents(config)):
        agent = _agent_spec(label, config.sentinel)
        noisy = _run_case(
            config, materials, agent, config.schedule, config.rounds, config.burn_in, seed, i, 0
        )
        pert = _run_case(config, materials, agent, perturb, perturb_rounds, 0, seed, i, 1)
        reference = float(pert.a_self[max(0, onset - 50) : onset].mean())
        rows.append(
            (
                config.experiment_id,
                seed,
                label,
                action_variance(noisy.a_self, config.burn_in),
                noisy.mean_payoff(),
                float(pert.a_self[onset:end].min()),
                recovery_time(pert.a_self, end, reference),
            )
        )
    return {"rows": rows}


_E10_COLUMNS = (
    "experiment",
    "seed",
    "agent",
    "action_variance",
    "mean_payoff",
    "perturbation_depth",
    "recovery_time",
)


def _run_e10(config: ExperimentConfig, jobs: int) -> ExperimentResult:
    outs = _map_tasks(_e10_seed, [(config, seed) for seed in config.seeds], jobs)
    failures = [o.message for o in outs if isinstance(o, _TaskFailure)]
    rows = tuple(r for o in outs if not isinstance(o, _TaskFailure) for r in o["rows"])
    grid = Table(_E10_COLUMNS, rows)
    labels = _e10_agents(config)
    raw_label = labels[0]
    seeds = sorted(set(_column(grid, "seed")))
    per_agent = {}
    agg_rows = []
    for label in labels:
        cells = _select(grid, agent=label)
        ratios = []
        for seed in seeds:
            raw_var = _values(_select(grid, agent=raw_label, seed=seed), grid.columns, "action_variance")
            var = _values(_select(grid, agent=label, seed=seed), grid.columns, "action_variance")
            if raw_var and var:
                ratios.append(raw_var[0] / var[0])
        recoveries = [v for v in _values(cells, grid.columns, "recovery_time") if v is not None]
        entry = {
            "variance_reduction_geomean": _geomean(ratios) if ratios else None,
            "variance_mean": _mean(_values(cells, grid.columns, "action_variance")),
            "payoff_mean": _mean(_values(cells, grid.columns, "mean_payoff")),
            "perturbation_depth_mean": _mean(_values(cells, grid.columns, "perturbation_depth")),
            "recovery_time_mean": _mean(recoveries) if recoveries else None,
            "recovery_time_median": float(np.median(recoveries)) if recoveries else None,
            "recovered_count": len(recoveries),
        }
        per_agent[label] = entry
        agg_rows.append(
            (
                config.experiment_id,
                label,
                entry["variance_reduction_geomean"],
                entry["perturbation_depth_mean"],
                entry["recovery_time_mean"],
                entry["recovery_time_median"],
                entry["payoff_mean"],
            )
        )
    summary = {"per_agent": per_agent, "agent_order": labels}
    agg = Table(
        (
            "experiment",
            "agent",
            "variance_reduction_geomean",
            "perturbation_depth_mean",
            "recovery_time_mean",
            "recovery_time_median",
            "payoff_mean",
        ),
        tuple(agg_rows),
    )
    return _result(config, {"grid": grid, "agg": agg}, summary, failures)


# ---------------------------------------------------------------------------


def _result(config: ExperimentConfig, tables: dict, summary: dict, failures: list[str]) -> ExperimentResult:
    from . import __version__

    summary = dict(summary)
    summary["provenance"] = {
        "config_hash": config_hash(config),
        "code_version": __version__,
        "seeds": list(config.seeds),
        "master_seed": config.master_seed,
    }
    if failures:
        summary["failures"] = failures
    return ExperimentResult(
        experiment_id=config.experiment_id,
        title=config.title,
        config=config,
        tables=tables,
        summary=summary,
        failures=failures,
    )


_RUNNERS = {
    "E1": _run_e1,
    "E2": _run_e2,
    "E3": _run_e3,
    "E4": _run_e4,
    "E5": _run_e5,
    "E6": _run_e6,
    "E7": _run_e7,
    "E8": _run_e8,
    "E9": _run_e9,
    "E10": _run_e10,
}


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Validate and run one experiment, aggregating over its grid and seeds."""
    validate_config(config)
    return _RUNNERS[config.experiment_id](config, max(1, jobs))
