"""Renderers: experiment CSV/JSON in, deterministic PNG + SVG out.

No statistics are computed here; every plotted series is a named column of
a harness output table (means, SEMs, and argmins all come precomputed).
Styles are fixed so reruns over identical inputs are byte-identical.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .catalog import CATALOG, FigureSpec  # noqa: E402

__all__ = ["FigureError", "render_figure", "render_all"]

# Fixed style map; the sentinel is always purple.
AGENT_COLORS = {
    "sentinel": "#7e2f8e",
    "static:0": "#d62728",
    "static:0.5": "#ff7f0e",
    "static:0.7": "#2ca02c",
    "static:0.85": "#8c564b",
    "static:1": "#1f77b4",
    "allc": "#7f7f7f",
    "reservoir": "#1f77b4",
}
DEFECT_SHADE = {"color": "#d62728", "alpha": 0.15}
NOISY_SHADE = {"color": "#ff7f0e", "alpha": 0.15}

_RC = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "brg-figures",
    "path.simplify": False,
}


class FigureError(RuntimeError):
    """Raised when a figure cannot be rendered; names the offending input."""


def _agent_color(label: str) -> str:
    return AGENT_COLORS.get(label, "#17becf")


def _read_table(path: Path) -> dict[str, list]:
    if not path.exists():
        raise FigureError(f"missing input file {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureError(f"input file {path} is empty") from None
        rows = [row for row in reader if row]
    if not rows:
        raise FigureError(f"input file {path} has no data rows")
    columns: dict[str, list] = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            columns[name].append(cell)
    return columns


def _require(columns: dict[str, list], names: tuple[str, ...], path: Path) -> None:
    missing = [n for n in names if n not in columns]
    if missing:
        raise FigureError(f"input file {path} lacks columns {missing}")


def _floats(columns: dict[str, list], name: str) -> list[float]:
    return [float(v) if v != "" else float("nan") for v in columns[name]]


def _read_summary(path: Path) -> dict:
    if not path.exists():
        raise FigureError(f"missing input file {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _save(fig, out_dir: Path, figure_id: str) -> list[Path]:
    written = []
    for ext in ("png", "svg"):
        path = out_dir / f"{figure_id}.{ext}"
        fig.savefig(path, format=ext, metadata={"Date": None} if ext == "svg" else None)
        written.append(path)
    plt.close(fig)
    return written


def _series_by(columns: dict[str, list], key: str):
    order: list[str] = []
    for value in columns[key]:
        if value not in order:
            order.append(value)
    for value in order:
        idx = [i for i, v in enumerate(columns[key]) if v == value]
        yield value, idx


def render_f1(results: Path, out_dir: Path, spec: FigureSpec) -> list[Path]:
    table = _read_table(results / "E1_trace.csv")
    _require(table, ("t", "a_body_noisy_mean", "a_body_deterministic_mean"), results / "E1_trace.csv")
    t = _floats(table, "t")
    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    ax.plot(t, _floats(table, "a_body_noisy_mean"), color="#1f77b4", label="body output (noisy loop, seed mean)")
    ax.plot(t, _floats(table, "a_body_deterministic_mean"), color="#d62728", ls="--", label="deterministic loop")
    ax.set_xlabel("round")
    ax.set_ylabel("body output")
    ax.set_title(spec.title)
    ax.legend(loc="lower right")
    return _save(fig, out_dir, spec.figure_id)


def render_f2(results: Path, out_dir: Path, spec: FigureSpec) -> list[Path]:
    table = _read_table(results / "E3_trace.csv")
    _require(table, ("agent", "t", "action_mean", "alpha_mean"), results / "E3_trace.csv")
    summary = _read_summary(results / "E3_summary.json")
    block = summary["summary"].get("defect_block")
    fig, axes = plt.subplots(2, 1, figsize=(6.4, 5.2), sharex=True)
    for agent, idx in _series_by(table, "agent"):
        t = [float(table["t"][i]) for i in idx]
        axes[0].plot(t, [float(table["action_mean"][i]) for i in idx], color=_agent_color(agent), label=agent)
        axes[1].plot(t, [float(table["alpha_mean"][i]) for i in idx], color=_agent_color(agent), label=agent)
    for ax in axes:
        if block:
            ax.axvspan(block[0], block[1], **DEFECT_SHADE)
    axes[0].set_ylabel("action (seed mean)")
    axes[1].set_ylabel("receptivity (seed mean)")
    axes[1].set_xlabel("round")
    axes[0].set_title(spec.title)
    axes[0].legend(loc="lower left", ncol=2, fontsize=7)
    return _save(fig, out_dir, spec.figure_id)


def render_f3(results: Path, out_dir: Path, spec: FigureSpec) -> list[Path]:
    path = results / "E5_fe.csv"
    table = _read_table(path)
    _require(table, ("lambda", "h", "alpha", "fe_mean", "kl_mean"), path)
    summary = _read_summary(results / "E5_summary.json")
    argmin = summary["summary"]["fe_argmin_alpha"]
    lambdas = sorted({float(v) for v in table["lambda"]})
    mid_lambda = lambdas[len(lambdas) // 2]
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.4))
    rows_mid = [i for i, v in enumerate(table["lambda"]) if float(v) == mid_lambda]
    h_values = sorted({int(table["h"][i]) for i in rows_mid})
    cmap = plt.get_cmap("viridis")
    for j, h in enumerate(h_values):
        idx = [i for i in rows_mid if int(table["h"][i]) == h]
        idx.sort(key=lambda i: float(table["alpha"][i]))
        alphas = [float(table["alpha"][i]) for i in idx]
        color = cmap(j / max(1, len(h_values) - 1))
        axes[0].plot(alphas, [float(table["kl_mean"][i]) for i in idx], color=color, label=f"H={h}")
        axes[1].plot(alphas, [float(table["fe_mean"][i]) for i in idx], color=color, label=f"H={h}")
    axes[0].set_xlabel("receptivity")
    axes[0].set_ylabel("state-space KL cost")
    axes[1].set_xlabel("receptivity")
    axes[1].set_ylabel(f"free energy (cost weight {mid_lambda:g})")
    axes[0].legend(fontsize=7)
    for lam in lambdas:
        per_h = argmin[f"{lam:g}"]
        hs = sorted(int(h) for h in per_h)
        axes[2].plot(hs, [per_h[str(h)] for h in hs], marker="o", label=f"cost weight {lam:g}")
    axes[2].set_xlabel("habituation depth")
    axes[2].set_ylabel("optimal receptivity")
    axes[2].set_ylim(-0.05, 1.05)
    axes[2].legend(fontsize=7)
    fig.suptitle(spec.title)
    fig.tight_layout()
    return _save(fig, out_dir, spec.figure_id)


def render_f4(results: Path, out_dir: Path, spec: FigureSpec) -> list[Path]:
    path = results / "E2_agg.csv"
    table = _read_table(path)
    _require(
        table,
        ("alpha", "kl_mean", "kl_sem", "variance_mean", "variance_sem", "payoff_mean", "payoff_sem"),
        path,
    )
    alphas = _floats(table, "alpha")
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    panels = (
        ("kl_mean", "kl_sem", "state-space KL cost", False),
        ("variance_mean", "variance_sem", "action variance", True),
        ("payoff_mean", "payoff_sem", "mean payoff", False),
    )
    for ax, (mean_col, sem_col, label, log) in zip(axes, panels):
        ax.errorbar(alphas, _floats(table, mean_col), yerr=_floats(table, sem_col),
                    color="#1f77b4", marker="o", ms=3, capsize=2)
        ax.set_xlabel("receptivity")
        ax.set_ylabel(label)
        if log:
            ax.set_yscale("log")
    fig.suptitle(spec.title)
    fig.tight_layout()
    return _save(fig, out_dir, spec.figure_id)


def render_f5(results: Path, out_dir: Path, spec: FigureSpec) -> list[Path]:
    path = results / "E4_agg.csv"
    table = _read_table(path)
    _require(table, ("agent", "epoch", "kl_mean", "variance_mean", "body_output_mean"), path)
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    for agent, idx in _series_by(table, "agent"):
        idx.sort(key=lambda i: int(table["epoch"][i]))
        epochs = [int(table["epoch"][i]) for i in idx]
        color = _agent_color(agent)
        axes[0].plot(epochs, [float(table["kl_mean"][i]) for i in idx], color=color, marker="o", ms=2.5, label=agent)
        axes[1].plot(epochs, [float(table["variance_mean"][i]) for i in idx], color=color, marker="o", ms=2.5, label=agent)
        axes[2].plot(epochs, [float(table["body_output_mean"][i]) for i in idx], color=color, marker="o", ms=2.5, label=agent)
    axes[1].set_yscale("log")
    for ax, label in zip(axes, ("state-space KL cost", "action variance (log)", "mean body output")):
        ax.set_xlabel("habituation epoch")
        ax.set_ylabel(label)
    axes[0].legend(fontsize=7)
    fig.suptitle(spec.title)
    fig.tight_layout()
    return _save(fig, out_dir, spec.figure_id)


def render_f6(results: Path, out_dir: Path, spec: FigureSpec) -> list[Path]:
    path = results / "E6_trace.csv"
    table = _read_table(path)
    _require(table, ("agent", "t", "alpha_mean", "action_mean", "cumulative_payoff_mean"), path)
    summary = _read_summary(results / "E6_summary.json")["summary"]
    block = summary.get("defect_block")
    noisy = summary.get("noisy_window")
    fig, axes = plt.subplots(3, 1, figsize=(7.2, 7.4), sharex=True)

    sentinel_idx = [i for i, a in enumerate(table["agent"]) if a == "sentinel"]
    sentinel_idx.sort(key=lambda i: int(table["t"][i]))
    t = [int(table["t"][i]) for i in sentinel_idx]
    axes[0].plot(t, [float(table["alpha_mean"][i]) for i in sentinel_idx], color=_agent_color("sentinel"))
    axes[0].set_ylabel("receptivity (seed mean)")

    for agent, idx in _series_by(table, "agent"):
        idx.sort(key=lambda i: int(table["t"][i]))
        ts = [int(table["t"][i]) for i in idx]
        axes[1].plot(ts, [float(table["action_mean"][i]) for i in idx],
                     color=_agent_color(agent), label=agent, lw=0.9)
        axes[2].plot(ts, [float(table["cumulative_payoff_mean"][i]) for i in idx],
                     color=_agent_color(agent), label=agent, lw=0.9)
    axes[1].set_ylabel("action (seed mean)")
    axes[2].set_ylabel("cumulative payoff")
    axes[2].set_xlabel("round")
    for ax in axes:
        if block:
            ax.axvspan(block[0], block[1], **DEFECT_SHADE)
        if noisy:
            ax.axvspan(noisy[0], noisy[1], **NOISY_SHADE)
    axes[1].legend(fontsize=7, ncol=2, loc="lower left")
    axes[0].set_title(spec.title)
    fig.tight_layout()
    return _save(fig, out_dir, spec.figure_id)


def render_f7(results: Path, out_dir: Path, spec: FigureSpec) -> list[Path]:
    agg_path = results / "E8_agg.csv"
    ratio_path = results / "E8_ratio.csv"
    agg = _read_table(agg_path)
    ratio = _read_table(ratio_path)
    _require(agg, ("d", "reg_mode", "alpha", "kl_mean", "w_out_norm_sq_mean"), agg_path)
    _require(ratio, ("d", "reg_mode", "variance_ratio_geomean", "fe_argmin_alpha"), ratio_path)
    fig, axes = plt.subplots(1, 4, figsize=(13.2, 3.1))

    scaled = [i for i, m in enumerate(agg["reg_mode"]) if m == "scaled"]
    for alpha_value, color, label in (("0", "#d62728", "receptivity 0"), ("1", "#1f77b4", "receptivity 1")):
        idx = [i for i in scaled if agg["alpha"][i] == alpha_value]
        idx.sort(key=lambda i: int(agg["d"][i]))
        axes[0].plot([int(agg["d"][i]) for i in idx], [float(agg["kl_mean"][i]) for i in idx],
                     color=color, marker="o", ms=3, label=label)
    axes[0].set_xlabel("reservoir dimension")
    axes[0].set_ylabel("state-space KL cost")
    axes[0].legend(fontsize=7)

    for mode, color in (("scaled", "#1f77b4"), ("fixed", "#7f7f7f")):
        idx = [i for i, m in enumerate(ratio["reg_mode"]) if m == mode]
        if not idx:
            continue
        idx.sort(key=lambda i: int(ratio["d"][i]))
        ds = [int(ratio["d"][i]) for i in idx]
        axes[1].plot(ds, [float(ratio["variance_ratio_geomean"][i]) for i in idx],
                     color=color, marker="o", ms=3, label=f"{mode} penalty")
        axes[2].plot(ds, [float(ratio["fe_argmin_alpha"][i]) for i in idx],
                     color=color, marker="o", ms=3, label=f"{mode} penalty")
    axes[1].set_yscale("log")
    axes[1].set_xlabel("reservoir dimension")
    axes[1].set_ylabel("variance reduction (log)")
    axes[1].legend(fontsize=7)
    axes[2].set_xlabel("reservoir dimension")
    axes[2].set_ylabel("optimal receptivity")
    axes[2].set_ylim(-0.05, 1.05)

    for mode, color in (("scaled", "#1f77b4"), ("fixed", "#7f7f7f")):
        idx = [i for i, m in enumerate(agg["reg_mode"]) if m == mode and agg["alpha"][i] == "1"]
        idx.sort(key=lambda i: int(agg["d"][i]))
        if not idx:
            continue
        axes[3].plot([int(agg["d"][i]) for i in idx],
                     [float(agg["w_out_norm_sq_mean"][i]) for i in idx],
                     color=color, marker="o", ms=3, label=f"{mode} penalty")
    axes[3].set_xlabel("reservoir dimension")
    axes[3].set_ylabel("readout weight norm$^2$")
    axes[3].legend(fontsize=7)
    fig.suptitle(spec.title)
    fig.tight_layout()
    return _save(fig, out_dir, spec.figure_id)


def render_t3(results: Path, out_dir: Path, spec: FigureSpec) -> list[Path]:
    path = results / "E10_agg.csv"
    table = _read_table(path)
    _require(
        table,
        (
            "agent",
            "variance_reduction_geomean",
            "perturbation_depth_mean",
            "recovery_time_mean",
            "payoff_mean",
        ),
        path,
    )
    headers = ("agent", "variance reduction", "perturbation depth", "recovery (rounds)", "mean payoff")
    lines = ["  ".join(f"{h:>20s}" for h in headers)]
    csv_rows = [headers]
    for i, agent in enumerate(table["agent"]):
        def cell(col, fmt):
            raw = table[col][i]
            return fmt.format(float(raw)) if raw != "" else "-"

        row = (
            agent,
            cell("variance_reduction_geomean", "{:.1f}x"),
            cell("perturbation_depth_mean", "{:.2f}"),
            cell("recovery_time_mean", "{:.1f}"),
            cell("payoff_mean", "{:.3f}"),
        )
        csv_rows.append(row)
        lines.append("  ".join(f"{c:>20s}" for c in row))
    txt_path = out_dir / "T3.txt"
    txt_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    csv_path = out_dir / "T3.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(csv_rows)
    return [txt_path, csv_path]


def render_figure(spec: FigureSpec, results_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Render one catalog entry; raises FigureError on missing/empty inputs."""
    results = Path(results_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in spec.inputs:
        if not (results / name).exists():
            raise FigureError(f"missing input file {results / name}")
    renderer = globals()[spec.renderer]
    with plt.rc_context(_RC):
        return renderer(results, out, spec)


def render_all(
    results_dir: str | Path, out_dir: str | Path, only: tuple[str, ...] | None = None
) -> dict:
    """Render every available figure; failures are isolated per figure.

    Returns a manifest mapping figure ids to written paths, plus the list
    of skipped figures with their reasons.
    """
    manifest: dict[str, list[str]] = {}
    skipped: dict[str, str] = {}
    for spec in CATALOG:
        if only and spec.figure_id not in only:
            continue
        try:
            written = render_figure(spec, results_dir, out_dir)
            manifest[spec.figure_id] = [str(p) for p in written]
        except FigureError as exc:
            skipped[spec.figure_id] = str(exc)
    return {"rendered": manifest, "skipped": skipped}
