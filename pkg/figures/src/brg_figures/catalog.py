"""Figure catalog: which experiment files feed which figure."""
from __future__ import annotations

from dataclasses import dataclass

__all__ = ["FigureSpec", "CATALOG", "FIGURE_IDS"]


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    title: str
    inputs: tuple[str, ...]  # file names inside the results directory
    renderer: str            # renderer function name in render.py
    table: bool = False      # table artifacts emit text/CSV instead of images


CATALOG = (
    FigureSpec(
        "F1",
        "Closed-loop body output convergence",
        ("E1_trace.csv",),
        "render_f1",
    ),
    FigureSpec(
        "F2",
        "Perturbation response across governance modes",
        ("E3_trace.csv", "E3_summary.json"),
        "render_f2",
    ),
    FigureSpec(
        "F3",
        "Free energy over receptivity and habituation depth",
        ("E5_fe.csv", "E5_summary.json"),
        "render_f3",
    ),
    FigureSpec(
        "F4",
        "Complexity cost, action variance, and payoff vs receptivity",
        ("E2_agg.csv",),
        "render_f4",
    ),
    FigureSpec(
        "F5",
        "Habituation dynamics",
        ("E4_agg.csv",),
        "render_f5",
    ),
    FigureSpec(
        "F6",
        "Dynamic sentinel on the multi-phase schedule",
        ("E6_trace.csv", "E6_summary.json"),
        "render_f6",
    ),
    FigureSpec(
        "F7",
        "Reservoir dimension sweep",
        ("E8_agg.csv", "E8_ratio.csv"),
        "render_f7",
    ),
    FigureSpec(
        "T3",
        "Smoothed tit-for-tat baselines vs the reservoir",
        ("E10_agg.csv",),
        "render_t3",
        table=True,
    ),
)

FIGURE_IDS = tuple(spec.figure_id for spec in CATALOG)
