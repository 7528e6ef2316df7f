import json
from pathlib import Path

import pytest

from brg_figures.catalog import CATALOG, FIGURE_IDS
from brg_figures.render import FigureError, render_all, render_figure


def _write_csv(path: Path, header: str, rows: list[str]) -> None:
    path.write_text("\r\n".join([header, *rows]) + "\r\n", encoding="utf-8")


@pytest.fixture()
def results_dir(tmp_path: Path) -> Path:
    """Minimal synthetic results directory covering every catalog input."""
    results = tmp_path / "results"
    results.mkdir()
    _write_csv(
        results / "E1_trace.csv",
        "experiment,t,a_body_noisy_mean,a_body_deterministic_mean",
        [f"E1,{t},{0.9 + 0.005 * (t % 3)},{0.95}" for t in range(20)],
    )
    agents = ["static:0", "static:1", "sentinel"]
    _write_csv(
        results / "E3_trace.csv",
        "experiment,agent,t,action_mean,alpha_mean",
        [f"E3,{a},{t},{0.8},{0.85}" for a in agents for t in range(30)],
    )
    (results / "E3_summary.json").write_text(
        json.dumps({"summary": {"defect_block": [10, 20]}})
    )
    fe_rows = []
    for lam in (1, 3, 8):
        for h in (0, 50):
            for alpha in (0.0, 0.5, 1.0):
                fe_rows.append(f"E5,{lam},{h},{alpha},{-2.5 + alpha},{0.01},{0.6},{2.8}")
    _write_csv(
        results / "E5_fe.csv",
        "experiment,lambda,h,alpha,fe_mean,fe_sem,kl_mean,payoff_mean",
        fe_rows,
    )
    (results / "E5_summary.json").write_text(
        json.dumps(
            {
                "summary": {
                    "fe_argmin_alpha": {
                        f"{lam:g}": {"0": 1.0, "50": 0.7} for lam in (1.0, 3.0, 8.0)
                    }
                }
            }
        )
    )
    _write_csv(
        results / "E2_agg.csv",
        "experiment,alpha,kl_mean,kl_sem,variance_mean,variance_sem,payoff_mean,payoff_sem",
        [f"E2,{a / 10},{1.5 - a / 10},{0.05},{10 ** (-1 - a / 10)},{1e-4},{2.9 - 0.005 * a},{0.01}" for a in range(11)],
    )
    _write_csv(
        results / "E4_agg.csv",
        "experiment,agent,epoch,kl_mean,kl_sem,variance_mean,variance_sem,body_output_mean",
        [
            f"E4,{agent},{epoch},{1.0},{0.05},{0.01},{0.001},{0.97}"
            for agent in ("static:0", "static:1", "sentinel")
            for epoch in (0, 15, 30)
        ],
    )
    _write_csv(
        results / "E6_trace.csv",
        "experiment,agent,t,alpha_mean,action_mean,discomfort_mean,cumulative_payoff_mean",
        [
            f"E6,{agent},{t},{0.85},{0.9},{0.05},{3.0 * t}"
            for agent in ("sentinel", "static:0")
            for t in range(40)
        ],
    )
    (results / "E6_summary.json").write_text(
        json.dumps({"summary": {"defect_block": [10, 15], "noisy_window": [25, 35]}})
    )
    _write_csv(
        results / "E8_agg.csv",
        "experiment,d,reg_mode,alpha,kl_mean,variance_mean,payoff_mean,w_out_norm_sq_mean",
        [
            f"E8,{d},{mode},{a},{1.0},{0.01},{2.8},{5.0 / d}"
            for d in (5, 30, 75)
            for mode in ("scaled", "fixed")
            for a in ("0", "1")
        ],
    )
    _write_csv(
        results / "E8_ratio.csv",
        "experiment,d,reg_mode,variance_ratio_geomean,fe_argmin_alpha",
        [f"E8,{d},{mode},{d * 7},{0.7}" for d in (5, 30, 75) for mode in ("scaled", "fixed")],
    )
    _write_csv(
        results / "E10_agg.csv",
        "experiment,agent,variance_reduction_geomean,perturbation_depth_mean,recovery_time_mean,recovery_time_median,payoff_mean",
        [
            "E10,ema:0,1.0,0.0,1.0,1.0,2.89",
            "E10,ema:0.99,150.0,0.37,,,2.88",
            "E10,reservoir,450.0,0.89,0.0,0.0,2.75",
        ],
    )
    return results


class TestRenderAll:
    def test_full_directory_emits_eight_artifacts(self, results_dir, tmp_path):
        out = tmp_path / "figs"
        manifest = render_all(results_dir, out)
        assert not manifest["skipped"]
        assert len(manifest["rendered"]) == 8
        for figure_id in FIGURE_IDS:
            assert figure_id in manifest["rendered"]
        for spec in CATALOG:
            if spec.table:
                assert (out / "T3.csv").exists() and (out / "T3.txt").exists()
            else:
                assert (out / f"{spec.figure_id}.png").exists()
                assert (out / f"{spec.figure_id}.svg").exists()

    def test_partial_directory_renders_subset(self, results_dir, tmp_path):
        (results_dir / "E8_agg.csv").unlink()
        manifest = render_all(results_dir, tmp_path / "figs")
        assert "F7" in manifest["skipped"]
        assert "E8_agg.csv" in manifest["skipped"]["F7"]
        assert len(manifest["rendered"]) == 7

    def test_only_filter(self, results_dir, tmp_path):
        manifest = render_all(results_dir, tmp_path / "figs", only=("F4", "F6"))
        assert set(manifest["rendered"]) == {"F4", "F6"}

    def test_rerun_is_byte_identical_for_svg(self, results_dir, tmp_path):
        out = tmp_path / "figs"
        render_all(results_dir, out)
        first = {p.name: p.read_bytes() for p in out.glob("*.svg")}
        assert first
        render_all(results_dir, out)
        second = {p.name: p.read_bytes() for p in out.glob("*.svg")}
        assert first == second


class TestErrorContract:
    def test_empty_csv_names_file_and_writes_nothing(self, results_dir, tmp_path):
        (results_dir / "E2_agg.csv").write_text("")
        out = tmp_path / "figs"
        spec = next(s for s in CATALOG if s.figure_id == "F4")
        with pytest.raises(FigureError, match="E2_agg.csv"):
            render_figure(spec, results_dir, out)
        assert not (out / "F4.png").exists()
        assert not (out / "F4.svg").exists()

    def test_missing_column_is_named(self, results_dir, tmp_path):
        (results_dir / "E2_agg.csv").write_text("experiment,alpha\r\nE2,0.0\r\n")
        spec = next(s for s in CATALOG if s.figure_id == "F4")
        with pytest.raises(FigureError, match="kl_mean"):
            render_figure(spec, results_dir, tmp_path / "figs")

    def test_missing_file_is_named(self, results_dir, tmp_path):
        (results_dir / "E1_trace.csv").unlink()
        spec = next(s for s in CATALOG if s.figure_id == "F1")
        with pytest.raises(FigureError, match="E1_trace.csv"):
            render_figure(spec, results_dir, tmp_path / "figs")
