import json
from pathlib import Path

from brg_figures.cli import main


def _minimal_results(tmp_path: Path) -> Path:
    results = tmp_path / "results"
    results.mkdir()
    rows = "\r\n".join(
        ["experiment,alpha,kl_mean,kl_sem,variance_mean,variance_sem,payoff_mean,payoff_sem"]
        + [f"E2,{a/10},1.0,0.1,0.01,0.001,2.8,0.01" for a in range(11)]
    )
    (results / "E2_agg.csv").write_text(rows + "\r\n")
    trace = "\r\n".join(
        ["experiment,agent,t,alpha_mean,action_mean,discomfort_mean,cumulative_payoff_mean"]
        + [f"E6,sentinel,{t},0.85,0.9,0.05,{3*t}" for t in range(20)]
    )
    (results / "E6_trace.csv").write_text(trace + "\r\n")
    (results / "E6_summary.json").write_text(
        json.dumps({"summary": {"defect_block": [5, 10], "noisy_window": None}})
    )
    return results


def test_cli_renders_requested_subset(tmp_path, capsys):
    results = _minimal_results(tmp_path)
    out = tmp_path / "figs"
    code = main(["--results", str(results), "--out", str(out), "--only", "F4,F6"])
    assert code == 0
    assert (out / "F4.svg").exists()
    assert (out / "F6.svg").exists()
    stdout = capsys.readouterr().out
    assert "F4" in stdout and "F6" in stdout


def test_cli_partial_results_reports_skips(tmp_path, capsys):
    results = _minimal_results(tmp_path)
    code = main(["--results", str(results), "--out", str(tmp_path / "figs")])
    captured = capsys.readouterr()
    assert code == 3  # rendered some, skipped the rest
    assert "skipped" in captured.err


def test_cli_rejects_unknown_figure_id(tmp_path, capsys):
    results = _minimal_results(tmp_path)
    code = main(["--results", str(results), "--out", str(tmp_path / "figs"), "--only", "F9"])
    assert code == 2
    assert "unknown figure ids" in capsys.readouterr().err


def test_cli_empty_results_dir_fails(tmp_path, capsys):
    results = tmp_path / "results"
    results.mkdir()
    code = main(["--results", str(results), "--out", str(tmp_path / "figs")])
    assert code == 1
