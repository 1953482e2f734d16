import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from triqi.bounds import evaluate_point
from triqi.cli import main
from triqi.overlap_audit import audit_overlap
from triqi.states import ProtocolParams
from triqi.sweep import (SweepSpec, SweepTable, emit, read_table, render, run_sweep)
from triqi.textfmt import format_float, format_record, parse_record

FIXED = ProtocolParams(theta=0.01, eta=1e-3, nbar2=20.0, nbar3=20.0, background="flat")


def small_spec(**kwargs):
    defaults = dict(axes=(("eta", (1e-3, 1e-2)),), fixed=FIXED,
                    outputs=("exponent", "q_half", "ratio"))
    defaults.update(kwargs)
    return SweepSpec(**defaults)


def test_float_format_round_trip():
    for x in (0.1, 1 / 3, 1e-300, 123456.789e12, -0.0, 2.2699964881242427e-05):
        assert float(format_float(x)) == x


def test_record_round_trip():
    rec = {"a": 1.5, "b": True, "c": "text", "d": [1.0, 2.0]}
    parsed = parse_record(format_record(rec))
    assert parsed["a"] == 1.5
    assert parsed["b"] is True
    assert parsed["c"] == "text"


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(axes=(("bogus", (1.0,)),), fixed=FIXED)
    with pytest.raises(ValueError):
        SweepSpec(axes=(("eta", ()),), fixed=FIXED)
    with pytest.raises(ValueError):
        SweepSpec(axes=(("eta", tuple(np.linspace(0, 0.09, 400))),
                        ("theta", tuple(np.linspace(0.01, 0.09, 400)))), fixed=FIXED)
    with pytest.raises(ValueError):
        small_spec(outputs=("nonsense",))


def test_spec_from_mapping():
    text = {
        "theta": "0.01", "eta": "0.001", "nbar2": "20", "nbar3": "20",
        "background": "flat", "axis.eta": "0.001,0.01",
        "axis.background": "thermal,flat", "outputs": "exponent,q_half",
        "format": "csv", "M": "10",
    }
    spec = SweepSpec.from_mapping(text)
    assert spec.axes[0] == ("eta", (0.001, 0.01))
    assert spec.axes[1] == ("background", ("thermal", "flat"))
    assert spec.m_shots == 10
    assert spec.n_points == 4


def test_sweep_eta_zero_gives_zero_exponent():
    spec = small_spec(axes=(("eta", (0.0,)),))
    table = run_sweep(spec)
    assert len(table.rows) == 1
    row = dict(zip(table.columns, table.rows[0]))
    assert abs(row["exponent"]) < 1e-12
    assert row["error"] == ""


def test_sweep_n_signal_axis_gives_ratio_column():
    spec = small_spec(axes=(("n_signal", (0.01, 0.1)),), outputs=("ratio",))
    table = run_sweep(spec)
    ratios = [dict(zip(table.columns, r))["ratio"] for r in table.rows]
    assert ratios[0] == pytest.approx(100.0, abs=1e-12)
    assert ratios[1] == pytest.approx(10.0, abs=1e-12)


def test_sweep_rows_match_single_shot_calls():
    spec = small_spec(outputs=("exponent", "q_half", "helstrom", "t_papersign"))
    table = run_sweep(spec)
    for row in table.rows:
        d = dict(zip(table.columns, row))
        params = FIXED.with_updates(eta=d["eta"])
        report = evaluate_point(params)
        audit = audit_overlap(params)
        assert d["exponent"] == report.chernoff_exponent
        assert d["q_half"] == report.bhattacharyya_q
        assert d["helstrom"] == report.helstrom_error
        assert d["t_papersign"] == audit.signed_root


def test_sweep_error_column_keeps_going():
    bad_fixed = ProtocolParams(theta=0.01, eta=1e-3, nbar2=20.0, nbar3=20.0,
                               background="flat", cutoffs=(2, 5, 5))
    spec = SweepSpec(axes=(("eta", (1e-3,)), ("nbar", (4.0, 20.0))),
                     fixed=bad_fixed, outputs=("exponent",))
    table = run_sweep(spec)
    rows = [dict(zip(table.columns, r)) for r in table.rows]
    assert rows[0]["error"] == ""          # nbar=4 fits in cutoff 5
    assert rows[1]["error"] != ""          # flat nbar=20 needs cutoff >= 20
    assert rows[1]["exponent"] is None
    assert rows[0]["exponent"] is not None


def test_sweep_worker_pool_preserves_order():
    spec = small_spec(axes=(("eta", (1e-3, 3e-3, 1e-2)),))
    serial = run_sweep(spec)
    pooled = run_sweep(small_spec(axes=(("eta", (1e-3, 3e-3, 1e-2)),), workers=3))
    assert serial == pooled


def test_emit_empty_and_single_row(tmp_path):
    empty = SweepTable(("a", "b"), ())
    path = tmp_path / "empty.csv"
    emit(empty, "csv", path)
    assert path.read_text() == "a,b\n"
    one = SweepTable(("a", "b"), ((1.0, "x"),))
    path2 = tmp_path / "one.csv"
    emit(one, "csv", path2)
    assert len(path2.read_text().splitlines()) == 2


def test_emit_round_trip_exact(tmp_path):
    spec = small_spec(outputs=("exponent", "q_half", "helstrom",
                               "t_papersign", "t_principal", "ratio"))
    table = run_sweep(spec)
    path = tmp_path / "sweep.csv"
    emit(table, "csv", path)
    back = read_table(path)
    assert back.columns == table.columns
    for row, orig in zip(back.rows, table.rows):
        for cell, ocell in zip(row, orig):
            if ocell is None or ocell == "":
                assert cell in (None, "")
            else:
                assert cell == ocell


def test_emit_io_error_carries_path():
    table = SweepTable(("a",), ((1.0,),))
    with pytest.raises(OSError, match="no/such/dir"):
        emit(table, "csv", "/no/such/dir/out.csv")


def test_sweep_deterministic_bytes():
    spec = small_spec()
    first = render(run_sweep(spec), "csv")
    second = render(run_sweep(spec), "csv")
    assert first.encode() == second.encode()


def test_text_format_mirrors_fields():
    table = run_sweep(small_spec(axes=(("eta", (1e-3,)),)))
    text = render(table, "text")
    rec = parse_record(text)
    assert rec["rows"] == 1
    assert rec["row.0.eta"] == 1e-3


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_usage_error_exit_code(capsys):
    assert main(["chernoff", "--no-such-flag"]) == 1
    assert main([]) == 1


def test_cli_state_runs(capsys):
    code = main(["state", "--theta", "0.1", "--cutoff", "6", "--chain-cutoff", "8",
                 "--tail-bound", "1"])
    assert code == 0
    out = capsys.readouterr().out
    assert "|000>" in out and "leakage" in out


def test_cli_state_numeric_failure_exit_code(capsys):
    code = main(["state", "--theta", "0.2", "--cutoff", "6", "--chain-cutoff", "4",
                 "--tail-bound", "1"])
    assert code == 2


def test_cli_chernoff_text_report(capsys, tmp_path):
    out = tmp_path / "report.txt"
    code = main(["chernoff", "--theta", "0.1", "--eta", "0.05", "--nbar2", "3",
                 "--nbar3", "3", "--cutoff", "6", "--tail-bound", "1",
                 "--out", str(out)])
    assert code == 0
    rec = parse_record(out.read_text())
    assert rec["q_half"] == pytest.approx(0.996920494113427, abs=1e-12)
    assert rec["s_star"] == pytest.approx(0.4447, abs=2e-4)


def test_cli_strict_regime_exit_code(capsys):
    # nbar=3 violates the high-noise regime; --strict makes that fatal
    code = main(["chernoff", "--theta", "0.1", "--eta", "0.05", "--nbar2", "3",
                 "--nbar3", "3", "--cutoff", "6", "--tail-bound", "1", "--strict"])
    assert code == 3


def test_cli_audit_record(capsys):
    code = main(["appendix-audit", "--theta", "0.01", "--eta", "0.01",
                 "--nbar2", "50", "--nbar3", "50", "--background", "flat"])
    assert code == 0
    rec = parse_record(capsys.readouterr().out)
    assert rec["t_paper"] == pytest.approx(0.998, abs=1e-15)
    assert rec["verdict"] == "matches_paper_order"


def test_cli_reproduce_factor100(capsys):
    code = main(["reproduce", "factor100"])
    assert code == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    header = lines[0].split(",")
    first = dict(zip(header, lines[1].split(",")))
    assert float(first["ratio"]) == pytest.approx(100.0, abs=1e-12)


def test_cli_sweep_config_and_golden(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("""
theta = 0.01
eta = 0.001
nbar2 = 20
nbar3 = 20
background = flat
axis.eta = 0.001,0.01
outputs = exponent,q_half,ratio
format = csv
""")
    golden_dir = tmp_path / "golden"
    monkeypatch.setenv("TRIQI_GOLDEN_DIR", str(golden_dir))
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--config", str(cfg), "--out", str(out),
                 "--golden", "sweep.csv", "--write-golden"])
    assert code == 0
    stored = (golden_dir / "sweep.csv").read_bytes()
    assert stored == out.read_bytes()
    # comparison run against the stored golden file succeeds
    assert main(["sweep", "--config", str(cfg), "--golden", "sweep.csv",
                 "--out", str(tmp_path / "again.csv")]) == 0
    capsys.readouterr()
    # a corrupted golden file is detected
    (golden_dir / "sweep.csv").write_text("tampered\n")
    assert main(["sweep", "--config", str(cfg), "--golden", "sweep.csv",
                 "--out", str(tmp_path / "third.csv")]) == 2


def test_cli_subprocess_entry_point(tmp_path):
    out = tmp_path / "rep.csv"
    repo_root = Path(__file__).resolve().parents[1]
    proc = subprocess.run(
        [sys.executable, "-m", "triqi.cli", "reproduce", "evolution-order",
         "--out", str(out)],
        capture_output=True, text=True, cwd=repo_root)
    assert proc.returncode == 0, proc.stderr
    body = out.read_text().splitlines()
    assert body[0].startswith("theta,")
    assert len(body) == 4
