import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nhlab import cli
from nhlab.audit import size_sweep, spectrum_report
from nhlab.io import SchemaError, emit_plot_data, load_eigenvalues, to_json
from nhlab.model import ModelParams, ep_encirclement
from nhlab.topology import pauli_trajectory

BASE = ["--gamma", "1", "--r", "0.5", "--v", "0.52"]
STAMP = "2000-01-01T00:00:00+00:00"


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def run_fixed(argv, capsys):
    # run_job with a pinned timestamp, for byte-level comparisons
    cfg = cli.config_from_args(cli.build_parser().parse_args(argv))
    buf = io.StringIO()
    code = cli.run_job(cfg, timestamp=STAMP, stdout=buf)
    return code, buf.getvalue()


# ----------------------------------------------------------------- examples


def test_spectrum_example_writes_file(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, stdout, _ = run(["spectrum", *BASE, "--cells", "40", "--precision", "quad", "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    doc = json.loads(out.read_text())
    assert set(doc) == {"meta", "result"}
    assert set(doc["meta"]) == {"tool_version", "timestamp", "config_echo"}
    res = doc["result"]
    assert res["audit"]["passed"] is True
    assert res["precision_used"] == "quad"
    assert max(abs(im) for _, im in res["eigenvalues"]) < 1e-10
    assert len(res["eigenvalues"]) == 80
    assert not list(tmp_path.glob(".*.tmp"))


def test_berry_example(capsys):
    code, stdout, _ = run(["berry", *BASE, "--span", "4pi", "--kpoints", "4096"], capsys)
    assert code == 0
    res = json.loads(stdout)["result"]
    assert res["phase"] == pytest.approx(math.pi, abs=1e-6)
    assert res["winding"] == pytest.approx(0.5, abs=1e-6)
    for key in ("span", "sweep_count", "phase", "winding", "gauge_tag", "closure_defect"):
        assert key in res


def test_berry_open_span_uses_the_gauge(capsys):
    code, stdout, _ = run(["berry", *BASE, "--span", "2pi", "--kpoints", "1024", "--gauge", "random-seeded", "--seed", "3"], capsys)
    assert code == 0
    res = json.loads(stdout)["result"]
    assert res["span"] == "2pi" and res["gauge_tag"] == "random-seeded(seed=3)"


def test_audit_of_asymmetric_external_spectrum_exits_zero(tmp_path, capsys):
    f = tmp_path / "external_spectrum.json"
    f.write_text(json.dumps([[1, 0], [-1, 0], [0.5, 0.1], [0.5, -0.1]]))
    code, stdout, _ = run(["audit", "--in", str(f)], capsys)
    assert code == 0
    res = json.loads(stdout)["result"]
    assert res["audit"]["passed"] is False and res["passed"] is False


def test_winding_trajectory_certify_defect_and_pbc_obc(capsys):
    code, stdout, _ = run(["winding", *BASE, "--kpoints", "256"], capsys)
    res = json.loads(stdout)["result"]
    assert code == 0 and res["encirclement"]["encircled"] is True
    assert res["closed"]["winding"] == pytest.approx(0.5, abs=1e-4)

    code, stdout, _ = run(["trajectory", *BASE, "--kpoints", "256"], capsys)
    res = json.loads(stdout)["result"]
    assert code == 0 and res["winding"] == 1 and res["loop_period"] == "4pi"

    code, stdout, _ = run(["certify", "--gamma", "1", "--r", "1/2", "--v", "13/25", "--cells", "4"], capsys)
    res = json.loads(stdout)["result"]
    assert code == 0 and res["certified"] is True and res["real_roots_with_multiplicity"] == 8

    code, stdout, _ = run(["defect", "--gamma", "1", "--r", "1/2", "--v", "1/2", "--cells", "6", "--energy", "1/2", "--ingap", "1"], capsys)
    res = json.loads(stdout)["result"]
    assert code == 0
    assert res["multiplicity"]["geometric_mult"] == 1 and res["multiplicity"]["algebraic_mult"] == 5
    assert res["ingap_state"]["exact_zero"] is True
    assert res["localization"]["left_edge_weight"] == 1.0

    code, stdout, _ = run(["pbc-obc", *BASE, "--cells", "6"], capsys)
    res = json.loads(stdout)["result"]
    assert code == 0 and res["pbc_max_abs_imag"] > 0.1 and res["obc_max_abs_imag"] < 1e-10


def test_sweep_and_zero_scan_csv(capsys):
    code, stdout, _ = run(["sweep", *BASE, "--sizes", "3,5", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(stdout)))
    assert rows[0] == ["n_cells", "re_e", "im_e"]
    assert [r[0] for r in rows[1:]] == ["3"] * 6 + ["5"] * 10

    code, stdout, _ = run(["defect", *BASE, "--zero-scan", "--sizes", "10,20", "--format", "csv"], capsys)
    rows = list(csv.reader(io.StringIO(stdout)))
    assert code == 0 and rows[0][0] == "n_cells" and [r[3] for r in rows[1:]] == ["1", "1"]


# -------------------------------------------------------------- exit codes


@pytest.mark.parametrize(
    "argv",
    [
        ["spectrum", "--gamma", "-1", "--r", "0.5", "--v", "0.5", "--cells", "4"],
        ["certify", "--gamma", "1", "--r", "0.5", "--v", "pi", "--cells", "3"],
        ["certify", *BASE, "--cells", "99"],
        ["berry", *BASE, "--kpoints", "90"],
        ["berry", "--gamma", "1", "--r", "0", "--v", "0.5"],
        ["pbc-obc", *BASE, "--cells", "2"],
        ["spectrum", *BASE, "--cells", "0"],
        ["spectrum", *BASE, "--cells", "4", "--precision", "single"],
        ["spectrum", *BASE, "--cells", "4", "--out", "/nonexistent/dir/x.json"],
        ["frobnicate"],
        ["spectrum", *BASE],
    ],
)
def test_invalid_input_exits_one(argv, capsys):
    code, stdout, err = run(argv, capsys)
    assert code == 1 and stdout == ""
    rec = json.loads(err.strip().splitlines()[-1])
    assert rec["error"]["exit_code"] == 1
    assert rec["error"]["message"]


def test_numerical_failure_exits_two(capsys):
    # defective real spectrum beyond the exact cap: the quad audit cannot pass
    code, stdout, err = run(["spectrum", "--gamma", "1", "--r", "0.5", "--v", "-0.5", "--cells", "30"], capsys)
    assert code == 2 and stdout == ""
    rec = json.loads(err)
    assert rec["error"]["exit_code"] == 2 and "audit" in rec["error"]["message"]


def test_schema_errors_name_the_field(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({"result": {"eigenvalues": [[1, 0], [2, "x"]]}}))
    code, _, err = run(["audit", "--in", str(f)], capsys)
    rec = json.loads(err)
    assert code == 1 and rec["error"]["path"] == "$.result.eigenvalues[1]"
    f.write_text("{not json")
    assert run(["audit", "--in", str(f)], capsys)[0] == 1
    assert run(["audit", "--in", str(tmp_path / "missing.json")], capsys)[0] == 1
    for doc, path in [({"x": 1}, "$"), ({"eigenvalues": []}, "$.eigenvalues"), ("text", "$")]:
        with pytest.raises(SchemaError) as exc:
            load_eigenvalues(doc)
        assert exc.value.path == path


# ------------------------------------------------------ round trip, defaults


def test_round_trip_preserves_eigenvalues_exactly(tmp_path, capsys):
    out = tmp_path / "q.json"
    assert run(["spectrum", *BASE, "--cells", "12", "--precision", "quad", "--out", str(out)], capsys)[0] == 0
    rep = spectrum_report(ModelParams("0.52", "0.5", "1"), 12, ("quad",))
    [(path, hi, lo)] = load_eigenvalues(json.loads(out.read_text()))
    assert path == "$.result.eigenvalues"
    assert np.array_equal(hi, rep.eigenvalues)
    assert np.array_equal(lo, rep.eigenvalues_lo)
    code, stdout, _ = run(["audit", "--in", str(out)], capsys)
    res = json.loads(stdout)["result"]
    assert code == 0 and res["passed"] is True
    assert res["audit"] == to_json(rep.audit)


def test_round_trip_of_sweep_and_pbc_obc(tmp_path, capsys):
    out = tmp_path / "w.json"
    assert run(["sweep", *BASE, "--sizes", "3,4", "--out", str(out)], capsys)[0] == 0
    sets = load_eigenvalues(json.loads(out.read_text()))
    assert [p for p, _, _ in sets] == ["$.result.spectra[0].eigenvalues", "$.result.spectra[1].eigenvalues"]
    out2 = tmp_path / "p.json"
    assert run(["pbc-obc", *BASE, "--cells", "4", "--out", str(out2)], capsys)[0] == 0
    assert load_eigenvalues(json.loads(out2.read_text()))[0][0] == "$.result.obc.eigenvalues"


@pytest.mark.parametrize(
    "argv",
    [
        ["spectrum", *BASE, "--cells", "8"],
        ["berry", *BASE, "--kpoints", "512", "--rescale-seed", "4"],
        ["defect", *BASE, "--zero-scan", "--sizes", "10"],
    ],
)
def test_output_is_deterministic_apart_from_the_timestamp(argv, capsys):
    a = run_fixed(argv, capsys)
    b = run_fixed(argv, capsys)
    assert a == b and a[0] == 0
    c = json.loads(run(argv, capsys)[1])
    assert c["meta"]["timestamp"] != STAMP
    c["meta"]["timestamp"] = STAMP
    assert json.dumps(c, indent=2) + "\n" == a[1]


def test_help_documents_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args(["spectrum", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "NHLAB_PRECISION" in text or "double,quad,exact" in text
    assert "1e-08" in text  # tol-pair default
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["berry", "--help"])
    text = capsys.readouterr().out
    assert "4096" in text and "first-component-real" in text


def test_config_echo_carries_tolerances(capsys):
    doc = json.loads(run(["spectrum", *BASE, "--cells", "3"], capsys)[1])
    echo = doc["meta"]["config_echo"]
    assert echo["params"] == {"v": "13/25", "r": "1/2", "gamma": "1"}
    assert echo["policy"] == ["double", "quad", "exact"]
    for key in ("residual_double", "residual_quad", "exact_cell_cap", "biorthogonal_threshold", "zero_scan_window"):
        assert key in echo["defaults"]


def test_env_var_sets_the_policy(monkeypatch, capsys):
    monkeypatch.setenv("NHLAB_PRECISION", "quad")
    doc = json.loads(run(["spectrum", *BASE, "--cells", "3"], capsys)[1])
    assert doc["meta"]["config_echo"]["policy"] == ["quad"]
    assert doc["result"]["precision_used"] == "quad"


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "nhlab", "certify", *BASE, "--cells", "2"], capture_output=True, text=True, timeout=120
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["certified"] is True


# -------------------------------------------------------------- plot data


def test_emit_plot_data_layouts():
    p = ModelParams("0.52", "0.5", "1")
    sweep = size_sweep(p, (3, 4), ("quad",))
    rows = list(csv.reader(io.StringIO(emit_plot_data(sweep, "csv"))))
    assert len(rows) == 1 + 6 + 8
    tr = pauli_trajectory(p, 256)
    rows = list(csv.reader(io.StringIO(emit_plot_data(tr, "csv"))))
    assert rows[0] == ["k", "re_sx", "im_sx", "re_sz", "im_sz"]
    assert len(rows) == 1 + 256  # 256 points across the full 4pi
    first, last = np.array(rows[1][1:], float), np.array(rows[-1][1:], float)
    assert np.linalg.norm(first - last) < 0.1  # the 4pi loop closes up to one grid step
    rows = list(csv.reader(io.StringIO(emit_plot_data(ep_encirclement(p, 64), "csv"))))
    assert rows[0] == ["k", "re_delta", "im_delta"] and len(rows) == 65
    doc = json.loads(emit_plot_data(tr, "json"))
    assert doc["result"]["loop_period"] == "4pi"
    with pytest.raises(Exception):
        emit_plot_data(tr, "xml")
