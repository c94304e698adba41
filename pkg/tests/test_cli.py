import csv
import json
import subprocess
import sys

import pytest

from qplab.cli import main
from qplab.config import SCHEMA_VERSION, build_config, read_config_file
from qplab.errors import ConfigError
from qplab.gaps import GapReport
from qplab.reports import report_merge, write_json


def _outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "timing.txt"}


def test_config_defaults_and_overrides(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# sweep\nlambda = 2.5\nN = 10 20\nomega = silver\n")
    cfg = build_config(read_config_file(f), {"N": "30 60"})
    assert cfg["lambda"] == 2.5
    assert cfg.scales == [30, 60]
    assert cfg.omega == pytest.approx(2**0.5 - 1)
    assert "threads" not in cfg.record()


@pytest.mark.parametrize("bad", [{"N": "20 10"}, {"tau": "-1"}, {"omega": "2"},
                                 {"bc": "neumann"}, {"grid": "x"}, {"m_range": "0 5"}])
def test_config_rejects_bad_values(bad):
    with pytest.raises(ConfigError):
        build_config({}, bad)


def test_config_file_unknown_key(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("lamda = 3\n")
    with pytest.raises(ConfigError):
        read_config_file(f)


def test_malformed_config_exits_2_without_files(tmp_path):
    out = tmp_path / "out"
    f = tmp_path / "bad.cfg"
    f.write_text("this line has no equals sign\n")
    assert main(["lyapunov", "--config", str(f), "--out", str(out)]) == 2
    assert not out.exists()


def test_lyapunov_csv_header(tmp_path):
    out = tmp_path / "lyap"
    code = main(["lyapunov", "--lambda", "3", "--omega", "golden", "--N", "200",
                 "--grid", "64", "--E", "0", "1", "--out", str(out)])
    assert code == 0
    rows = list(csv.reader(open(out / "lyapunov.csv")))
    assert rows[0] == ["E", "N", "y", "L", "spread"]
    assert len(rows) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["schema"] == SCHEMA_VERSION
    assert man["config"]["lambda"] == 3.0
    assert "wall_time_s" in (out / "timing.txt").read_text()


def test_numerical_failure_exits_3(tmp_path):
    # y outside the analyticity band is a numerical precondition failure
    out = tmp_path / "fail"
    assert main(["lyapunov", "--N", "50", "--grid", "64", "--y", "0.7", "--out", str(out)]) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "error" and man["error"] == "OutOfAnnulus"


def test_verify_exit_0(tmp_path):
    assert main(["verify", "--out", str(tmp_path / "v")]) == 0
    rows = list(csv.reader(open(tmp_path / "v" / "verify.csv")))
    assert rows[0] == ["check", "value", "limit", "status"]
    assert all(r[3] == "pass" for r in rows[1:])


def test_thread_count_does_not_change_outputs(tmp_path):
    args = ["zeros", "--N", "20", "30", "--E", "0.1", "0.9", "--annulus", "0.9", "1.1"]
    assert main(args + ["--threads", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--threads", "4", "--out", str(tmp_path / "b")]) == 0
    assert _outputs(tmp_path / "a") == _outputs(tmp_path / "b")


def test_env_thread_default(tmp_path, monkeypatch):
    monkeypatch.setenv("QPLAB_THREADS", "3")
    assert build_config().threads == 3
    monkeypatch.setenv("QPLAB_THREADS", "zero")
    with pytest.raises(ConfigError):
        build_config()


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "qplab.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "verify" in r.stdout


def _report(path, N, gaps, pregaps=()):
    bands = []
    rep = GapReport(N, "dirichlet", (-5, 5), bands, [tuple(g) for g in gaps],
                    pregaps=[{"interval": list(p)} for p in pregaps])
    write_json(path, rep.to_dict())


def test_merge_single_scale_passthrough(tmp_path):
    _report(tmp_path / "a.json", 50, [(0.1, 0.3), (1.0, 1.2)])
    doc = report_merge(tmp_path)
    assert doc["scales"] == [50]
    assert [c["links"][0]["interval"] for c in doc["chains"]] == [[0.1, 0.3], [1.0, 1.2]]
    assert all(c["survives"] for c in doc["chains"])


def test_merge_surviving_pregap_chain(tmp_path):
    _report(tmp_path / "a.json", 50, [], [(0.42, 0.43)])
    _report(tmp_path / "b.json", 100, [], [(0.421, 0.429)])
    [chain] = report_merge(tmp_path)["chains"]
    assert chain["length"] == 2 and chain["survives"]


def test_merge_disjoint_reports(tmp_path):
    _report(tmp_path / "a.json", 50, [(0.1, 0.2)])
    _report(tmp_path / "b.json", 100, [(0.5, 0.6)])
    doc = report_merge(tmp_path)
    assert [c["length"] for c in doc["chains"]] == [1, 1]
    assert [c["survives"] for c in doc["chains"]] == [False, True]


def test_merge_schema_mismatch_exits_3(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps({"kind": "gap_report", "schema": "0", "N": 5,
                                                 "gaps": [], "pregaps": []}))
    assert main(["merge", str(tmp_path)]) == 3
    assert not (tmp_path / "genealogy.json").exists()


def test_merge_writes_genealogy(tmp_path):
    _report(tmp_path / "a.json", 50, [(0.1, 0.2)])
    assert main(["merge", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "genealogy.json").read_text())
    assert doc["kind"] == "genealogy"
