import json
import shutil
import subprocess

import pytest

from obstacle_lab.cli import main
from obstacle_lab.scenarios import SCENARIOS


def _summary(out):
    return json.loads((out / "summary.json").read_text())


def test_list(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split()[0] for ln in lines] == list(SCENARIOS)


def test_unknown_scenario(capsys):
    assert main(["run", "--scenario", "nope"]) == 2
    err = capsys.readouterr().err
    assert "nope" in err
    for name in SCENARIOS:
        assert name in err


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nx": 2}))
    assert main(["run", "--scenario", "barenblatt", "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["run", "--scenario", "barenblatt", "--config", str(cfg)]) == 2
    cfg.write_text("{not json")
    assert main(["run", "--scenario", "barenblatt", "--config", str(cfg)]) == 2
    assert main(["run", "--scenario", "barenblatt", "--eps", "0.1,0.2"]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_eps_syntax():
    with pytest.raises(SystemExit) as info:
        main(["run", "--scenario", "barenblatt", "--eps", "a,b"])
    assert info.value.code == 2


def test_run_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nx": 32, "nt": 32}))
    code = main(["run", "--scenario", "continuous-obstacle", "--config", str(cfg), "--nx", "48", "--out", str(out)])
    s = _summary(out)
    assert code == 0 and s["pass"] is True
    assert s["config"]["nx"] == 48 and s["config"]["nt"] == 32
    assert {"solution.csv", "solution.json"} <= set(s["artifacts"])
    assert (out / "solution.csv").read_text().startswith("# nx=48 nt=32")
    side = json.loads((out / "solution.json").read_text())
    assert {"mode", "comp_residual", "iterations_per_step", "active_node_count_per_step", "params"} <= set(side)


def test_failure_still_writes_summary(tmp_path):
    out = tmp_path / "fail"
    code = main(["run", "--scenario", "supersolution-obstacle", "--nx", "16", "--nt", "16", "--out", str(out)])
    s = _summary(out)
    assert code == 1 and s["pass"] is False
    assert "sweep_final_threshold" in s["failed"]
    assert (out / "sweep.csv").read_text().splitlines()[0] == "eps,dist_lp,dist_grad_lp,energy"


def test_exception_still_writes_summary(tmp_path):
    out = tmp_path / "err"
    code = main(["run", "--scenario", "counterexample", "--nx", "16", "--nt", "15", "--out", str(out)])
    s = _summary(out)
    assert code == 1 and s["pass"] is False
    assert "completed" in s["failed"] and "even nt" in s["error"]


def test_outputs_bit_identical(tmp_path):
    runs = []
    for j in range(2):
        out = tmp_path / f"r{j}"
        main(["run", "--scenario", "ordered-obstacles", "--nx", "24", "--nt", "24", "--seed", "5", "--out", str(out)])
        runs.append(out)
    for name in ("pair0_lower.csv", "pair0_upper.csv", "pair0_lower.json"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()


@pytest.mark.skipif(shutil.which("obstacle-lab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["obstacle-lab", "run", "--scenario", "unknown"], capture_output=True, text=True)
    assert res.returncode == 2 and "barenblatt" in res.stderr
    res = subprocess.run(["obstacle-lab", "run", "--scenario", "barenblatt", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stdout + res.stderr
    assert _summary(tmp_path)["metrics"]["ratio"] >= 1.7
