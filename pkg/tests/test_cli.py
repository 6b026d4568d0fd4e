import json
import subprocess
import sys

import pytest

from scatternet.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, EXIT_TIMEOUT, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_topo_gen_stdout_and_file(capsys, tmp_path):
    code, out, _ = run(capsys, "--seed", "3", "topo", "gen", "--n", "4")
    assert code == EXIT_OK
    assert out.splitlines()[0] == "id,x,y,battery,has_wifi"
    assert len(out.splitlines()) == 5
    code, out, _ = run(capsys, "topo", "gen", "--n", "4", "--seed", "3", "--out", str(tmp_path))
    assert (tmp_path / "topology.csv").read_text().splitlines()[0] == "id,x,y,battery,has_wifi"


def test_heuristic_then_delay(capsys, tmp_path):
    code, out, err = run(capsys, "cluster", "heur", "--n", "30", "--format", "json", "--trace")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["feasible"] is True
    assert json.loads(err)[0]["level"] == 1
    path = tmp_path / "h.json"
    path.write_text(out)
    code, out, _ = run(capsys, "delay", "--hierarchy", str(path), "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out)["td2_us"] % 1250 == 0


def test_heuristic_from_topology_file(capsys, tmp_path):
    run(capsys, "topo", "gen", "--n", "10", "--out", str(tmp_path))
    code, out, _ = run(capsys, "cluster", "heur", "--topo", str(tmp_path / "topology.csv"))
    assert code == EXIT_OK
    assert out.splitlines()[0] == "node,role,l1_master,l2_master"
    assert len(out.splitlines()) == 11


def test_exact_exit_codes(capsys):
    assert run(capsys, "cluster", "exact", "--n", "10", "--set", "area_width=6", "--set", "area_height=6")[0] == EXIT_OK
    code, out, _ = run(capsys, "cluster", "exact", "--n", "5", "--set", "battery_law=const:0.1", "--format", "json")
    assert code == EXIT_INFEASIBLE
    assert json.loads(out)["status"] == "infeasible"
    code, _, _ = run(capsys, "cluster", "exact", "--n", "100", "--budget", "0.3", "--set", "area_width=7", "--set", "area_height=7")
    assert code == EXIT_TIMEOUT


def test_exact_single_level_highs(capsys):
    code, out, _ = run(capsys, "cluster", "exact", "--n", "9", "--level", "single", "--backend", "highs", "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out)["level2_cost"] == 0.0


def test_config_errors(capsys, tmp_path):
    assert run(capsys, "--set", "repeats=0", "fer")[0] == EXIT_CONFIG
    assert run(capsys, "fer", "--config", str(tmp_path / "missing"))[0] == EXIT_CONFIG
    code, _, err = run(capsys, "cluster", "heur", "--topo", str(tmp_path / "missing.csv"))
    assert code == EXIT_CONFIG and "error" in err
    assert run(capsys, "--set", "battery_law=zipf", "topo", "gen", "--n", "3")[0] == EXIT_CONFIG


def test_print_config(capsys):
    code, out, _ = run(capsys, "--print-config", "--set", "repeats=3")
    assert code == EXIT_OK
    assert "repeats = 3" in out
    assert "n_values = 100,200,300,400,500,600,700,800" in out


def test_fer_modes(capsys):
    code, out, _ = run(capsys, "fer", "--mode", "reference")
    assert out.splitlines()[2] == "2,0.0068,0.0068,0.0000"
    code, out, _ = run(capsys, "--set", "p_values=1,2", "--set", "fer_runs=2", "--set", "fer_slots=500", "fer", "--mode", "monte_carlo")
    assert code == EXIT_OK and len(out.splitlines()) == 3


def test_metrics(capsys):
    code, out, _ = run(capsys, "--set", "n_values=25,50", "metrics")
    rows = out.splitlines()
    assert rows[0] == "n,approach,te_joules,g_bits,ef"
    assert rows[1].endswith(",67.1113")
    assert len(rows) == 7


def test_scenario_run_and_bench(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("scenario = compare_methods\nn_values = 10\nrepeats = 2\narea_width = 7\narea_height = 7\n")
    code, out, _ = run(capsys, "scenario", "run", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == EXIT_OK
    assert (tmp_path / "o" / "energy_comparison.csv").exists()
    code, _, _ = run(capsys, "bench", "--config", str(cfg), "--out", str(tmp_path / "b"))
    assert code == EXIT_OK
    assert (tmp_path / "b" / "runtime.csv").exists()


def test_console_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "scatternet.cli", "--seed", "1", "delay", "--n", "16"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert res.stdout.startswith("level,head,tts_us")


def test_no_verb_is_config_error(capsys):
    assert run(capsys)[0] == EXIT_CONFIG
