import json
import math

import numpy as np
import pytest

from bdbridge.cli import (
    _dump_json,
    load_observations,
    load_sample_paths,
    load_scan_csv,
    load_shigellosis,
    load_sim_path,
    load_surface_csv,
    main,
    shigellosis_path,
)
from bdbridge.models import LBDIParams
from bdbridge.reference import lbdi_transition

SHIGELLA_S = [198, 198, 198, 198, 198, 197, 197, 197, 197, 196, 195, 190, 189,
              186, 186, 184, 181, 177, 170, 166, 163, 161, 160, 160, 160, 160,
              158, 157]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_embedded_dataset_matches_record():
    obs = load_shigellosis()
    assert len(obs) == 28
    assert obs.susceptibles.tolist() == SHIGELLA_S
    assert obs.times.tolist() == list(map(float, range(28)))


def test_load_observations_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(Exception):
        load_observations(empty)
    bad = tmp_path / "bad.csv"
    bad.write_text("time,S\n0,10\n1,12\n")
    with pytest.raises(Exception) as exc:
        load_observations(bad)
    assert "row 2" in str(exc.value)
    frac = tmp_path / "frac.csv"
    frac.write_text("time,S\n0,10.5\n")
    with pytest.raises(Exception):
        load_observations(frac)


def test_single_row_gives_zero_loglik(tmp_path, capsys):
    one = tmp_path / "one.csv"
    one.write_text("time,S\n0,50\n")
    code, out, _ = run_cli(capsys, "filter", "--data", str(one),
                           "--params", "beta=0.001,gamma=0.3", "--m", "10")
    assert code == 0
    payload = json.loads(out)
    assert payload["loglik"] == 0.0 and payload["per_step"] == []


def test_count_command(capsys):
    code, out, _ = run_cli(capsys, "count", "--i", "1", "--j", "1", "--B", "2",
                           "--l", "0", "--u", "3")
    assert code == 0
    payload = json.loads(out)
    assert payload["count"] == 1
    assert payload["feasible"] is True
    assert payload["log_density"] == pytest.approx(math.log(24.0))


def test_count_infeasible(capsys):
    code, out, _ = run_cli(capsys, "count", "--i", "5", "--j", "8", "--B", "2")
    payload = json.loads(out)
    assert code == 0 and payload["count"] == 0 and payload["log_density"] is None


def test_transprob_closed_matches_oracle(capsys):
    code, out, _ = run_cli(capsys, "transprob", "--model", "lbdi",
                           "--params", "lambda=0.8,mu=0.6,nu=1.2",
                           "--i", "5", "--j", "5", "--t", "1", "--method", "closed")
    assert code == 0
    payload = json.loads(out)
    truth = lbdi_transition(LBDIParams(0.8, 0.6, 1.2), 5, 5, 1.0)
    assert payload["value"] == pytest.approx(truth, rel=1e-15)


def test_transprob_igbs_near_closed(capsys):
    code, out, _ = run_cli(capsys, "transprob", "--model", "lbdi",
                           "--params", "lambda=0.8,mu=0.6,nu=1.2",
                           "--i", "5", "--j", "3", "--t", "1", "--n", "20000",
                           "--seed", "4")
    assert code == 0
    payload = json.loads(out)
    truth = lbdi_transition(LBDIParams(0.8, 0.6, 1.2), 5, 3, 1.0)
    assert abs(payload["value"] - truth) <= 4 * payload["std_error"]
    assert payload["bset"][0] == 0


def test_transprob_straight_method(capsys):
    code, out, _ = run_cli(capsys, "transprob", "--model", "sis",
                           "--params", "n0=30,beta=0.003,gamma=1",
                           "--i", "5", "--j", "4", "--t", "1", "--n", "50000",
                           "--method", "straight", "--seed", "3")
    assert code == 0
    payload = json.loads(out)
    assert payload["method"] == "straight"
    assert 0.0 < payload["value"] < 1.0
    assert payload["std_error"] > 0


def test_byte_identical_reruns(capsys):
    args = ("transprob", "--model", "sis", "--params", "n0=30,beta=0.003,gamma=1",
            "--i", "5", "--j", "4", "--t", "1", "--n", "40000", "--seed", "9")
    _, out1, _ = run_cli(capsys, *args)
    _, out2, _ = run_cli(capsys, *args)
    assert out1 == out2
    _, out4, _ = run_cli(capsys, *args, "--threads", "4")
    assert json.loads(out1)["value"] == json.loads(out4)["value"]


def test_sample_csv_round_trip(capsys):
    code, out, _ = run_cli(capsys, "sample", "--i", "0", "--j", "0", "--B", "1",
                           "--l", "-1", "--u", "2", "--t", "1", "--n", "3",
                           "--seed", "2")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "replicate_id,k,tau_k,omega_k"
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 3 * 4
    for rep in range(3):
        states = [int(r[3]) for r in rows if int(r[0]) == rep]
        taus = [float(r[2]) for r in rows if int(r[0]) == rep]
        assert states == [0, 1, 0, 0]
        assert taus[0] == 0.0 and taus[-1] == 1.0
        assert 0 < taus[1] < taus[2] < 1.0


def test_simulate_csv(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "simulate", "--model", "sis",
                           "--params", "n0=30,beta=0.003,gamma=1",
                           "--y0", "5", "--t", "2", "--seed", "6")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "time,state"
    states = [int(line.split(",")[1]) for line in lines[1:]]
    times = [float(line.split(",")[0]) for line in lines[1:]]
    assert states[0] == 5 and times[0] == 0.0 and times[-1] == 2.0
    assert all(abs(a - b) == 1 for a, b in zip(states[:-2], states[1:-1]))


def test_usage_and_domain_exit_codes(capsys):
    code, _, err = run_cli(capsys, "transprob", "--model", "nosuch",
                           "--params", "x=1", "--i", "1", "--j", "1", "--t", "1")
    assert code == 1
    code, _, err = run_cli(capsys, "count", "--i", "0", "--j", "0", "--B", "2",
                           "--l", "0", "--u", "3")
    assert code == 2 and "error" in err
    code, _, err = run_cli(capsys, "transprob", "--model", "sis",
                           "--params", "n0=30,beta=0.003,gamma=1",
                           "--i", "5", "--j", "4", "--t", "1", "--method", "closed")
    assert code == 1


def test_scan_failure_csv(capsys, tmp_path):
    data = tmp_path / "obs.csv"
    data.write_text("time,S\n0,60\n1,60\n2,59\n3,58\n")
    code, out, _ = run_cli(capsys, "scan-failure", "--data", str(data),
                           "--beta-range", "0.001:0.004:2",
                           "--gamma-range", "0.2:0.5:2",
                           "--particles", "2000", "--seed", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "beta,gamma,survival_min,failed_0p1,failed_0p01"
    assert len(lines) == 5
    for line in lines[1:]:
        beta, gamma, smin, f1, f2 = line.split(",")
        assert 0.0 <= float(smin) <= 1.0
        assert int(f2) <= int(f1)


def test_fit_small_grid(capsys, tmp_path):
    surface = tmp_path / "surf.csv"
    code, out, _ = run_cli(capsys, "fit", "--data", shigellosis_path(),
                           "--beta-range", "0.001:0.003:3",
                           "--gamma-range", "0.15:0.4:3",
                           "--m", "400", "--replications", "1",
                           "--refinements", "1", "--seed", "8",
                           "--surface-out", str(surface))
    assert code == 0
    payload = json.loads(out)
    assert 0.001 <= payload["beta_hat"] <= 0.003
    assert payload["ci_beta"][0] <= payload["beta_hat"] <= payload["ci_beta"][1]
    lines = surface.read_text().strip().splitlines()
    assert lines[0] == "beta,gamma,loglik,loglik_sd"
    assert len(lines) == 10


def test_emitted_csvs_round_trip(capsys, tmp_path):
    # Every CSV the CLI writes must be re-ingestible by its loader.
    sample_out = tmp_path / "paths.csv"
    run_cli(capsys, "sample", "--i", "2", "--j", "4", "--B", "3", "--t", "1.5",
            "--n", "4", "--seed", "5", "--output", str(sample_out))
    paths = load_sample_paths(sample_out)
    assert len(paths) == 4
    for p in paths:
        p.validate()
        assert p.states[0] == 2 and p.states[-1] == 4 and p.up_jumps == 3

    sim_out = tmp_path / "sim.csv"
    run_cli(capsys, "simulate", "--model", "lbdi",
            "--params", "lambda=0.8,mu=0.6,nu=1.2", "--y0", "5", "--t", "2",
            "--seed", "6", "--output", str(sim_out))
    sim = load_sim_path(sim_out)
    assert sim.times[0] == 0.0 and sim.states[0] == 5 and sim.horizon == 2.0

    obs_file = tmp_path / "obs.csv"
    obs_file.write_text("time,S\n0,60\n1,59\n2,59\n")
    scan_out = tmp_path / "scan.csv"
    run_cli(capsys, "scan-failure", "--data", str(obs_file),
            "--beta-range", "0.001:0.003:2", "--gamma-range", "0.2:0.4:2",
            "--particles", "1000", "--seed", "7", "--output", str(scan_out))
    scan = load_scan_csv(scan_out)
    assert scan["beta"].shape == (4,)
    assert np.all((scan["survival_min"] >= 0) & (scan["survival_min"] <= 1))

    surf_out = tmp_path / "surf.csv"
    run_cli(capsys, "fit", "--data", str(obs_file),
            "--beta-range", "0.001:0.003:2", "--gamma-range", "0.2:0.4:2",
            "--m", "200", "--replications", "1", "--refinements", "1",
            "--seed", "8", "--surface-out", str(surf_out))
    surf = load_surface_csv(surf_out)
    assert surf["loglik"].shape == (4,)
    assert np.all(np.isfinite(surf["loglik"]))


def test_json_formatting():
    text = _dump_json({"a": 1.0, "b": float("-inf"), "c": [1, 2.5], "d": None,
                       "e": True, "f": "x\"y"})
    assert text == '{"a": 1, "b": -Infinity, "c": [1, 2.5], "d": null, "e": true, "f": "x\\"y"}'
    assert json.loads(text)["b"] == -math.inf
    # 17 significant digits survive a json round trip exactly
    val = 0.12345678901234567
    assert json.loads(_dump_json({"v": val}))["v"] == val


def test_seed_env_override(capsys, monkeypatch):
    monkeypatch.setenv("BDBRIDGE_SEED", "12345")
    code, out, _ = run_cli(capsys, "transprob", "--model", "sis",
                           "--params", "n0=30,beta=0.003,gamma=1",
                           "--i", "5", "--j", "4", "--t", "1", "--n", "1000")
    assert json.loads(out)["seed"] == 12345
