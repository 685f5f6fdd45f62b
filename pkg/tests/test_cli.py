import csv

import pytest

from thermokac.cli import main


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([argv[0], "--out", str(out), "--threads", "1", *argv[1:]])
    return code, out


def test_simulate_outputs(tmp_path):
    code, out = run(tmp_path, "simulate", "--replicas", "3", "--set", "n_particles=16", "--set", "snapshots=true")
    assert code == 0
    traj = rows(out / "trajectory.csv")
    assert len(traj) == 3 * 11 and set(traj[0]) == {"replica", "time", "J", "U", "m2", "m4", "m6"}
    assert len(list((out / "snapshots").iterdir())) == 33
    manifest = (out / "manifest.txt").read_text()
    assert "subcommand=simulate" in manifest and "n_particles=16" in manifest


def test_couple_outputs(tmp_path):
    code, out = run(tmp_path, "couple", "--replicas", "2", "--set", "n_particles=16")
    assert code == 0
    assert rows(out / "coupled.csv")[0]["distance_N"] == "0.0"
    assert len(rows(out / "sup_distance.csv")) == 2


def test_sweeps_and_limit(tmp_path):
    code, out = run(tmp_path, "chaos-sweep", "--replicas", "30", "--set", "sweep_n=8,16,32", "--set", "sample_times=0,1")
    assert code == 0
    assert len(rows(out / "chaos.csv")) == 6
    assert (out / "fit.csv").exists() and (out / "scaling.csv").exists()
    code, out = run(tmp_path, "coupling-sweep", "--replicas", "4", "--set", "sweep_n=8,16,32", name="c2")
    assert code == 0
    assert {r["metric"] for r in rows(out / "scaling.csv")} == {"median_sup_distance", "mean_sup_distance", "mean_w1_final"}
    code, out = run(tmp_path, "limit-check", "--replicas", "4", "--set", "n_particles=32", name="c3")
    assert code == 0
    assert rows(out / "limit.csv")[0]["zeta"] == "0.0"


def test_bounds_prints(tmp_path, capsys):
    assert main(["bounds"]) == 0
    text = capsys.readouterr().out
    assert "delta_t=0.2320667" in text and "n_of_t=6" in text
    code, out = run(tmp_path, "bounds")
    assert code == 0 and rows(out / "bounds.csv")[0]["n_of_t"] == "6"


def test_exit_codes(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path / "x"), "--set", "n_particles=1"]) == 2
    assert "n_particles" in capsys.readouterr().err
    assert main(["simulate", "--set", "nope=3", "--out", str(tmp_path / "y")]) == 2
    assert main(["chaos-sweep", "--out", str(tmp_path / "z"), "--replicas", "5"]) == 2
    assert "replicas" in capsys.readouterr().err
    assert main(["simulate"]) == 2  # needs --out
    code, out = run(tmp_path, "simulate", "--set", "n_particles=8")
    assert code == 0
    assert main(["simulate", "--out", str(out), "--set", "n_particles=8"]) == 2
    assert main(["simulate", "--out", str(out), "--set", "n_particles=8", "--force"]) == 0


def test_replica_failure_exit_code(tmp_path, capsys):
    code = main([
        "simulate", "--out", str(tmp_path / "f"), "--threads", "1",
        "--set", "process=interacting", "--set", "project_to_sphere=false",
        "--set", "initial_distribution=two_point:0:0:0.5",
    ])
    assert code == 3
    assert "replay keys" in capsys.readouterr().err
    assert not (tmp_path / "f").exists()


@pytest.mark.parametrize("sub", ["simulate", "couple", "limit-check"])
def test_byte_identical_across_threads(tmp_path, sub):
    a = tmp_path / "a"
    b = tmp_path / "b"
    base = [sub, "--seed", "9", "--replicas", "5", "--set", "n_particles=24"]
    assert main(base + ["--out", str(a), "--threads", "1"]) == 0
    assert main(base + ["--out", str(b), "--threads", "3"]) == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()
