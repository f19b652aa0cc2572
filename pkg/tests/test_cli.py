import json

import numpy as np
import pytest

from rcrp import cli, model


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "inst.json"
    assert run("gen", "--I", 4, "--J", 60, "--P", 3, "--seed", 3, "--out", p) == 0
    return p


def test_gen_table_one_counts(tmp_path, capsys):
    assert run("gen", "--I", 10, "--J", 500, "--P", 10, "--seed", 1, "--out", tmp_path / "a.json") == 0
    assert "variables=10000 constraints=5511" in capsys.readouterr().out
    assert run("gen", "--I", 10, "--J", 500, "--P", 10, "--seed", 1, "--out", tmp_path / "b.json") == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_solve_writes_result(small_file, tmp_path):
    out = tmp_path / "r.json"
    assert run("solve", small_file, "--max-iters", 20, "--out", out) == 0
    res = model.load_result(out)
    assert res["sign_convention"] == "min"
    assert res["reward"] == pytest.approx(-res["objective"])
    assert len(res["assignment"]) == 4 and len(res["coverage_fraction"]) == 3


def test_solve_trivially_coverable_reports_zero_gap(tmp_path):
    m, J = 20, 6
    inst = model.random_instance((2, J, 1, m), 0)
    d = np.zeros((m, J, 1), dtype=bool)
    d[:, 2, 0] = True
    from rcrp.coverage import VisibilityTensor

    inst = model.ReconInstance(**{**vars(inst), "visibility": VisibilityTensor.from_dense(d)})
    model.save_instance(inst, tmp_path / "i.json")
    assert run("solve", tmp_path / "i.json", "--epsilon", 100, "--out", tmp_path / "r.json") == 0
    assert model.load_result(tmp_path / "r.json")["gap"] == 0.0


def test_solve_exact_adds_oracle(tmp_path):
    inst = model.random_instance((2, 6, 2, 30), 1, max_threshold=2)
    model.save_instance(inst, tmp_path / "i.json")
    assert run("solve", tmp_path / "i.json", "--exact", "--out", tmp_path / "r.json") == 0
    res = json.loads((tmp_path / "r.json").read_text())
    assert res["oracle"]["contained"] is True


def test_exit_codes(small_file, tmp_path, capsys):
    assert run("solve", small_file, "--exact", "--out", tmp_path / "r.json") == cli.EXIT_GUARD
    assert run("solve", tmp_path / "missing.json", "--out", tmp_path / "r.json") == cli.EXIT_IO
    inst = model.random_instance((2, 5, 1, 10), 0)
    inst = model.ReconInstance(**{**vars(inst), "cost": inst.cost + 1.0})
    model.save_instance(inst, tmp_path / "c.json")
    assert run("solve", tmp_path / "c.json", "--epsilon", 0.5, "--out", tmp_path / "r.json") == cli.EXIT_INFEASIBLE


def test_sweep_rows(small_file, tmp_path):
    out = tmp_path / "p.csv"
    assert run("sweep", small_file, "--steps", 10, "--max-iters", 10, "--threads", 2, "--out", out) == 0
    pts = model.read_pareto_csv(out)
    assert len(pts) == 10 and all(p.status == "ok" for p in pts)
    assert all(p.realized_cost <= p.epsilon + 1e-9 for p in pts)


def test_log_csv_trace(small_file, tmp_path, capfd):
    assert run("solve", small_file, "--max-iters", 4, "--gap-tol", 0, "--log", "csv",
               "--out", tmp_path / "r.json") == 0
    err = capfd.readouterr().err.strip().splitlines()
    assert err[0].startswith("iter,lb,best_lb,ub")


def test_verify_pristine(small_file, capsys):
    assert run("verify", small_file) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4


def test_verify_detects_corrupted_visibility(small_file, tmp_path, capsys):
    d = json.loads(small_file.read_text())
    prof = d["visibility"]["profiles"]
    # flip one bit of the stored reference profile
    flat = prof[0][0]
    k = flat.index("1")
    prof[0][0] = flat[:k] + "0" + flat[k + 1:]
    (tmp_path / "bad.json").write_text(json.dumps(d))
    assert run("verify", tmp_path / "bad.json") == cli.EXIT_VERIFY
    assert "circulant identity" in [l.split("  ")[0].strip() for l in capsys.readouterr().out.splitlines() if "FAIL" in l]


def test_verify_detects_negative_reward(small_file, tmp_path, capsys):
    d = json.loads(small_file.read_text())
    d["rewards"][0] = -1.0
    (tmp_path / "neg.json").write_text(json.dumps(d))
    assert run("verify", tmp_path / "neg.json") == cli.EXIT_VERIFY
    out = capsys.readouterr().out
    assert "schema" in out and "FAIL" in out
