import json
import math

import numpy as np
import pytest

from naelab import bench
from naelab.cli import main
from naelab.generate import ensemble_hash, nae_threshold
from naelab.metrics import median_running_time, random_scaling_exponent_bits


def run(*argv):
    return main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    """Three k=3 ensembles (n = 6, 7, 8) with trained P=1 params."""
    root = tmp_path_factory.mktemp("small")
    for n in (6, 7, 8):
        assert run("--seed", 3, "gen", "--k", 3, "--n", n, "--count", 12, "--out", root / f"ens{n}") == 0
        assert run("--seed", 3, "train", "--ensemble", root / f"ens{n}", "--P", 1, "--epochs", 10,
                   "--out", root / "params", "--name", f"n{n}.json") == 0
    return root


def test_gen_resolves_auto_density(tmp_path):
    assert run("gen", "--k", 3, "--n", 8, "--r", "auto", "--count", 50, "--seed", 1, "--out", tmp_path / "a") == 0
    m = load(tmp_path / "a" / "manifest.json")
    assert len(m["instances"]) == 50
    assert all(e["verified_satisfiable"] for e in m["instances"])
    assert m["spec"]["r"] == nae_threshold(3)
    assert m["root_seed"] == 1
    run("gen", "--k", 3, "--n", 8, "--count", 50, "--seed", 1, "--out", tmp_path / "b")
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()


def test_gen_rejects_k_above_n(tmp_path, capsys):
    assert run("gen", "--k", 3, "--n", 2, "--out", tmp_path) == 2
    assert "exceeds" in capsys.readouterr().err


def test_gen_budget_exit_code(tmp_path):
    assert run("gen", "--k", 3, "--n", 10, "--r", 8, "--count", 1, "--max-attempts", 5, "--out", tmp_path) == 3


def test_bad_flag_value_is_validation_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        run("gen", "--k", 3, "--n", 5, "--count", 0, "--out", tmp_path)
    assert e.value.code == 2


def test_train_record(tmp_path):
    run("--seed", 5, "gen", "--k", 3, "--n", 8, "--count", 20, "--out", tmp_path / "e")
    assert run("--seed", 5, "train", "--ensemble", tmp_path / "e", "--P", 1, "--out", tmp_path) == 0
    rec = load(tmp_path / "params_P1.json")
    assert len(rec["trace"]) == 101
    assert rec["P"] == 1 and len(rec["beta"]) == len(rec["gamma"]) == 1
    assert rec["trainset_hash"] == load(tmp_path / "e" / "manifest.json")["hash"]
    assert rec["trace"][-1] > rec["trace"][0]
    run("--seed", 5, "train", "--ensemble", tmp_path / "e", "--P", 1, "--out", tmp_path, "--name", "again.json")
    assert bench.without_meta(load(tmp_path / "again.json")) == bench.without_meta(rec)


def test_train_rejects_zero_depth(small):
    assert run("train", "--ensemble", small / "ens6", "--P", 0, "--out", small / "x") == 2


def test_train_needs_an_ensemble(tmp_path):
    assert run("train", "--ensemble", tmp_path / "missing", "--P", 1, "--out", tmp_path) == 2


def test_eval_zero_angle_matches_brute_force(small, tmp_path):
    assert run("eval", "--ensemble", small / "ens8", "--zero-angle", 2, "--out", tmp_path) == 0
    rec = load(tmp_path / "eval_k3_n8_P2.json")
    ref = bench.zero_angle_reference(small / "ens8")
    assert abs(rec["aggregates"]["mean_p_succ"] - ref) < 1e-12


def test_eval_aggregates_recompute(small, tmp_path):
    run("--seed", 9, "eval", "--ensemble", small / "ens7", "--params", small / "params" / "n7.json", "--out", tmp_path)
    rec = load(tmp_path / "eval_k3_n7_P1.json")
    inst = rec["instances"]
    assert rec["ensemble_hash"] == load(small / "ens7" / "manifest.json")["hash"]
    assert rec["aggregates"] == bench.qaoa_aggregates(inst)
    assert rec["aggregates"]["mean_p_succ"] == pytest.approx(np.mean([x["p_succ"] for x in inst]))
    assert rec["aggregates"]["median_running_time"] == median_running_time(x["running_time"] for x in inst)


def test_eval_literal_sampling(small, tmp_path):
    args = ("eval", "--ensemble", small / "ens6", "--params", small / "params" / "n6.json",
            "--sampling", "literal", "--out", tmp_path)
    assert run("--seed", 2, *args) == 0
    first = load(tmp_path / "eval_k3_n6_P1.json")
    assert first["sampling"] == "literal"
    assert all(x["running_time"] >= 1 for x in first["instances"])
    run("--seed", 2, *args)
    assert bench.without_meta(load(tmp_path / "eval_k3_n6_P1.json")) == bench.without_meta(first)


def test_eval_rejects_n_mismatch(small, tmp_path):
    assert run("eval", "--ensemble", small / "ens6", "--params", small / "params" / "n8.json", "--out", tmp_path) == 2


def test_eval_rejects_empty_ensemble(tmp_path):
    d = tmp_path / "empty"
    d.mkdir()
    (d / "manifest.json").write_text(json.dumps({"hash": ensemble_hash([]), "instances": [], "spec": {}}))
    assert run("eval", "--ensemble", d, "--zero-angle", 1, "--out", tmp_path) == 2


def test_bench_sls_empty_formulas(tmp_path):
    run("gen", "--k", 3, "--n", 6, "--r", 0, "--count", 5, "--out", tmp_path / "e")
    assert run("bench-sls", "--ensemble", tmp_path / "e", "--algorithm", "lm", "--out", tmp_path) == 0
    rec = load(tmp_path / "sls_walksatlm_k3_n6.json")
    assert all(f == 0 for x in rec["instances"] for f in x["flips"])
    assert rec["aggregates"]["median_flips"] == 0


def test_bench_sls_is_deterministic_and_flags_gave_up(small, tmp_path):
    args = ("--seed", 4, "bench-sls", "--ensemble", small / "ens8", "--algorithm", "m2b2",
            "--noise", 0.0, "--max-flips", 3, "--restarts", 3, "--out", tmp_path)
    run(*args, "--name", "a.json")
    run(*args, "--name", "b.json")
    a, b = load(tmp_path / "a.json"), load(tmp_path / "b.json")
    assert bench.without_meta(a) == bench.without_meta(b)
    assert all(len(x["flips"]) == 3 for x in a["instances"])
    assert a["aggregates"] == bench.sls_aggregates(a["instances"], 3)
    assert a["aggregates"]["gave_up_flagged"] == (a["aggregates"]["gave_up_fraction"] > 0.1)


def test_bench_sls_tuning(small, tmp_path):
    assert run("bench-sls", "--ensemble", small / "ens7", "--tune", small / "ens6", "--algorithm", "walksat",
               "--restarts", 1, "--max-flips", 500, "--out", tmp_path) == 0
    rec = load(tmp_path / "sls_walksat_k3_n7.json")
    assert rec["tuning"]["trainset_hash"] == load(small / "ens6" / "manifest.json")["hash"]
    assert rec["tuning"]["evaluated"] >= 1


@pytest.fixture(scope="module")
def records(small, tmp_path_factory):
    out = tmp_path_factory.mktemp("records")
    for n in (6, 7, 8):
        run("--seed", 1, "eval", "--ensemble", small / f"ens{n}", "--params", small / "params" / f"n{n}.json",
            "--out", out)
        run("--seed", 1, "eval", "--ensemble", small / f"ens{n}", "--zero-angle", 2, "--out", out)
        run("--seed", 1, "bench-sls", "--ensemble", small / f"ens{n}", "--algorithm", "m2b2", "--out", out)
    return out


def test_fit_csv_schema_roundtrip(records, tmp_path):
    assert run("fit", records, "--out", tmp_path) == 0
    lines = (tmp_path / "fit.csv").read_text().splitlines()
    assert lines[0] == "k,P,C_hat,C_tilde,rel_err,baseline"
    rows = bench.fit_rows_from_csv(tmp_path / "fit.csv")
    fit = load(tmp_path / "fit.json")
    assert rows == fit["rows"]
    assert {r["P"] for r in rows} == {1, 2}
    assert all(r["baseline"] is not None for r in rows)
    for r in rows:
        assert r["rel_err"] == pytest.approx(abs((r["C_hat"] - r["C_tilde"]) / r["C_hat"]))
    entry = fit["fits"]["3"]
    assert "power_law" in entry and "crossover_vs_sls" in entry
    assert entry["random_exponent_bits"] == pytest.approx(random_scaling_exponent_bits(3, nae_threshold(3)))


def test_fit_needs_three_sizes(records, tmp_path):
    two = [p for p in records.glob("eval_*P1.json") if "_n8_" not in p.name]
    assert run("fit", *two, "--out", tmp_path) == 2


def test_fit_refuses_mixed_ensembles(records, tmp_path):
    run("--seed", 99, "gen", "--k", 3, "--n", 6, "--count", 5, "--out", tmp_path / "other")
    run("eval", "--ensemble", tmp_path / "other", "--zero-angle", 1, "--out", tmp_path / "rec")
    assert run("fit", records, tmp_path / "rec", "--out", tmp_path) == 2


def test_report_bundle(records, tmp_path):
    assert run("report", records, "--out", tmp_path / "r1") == 0
    run("report", records, "--out", tmp_path / "r2")
    for name in ("psucc.csv", "mrt.csv", "benchmark.csv", "scaling.csv", "summary.txt"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    psucc = bench.read_csv(tmp_path / "r1" / "psucc.csv")
    assert {r["series"] for r in psucc} == {"k=3 P=1", "k=3 P=2"}
    mrt = bench.read_csv(tmp_path / "r1" / "mrt.csv")
    recips = [r for r in mrt if r["series"].endswith("1/p_succ")]
    assert {r["series"] for r in recips} == {"k=3 P=1 1/p_succ", "k=3 P=2 1/p_succ"}
    rec = load(records / "eval_k3_n6_P1.json")
    ref = next(r for r in recips if r["series"] == "k=3 P=1 1/p_succ" and r["x"] == "6")
    assert float(ref["y"]) == pytest.approx(1 / rec["aggregates"]["mean_p_succ"])


def test_report_needs_records(tmp_path):
    assert run("report", tmp_path, "--out", tmp_path) == 2


def test_verify_exit_codes(tmp_path, capsys):
    sat = tmp_path / "sat.cnf"
    sat.write_text("p naecnf 3 1\n1 2 -3 0\n")
    assert run("verify", sat) == 10
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "SAT" and out[1].startswith("v ") and out[1].endswith(" 0")
    unsat = tmp_path / "unsat.cnf"
    unsat.write_text("p naecnf 2 3\n1 2 0\n-1 2 0\n1 -2 0\n")
    assert run("verify", unsat) == 20
    assert capsys.readouterr().out.strip() == "UNSAT"
    plain = tmp_path / "plain.cnf"
    plain.write_text("p cnf 1 2\n1 0\n-1 0\n")
    assert run("verify", plain) == 20


def test_verify_reports_parse_errors(tmp_path):
    bad = tmp_path / "bad.cnf"
    bad.write_text("p cnf 2 1\n3 0\n")
    assert run("verify", bad) == 2
    assert run("verify", tmp_path / "none.cnf") == 2


def test_sls_json_output(tmp_path, capsys):
    f = tmp_path / "e1.cnf"
    f.write_text("p naecnf 3 1\n1 2 -3 0\n")
    assert run("--seed", 3, "sls", f, "--algorithm", "walksatm2b2", "--noise", 0.2, "--w1", 0.3) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "Solved"
    assert out["flips"] >= 0 and len(out["witness"]) == 3
    unsat = tmp_path / "u.cnf"
    unsat.write_text("p naecnf 2 3\n1 2 0\n-1 2 0\n1 -2 0\n")
    run("sls", unsat, "--max-flips", 10)
    out = json.loads(capsys.readouterr().out)
    assert out == {"status": "GaveUp", "flips": 10, "witness": None}


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[global]\nseed = 8\n\n[gen]\nk = 3\nn = 7\ncount = 4\n")
    assert run("--config", cfg, "gen", "--out", tmp_path / "a") == 0
    assert run("gen", "--k", 3, "--n", 7, "--count", 4, "--seed", 8, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()
    assert run("gen", "--config", cfg, "--count", 2, "--out", tmp_path / "c") == 0
    assert len(load(tmp_path / "c" / "manifest.json")["instances"]) == 2


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[gen]\ncolour = blue\n")
    assert run("--config", cfg, "gen", "--k", 3, "--n", 5, "--out", tmp_path) == 2
    assert run("--config", tmp_path / "missing.ini", "gen", "--k", 3, "--n", 5, "--out", tmp_path) == 2


def test_zero_angle_running_time_exponent(tmp_path):
    # natural-log rate 2^(1-k) r expressed in bits, compared to the base-2 fit
    recs = tmp_path / "rec"
    for n in (8, 10, 12, 14):
        run("--seed", 42, "gen", "--k", 3, "--n", n, "--count", 100, "--out", tmp_path / f"e{n}")
        run("--seed", 42, "eval", "--ensemble", tmp_path / f"e{n}", "--zero-angle", 1, "--out", recs)
    assert run("fit", recs, "--out", tmp_path) == 0
    (row,) = bench.fit_rows_from_csv(tmp_path / "fit.csv")
    target = random_scaling_exponent_bits(3, nae_threshold(3))
    print(f"zero-angle C_tilde {row['C_tilde']:.4f} (bits), C_hat {row['C_hat']:.4f}, target {target:.4f}")
    assert abs(row["C_tilde"] - target) < 0.08
    assert math.isfinite(row["C_hat"])
