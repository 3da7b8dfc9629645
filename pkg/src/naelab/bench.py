"""Pipeline commands: ensembles, training, evaluation, SLS benchmarks, fits, figure data.

Every command writes JSON with sorted keys or CSV in a fixed column order,
so reruns with the same seed and inputs give byte-identical files. The only
non-reproducible fields (timestamp, code version) live under ``"meta"``.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .complete import brute_force_count
from .generate import (
    DEFAULT_MAX_ATTEMPTS,
    EnsembleSpec,
    generate_ensemble_with_attempts,
    load_ensemble,
    nae_threshold,
    save_ensemble,
)
from .metrics import (
    UnsatisfiableInstanceError,
    crossover_depth,
    fit_exponential,
    fit_power_law,
    median_running_time,
    random_scaling_exponent,
    random_scaling_exponent_bits,
    relative_error,
    sample_running_time,
    sample_running_time_literal,
)
from .qaoa.simulate import QaoaParams, run_circuit_costs, stack_costs, success_probability
from .qaoa.train import DEFAULT_EPOCHS, DEFAULT_LR, INIT_BETA, INIT_GAMMA, train_params
from .rng import derive_seed, named_rng
from .sls import (
    DEFAULT_GRID_MAX_FLIPS,
    SlsConfig,
    algorithm_code,
    flips_or_cap,
    grid_search,
    run_sls,
    ALGORITHMS,
    ALIASES,
)

SCHEMA_VERSION = 1
DEFAULT_RESTARTS = 9
DEFAULT_GAVE_UP_THRESHOLD = 0.1
MIN_FIT_POINTS = 3
FIT_COLUMNS = ("k", "P", "C_hat", "C_tilde", "rel_err", "baseline")
FIGURE_COLUMNS = ("x", "y", "series")
EVAL_BATCH = 32


class ValidationError(ValueError):
    """Bad user input; maps to exit code 2."""


def meta() -> dict:
    return {
        "code_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def without_meta(record: dict) -> dict:
    return {k: v for k, v in record.items() if k != "meta"}


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"missing file {path}")
    return json.loads(path.read_text())


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, columns, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# gen


def resolve_density(k: int, r) -> float:
    if isinstance(r, str):
        if r.strip().lower() == "auto":
            return nae_threshold(k)
        try:
            r = float(r)
        except ValueError:
            raise ValidationError(f"density must be a number or 'auto', got {r!r}") from None
    return float(r)


def cmd_gen(out_dir, k: int, n: int, r, count: int, seed: int, threads: int = 1,
            max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> dict:
    """Generate and persist a satisfiable ensemble; returns the manifest."""
    density = resolve_density(k, r)
    try:
        spec = EnsembleSpec(n=n, k=k, r=density, count=count, seed=derive_seed(seed, "gen", k, n))
    except ValueError as e:
        raise ValidationError(str(e)) from None
    pairs = generate_ensemble_with_attempts(spec, max_attempts, threads)
    formulas = [f for f, _ in pairs]
    attempts = [a for _, a in pairs]
    return save_ensemble(out_dir, spec, formulas, attempts, extra={"root_seed": int(seed)})


def load_checked(directory, require_satisfiable: bool = True):
    directory = Path(directory)
    if not (directory / "manifest.json").exists():
        raise ValidationError(f"{directory} is not an ensemble directory")
    manifest, formulas = load_ensemble(directory)
    if not formulas:
        raise ValidationError(f"ensemble {directory} is empty")
    if require_satisfiable:
        bad = [e["file"] for e in manifest["instances"] if not e.get("verified_satisfiable")]
        if bad:
            raise ValidationError(f"ensemble has instances not verified satisfiable: {bad[:5]}")
    return manifest, formulas


# ---------------------------------------------------------------------------
# train / eval


def params_to_record(params: QaoaParams) -> dict:
    return {"P": params.depth, "beta": list(params.beta), "gamma": list(params.gamma)}


def params_from_record(rec: dict) -> QaoaParams:
    try:
        params = QaoaParams(rec["beta"], rec["gamma"])
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"malformed params file: {e}") from None
    if "P" in rec and rec["P"] != params.depth:
        raise ValidationError("params file depth does not match its angle lists")
    return params


def cmd_train(ensemble_dir, depth: int, epochs: int = DEFAULT_EPOCHS, lr: float = DEFAULT_LR,
              seed: int = 0) -> dict:
    if depth < 1:
        raise ValidationError("depth P must be at least 1")
    if epochs < 0:
        raise ValidationError("epochs must be non-negative")
    if lr <= 0:
        raise ValidationError("learning rate must be positive")
    manifest, formulas = load_checked(ensemble_dir)
    result = train_params(formulas, depth, epochs, lr)
    spec = manifest["spec"]
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "params",
        "k": spec["k"],
        "n": spec["n"],
        **params_to_record(result.params),
        "trainset_hash": manifest["hash"],
        "trace": [float(v) for v in result.trace],
        "epochs": epochs,
        "learning_rate": lr,
        "init": {"beta": INIT_BETA, "gamma": INIT_GAMMA},
        "seed": int(seed),
        "meta": meta(),
    }


def zero_angle_params(depth: int = 1) -> dict:
    return {"kind": "params", **params_to_record(QaoaParams.constant(depth, 0.0, 0.0))}


def _success_probabilities(formulas, params: QaoaParams):
    probs, states, tables = [], [], []
    for start in range(0, len(formulas), EVAL_BATCH):
        costs = stack_costs(formulas[start:start + EVAL_BATCH])
        psi = run_circuit_costs(costs, params)
        probs.extend(float(p) for p in np.atleast_1d(success_probability(psi, costs)))
        states.append(psi)
        tables.append(costs)
    return probs, states, tables


def cmd_eval(ensemble_dir, params_rec: dict, seed: int = 0, sampling: str = "geometric") -> dict:
    """Success probability and one running-time sample per instance.

    ``sampling="geometric"`` draws the running time from Geometric(p_succ);
    ``"literal"`` measures the output state until a solution appears.
    """
    if sampling not in ("geometric", "literal"):
        raise ValidationError(f"unknown sampling mode {sampling!r}")
    params = params_from_record(params_rec)
    manifest, formulas = load_checked(ensemble_dir)
    spec = manifest["spec"]
    for key in ("n", "k"):
        if params_rec.get(key) is not None and params_rec[key] != spec[key]:
            raise ValidationError(f"params trained for {key}={params_rec[key]}, ensemble has {key}={spec[key]}")
    probs, states, tables = _success_probabilities(formulas, params)
    instances = []
    for i, p in enumerate(probs):
        rng = named_rng(seed, "eval", spec["n"], i)
        try:
            if sampling == "geometric":
                rt = sample_running_time(p, rng)
            else:
                b, j = divmod(i, EVAL_BATCH)
                rt = sample_running_time_literal(states[b][j], tables[b][j], rng)
        except UnsatisfiableInstanceError as e:
            raise ValidationError(f"instance {i}: {e}") from None
        instances.append({"index": i, "p_succ": p, "running_time": int(rt)})
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "qaoa",
        "k": spec["k"],
        "n": spec["n"],
        "r": spec["r"],
        **params_to_record(params),
        "params_trainset_hash": params_rec.get("trainset_hash"),
        "ensemble_hash": manifest["hash"],
        "sampling": sampling,
        "seed": int(seed),
        "instances": instances,
        "aggregates": qaoa_aggregates(instances),
        "meta": meta(),
    }


def qaoa_aggregates(instances) -> dict:
    mean_p = float(np.mean([x["p_succ"] for x in instances]))
    return {
        "count": len(instances),
        "mean_p_succ": mean_p,
        "inverse_mean_p_succ": 1.0 / mean_p if mean_p > 0 else None,
        "median_running_time": median_running_time(x["running_time"] for x in instances),
    }


def zero_angle_reference(ensemble_dir) -> float:
    """Mean fraction of satisfying assignments, the zero-angle success probability."""
    _, formulas = load_checked(ensemble_dir)
    return float(np.mean([brute_force_count(f) / 2.0**f.n for f in formulas]))


# ---------------------------------------------------------------------------
# bench-sls


def canonical_algorithm(name: str) -> str:
    key = name.lower()
    key = ALIASES.get(key, key)
    if key not in ALGORITHMS:
        raise ValidationError(f"unknown algorithm {name!r}")
    algorithm_code(key)
    return key


def sls_config_record(cfg: SlsConfig) -> dict:
    return {"noise": cfg.noise, "w1": cfg.w1, "w2": cfg.w2, "max_flips": cfg.max_flips}


def cmd_bench_sls(ensemble_dir, algorithm: str, config: SlsConfig | None = None, tune_dir=None,
                  restarts: int = DEFAULT_RESTARTS, seed: int = 0, threads: int = 1,
                  gave_up_threshold: float = DEFAULT_GAVE_UP_THRESHOLD,
                  tune_max_flips: int = DEFAULT_GRID_MAX_FLIPS) -> dict:
    """Flip counts over ``restarts`` independent runs per instance.

    With ``tune_dir`` the config comes from a grid search on that ensemble.
    Runs that give up count as ``max_flips``.
    """
    algorithm = canonical_algorithm(algorithm)
    if restarts < 1:
        raise ValidationError("restarts must be at least 1")
    manifest, formulas = load_checked(ensemble_dir)
    spec = manifest["spec"]
    tuning = None
    if tune_dir is not None:
        tmanifest, trainset = load_checked(tune_dir)
        tune_seed = derive_seed(seed, "tune")
        g = grid_search(trainset, algorithm, tune_max_flips, tune_seed, threads)
        config = g.config
        tuning = {"trainset_hash": tmanifest["hash"], "median_flips": g.median_flips,
                  "evaluated": g.evaluated, "seed": tune_seed}
    elif config is None:
        config = SlsConfig()

    def one(i):
        runs = [run_sls(formulas[i], algorithm, config, named_rng(seed, "sls", spec["n"], i, j))
                for j in range(restarts)]
        flips = [flips_or_cap(o, config.max_flips) for o in runs]
        return {
            "index": i,
            "flips": flips,
            "median_flips": float(statistics.median(flips)),
            "gave_up": sum(not o.solved for o in runs),
        }

    instances = _map(one, range(len(formulas)), threads)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "sls",
        "k": spec["k"],
        "n": spec["n"],
        "r": spec["r"],
        "algorithm": algorithm,
        "config": sls_config_record(config),
        "tuning": tuning,
        "restarts": restarts,
        "ensemble_hash": manifest["hash"],
        "seed": int(seed),
        "instances": instances,
        "aggregates": sls_aggregates(instances, restarts, gave_up_threshold),
        "meta": meta(),
    }


def sls_aggregates(instances, restarts, gave_up_threshold=DEFAULT_GAVE_UP_THRESHOLD) -> dict:
    total = len(instances) * restarts
    frac = sum(x["gave_up"] for x in instances) / total
    return {
        "count": len(instances),
        "median_flips": float(statistics.median(x["median_flips"] for x in instances)),
        "gave_up_fraction": frac,
        "gave_up_flagged": frac > gave_up_threshold,
    }


# ---------------------------------------------------------------------------
# fit


def _check_single_ensemble(records):
    seen = {}
    for rec in records:
        h = rec["ensemble_hash"]
        if seen.setdefault((rec["k"], rec["n"]), h) != h:
            raise ValidationError(
                f"records for k={rec['k']}, n={rec['n']} come from different ensembles; refusing to mix"
            )


def _exponential(points, what):
    if len({n for n, _ in points}) < MIN_FIT_POINTS:
        raise ValidationError(f"{what}: need at least {MIN_FIT_POINTS} distinct n, got {sorted(n for n, _ in points)}")
    return fit_exponential(sorted(points))


def cmd_fit(records) -> tuple[dict, list[dict]]:
    """Scaling exponents per (k, P), power laws over P and crossover depths.

    Returns the fit record and the CSV rows. ``baseline`` is the SLS running
    time exponent for the same k when SLS records are present.
    """
    records = list(records)
    if not records:
        raise ValidationError("no records to fit")
    _check_single_ensemble(records)
    qaoa = defaultdict(list)
    sls = defaultdict(list)
    densities = {}
    for rec in records:
        if rec["kind"] == "qaoa":
            qaoa[(rec["k"], rec["P"])].append(rec)
            densities.setdefault(rec["k"], rec["r"])
        elif rec["kind"] == "sls":
            sls[(rec["k"], rec["algorithm"])].append(rec)
        else:
            raise ValidationError(f"cannot fit a record of kind {rec['kind']!r}")

    sls_fits = {}
    for (k, algo), recs in sorted(sls.items()):
        pts = [(r["n"], r["aggregates"]["median_flips"]) for r in recs]
        f = _exponential(pts, f"SLS k={k} {algo}")
        sls_fits.setdefault(k, {})[algo] = {"C_tilde": f.runtime_exponent, "d": f.d, "residual": f.residual}

    rows, per_k = [], defaultdict(dict)
    for (k, P), recs in sorted(qaoa.items()):
        rt = _exponential([(r["n"], r["aggregates"]["median_running_time"]) for r in recs], f"k={k} P={P}")
        ps = _exponential([(r["n"], r["aggregates"]["mean_p_succ"]) for r in recs], f"k={k} P={P}")
        c_hat, c_tilde = ps.success_exponent, rt.runtime_exponent
        try:
            rel = relative_error(c_hat, c_tilde)
        except ZeroDivisionError:
            rel = None
        baselines = sls_fits.get(k, {})
        baseline = min((v["C_tilde"] for v in baselines.values()), default=None)
        rows.append({"k": k, "P": P, "C_hat": c_hat, "C_tilde": c_tilde, "rel_err": rel, "baseline": baseline})
        per_k[k][P] = {"C_hat": c_hat, "C_tilde": c_tilde, "d_running_time": rt.d,
                       "d_p_succ": ps.d, "n": sorted(r["n"] for r in recs)}

    summary = {}
    for k, by_p in sorted(per_k.items()):
        c_tilde = {P: v["C_tilde"] for P, v in by_p.items()}
        entry = {"depths": {str(P): v for P, v in sorted(by_p.items())}}
        if len(c_tilde) >= 2 and all(c > 0 for c in c_tilde.values()):
            pl = fit_power_law(sorted(c_tilde.items()))
            entry["power_law"] = {"a": pl.a, "b": pl.b, "residual": pl.residual}
        r = densities[k]
        entry["random_exponent"] = random_scaling_exponent(k, r)
        entry["random_exponent_bits"] = random_scaling_exponent_bits(k, r)
        entry["crossover_vs_random"] = crossover_depth(c_tilde, entry["random_exponent_bits"])
        if k in sls_fits:
            entry["sls"] = sls_fits[k]
            entry["crossover_vs_sls"] = {
                algo: crossover_depth(c_tilde, v["C_tilde"]) for algo, v in sorted(sls_fits[k].items())
            }
        summary[str(k)] = entry
    for k in sorted(set(sls_fits) - set(per_k)):
        summary[str(k)] = {"sls": sls_fits[k]}

    record = {
        "schema_version": SCHEMA_VERSION,
        "kind": "fit",
        "inputs": sorted({r["ensemble_hash"] for r in records}),
        "rows": rows,
        "fits": summary,
        "meta": meta(),
    }
    return record, rows


def fit_rows_from_csv(path) -> list[dict]:
    out = []
    for row in read_csv(path):
        out.append({
            "k": int(row["k"]),
            "P": int(row["P"]),
            "C_hat": float(row["C_hat"]),
            "C_tilde": float(row["C_tilde"]),
            "rel_err": float(row["rel_err"]) if row["rel_err"] else None,
            "baseline": float(row["baseline"]) if row["baseline"] else None,
        })
    return out


# ---------------------------------------------------------------------------
# report


def cmd_report(records, out_dir) -> dict[str, Path]:
    """Per-figure CSV files (x, y, series) and a plain-text summary."""
    records = list(records)
    if not records:
        raise ValidationError("no records to report")
    out_dir = Path(out_dir)
    psucc, mrt, bench = [], [], []
    lines = []
    for rec in sorted(records, key=_report_key):
        if rec["kind"] == "qaoa":
            agg = rec["aggregates"]
            series = f"k={rec['k']} P={rec['P']}"
            psucc.append({"x": rec["n"], "y": agg["mean_p_succ"], "series": series})
            mrt.append({"x": rec["n"], "y": agg["median_running_time"], "series": series})
            mrt.append({"x": rec["n"], "y": agg["inverse_mean_p_succ"], "series": series + " 1/p_succ"})
            bench.append({"x": rec["n"], "y": agg["median_running_time"], "series": f"k={rec['k']} QAOA P={rec['P']}"})
            lines.append(f"{rec['k']:>3} {rec['n']:>4} {'QAOA P=' + str(rec['P']):<16} "
                         f"{agg['mean_p_succ']:>12.6g} {agg['median_running_time']:>12.6g}")
        elif rec["kind"] == "sls":
            agg = rec["aggregates"]
            bench.append({"x": rec["n"], "y": agg["median_flips"], "series": f"k={rec['k']} {rec['algorithm']}"})
            flag = " gave-up" if agg["gave_up_flagged"] else ""
            lines.append(f"{rec['k']:>3} {rec['n']:>4} {rec['algorithm']:<16} {'':>12} "
                         f"{agg['median_flips']:>12.6g}{flag}")
        else:
            raise ValidationError(f"cannot report a record of kind {rec['kind']!r}")
    paths = {
        "psucc": write_csv(out_dir / "psucc.csv", FIGURE_COLUMNS, psucc),
        "mrt": write_csv(out_dir / "mrt.csv", FIGURE_COLUMNS, mrt),
        "benchmark": write_csv(out_dir / "benchmark.csv", FIGURE_COLUMNS, bench),
    }
    try:
        fit, _ = cmd_fit(records)
    except ValidationError:
        fit = None
    if fit is not None:
        scaling = []
        for k, entry in fit["fits"].items():
            for P, v in entry.get("depths", {}).items():
                scaling.append({"x": int(P), "y": v["C_tilde"], "series": f"k={k}"})
        paths["scaling"] = write_csv(out_dir / "scaling.csv", FIGURE_COLUMNS, scaling)
    header = f"{'k':>3} {'n':>4} {'solver':<16} {'mean p_succ':>12} {'median time':>12}"
    summary = out_dir / "summary.txt"
    summary.write_text("\n".join([header, "-" * len(header), *lines]) + "\n")
    paths["summary"] = summary
    return paths


def _report_key(rec):
    return (rec["k"], rec["kind"], rec.get("P") or 0, rec.get("algorithm") or "", rec["n"])


def load_records(paths) -> list[dict]:
    out = []
    for p in paths:
        p = Path(p)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        for f in files:
            rec = read_json(f)
            if rec.get("kind") in ("qaoa", "sls"):
                out.append(rec)
    if not out:
        raise ValidationError("no evaluation or SLS records found")
    return out
