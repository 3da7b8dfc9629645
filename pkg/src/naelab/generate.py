"""Random k-NAE-SAT instances and satisfiable ensembles.

An instance ``CNF(n, k, r)`` has ``m ~ Poisson(r n)`` clauses; each clause is
a uniformly random k-subset of the variables (clauses drawn independently,
so repeats are allowed) with every literal negated with probability 1/2.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .complete import is_nae_satisfiable
from .formula import Clause, CnfFormula, Literal, Mode, read_dimacs, serialize_dimacs, write_dimacs
from .rng import child_rng

DEFAULT_MAX_ATTEMPTS = 10_000
POISSON_INVERSION_MAX = 30.0


class RejectionBudgetExceeded(RuntimeError):
    pass


def nae_threshold(k: int) -> float:
    """Asymptotic NAE satisfiability threshold with the o_k(1) term dropped."""
    if k < 2:
        raise ValueError("k must be >= 2")
    ln2 = math.log(2.0)
    return (2.0 ** (k - 1) - 0.5 - 1.0 / (4.0 * ln2)) * ln2


def algorithmic_ratio(k: int) -> float:
    if k < 2:
        raise ValueError("k must be >= 2")
    return 2.0 ** (k - 1) * math.log(k) / k


def sample_poisson(lam: float, rng: np.random.Generator) -> int:
    """Inversion by sequential search for small means, numpy's PTRS rejection sampler above."""
    if lam < 0:
        raise ValueError("Poisson mean must be non-negative")
    if lam == 0:
        return 0
    if lam > POISSON_INVERSION_MAX:
        return int(rng.poisson(lam))
    u = rng.random()
    k = 0
    p = math.exp(-lam)
    cdf = p
    while u > cdf:
        k += 1
        p *= lam / k
        cdf += p
        if p == 0.0:  # u landed in the float-rounding gap of the tail
            break
    return k


def sample_k_subset(n: int, k: int, rng: np.random.Generator) -> list[int]:
    """Partial Fisher-Yates shuffle; returns the first k positions in draw order."""
    pool = list(range(n))
    for i in range(k):
        j = i + int(rng.integers(0, n - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def sample_instance(n: int, k: int, r: float, rng: np.random.Generator) -> CnfFormula:
    if k > n:
        raise ValueError(f"clause width k={k} exceeds variable count n={n}")
    if k < 1:
        raise ValueError("k must be positive")
    if r < 0:
        raise ValueError("clause density must be non-negative")
    m = sample_poisson(r * n, rng)
    clauses = []
    for _ in range(m):
        variables = sample_k_subset(n, k, rng)
        negs = rng.random(k) < 0.5
        clauses.append(Clause(tuple(Literal(v, bool(s)) for v, s in zip(variables, negs))))
    return CnfFormula(n, tuple(clauses), Mode.NAE)


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    k: int
    r: float
    count: int
    seed: int
    require_satisfiable: bool = True

    def __post_init__(self):
        if self.k > self.n:
            raise ValueError(f"clause width k={self.k} exceeds variable count n={self.n}")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.r < 0:
            raise ValueError("clause density must be non-negative")
        if self.count < 1:
            raise ValueError("count must be at least 1")


def _one_instance(spec: EnsembleSpec, index: int, max_attempts: int) -> tuple[CnfFormula, int]:
    rng = child_rng(spec.seed, index)
    for attempt in range(1, max_attempts + 1):
        f = sample_instance(spec.n, spec.k, spec.r, rng)
        if not spec.require_satisfiable or is_nae_satisfiable(f):
            return f, attempt
    raise RejectionBudgetExceeded(
        f"instance {index}: no satisfiable draw in {max_attempts} attempts "
        f"(n={spec.n}, k={spec.k}, r={spec.r}); density is likely far above threshold"
    )


def generate_satisfiable_ensemble(
    spec: EnsembleSpec, max_attempts: int = DEFAULT_MAX_ATTEMPTS, threads: int = 1
) -> list[CnfFormula]:
    """``spec.count`` instances, each regenerated whole until the complete solver accepts it."""
    return [f for f, _ in generate_ensemble_with_attempts(spec, max_attempts, threads)]


def generate_ensemble_with_attempts(spec: EnsembleSpec, max_attempts=DEFAULT_MAX_ATTEMPTS, threads=1):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda i: _one_instance(spec, i, max_attempts), range(spec.count)))
    return [_one_instance(spec, i, max_attempts) for i in range(spec.count)]


# ---------------------------------------------------------------------------
# persistence: a directory of DIMACS files plus manifest.json

MANIFEST = "manifest.json"


def ensemble_hash(formulas) -> str:
    h = hashlib.sha256()
    for f in formulas:
        h.update(serialize_dimacs(f).encode())
        h.update(b"\n\x00")
    return h.hexdigest()


def save_ensemble(directory, spec: EnsembleSpec, formulas, attempts=None, verified=None, extra=None) -> dict:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, f in enumerate(formulas):
        name = f"instance_{i:05d}.cnf"
        write_dimacs(f, d / name)
        entry = {
            "file": name,
            "m": f.m,
            "sha256": hashlib.sha256(serialize_dimacs(f).encode()).hexdigest(),
            "verified_satisfiable": bool(verified[i]) if verified is not None else spec.require_satisfiable,
        }
        if attempts is not None:
            entry["attempts"] = int(attempts[i])
        entries.append(entry)
    manifest = {
        "schema_version": 1,
        "spec": asdict(spec),
        "seed": spec.seed,
        "hash": ensemble_hash(formulas),
        "instances": entries,
    }
    if extra:
        manifest.update(extra)
    with open(d / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_ensemble(directory) -> tuple[dict, list[CnfFormula]]:
    d = Path(directory)
    path = d / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST} in {os.fspath(d)}")
    with open(path) as fh:
        manifest = json.load(fh)
    formulas = [read_dimacs(d / e["file"]) for e in manifest["instances"]]
    if ensemble_hash(formulas) != manifest["hash"]:
        raise ValueError(f"ensemble in {os.fspath(d)} does not match its manifest hash")
    return manifest, formulas
