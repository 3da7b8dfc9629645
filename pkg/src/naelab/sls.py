"""Focused random walk solvers: WalkSAT, WalkSATlm and WalkSATm2b2.

State is kept incrementally: a true-literal count per clause, per-variable
occurrence lists, and an indexable set of unsatisfied clauses. A flip costs
O(occurrences of the variable); scoring a variable costs the same.

The compiled kernels below are the single implementation of flips and
scores; :class:`SlsState` wraps them for inspection and tests.
"""

from __future__ import annotations

import enum
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numba
import numpy as np

from .formula import CnfFormula, Mode, cost
from .rng import make_rng

WALKSAT, WALKSATLM, WALKSATM2B2 = 0, 1, 2
ALGORITHMS = {"walksat": WALKSAT, "walksatlm": WALKSATLM, "walksatm2b2": WALKSATM2B2}
ALIASES = {"lm": "walksatlm", "m2b2": "walksatm2b2", "ws": "walksat"}

NOISE_GRID = tuple(i / 20 for i in range(21))
W1_GRID = tuple(i / 10 for i in range(11))
DEFAULT_GRID_MAX_FLIPS = 100_000

_TIE_EPS = 1e-9


def algorithm_code(name: str) -> int:
    key = ALIASES.get(name.lower(), name.lower())
    if key not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
    return ALGORITHMS[key]


@dataclass(frozen=True)
class SlsConfig:
    noise: float = 0.5
    max_flips: int = DEFAULT_GRID_MAX_FLIPS
    w1: float = 0.5
    w2: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        if self.max_flips < 1:
            raise ValueError("max_flips must be positive")
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("weights must be non-negative")


class Status(str, enum.Enum):
    SOLVED = "Solved"
    GAVE_UP = "GaveUp"


@dataclass
class SlsOutcome:
    status: Status
    witness: Optional[np.ndarray]
    flips_used: int

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLVED


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _unsat(tc, klen, nae):
    if nae:
        return tc == 0 or tc == klen
    return tc == 0


@numba.njit(cache=True, nogil=True)
def _unsat_add(c, ulist, upos, nu):
    upos[c] = nu[0]
    ulist[nu[0]] = c
    nu[0] += 1


@numba.njit(cache=True, nogil=True)
def _unsat_remove(c, ulist, upos, nu):
    p = upos[c]
    last = ulist[nu[0] - 1]
    ulist[p] = last
    upos[last] = p
    upos[c] = -1
    nu[0] -= 1


@numba.njit(cache=True, nogil=True)
def _rebuild(x, lit_ptr, lit_var, lit_neg, nae, tc, ulist, upos, nu):
    m = tc.shape[0]
    nu[0] = 0
    for c in range(m):
        t = 0
        for q in range(lit_ptr[c], lit_ptr[c + 1]):
            if x[lit_var[q]] != lit_neg[q]:
                t += 1
        tc[c] = t
        upos[c] = -1
        if _unsat(t, lit_ptr[c + 1] - lit_ptr[c], nae):
            _unsat_add(c, ulist, upos, nu)


@numba.njit(cache=True, nogil=True)
def _flip(v, x, lit_ptr, occ_ptr, occ_clause, occ_neg, nae, tc, ulist, upos, nu):
    xv = x[v]
    for q in range(occ_ptr[v], occ_ptr[v + 1]):
        c = occ_clause[q]
        klen = lit_ptr[c + 1] - lit_ptr[c]
        before = _unsat(tc[c], klen, nae)
        if xv != occ_neg[q]:
            tc[c] -= 1
        else:
            tc[c] += 1
        after = _unsat(tc[c], klen, nae)
        if before and not after:
            _unsat_remove(c, ulist, upos, nu)
        elif after and not before:
            _unsat_add(c, ulist, upos, nu)
    x[v] = 1 - xv


@numba.njit(cache=True, nogil=True)
def _level_counts(v, x, lit_ptr, occ_ptr, occ_clause, occ_neg, tc, kmax, make, brk):
    """make[t], brk[t] for t = 1..kmax: tau-level make and break of variable v."""
    for t in range(kmax + 1):
        make[t] = 0
        brk[t] = 0
    xv = x[v]
    for q in range(occ_ptr[v], occ_ptr[v + 1]):
        c = occ_clause[q]
        t = tc[c]
        if xv != occ_neg[q]:
            brk[t] += 1
        else:
            make[t + 1] += 1


@numba.njit(cache=True, nogil=True)
def _break_make(v, x, lit_ptr, occ_ptr, occ_clause, occ_neg, nae, tc):
    """(break, make) under the formula's semantics, counted from clause state transitions."""
    xv = x[v]
    b = 0
    mk = 0
    for q in range(occ_ptr[v], occ_ptr[v + 1]):
        c = occ_clause[q]
        klen = lit_ptr[c + 1] - lit_ptr[c]
        t = tc[c]
        t2 = t - 1 if xv != occ_neg[q] else t + 1
        before = _unsat(t, klen, nae)
        after = _unsat(t2, klen, nae)
        if after and not before:
            b += 1
        elif before and not after:
            mk += 1
    return b, mk


@numba.njit(cache=True, nogil=True)
def _tiebreak_score(algo, v, x, lit_ptr, occ_ptr, occ_clause, occ_neg, tc, w1, w2):
    # lmake = w1*make_1 + w2*make_2
    # m2b2  = w1*(make_1 + break_k) + w2*(make_2 + break_{k-1}), k = clause length
    xv = x[v]
    s1 = 0
    s2 = 0
    for q in range(occ_ptr[v], occ_ptr[v + 1]):
        c = occ_clause[q]
        t = tc[c]
        klen = lit_ptr[c + 1] - lit_ptr[c]
        if xv != occ_neg[q]:
            if algo == 2:
                if t == klen:
                    s1 += 1
                if t == klen - 1:
                    s2 += 1
        else:
            if t == 0:
                s1 += 1
            elif t == 1:
                s2 += 1
    return w1 * s1 + w2 * s2


@numba.njit(cache=True, nogil=True)
def _walk(
    algo, nae, noise, w1, w2, max_flips, rng,
    x, lit_ptr, lit_var, lit_neg, occ_ptr, occ_clause, occ_neg,
    tc, ulist, upos, nu,
):
    n = x.shape[0]
    for v in range(n):
        x[v] = rng.integers(0, 2)
    _rebuild(x, lit_ptr, lit_var, lit_neg, nae, tc, ulist, upos, nu)
    kmax = 0
    for c in range(tc.shape[0]):
        kmax = max(kmax, lit_ptr[c + 1] - lit_ptr[c])
    cand = np.empty(max(kmax, 1), dtype=np.int64)
    brks = np.empty(max(kmax, 1), dtype=np.int64)
    flips = 0
    while flips < max_flips:
        if nu[0] == 0:
            return flips, True
        c = ulist[rng.integers(0, nu[0])]
        start = lit_ptr[c]
        klen = lit_ptr[c + 1] - start
        chosen = -1
        for j in range(klen):
            b, _ = _break_make(lit_var[start + j], x, lit_ptr, occ_ptr, occ_clause, occ_neg, nae, tc)
            brks[j] = b
            if b == 0 and chosen < 0:
                chosen = lit_var[start + j]
        if chosen < 0:
            if rng.random() < noise:
                chosen = lit_var[start + rng.integers(0, klen)]
            else:
                best = brks[0]
                for j in range(1, klen):
                    if brks[j] < best:
                        best = brks[j]
                nc = 0
                for j in range(klen):
                    if brks[j] == best:
                        cand[nc] = lit_var[start + j]
                        nc += 1
                if algo != 0 and nc > 1:
                    top = -1.0
                    nb = 0
                    for j in range(nc):
                        s = _tiebreak_score(algo, cand[j], x, lit_ptr, occ_ptr, occ_clause, occ_neg, tc, w1, w2)
                        if nb == 0 or s > top + 1e-9:
                            top = s
                            cand[0] = cand[j]
                            nb = 1
                        elif s > top - 1e-9:
                            cand[nb] = cand[j]
                            nb += 1
                    nc = nb
                chosen = cand[rng.integers(0, nc)] if nc > 1 else cand[0]
        _flip(chosen, x, lit_ptr, occ_ptr, occ_clause, occ_neg, nae, tc, ulist, upos, nu)
        flips += 1
    return flips, nu[0] == 0


# ---------------------------------------------------------------------------
# Python-side state


class _Arrays:
    __slots__ = ("n", "nae", "lit_ptr", "lit_var", "lit_neg", "occ_ptr", "occ_clause", "occ_neg", "kmax")

    def __init__(self, formula: CnfFormula):
        self.n = formula.n
        self.nae = formula.mode is Mode.NAE
        self.lit_ptr, self.lit_var, self.lit_neg = formula.csr
        order = np.argsort(self.lit_var, kind="stable")
        clause_of = np.repeat(np.arange(formula.m, dtype=np.int64), np.diff(self.lit_ptr))
        self.occ_clause = clause_of[order]
        self.occ_neg = self.lit_neg[order]
        self.occ_ptr = np.zeros(formula.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.lit_var, minlength=formula.n), out=self.occ_ptr[1:])
        self.kmax = int(np.diff(self.lit_ptr).max()) if formula.m else 0


class SlsState:
    """Assignment plus incremental clause bookkeeping."""

    def __init__(self, formula: CnfFormula, assignment):
        self.formula = formula
        self._a = _Arrays(formula)
        self.assignment = np.array(assignment, dtype=np.uint8).reshape(-1)
        if self.assignment.size != formula.n:
            raise ValueError("assignment length does not match formula")
        m = formula.m
        self.true_count = np.zeros(m, dtype=np.int64)
        self._ulist = np.zeros(max(m, 1), dtype=np.int64)
        self._upos = np.full(max(m, 1), -1, dtype=np.int64)
        self._nu = np.zeros(1, dtype=np.int64)
        self.flips = 0
        a = self._a
        _rebuild(self.assignment, a.lit_ptr, a.lit_var, a.lit_neg, a.nae,
                 self.true_count, self._ulist, self._upos, self._nu)

    @property
    def unsat(self) -> set[int]:
        return set(self._ulist[: self._nu[0]].tolist())

    def _check_var(self, v):
        if not 0 <= v < self._a.n:
            raise ValueError(f"unknown variable {v}")

    def flip(self, v: int) -> None:
        self._check_var(v)
        a = self._a
        _flip(v, self.assignment, a.lit_ptr, a.occ_ptr, a.occ_clause, a.occ_neg, a.nae,
              self.true_count, self._ulist, self._upos, self._nu)
        self.flips += 1

    def _levels(self, v):
        self._check_var(v)
        a = self._a
        size = max(a.kmax, 1) + 2
        make = np.zeros(size, dtype=np.int64)
        brk = np.zeros(size, dtype=np.int64)
        _level_counts(v, self.assignment, a.lit_ptr, a.occ_ptr, a.occ_clause, a.occ_neg,
                      self.true_count, size - 1, make, brk)
        return make, brk

    def make_tau(self, v: int, tau: int) -> int:
        make, _ = self._levels(v)
        if tau < 1:
            raise ValueError("tau must be >= 1")
        return int(make[tau]) if tau < make.size else 0

    def break_tau(self, v: int, tau: int) -> int:
        _, brk = self._levels(v)
        if tau < 1:
            raise ValueError("tau must be >= 1")
        return int(brk[tau]) if tau < brk.size else 0

    def break_make(self, v: int) -> tuple[int, int]:
        """(break, make) under the formula's own semantics."""
        self._check_var(v)
        a = self._a
        b, mk = _break_make(v, self.assignment, a.lit_ptr, a.occ_ptr, a.occ_clause, a.occ_neg,
                            a.nae, self.true_count)
        return int(b), int(mk)

    def tiebreak(self, v: int, algorithm: str, w1: float, w2: float) -> float:
        self._check_var(v)
        a = self._a
        return float(_tiebreak_score(algorithm_code(algorithm), v, self.assignment, a.lit_ptr,
                                     a.occ_ptr, a.occ_clause, a.occ_neg, self.true_count, w1, w2))


def _uniform_k(formula):
    if formula.m == 0:
        return None
    ks = {len(c) for c in formula.clauses}
    if len(ks) != 1:
        raise ValueError("tau-level identities need a fixed clause width")
    return ks.pop()


def make_tau(state: SlsState, v: int, tau: int) -> int:
    return state.make_tau(v, tau)


def break_tau(state: SlsState, v: int, tau: int) -> int:
    return state.break_tau(v, tau)


def make_nae(state: SlsState, v: int) -> int:
    k = _uniform_k(state.formula)
    return 0 if k is None else state.make_tau(v, 1) + state.break_tau(v, k)


def break_nae(state: SlsState, v: int) -> int:
    k = _uniform_k(state.formula)
    return 0 if k is None else state.break_tau(v, 1) + state.make_tau(v, k)


def lmake(state: SlsState, v: int, w1: float, w2: float) -> float:
    return w1 * state.make_tau(v, 1) + w2 * state.make_tau(v, 2)


def m2b2(state: SlsState, v: int, w1: float, w2: float) -> float:
    k = _uniform_k(state.formula)
    if k is None:
        return 0.0
    return (w1 * (state.make_tau(v, 1) + state.break_tau(v, k))
            + w2 * (state.make_tau(v, 2) + state.break_tau(v, k - 1)))


# ---------------------------------------------------------------------------
# solvers


def run_sls(formula: CnfFormula, algorithm: str, config: SlsConfig, rng=None) -> SlsOutcome:
    """One solver run; ``rng`` defaults to a generator seeded by ``config.seed``."""
    code = algorithm_code(algorithm)
    if rng is None:
        rng = make_rng(config.seed)
    if formula.m == 0:
        # nothing to do, but the initial random assignment is still drawn
        x = rng.integers(0, 2, size=formula.n).astype(np.uint8)
        return SlsOutcome(Status.SOLVED, x, 0)
    a = _Arrays(formula)
    m = formula.m
    x = np.zeros(formula.n, dtype=np.uint8)
    tc = np.zeros(m, dtype=np.int64)
    ulist = np.zeros(m, dtype=np.int64)
    upos = np.full(m, -1, dtype=np.int64)
    nu = np.zeros(1, dtype=np.int64)
    flips, solved = _walk(code, a.nae, float(config.noise), float(config.w1), float(config.w2),
                          int(config.max_flips), rng, x, a.lit_ptr, a.lit_var, a.lit_neg,
                          a.occ_ptr, a.occ_clause, a.occ_neg, tc, ulist, upos, nu)
    if solved:
        if cost(formula, x) != 0:
            raise AssertionError("solver reported a solution that does not verify")
        return SlsOutcome(Status.SOLVED, x, int(flips))
    return SlsOutcome(Status.GAVE_UP, None, int(flips))


def walksat(formula, config, rng=None):
    return run_sls(formula, "walksat", config, rng)


def walksatlm(formula, config, rng=None):
    return run_sls(formula, "walksatlm", config, rng)


def walksatm2b2(formula, config, rng=None):
    return run_sls(formula, "walksatm2b2", config, rng)


def flips_or_cap(outcome: SlsOutcome, max_flips: int) -> int:
    return outcome.flips_used if outcome.solved else max_flips


# ---------------------------------------------------------------------------
# hyperparameter search


def grid_configs(algorithm: str):
    """Configs in tie-break order: noise ascending, then w1 ascending."""
    uses_weights = algorithm_code(algorithm) != WALKSAT
    for noise in NOISE_GRID:
        if uses_weights:
            for w1 in W1_GRID:
                yield noise, w1, round(1.0 - w1, 10)
        else:
            yield noise, 0.0, 1.0


def _median(values):
    return float(statistics.median(values))


@dataclass
class GridResult:
    config: SlsConfig
    median_flips: float
    evaluated: int


def grid_search(
    trainset: Sequence[CnfFormula],
    algorithm: str,
    max_flips: int = DEFAULT_GRID_MAX_FLIPS,
    seed: int = 0,
    threads: int = 1,
) -> GridResult:
    """Config with the lowest median flip count over ``trainset``.

    Instance ``i`` is run with the same seed ``(seed, i)`` under every config.
    Configs that provably cannot beat the incumbent median are abandoned
    early and long runs are capped where the cap cannot change the median,
    so the selected config is the same as an exhaustive evaluation.
    """
    trainset = list(trainset)
    if not trainset:
        raise ValueError("grid search needs a non-empty trainset")
    t = len(trainset)
    need = t // 2 + 1  # this many values >= B force median >= B
    best = None
    best_med = float("inf")
    evaluated = 0

    def run_one(i, cfg):
        out = run_sls(trainset[i], algorithm, cfg, make_rng(seed, i))
        if out.solved:
            return out.flips_used
        # a capped run only tells us the true count exceeds the cap
        return max_flips if cfg.max_flips >= max_flips else cfg.max_flips + 1

    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for noise, w1, w2 in grid_configs(algorithm):
            evaluated += 1
            if best is None:
                cap = max_flips
            else:
                # runs longer than 2B sit above the central pair whenever median < B
                cap = int(min(max_flips, np.floor(2 * best_med)))
            cfg = SlsConfig(noise=noise, max_flips=max(cap, 1), w1=w1, w2=w2, seed=seed)
            values = []
            n_high = 0
            if pool is None:
                for i in range(t):
                    v = run_one(i, cfg)
                    values.append(v)
                    if v >= best_med:
                        n_high += 1
                        if n_high >= need:
                            break
            else:
                values = list(pool.map(lambda i: run_one(i, cfg), range(t)))
                n_high = sum(v >= best_med for v in values)
            if n_high >= need:
                continue
            med = _median(values)
            if med < best_med:
                best_med = med
                best = replace(cfg, max_flips=max_flips)
    finally:
        if pool is not None:
            pool.shutdown()
    return GridResult(best, best_med, evaluated)
