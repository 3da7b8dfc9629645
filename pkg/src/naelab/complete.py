"""Exact satisfiability checks used to verify ensembles.

NAE instances are decided by reducing to plain SAT (every clause together
with its literal-wise negation) and running a small DPLL solver. A
brute-force counter serves as the test oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .formula import Clause, CnfFormula, Mode, cost

BRUTE_FORCE_MAX_N = 24


class Status(str, enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"


@dataclass
class SolveResult:
    status: Status
    witness: Optional[np.ndarray] = None
    stats: dict = field(default_factory=lambda: {"decisions": 0, "propagations": 0})

    @property
    def satisfiable(self) -> bool:
        return self.status is Status.SAT


def nae_to_sat(formula: CnfFormula) -> CnfFormula:
    """x NAE-satisfies a clause iff x satisfies it and so does the flipped x."""
    if formula.mode is not Mode.NAE:
        raise ValueError("nae_to_sat expects an NAE-mode formula")
    out: list[Clause] = []
    for c in formula.clauses:
        out.append(c)
        out.append(Clause(tuple(-lit for lit in c)))
    return CnfFormula(formula.n, tuple(out), Mode.SAT)


class _Dpll:
    # Literals are signed 1-based ints; clauses are tuples of them.

    def __init__(self, n: int, clauses: list[tuple[int, ...]]):
        self.n = n
        self.clauses = clauses
        self.decisions = 0
        self.propagations = 0

    @staticmethod
    def _assign(clauses, lit):
        out = []
        for c in clauses:
            if lit in c:
                continue
            if -lit in c:
                c = tuple(l for l in c if l != -lit)
                if not c:
                    return None
            out.append(c)
        return out

    def _simplify(self, clauses, trail):
        """Unit propagation then pure-literal elimination, to a fixpoint."""
        while True:
            unit = next((c[0] for c in clauses if len(c) == 1), None)
            if unit is not None:
                self.propagations += 1
                trail.append(unit)
                clauses = self._assign(clauses, unit)
                if clauses is None:
                    return None
                continue
            seen = set()
            for c in clauses:
                seen.update(c)
            pure = sorted((l for l in seen if -l not in seen), key=lambda l: (abs(l), l < 0))
            if not pure:
                return clauses
            for lit in pure:
                trail.append(lit)
                clauses = self._assign(clauses, lit)

    @staticmethod
    def _branch_literal(clauses):
        shortest = min(len(c) for c in clauses)
        counts: dict[int, int] = {}
        for c in clauses:
            if len(c) == shortest:
                for l in c:
                    counts[l] = counts.get(l, 0) + 1
        # most occurrences, then lowest variable, positive polarity first
        return min(counts, key=lambda l: (-counts[l], abs(l), l < 0))

    def solve(self):
        # Iterative chronological backtracking over (clauses, trail, pending literal).
        stack = [(self.clauses, [], None)]
        while stack:
            clauses, trail, lit = stack.pop()
            trail = list(trail)
            if lit is not None:
                trail.append(lit)
                clauses = self._assign(clauses, lit)
                if clauses is None:
                    continue
            clauses = self._simplify(clauses, trail)
            if clauses is None:
                continue
            if not clauses:
                return trail
            self.decisions += 1
            b = self._branch_literal(clauses)
            stack.append((clauses, trail, -b))
            stack.append((clauses, trail, b))
        return None


def dpll_solve(formula: CnfFormula) -> SolveResult:
    if formula.mode is not Mode.SAT:
        raise ValueError("dpll_solve expects a SAT-mode formula; reduce NAE with nae_to_sat")
    clauses = [tuple(dict.fromkeys(c)) for c in formula.to_lists()]
    # tautologies are always satisfied
    clauses = [c for c in clauses if not any(-l in c for l in c)]
    solver = _Dpll(formula.n, clauses)
    trail = solver.solve()
    stats = {"decisions": solver.decisions, "propagations": solver.propagations}
    if trail is None:
        return SolveResult(Status.UNSAT, None, stats)
    witness = np.zeros(formula.n, dtype=np.uint8)
    for lit in trail:
        witness[abs(lit) - 1] = 1 if lit > 0 else 0
    if cost(formula, witness) != 0:
        raise AssertionError("DPLL produced an invalid witness")
    return SolveResult(Status.SAT, witness, stats)


def solve_nae(formula: CnfFormula) -> SolveResult:
    res = dpll_solve(nae_to_sat(formula))
    if res.witness is not None and cost(formula, res.witness) != 0:
        raise AssertionError("reduction witness fails the NAE formula")
    return res


def is_nae_satisfiable(formula: CnfFormula) -> bool:
    return solve_nae(formula.with_mode(Mode.NAE)).satisfiable


def brute_force_count(formula: CnfFormula, mode: Mode | str | None = None, chunk: int = 1 << 14) -> int:
    """Count satisfying assignments by enumerating all ``2**n`` of them."""
    n = formula.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got n={n}")
    mode = formula.mode if mode is None else Mode(mode)
    shifts = np.arange(n, dtype=np.int64)
    lits = formula.to_lists()
    total = 0
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        bits = ((idx[:, None] >> shifts) & 1).astype(bool)
        ok = np.ones(idx.size, dtype=bool)
        for c in lits:
            vals = np.stack([bits[:, abs(l) - 1] ^ (l < 0) for l in c], axis=1)
            if mode is Mode.SAT:
                ok &= vals.any(axis=1)
            else:
                ok &= vals.any(axis=1) & ~vals.all(axis=1)
        total += int(ok.sum())
    return total
