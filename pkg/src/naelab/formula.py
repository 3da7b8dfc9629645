"""Clause-literal CNF formulas with SAT and NAE semantics.

Variables are 0-based here and 1-based in DIMACS text. An assignment is a
length-``n`` sequence of bits; when packed into an integer, bit ``j`` holds
variable ``j`` (the same convention indexes statevector amplitudes).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class Mode(str, enum.Enum):
    SAT = "SAT"
    NAE = "NAE"


class DimacsError(ValueError):
    pass


@dataclass(frozen=True)
class Literal:
    variable: int
    negated: bool = False

    @property
    def sign(self) -> int:
        """Pauli sign: +1 for a negated literal, -1 for a positive one."""
        return 1 if self.negated else -1

    def value(self, bit: int) -> bool:
        return bool(bit) != self.negated

    def __neg__(self) -> "Literal":
        return Literal(self.variable, not self.negated)

    def to_dimacs(self) -> int:
        return -(self.variable + 1) if self.negated else self.variable + 1

    @classmethod
    def from_dimacs(cls, lit: int) -> "Literal":
        if lit == 0:
            raise DimacsError("literal 0 is the clause terminator")
        return cls(abs(lit) - 1, lit < 0)


@dataclass(frozen=True)
class Clause:
    literals: tuple[Literal, ...]

    def __post_init__(self):
        if len(self.literals) < 1:
            raise ValueError("a clause needs at least one literal")

    def __len__(self) -> int:
        return len(self.literals)

    def __iter__(self):
        return iter(self.literals)

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(lit.variable for lit in self.literals)

    def has_distinct_variables(self) -> bool:
        return len(set(self.variables)) == len(self.literals)

    @classmethod
    def of(cls, *lits: int) -> "Clause":
        """Build from signed 1-based DIMACS integers, e.g. ``Clause.of(1, 2, -3)``."""
        return cls(tuple(Literal.from_dimacs(v) for v in lits))


@dataclass(frozen=True)
class CnfFormula:
    n: int
    clauses: tuple[Clause, ...]
    mode: Mode = Mode.NAE

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n < 0:
            raise ValueError("n must be non-negative")
        for i, clause in enumerate(self.clauses):
            for lit in clause:
                if not 0 <= lit.variable < self.n:
                    raise ValueError(
                        f"clause {i}: variable {lit.variable} out of range for n={self.n}"
                    )

    @property
    def m(self) -> int:
        return len(self.clauses)

    def with_mode(self, mode: Mode | str) -> "CnfFormula":
        return CnfFormula(self.n, self.clauses, Mode(mode))

    @classmethod
    def from_lists(cls, n: int, clauses: Iterable[Sequence[int]], mode: Mode | str = Mode.NAE):
        return cls(n, tuple(Clause.of(*c) for c in clauses), Mode(mode))

    def to_lists(self) -> list[list[int]]:
        return [[lit.to_dimacs() for lit in c] for c in self.clauses]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened literals: ``(ptr, var, neg)`` with clause ``i`` at ``ptr[i]:ptr[i+1]``."""
        ptr = np.zeros(self.m + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(c) for c in self.clauses])
        var = np.fromiter((l.variable for c in self.clauses for l in c), dtype=np.int64, count=ptr[-1])
        neg = np.fromiter((l.negated for c in self.clauses for l in c), dtype=np.uint8, count=ptr[-1])
        return ptr, var, neg


def _check_assignment(formula_n: int, x) -> np.ndarray:
    bits = np.asarray(x, dtype=np.uint8).reshape(-1)
    if bits.size != formula_n:
        raise ValueError(f"assignment has {bits.size} bits, formula has n={formula_n}")
    return bits


def bits_from_index(index: int, n: int) -> np.ndarray:
    return ((int(index) >> np.arange(n)) & 1).astype(np.uint8)


def index_from_bits(x) -> int:
    return sum(int(b) << j for j, b in enumerate(np.asarray(x).reshape(-1)))


def flip_all(x) -> np.ndarray:
    return 1 - np.asarray(x, dtype=np.uint8)


def count_true_literals(clause: Clause, x) -> int:
    x = np.asarray(x).reshape(-1)
    try:
        return sum(lit.value(x[lit.variable]) for lit in clause)
    except IndexError:
        raise ValueError("assignment too short for clause variables") from None


def clause_satisfied(clause: Clause, x, mode: Mode | str) -> bool:
    tau = count_true_literals(clause, x)
    if Mode(mode) is Mode.SAT:
        return tau >= 1
    return 1 <= tau <= len(clause) - 1


def cost(formula: CnfFormula, x) -> int:
    """Number of clauses the assignment leaves unsatisfied under the formula's mode."""
    bits = _check_assignment(formula.n, x)
    return sum(not clause_satisfied(c, bits, formula.mode) for c in formula.clauses)


def is_solution(formula: CnfFormula, x) -> bool:
    return cost(formula, x) == 0


def parse_dimacs(text: str) -> CnfFormula:
    """Parse ``p cnf n m`` (SAT) or ``p naecnf n m`` (NAE) text.

    Clauses may span lines; each is terminated by ``0``. Lines starting with
    ``c`` are comments. Clauses repeating a variable are kept, with a warning.
    """
    header = None
    clauses: list[Clause] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise DimacsError(f"line {lineno}: duplicate header")
            fields = line.split()
            if len(fields) != 4 or fields[1] not in ("cnf", "naecnf"):
                raise DimacsError(f"line {lineno}: malformed header {line!r}")
            try:
                n, m = int(fields[2]), int(fields[3])
            except ValueError:
                raise DimacsError(f"line {lineno}: malformed header {line!r}") from None
            if n < 0 or m < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            header = (Mode.NAE if fields[1] == "naecnf" else Mode.SAT, n, m)
            continue
        if header is None:
            raise DimacsError(f"line {lineno}: clause before header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad token {tok!r}") from None
            if lit == 0:
                if not current:
                    raise DimacsError(f"line {lineno}: empty clause")
                clauses.append(Clause.of(*current))
                current = []
            else:
                if abs(lit) > header[1]:
                    raise DimacsError(
                        f"line {lineno}: variable index {abs(lit)} out of range for n={header[1]}"
                    )
                current.append(lit)
    if header is None:
        raise DimacsError("missing header")
    if current:
        raise DimacsError("unterminated clause at end of input")
    mode, n, m = header
    if len(clauses) != m:
        raise DimacsError(f"header declares {m} clauses, found {len(clauses)}")
    for i, c in enumerate(clauses):
        if not c.has_distinct_variables():
            warnings.warn(f"clause {i} repeats a variable", stacklevel=2)
    return CnfFormula(n, tuple(clauses), mode)


def serialize_dimacs(formula: CnfFormula) -> str:
    kind = "naecnf" if formula.mode is Mode.NAE else "cnf"
    lines = [f"p {kind} {formula.n} {formula.m}"]
    lines += [" ".join(map(str, c)) + " 0" for c in formula.to_lists()]
    return "\n".join(lines)


def read_dimacs(path) -> CnfFormula:
    with open(path) as f:
        return parse_dimacs(f.read())


def write_dimacs(formula: CnfFormula, path) -> None:
    with open(path, "w") as f:
        f.write(serialize_dimacs(formula) + "\n")
