"""Z-string expansion of the NAE cost Hamiltonian.

Each clause contributes H(not clause) + H(all literals true), with
H(literal) = (I + s Z)/2, s = +1 for negated and -1 for positive literals:

    H(not clause)   = 2^-k prod_j (I - s_j Z_j)
    H(all true)     = 2^-k prod_j (I + s_j Z_j)

Odd-weight strings cancel between the two products; even-weight strings
double. The identity term is returned separately as a constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..formula import CnfFormula, Mode


@dataclass(frozen=True)
class PauliZTerm:
    coefficient: float
    support: frozenset

    def __post_init__(self):
        object.__setattr__(self, "support", frozenset(self.support))


def _product_terms(signs, variables, sign_of_z):
    """Expand prod_j (I + sign_of_z * s_j Z_j) into {support: coefficient}."""
    out: dict[frozenset, float] = {}
    k = len(variables)
    for size in range(k + 1):
        for pos in combinations(range(k), size):
            coeff = 1.0
            support = frozenset()
            for p in pos:
                coeff *= sign_of_z * signs[p]
                support = support ^ {variables[p]}  # Z_j Z_j = I
            out[support] = out.get(support, 0.0) + coeff
    return out


def clause_terms(clause) -> dict[frozenset, float]:
    signs = [lit.sign for lit in clause]
    variables = [lit.variable for lit in clause]
    scale = 2.0 ** -len(clause)
    total: dict[frozenset, float] = {}
    for sign_of_z in (-1.0, 1.0):
        for support, c in _product_terms(signs, variables, sign_of_z).items():
            total[support] = total.get(support, 0.0) + scale * c
    return total


def pauli_expansion_with_constant(formula: CnfFormula, tol: float = 1e-12):
    if formula.mode is not Mode.NAE:
        raise ValueError("pauli_expansion expects an NAE-mode formula")
    acc: dict[frozenset, float] = {}
    for clause in formula.clauses:
        for support, c in clause_terms(clause).items():
            acc[support] = acc.get(support, 0.0) + c
    constant = acc.pop(frozenset(), 0.0)
    terms = [
        PauliZTerm(c, s)
        for s, c in sorted(acc.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))
        if abs(c) > tol
    ]
    return terms, constant


def pauli_expansion(formula: CnfFormula) -> list[PauliZTerm]:
    """Non-constant Z-string terms of the cost Hamiltonian, merged by support."""
    return pauli_expansion_with_constant(formula)[0]


def diagonal(terms, n: int) -> np.ndarray:
    """Diagonal of sum_terms coeff * prod_{j in support} Z_j over all 2**n basis states."""
    idx = np.arange(1 << n)
    out = np.zeros(1 << n)
    for term in terms:
        z = np.ones(1 << n)
        for j in term.support:
            z *= 1 - 2 * ((idx >> j) & 1)
        out += term.coefficient * z
    return out
