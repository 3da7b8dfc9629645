"""Statevector simulation of depth-P QAOA on NAE-SAT costs.

Amplitude ``psi[x]`` belongs to the assignment whose bit ``j`` is variable
``j``. Kernels accept a single state of shape ``(2**n,)`` or a batch of
shape ``(t, 2**n)`` (one state per instance) and return new arrays.

Conventions: the cost layer is ``exp(-i gamma C)`` and the mixer is
``exp(+i beta sum_j X_j)``. The opposite mixer sign corresponds to
``beta -> -beta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..formula import CnfFormula

MAX_QUBITS = 24
NORM_TOL = 1e-9


@dataclass(frozen=True)
class QaoaParams:
    beta: tuple[float, ...]
    gamma: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if len(self.beta) != len(self.gamma):
            raise ValueError("beta and gamma must have the same length")
        if len(self.beta) < 1:
            raise ValueError("depth must be at least 1")

    @property
    def depth(self) -> int:
        return len(self.beta)

    @classmethod
    def constant(cls, depth: int, beta: float, gamma: float) -> "QaoaParams":
        if depth < 1:
            raise ValueError("depth must be at least 1")
        return cls((beta,) * depth, (gamma,) * depth)


def _cost_dtype(m: int):
    for dt in (np.uint8, np.uint16, np.uint32):
        if m <= np.iinfo(dt).max:
            return dt
    return np.uint64


def precompute_costs(formula: CnfFormula, max_n: int = MAX_QUBITS) -> np.ndarray:
    """Cost of every assignment, indexed by its integer encoding."""
    n = formula.n
    if n > max_n:
        raise ValueError(f"cost table limited to n <= {max_n}, got n={n}")
    idx = np.arange(1 << n, dtype=np.uint32 if n <= 31 else np.uint64)
    costs = np.zeros(1 << n, dtype=_cost_dtype(formula.m))
    nae = formula.mode.value == "NAE"
    tau = np.empty(1 << n, dtype=np.uint8)
    for clause in formula.clauses:
        tau[:] = 0
        for lit in clause:
            bit = ((idx >> lit.variable) & 1).astype(np.uint8)
            tau += bit ^ np.uint8(lit.negated)
        if nae:
            costs += (tau == 0) | (tau == len(clause))
        else:
            costs += tau == 0
    return costs


def stack_costs(formulas) -> np.ndarray:
    tables = [precompute_costs(f) for f in formulas]
    if len({t.size for t in tables}) > 1:
        raise ValueError("all instances must share n")
    m = max((f.m for f in formulas), default=0)
    return np.stack([t.astype(_cost_dtype(m)) for t in tables])


def num_qubits(size: int) -> int:
    n = int(size).bit_length() - 1
    if 1 << n != size:
        raise ValueError(f"state length {size} is not a power of two")
    return n


def uniform_state(n: int, batch: int | None = None, dtype=np.complex128) -> np.ndarray:
    shape = (1 << n,) if batch is None else (batch, 1 << n)
    return np.full(shape, 2.0 ** (-n / 2), dtype=dtype)


def apply_cost_unitary(state: np.ndarray, costs: np.ndarray, gamma: float) -> np.ndarray:
    if state.shape[-1] != costs.shape[-1]:
        raise ValueError(f"state has {state.shape[-1]} amplitudes, cost table {costs.shape[-1]}")
    top = int(costs.max()) if costs.size else 0
    phases = np.exp(-1j * gamma * np.arange(top + 1)).astype(state.dtype)
    return state * phases[costs]


@numba.njit(cache=True, nogil=True)
def _mixer_rows(rows, c, s):
    t, size = rows.shape
    for r in range(t):
        row = rows[r]
        step = 1
        while step < size:
            for base in range(0, size, 2 * step):
                for i in range(base, base + step):
                    a = row[i]
                    b = row[i + step]
                    row[i] = c * a + s * b
                    row[i + step] = c * b + s * a
            step *= 2


@numba.njit(cache=True, nogil=True)
def _sum_x_rows(rows, out):
    t, size = rows.shape
    for r in range(t):
        row = rows[r]
        acc = out[r]
        step = 1
        while step < size:
            for base in range(0, size, 2 * step):
                for i in range(base, base + step):
                    acc[i] += row[i + step]
                    acc[i + step] += row[i]
            step *= 2


def _rows(state: np.ndarray) -> np.ndarray:
    num_qubits(state.shape[-1])
    return np.array(state, copy=True, order="C").reshape(-1, state.shape[-1])


def apply_mixer(state: np.ndarray, beta: float) -> np.ndarray:
    """exp(+i beta X_j) on every qubit: pairs (a, b) differing in bit j mix as
    (cos(beta) a + i sin(beta) b, cos(beta) b + i sin(beta) a)."""
    rows = _rows(state)
    _mixer_rows(rows, rows.dtype.type(np.cos(beta)), rows.dtype.type(1j * np.sin(beta)))
    return rows.reshape(state.shape)


def apply_sum_x(state: np.ndarray) -> np.ndarray:
    """sum_j X_j |state>, the mixer generator."""
    rows = _rows(state)
    out = np.zeros_like(rows)
    _sum_x_rows(rows, out)
    return out.reshape(state.shape)


def run_circuit_costs(costs: np.ndarray, params: QaoaParams, dtype=np.complex128) -> np.ndarray:
    n = num_qubits(costs.shape[-1])
    batch = costs.shape[0] if costs.ndim == 2 else None
    psi = uniform_state(n, batch, dtype)
    for beta, gamma in zip(params.beta, params.gamma):
        psi = apply_mixer(apply_cost_unitary(psi, costs, gamma), beta)
    return psi


def run_circuit(formula: CnfFormula, params: QaoaParams, dtype=np.complex128) -> np.ndarray:
    """Output state prod_i U_B(beta_i) U_C(gamma_i) |+>^n."""
    return run_circuit_costs(precompute_costs(formula), params, dtype)


def success_probability(state: np.ndarray, costs: np.ndarray):
    """Weight of the state on zero-cost (satisfying) assignments; per row for batches."""
    if state.shape[-1] != costs.shape[-1]:
        raise ValueError("state and cost table sizes differ")
    p = np.where(costs == 0, np.abs(state) ** 2, 0.0).sum(axis=-1)
    return float(p) if np.ndim(p) == 0 else p


def probabilities(state: np.ndarray) -> np.ndarray:
    return np.abs(state) ** 2


def sample_indices(state: np.ndarray, rng: np.random.Generator, size: int | None = None):
    cdf = np.cumsum(probabilities(state))
    u = rng.random(size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)


def sample_bitstring(state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Measure once in the computational basis (inverse CDF over |amplitude|^2)."""
    n = num_qubits(state.shape[-1])
    idx = int(sample_indices(state, rng))
    return ((idx >> np.arange(n)) & 1).astype(np.uint8)
