"""Running times, ensemble statistics and scaling-exponent fits.

Exponential fits are unweighted least squares on ``(n, log2 value)``;
power-law fits are least squares on ``(ln P, ln value)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

# Full-scale reference values (n up to 19, 2500 instances, depth up to 32).
POWER_LAW_REFERENCE = {
    3: (0.48193188, -0.73653218),
    4: (0.59220998, -0.68702534),
    5: (0.64106651, -0.51678505),
    6: (0.64427816, -0.37302963),
    7: (0.66099965, -0.30455395),
    8: (0.67472907, -0.24718223),
    9: (0.68581328, -0.22158058),
    10: (0.6987176, -0.19971659),
}
CROSSOVER_REFERENCE = {3: 3, 4: 3, 5: 4, 6: 6, 7: 6, 8: 10, 9: 14}
GROVER_EXPONENT = 0.5


@dataclass(frozen=True)
class RunningTimeSample:
    instance_id: int
    samples_needed: int

    def __post_init__(self):
        if self.samples_needed < 1:
            raise ValueError("a running time is at least one sample")


@dataclass(frozen=True)
class ExponentFit:
    c: float
    d: float
    residual: float
    n_points: int

    @property
    def success_exponent(self) -> float:
        """Decay rate for success probabilities, value ~ 2^(-C n)."""
        return -self.c

    @property
    def runtime_exponent(self) -> float:
        """Growth rate for running times, value ~ 2^(C n)."""
        return self.c

    def predict(self, n):
        return 2.0 ** (self.c * np.asarray(n, dtype=float) + self.d)


@dataclass(frozen=True)
class PowerLawFit:
    a: float
    b: float
    residual: float

    def predict(self, depth):
        return self.a * np.asarray(depth, dtype=float) ** self.b


class UnsatisfiableInstanceError(ValueError):
    """A zero success probability reached running-time sampling."""


def geometric_from_uniform(p_succ: float, u: float) -> int:
    """Inverse CDF of Geometric(p) on {1, 2, ...} at ``u`` in (0, 1]."""
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    if p_succ <= 0.0:
        raise UnsatisfiableInstanceError("success probability is zero; instance is not satisfiable")
    if p_succ >= 1.0:
        return 1
    r = math.ceil(math.log(u) / math.log1p(-p_succ))
    return max(1, int(r))


def sample_running_time(p_succ: float, rng: np.random.Generator) -> int:
    u = 1.0 - rng.random()  # (0, 1]
    return geometric_from_uniform(p_succ, u)


def sample_running_time_literal(state: np.ndarray, costs: np.ndarray, rng, max_samples: int = 10**7) -> int:
    """Measure the state repeatedly until a zero-cost bitstring appears."""
    from .qaoa.simulate import sample_indices

    if not np.any(costs == 0):
        raise UnsatisfiableInstanceError("instance has no satisfying assignment")
    drawn = 0
    batch = 256
    while drawn < max_samples:
        idx = sample_indices(state, rng, batch)
        hits = np.flatnonzero(costs[idx] == 0)
        if hits.size:
            return drawn + int(hits[0]) + 1
        drawn += batch
    raise RuntimeError(f"no satisfying sample within {max_samples} draws")


def instance_running_time(formula, params, rng, instance_id: int = 0) -> RunningTimeSample:
    from .qaoa.simulate import precompute_costs, run_circuit_costs, success_probability

    costs = precompute_costs(formula)
    p = success_probability(run_circuit_costs(costs, params), costs)
    return RunningTimeSample(instance_id, sample_running_time(p, rng))


def median_running_time(running_times: Iterable) -> float:
    """Median; an even count averages the two central values."""
    values = [rt.samples_needed if isinstance(rt, RunningTimeSample) else rt for rt in running_times]
    if not values:
        raise ValueError("median of an empty ensemble")
    return float(np.median(np.asarray(values, dtype=float)))


def _points(points) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(points, Mapping):
        points = sorted(points.items())
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be (x, value) pairs")
    return arr[:, 0], arr[:, 1]


def fit_exponential(points) -> ExponentFit:
    """Fit value ~ 2^(c n + d) by least squares in log2 space."""
    n, y = _points(points)
    if n.size < 2:
        raise ValueError("need at least two points")
    if np.any(y <= 0):
        raise ValueError("exponential fit needs positive values")
    if np.unique(n).size < 2:
        raise ValueError("need at least two distinct n")
    ly = np.log2(y)
    A = np.column_stack([n, np.ones_like(n)])
    (c, d), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([c, d]) - ly) ** 2)))
    return ExponentFit(float(c), float(d), resid, int(n.size))


def fit_power_law(points) -> PowerLawFit:
    """Fit value ~ a P^b by least squares in log-log space."""
    p, y = _points(points)
    if p.size < 2 or np.unique(p).size < 2:
        raise ValueError("power-law fit needs at least two distinct depths")
    if np.any(p <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive inputs")
    lp, ly = np.log(p), np.log(y)
    A = np.column_stack([lp, np.ones_like(lp)])
    (b, loga), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([b, loga]) - ly) ** 2)))
    return PowerLawFit(float(math.exp(loga)), float(b), resid)


def relative_error(c_hat: float, c_tilde: float) -> float:
    if c_hat == 0:
        raise ZeroDivisionError("relative error undefined for c_hat = 0")
    return abs((c_hat - c_tilde) / c_hat)


def random_scaling_exponent(k: int, r: float) -> float:
    """Exponent of the zero-angle (random assignment) success probability, 2^(1-k) r.

    This comes from E[p_succ] = exp(-2^(1-k) r n), so it is a natural-log
    rate; divide by ln 2 to compare with exponents fitted in base 2.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if r <= 0:
        raise ValueError("r must be positive")
    return 2.0 ** (1 - k) * r


def random_scaling_exponent_bits(k: int, r: float) -> float:
    return random_scaling_exponent(k, r) / math.log(2.0)


def crossover_depth(exponents, baseline: float) -> Optional[int]:
    """Smallest depth whose exponent beats ``baseline``; None if no depth does."""
    if isinstance(exponents, Mapping):
        items = sorted(exponents.items())
    else:
        items = sorted(exponents)
    if not items:
        raise ValueError("no exponents given")
    for depth, c in items:
        if c < baseline:
            return int(depth)
    return None


def sign_test(wins: int, losses: int) -> float:
    """One-sided p-value of observing at least ``wins`` of ``wins + losses`` under a fair coin."""
    from scipy.stats import binomtest

    trials = wins + losses
    if trials == 0:
        return 1.0
    return float(binomtest(wins, trials, 0.5, alternative="greater").pvalue)
