"""Exact gradients of the mean success probability and ADAM training."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .simulate import (
    QaoaParams,
    apply_cost_unitary,
    apply_mixer,
    apply_sum_x,
    run_circuit_costs,
    stack_costs,
)

INIT_BETA = 0.01
INIT_GAMMA = -0.01
DEFAULT_LR = 0.01
DEFAULT_EPOCHS = 100


def _as_costs(instances) -> np.ndarray:
    if isinstance(instances, np.ndarray):
        return instances if instances.ndim == 2 else instances[None, :]
    instances = list(instances)
    if not instances:
        raise ValueError("need at least one instance")
    return stack_costs(instances)


def mean_success_probability(instances, params: QaoaParams) -> float:
    costs = _as_costs(instances)
    psi = run_circuit_costs(costs, params)
    return float(np.mean(np.where(costs == 0, np.abs(psi) ** 2, 0.0).sum(axis=-1)))


def value_and_gradient(instances, params: QaoaParams):
    """Mean success probability and its gradient, by adjoint propagation.

    For a gate exp(-i theta G) with state psi just after it and adjoint
    lambda = (gates after it)^dagger Pi psi_final, d<Pi>/d theta = 2 Im<lambda|G|psi>.
    Here G = C for gamma and G = -sum_j X_j for beta.
    """
    costs = _as_costs(instances)
    t = costs.shape[0]
    sol = costs == 0
    psi = run_circuit_costs(costs, params)
    value = float(np.mean(np.where(sol, np.abs(psi) ** 2, 0.0).sum(axis=-1)))
    lam = np.where(sol, psi, 0)
    depth = params.depth
    gb = np.zeros(depth)
    gg = np.zeros(depth)
    for i in reversed(range(depth)):
        beta, gamma = params.beta[i], params.gamma[i]
        # mixer layer: psi, lam are states just after it
        gb[i] = -2.0 * np.imag(np.vdot(lam, apply_sum_x(psi))) / t
        psi = apply_mixer(psi, -beta)
        lam = apply_mixer(lam, -beta)
        # cost layer
        gg[i] = 2.0 * np.imag(np.vdot(lam, costs * psi)) / t
        psi = apply_cost_unitary(psi, costs, -gamma)
        lam = apply_cost_unitary(lam, costs, -gamma)
    return value, gb, gg


def gradient(instances, params: QaoaParams):
    """(d/d beta, d/d gamma) of the mean success probability."""
    _, gb, gg = value_and_gradient(instances, params)
    return gb, gg


class Adam:
    """Bias-corrected ADAM; ``step`` ascends when ``maximize`` is set."""

    def __init__(self, lr=DEFAULT_LR, beta1=0.9, beta2=0.999, eps=1e-8, maximize=True):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.maximize = maximize
        self.m = None
        self.v = None
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        g = -grad if self.maximize else grad
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return theta - self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class TrainResult:
    params: QaoaParams
    trace: list[float] = field(default_factory=list)
    initial: QaoaParams | None = None


def train_params(
    trainset,
    depth: int,
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LR,
    init_beta: float = INIT_BETA,
    init_gamma: float = INIT_GAMMA,
) -> TrainResult:
    """Full-batch ADAM ascent of the mean success probability.

    ``trace`` holds the objective before the first step and after every
    step, so it has ``epochs + 1`` entries.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    costs = _as_costs(trainset)
    params = QaoaParams.constant(depth, init_beta, init_gamma)
    initial = params
    opt = Adam(learning_rate)
    theta = np.concatenate([params.beta, params.gamma])
    trace = []
    for _ in range(epochs):
        value, gb, gg = value_and_gradient(costs, params)
        trace.append(value)
        theta = opt.step(theta, np.concatenate([gb, gg]))
        params = QaoaParams(theta[:depth], theta[depth:])
    trace.append(mean_success_probability(costs, params))
    return TrainResult(params, trace, initial)
