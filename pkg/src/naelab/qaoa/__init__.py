from .pauli import PauliZTerm, diagonal, pauli_expansion, pauli_expansion_with_constant
from .simulate import (
    QaoaParams,
    apply_cost_unitary,
    apply_mixer,
    apply_sum_x,
    precompute_costs,
    run_circuit,
    run_circuit_costs,
    sample_bitstring,
    sample_indices,
    stack_costs,
    success_probability,
    uniform_state,
)
from .train import (
    Adam,
    TrainResult,
    gradient,
    mean_success_probability,
    train_params,
    value_and_gradient,
)
