"""Simulation and analysis of anomalous heat flow between two correlated qubits."""

from .heatflow import (
    ExperimentParams,
    HeatFlowResult,
    effective_beta,
    prepare_initial_state,
    q_analytic,
    q_quantum,
    q_semiclassical,
    sweep,
    violation,
)
from .kdq import KdqDistribution, kdq_distribution, kdq_heat, negativity
from .qsim import DiagonalHamiltonian, GateOp, QuantumState
from .sampler import NoiseModel, run_qq_protocol, run_tpm_protocol

__version__ = "0.1.0"
