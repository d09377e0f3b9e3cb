"""Quantum spin transistor simulator: XXZ chains and their cold-atom realization."""

__version__ = "0.1.0"

from .errors import (
    AccuracyError,
    ConfigurationWarning,
    ConvergenceError,
    NumericalError,
    ParameterError,
    SingularityError,
)
from .spinchain import (
    SectorBasis,
    XxzChain,
    build_hamiltonian,
    diagonalize,
    enumerate_sector_basis,
    gate_block_eigens,
    resonance_fields,
    resonance_fields_n5,
)
from .dynamics import (
    QuantumState,
    blockade_fidelity,
    gate_superposition_evolution,
    transfer_fidelity,
    transfer_report,
)
from .atommap import (
    TrapSpec,
    effective_chain,
    geometric_factors,
    solve_schrodinger_1d,
)
from .kernels import BACKEND

