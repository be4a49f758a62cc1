"""Exact simulation of logic-qubit entanglement distillation with cross-Kerr parity checks."""
from .channels import (
    ErrorKind,
    LogicBitFlip,
    LogicPhaseFlip,
    MixedState,
    PhysicalBitFlip,
    PhysicalPhaseFlip,
    density_matrix,
    fidelity,
    make_mixture,
)
from .protocols import (
    CANONICAL,
    EXTENDED,
    RoundResult,
    SelectionPolicy,
    correct_physical_bitflip,
    distill_round,
    verify_rejection,
)
from .qnd import Parity, apply_pcg, homodyne, parity_check
from .state import (
    PureState,
    apply_hadamard,
    apply_x,
    apply_z,
    fidelity_pure,
    inner_product,
    make_bell,
    make_ghz,
    make_logic_bell,
    make_upsilon,
    measure_diag,
)

__version__ = "0.1.0"
