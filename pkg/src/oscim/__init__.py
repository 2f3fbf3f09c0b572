"""Oscillator Ising machines as gradient flows: models, energies, integrators, experiments."""

from .graph import (
    IsingInstance,
    brute_force_ground_state,
    cut_value,
    generate_er_graph,
    generate_regular_graph,
    ising_energy,
)
from .model import (
    CouplingSet,
    DopoParams,
    NetworkState,
    OscillatorParams,
    split_couplings,
)

__version__ = "0.1.0"

__all__ = [
    "CouplingSet",
    "DopoParams",
    "IsingInstance",
    "NetworkState",
    "OscillatorParams",
    "brute_force_ground_state",
    "cut_value",
    "generate_er_graph",
    "generate_regular_graph",
    "ising_energy",
    "split_couplings",
]
