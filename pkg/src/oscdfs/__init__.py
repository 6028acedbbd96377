"""Oscillators sharing a dissipative environment: decoherence-free subspaces and memory effects."""
from ._backend import BACKEND
from .bath import BathSpec, CouplingSpec, SystemParams, classify, rates_from_couplings, rotation_angle
from .dfs import fit_decay, perturbative_amplitudes, sd_wd_states
from .fock import (
    DensityMatrix,
    FockOperator,
    FockSpace,
    fidelity,
    ladder_operator,
    observables,
    pure_state_density,
    rotated_mode_operator,
)
from .kernel import KernelSolution, bath_kernel, coefficients_from_eta, solve_eta, superop_coefficients
from .propagator import (
    analytic_coefficients,
    amplitude_functions,
    asymptotics,
    build_general2_liouvillian,
    build_markov_liouvillian,
    integrate,
    markov_superoperator_apply,
    single_excitation_evolution,
)

__version__ = "0.1.0"
