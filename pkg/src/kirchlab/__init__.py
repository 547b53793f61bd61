"""Spectral (mode-by-mode) simulation of the damped Kirchhoff equation

    eps u'' + (1+t)^{-p} u' + m(|A^{1/2}u|^2) A u = 0

and of its parabolic limit, with the boundary-layer corrector, energy
functionals, decay/convergence fits and a batch experiment runner.
"""
from .spectral import DimensionError, OperatorSpec, SpectralVector, apply_power, inner, norm_power
from .model import (
    DerivedConstants, DissipationSpec, NonlinearitySpec, ProblemSetup, compute_eps0,
    compute_k_constants, compute_L, compute_mu2, corrector_initial_velocity, derived_constants,
    eps0_caps, hamiltonian_initial, reference_eps0,
)
from .trajectory import SolverConfig, Trajectory, output_grid
from .integrator import BlowUp, IntegrationError, MaxStepsExceeded, StepSizeUnderflow
from .hyperbolic import hamiltonian_identity_gap, hamiltonian_series, residual, solve_hyperbolic
from .parabolic import (
    check_parabolic_decay, closed_form_constant, parabolic_second_derivative, solve_parabolic,
)
from .corrector import AssemblyError, ErrorDecomposition, assemble, theta, verify_corrector_ode
from .energies import (
    EnergySample, WeightedIntegral, bound_suite, eval_energies, lemma_lin_bound, lemma_sqrt_bound,
    s_condition_margin, weighted_integral,
)
from .analysis import (
    DecayFit, OrderFit, PreconditionError, dichotomy, fit_decay_rate, fit_order,
    verify_error_decay, verify_higher_order, verify_hyperbolic_decay, verify_supercritical,
)

__version__ = "0.1.0"
