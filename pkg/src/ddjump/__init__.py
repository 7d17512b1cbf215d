"""Density-dependent Markov jump processes on the integer lattice:
contractive-norm certificates, exact simulation, quasi-equilibria, and
cutoff-profile experiments."""

from .dist import LatticeDistribution
from .dynamics import (
    CertGrid,
    FlowResult,
    StabilityCertificate,
    certify,
    check_drift_condition,
    construct_M,
    construct_M_eigen,
    cutoff_time,
    find_fixed_point,
    integrate_ode,
    m_norm,
)
from .equilibrium import (
    CutoffProfile,
    cutoff_profile,
    discrete_normal,
    enumerate_ball,
    equilibrium_sigma2,
    mean_drift_check,
    solve_lyapunov_sigma,
    stationary_empirical,
    stationary_exact,
    tail_mass,
    transition_width,
    tv_distance,
    variance_check,
)
from .lattice import LatticeAnalysis, classify_jumps, decompose_vector
from .model import (
    Domain,
    Model,
    builtin_hamer_sir,
    eval_drift,
    eval_jacobian,
    eval_rates,
    parse_model,
)
from .simulate import (
    ChainState,
    CoupledTrace,
    MartingaleReport,
    SimOptions,
    Trajectory,
    coupled_ensemble,
    estimate_K2,
    exit_probability,
    martingale_deviation,
    sample_at,
    sample_states,
    simulate_coupled,
    simulate_path,
    zeta_bound,
)

__version__ = "0.1.0"

__all__ = [
    "CertGrid",
    "ChainState",
    "CoupledTrace",
    "CutoffProfile",
    "Domain",
    "FlowResult",
    "LatticeAnalysis",
    "LatticeDistribution",
    "MartingaleReport",
    "Model",
    "SimOptions",
    "StabilityCertificate",
    "Trajectory",
    "builtin_hamer_sir",
    "certify",
    "check_drift_condition",
    "classify_jumps",
    "construct_M",
    "construct_M_eigen",
    "coupled_ensemble",
    "cutoff_profile",
    "cutoff_time",
    "decompose_vector",
    "discrete_normal",
    "enumerate_ball",
    "equilibrium_sigma2",
    "estimate_K2",
    "eval_drift",
    "eval_jacobian",
    "eval_rates",
    "exit_probability",
    "find_fixed_point",
    "integrate_ode",
    "m_norm",
    "martingale_deviation",
    "mean_drift_check",
    "parse_model",
    "sample_at",
    "sample_states",
    "simulate_coupled",
    "simulate_path",
    "solve_lyapunov_sigma",
    "stationary_empirical",
    "stationary_exact",
    "tail_mass",
    "transition_width",
    "tv_distance",
    "variance_check",
    "zeta_bound",
]
