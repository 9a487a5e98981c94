"""Disordered harmonic chain with flip and exchange noise: simulation, quadratic-sector
operator calculus, diffusion-coefficient solvers, Monte Carlo estimators and checks."""

from .chain import ChainState, DisorderField, disorder_ensemble, sample_disorder, sample_gibbs
from .config import FluctuationConfig, ModelParams, SimulationConfig, SolverConfig
from .dynamics import Trajectory, simulate
from .mc import current_acf_green_kubo, kipnis_varadhan_check, mode_decay_fit
from .quadratic import QuadraticObservable, h_minus_one_solve, seminorm_triple, star_inner, star_star
from .solvers import green_kubo_ensemble, green_kubo_resolvent, variational_D, w_f_ell_variance

__all__ = [
    "ChainState",
    "DisorderField",
    "FluctuationConfig",
    "ModelParams",
    "QuadraticObservable",
    "SimulationConfig",
    "SolverConfig",
    "Trajectory",
    "current_acf_green_kubo",
    "disorder_ensemble",
    "green_kubo_ensemble",
    "green_kubo_resolvent",
    "h_minus_one_solve",
    "kipnis_varadhan_check",
    "mode_decay_fit",
    "sample_disorder",
    "sample_gibbs",
    "seminorm_triple",
    "simulate",
    "star_inner",
    "star_star",
    "variational_D",
    "w_f_ell_variance",
]
