"""Spreading speeds for Fisher-KPP fronts in a cylinder with boundary diffusion."""

from .dispersion import (
    AlphaInterval,
    CurveSample,
    DomainError,
    Params,
    alpha_D_interval,
    alpha_d_interval,
    beta_bar,
    beta_hat,
    beta_tilde,
    chi1,
    chi2,
    gamma_coef,
    rho,
    sample_curves,
)
from .simulate import FrontTrace, Reaction, SimConfig, SimState, front_position, mass_total, run, step
from .specfun import HypParams, SeriesTruncationError, first_zero_psi1, hyp0f1, psi1, psi1_prime, psi2, psi2_prime
from .speed import (
    LimitSpeeds,
    SolverError,
    TangencyResult,
    WaveType,
    classify_type,
    limit_c0,
    limit_cinf,
    limit_ctilde,
    limit_speeds,
    r_max,
    regions_overlap,
    solve_cstar,
)

__version__ = "0.1.0"
