"""Spectral simulation of a stochastic Klausmeier system with porous-medium
diffusion and trace-class multiplicative noise, plus the truncation /
fixed-point / stopping-time machinery that constructs its solutions."""

from .basis import SpectralBasis, analyze, apply_laplacian, build_basis, synthesize, weyl_count
from .diagnostics import (
    HypothesisParams,
    energy_monitor,
    ensemble_moments,
    nonneg_monitor,
    uniqueness_experiment,
    validate_hypotheses,
)
from .dynamics import (
    CoupledState,
    ModelConfig,
    NewtonError,
    SolverConfig,
    Trajectory,
    heat_step,
    pm_implicit_step,
    simulate_path,
    step_coupled,
    step_decoupled,
    step_frozen,
)
from .fields import lp_norm, pm_inequality_gap, power_gamma, sobolev_norm
from .fixedpoint import (
    CutoffParams,
    FrozenPair,
    PicardError,
    apply_V,
    cutoff_phi,
    exit_prob_estimate,
    first_exit_time,
    glue_simulate,
    h_functional,
    picard_solve,
)
from .noise import (
    NoisePath,
    NoiseSpec,
    bdg_selfcheck,
    generate_path,
    sample_increments,
    stratonovich_correction,
    validate_noise,
)
from .scenarios import Scenario

__version__ = "0.1.0"
