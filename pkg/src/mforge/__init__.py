"""Measures with prescribed lower and upper multifractal spectra, built on dyadic cubes."""

from . import bernoulli, construct, dyadic, legendre, spectra, wavelet
from .bernoulli import BernoulliParams, TypeClass, analytic_tau, min_generation, solve_params
from .construct import (
    Schedule,
    ScheduleError,
    SymbolicMeasure,
    build_measure,
    build_schedule,
    cube_log2_mass,
    offdiag_mass,
    sample,
)
from .dyadic import DyadicCube, concat, neighborhood, separated_family
from .legendre import (
    LqFunction,
    SpectrumFunction,
    conjugate_f,
    conjugate_tau,
    predict_dims,
    validate_spectrum,
    validate_tau,
)
from .spectra import empirical_tau, exact_partition, ld_broadening, ld_counts, tau_profile
from .wavelet import WaveletSeries, leader_tau, leaders, synth_from_spectrum

__version__ = "0.1.0"
