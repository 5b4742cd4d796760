"""Dirichlet determinantal point processes for Monte Carlo integration."""

__version__ = "0.1.0"

from ._backend import NAME as BACKEND
from .estimator import (
    Estimate,
    FourierTable,
    IntegrandHandle,
    KappaVector,
    RectangleDomain,
    ci_clt,
    covariance_matrix,
    estimate_mean,
    estimate_rectangle,
    exact_variance_var1,
    exact_variance_var2,
    fourier_coeff,
    fourier_table,
    kappa_from_design,
    lift_table,
    projected_variance,
    sigma2_asymptotic,
    sigma2_hat,
)
from .kernel import (
    FactorVector,
    PointPattern,
    RectIndexSet,
    SubsetSelector,
    SymIndexSet,
    balanced_factorization,
    eigenfunction_eval,
    intensity_k,
    kernel_eval,
    pcf_eval,
    pcf_projected_eval,
)
from .sampler import (
    SampleDiagnostics,
    SamplerConfig,
    SamplerError,
    batch_sample,
    derive_seed,
    project_pattern,
    read_pattern,
    sample_pattern,
    write_pattern,
)
from .testfuncs import TestFunctionSpec, coefficient_table, eval_test_function, parse_spec

