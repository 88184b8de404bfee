"""Specification tests for parametric transformation classes in
nonparametric transformation regression models h(Y) = g(X) + eps."""

__version__ = "0.1.0"

from ._backend import backend_name, has_compiled
from .bootstrap import BootstrapConfig, GofReport, bootstrap_quantile, gof_test
from .data import Dataset
from .families import (
    NormalizedTransform,
    ParametricFamily,
    YeoJohnsonFamily,
    get_family,
    invert_monotone,
    normalize,
    register_family,
)
from .kernels import BandwidthSet, biweight_kernel, normal_reference_bandwidth
from .npt import NptConfig, NptEstimate, estimate_h
from .relevant import RelevantConfig, RelevantReport, relevant_test, sigma2_hat
from .simulate import (
    SimScenario,
    StudyResult,
    curve_grid,
    gen_fixed_alternative,
    gen_local_alternative,
    gen_null,
    rejection_study,
)
from .statistic import GammaPoint, TestConfig, WeightFn, compute_Tn, profile_c

__all__ = [
    "__version__",
    "backend_name",
    "has_compiled",
    "Dataset",
    "ParametricFamily",
    "YeoJohnsonFamily",
    "NormalizedTransform",
    "get_family",
    "register_family",
    "normalize",
    "invert_monotone",
    "BandwidthSet",
    "biweight_kernel",
    "normal_reference_bandwidth",
    "NptConfig",
    "NptEstimate",
    "estimate_h",
    "TestConfig",
    "WeightFn",
    "GammaPoint",
    "profile_c",
    "compute_Tn",
    "BootstrapConfig",
    "GofReport",
    "bootstrap_quantile",
    "gof_test",
    "RelevantConfig",
    "RelevantReport",
    "relevant_test",
    "sigma2_hat",
    "SimScenario",
    "StudyResult",
    "gen_null",
    "gen_fixed_alternative",
    "gen_local_alternative",
    "rejection_study",
    "curve_grid",
]
