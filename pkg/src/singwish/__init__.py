"""Singular Wishart times singular Gaussian products.

Exact samplers (naive and stochastic representation), the characteristic
function, double-asymptotic normal approximations and a Monte Carlo harness.
"""

from .asymptotics import (
    AssumptionReport,
    AssumptionWarning,
    AsymptoticParams,
    omega_matrix,
    sigma2,
    standardize_scalar,
    standardize_vector,
    unstandardize_scalar,
    validate_assumptions,
)
from .charfn import CfQuadratureConfig, CfResult, cf_product, cf_product_result, chi2_logpdf, empirical_cf
from .errors import *  # noqa: F401,F403
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    benchmark,
    generate_population,
    generate_projection,
    kde_epanechnikov,
    ks_statistic,
    run_experiment,
    silverman_bandwidth,
)
from .product import (
    ClampStats,
    ProductSpec,
    sample_product,
    sample_product_naive,
    sample_product_scalar_stochrep,
    sample_product_stochrep,
    sample_product_vector_stochrep,
)
from .rng import RngStream
from .samplers import (
    GaussianSpec,
    WishartSpec,
    project_wishart,
    sample_chi2,
    sample_singular_normal,
    sample_singular_wishart,
    whitened_quadratic_form,
)
from .spectral import (
    RankTolerance,
    SpectralCovariance,
    downdate_coefficient,
    pseudo_inverse_quadratic,
    rank_one_downdate_sqrt,
    spectral_decompose,
    sqrt_psd,
)

__version__ = "0.1.0"
