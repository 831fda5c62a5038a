"""Maximum-entropy LP-copula models for mixed bivariate data."""

__version__ = "0.1.0"

from .comoments import CoMomentTable, SelectionResult, comoments, select
from .contingency import ContingencyTable
from .inference import (
    TestReport,
    chi_square_sf,
    empirical_mi,
    g2_test,
    mi_permutation_pvalue,
    mutual_information,
    smooth_g2_test,
)
from .io import load_dataset, load_model, save_model
from .logistic import CopulaLogisticModel, feature_matrix, from_copula
from .loglinear import (
    LogLinearModel,
    biplot_coordinates,
    intrinsic_association,
    log_odds_ratio,
    plugin_loglinear,
    to_loglinear,
)
from .lp_basis import LpBasis, build, max_degree_default
from .marginals import (
    Marginal,
    NegBinomialParams,
    fit_negbin,
    from_counts,
    from_samples,
    mid_distribution,
    truncate_parametric,
)
from .maxent import FitError, MaxEntCopulaModel, fit, log_partition, model_from_theta, smooth_cells
from .pipeline import FitConfig, fit_pairs, fit_table

__all__ = [name for name in dir() if not name.startswith("_")]
