"""Lack-of-fit testing for parametric quantile regression.

The package fits linear-in-parameters quantile regressions exactly via
an LP simplex, tests their specification with a one-dimensionally
smoothed pairwise kernel statistic (plus two competitor tests),
calibrates critical values by wild/naive/uniform bootstrap, and ships
a Monte Carlo harness for level and power experiments. See the
`qcheck` command-line tool for the packaged workflows.
"""

from .bootstrap import (BootstrapConfig, BootstrapOutcome, bootstrap_test,
                        resample, wild_weights)
from .data import (Dataset, StandardizationReport, load_csv, standardize,
                   write_csv)
from .errors import (ConfigError, DataError, DegenerateVarianceError,
                     FitError, InternalError, ParseError, QcheckError)
from .kernels import KernelSpec, bandwidth, k_eval, psi_eval
from .loftests import (SignVector, TestResult, hz_stat, i_n, residual_signs,
                       t_n, v_n2, zheng_stat)
from .mc import (DgpSpec, LevelStudyConfig, McResult, McRow, PowerStudyConfig,
                 draw_dataset, run_level_study, run_power_study)
from .model import (CoefVector, ModelSpec, Term, design_matrix,
                    load_model_file, parse_model_inline, predict)
from .qrfit import FitResult, check_loss, fit, refit

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig", "BootstrapOutcome", "bootstrap_test", "resample", "wild_weights",
    "Dataset", "StandardizationReport", "load_csv", "standardize", "write_csv",
    "ConfigError", "DataError", "DegenerateVarianceError", "FitError",
    "InternalError", "ParseError", "QcheckError",
    "KernelSpec", "bandwidth", "k_eval", "psi_eval",
    "SignVector", "TestResult", "hz_stat", "i_n", "residual_signs", "t_n", "v_n2", "zheng_stat",
    "DgpSpec", "LevelStudyConfig", "McResult", "McRow", "PowerStudyConfig",
    "draw_dataset", "run_level_study", "run_power_study",
    "CoefVector", "ModelSpec", "Term", "design_matrix", "load_model_file",
    "parse_model_inline", "predict",
    "FitResult", "check_loss", "fit", "refit",
    "__version__",
]
