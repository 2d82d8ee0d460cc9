"""Deep ensembles for heteroscedastic regression with a Gaussian-mixture posterior
over each member's last linear layer."""

from .bayes_post import (
    GammaSet,
    MomentPair,
    compute_gamma,
    compute_gammas,
    elbo_coeffs,
    elbo_value,
    predictive_moments_classical,
    predictive_moments_extended,
    regression_moments_classical,
    regression_moments_extended,
    sample_predictive,
    sample_regression,
    separation_ratio,
)
from .datasets import Dataset, NormStats, gen_quartic_1d, gen_quartic_2d, load_delimited, normalize, split
from .ensemble import Ensemble, load_ensemble, penultimate_features, save_ensemble, train_ensemble
from .hetero_model import HeteroNet, TrainConfig, nll_loss, predict, train_map
from .metrics import EvalReport, coverage, evaluate, rmse, variance_ratio

__version__ = "0.1.0"
