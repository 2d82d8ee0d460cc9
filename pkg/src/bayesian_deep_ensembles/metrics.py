"""Accuracy and calibration metrics for classical and extended ensembles."""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .bayes_post import (
    member_outputs,
    predictive_moments_classical,
    predictive_moments_extended,
    regression_moments_classical,
    regression_moments_extended,
)
from .errors import DomainError, ShapeError

VARIANTS = ("classical", "extended")
RATIO_MODES = ("pointwise", "means")


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    variant: str
    size: int
    rmse: float
    epistemic_coverage: float
    total_coverage: float
    variance_ratio: float
    # synthetic data only: scored against the noise-free regression function
    truth_rmse: float | None = None
    truth_epistemic_coverage: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}")
        for name in ("epistemic_coverage", "total_coverage"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise DomainError(f"{name} outside [0, 1]")
        if self.rmse < 0 or self.variance_ratio < 0:
            raise DomainError("rmse and variance ratio must be non-negative")


def _as_2d(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 1-D or 2-D, got shape {a.shape}")
    return a


def rmse(predictions, targets) -> float:
    p = _as_2d(predictions, "predictions")
    t = _as_2d(targets, "targets")
    if p.shape != t.shape:
        raise ShapeError(f"predictions {p.shape} vs targets {t.shape}")
    if p.size == 0:
        raise DomainError("rmse of empty input")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def interval_halfwidth_factor(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    if level == 0.95:
        return 1.96
    return NormalDist().inv_cdf(0.5 + level / 2)


def coverage(means, variances, targets, level: float = 0.95) -> float:
    """Share of targets inside ``mean +/- z*sqrt(var)``, averaged over output components."""
    m = _as_2d(means, "means")
    v = _as_2d(variances, "variances")
    t = _as_2d(targets, "targets")
    if not m.shape == v.shape == t.shape:
        raise ShapeError(f"shapes differ: means {m.shape}, variances {v.shape}, targets {t.shape}")
    if m.size == 0:
        raise DomainError("coverage of empty input")
    if np.any(v < 0):
        raise DomainError("negative variance")
    z = interval_halfwidth_factor(level)
    inside = np.abs(t - m) <= z * np.sqrt(v)
    return float(np.mean(inside))


def variance_ratio(epistemic_vars, aleatoric_vars, mode: str = "pointwise") -> float:
    """Epistemic over aleatoric variance on a test set.

    ``"pointwise"`` averages the per-point ratios; ``"means"`` divides the
    average epistemic variance by the average aleatoric variance.
    """
    e = np.asarray(epistemic_vars, dtype=np.float64).reshape(-1)
    a = np.asarray(aleatoric_vars, dtype=np.float64).reshape(-1)
    if e.shape != a.shape:
        raise ShapeError(f"epistemic {e.shape} vs aleatoric {a.shape}")
    if e.size == 0:
        raise DomainError("variance ratio of empty input")
    if np.any(a <= 0):
        raise DomainError("aleatoric variances must be strictly positive")
    if mode == "pointwise":
        return float(np.mean(e / a))
    if mode == "means":
        return float(np.mean(e) / np.mean(a))
    raise DomainError(f"unknown ratio mode {mode!r}")


def evaluate(ensemble, gammas, test, dataset: str = "", ratio_mode: str = "pointwise",
             variants=VARIANTS) -> list[EvalReport]:
    """Score the ensemble on ``test`` for each requested variant.

    Epistemic coverage uses the regression-function moments, total coverage the
    predictive moments; both against the noisy targets. When ``test.truth`` is
    present, RMSE and epistemic coverage against the noise-free function are
    reported as well.
    """
    x = test.inputs
    y = test.targets
    p_y = y.shape[1]
    aleatoric = member_outputs(ensemble, x).variances.mean(axis=0)
    reports = []
    for variant in variants:
        if variant == "classical":
            reg = regression_moments_classical(ensemble, x)
            pred = predictive_moments_classical(ensemble, x)
        elif variant == "extended":
            reg = regression_moments_extended(ensemble, gammas, x)
            pred = predictive_moments_extended(ensemble, gammas, x)
        else:
            raise DomainError(f"unknown variant {variant!r}")
        epi = reg.variances()
        per_point_epi = epi.sum(axis=1) / p_y
        truth_rmse = truth_cov = None
        if test.truth is not None:
            truth_rmse = rmse(reg.mean, test.truth)
            truth_cov = coverage(reg.mean, epi, test.truth)
        reports.append(EvalReport(
            dataset=dataset or test.tag,
            variant=variant,
            size=len(ensemble),
            rmse=rmse(reg.mean, y),
            epistemic_coverage=coverage(reg.mean, epi, y),
            total_coverage=coverage(pred.mean, pred.variances(), y),
            variance_ratio=variance_ratio(per_point_epi, aleatoric, ratio_mode),
            truth_rmse=truth_rmse,
            truth_epistemic_coverage=truth_cov,
        ))
    return reports
