"""Post-processing of a trained ensemble into a Gaussian-mixture posterior.

Only the last linear unit of each member's mean, ``W_l`` (``p_y x p_eta``), is
treated as random: ``W ~ N(W_l, gamma_l I)`` around the trained values. The
variance head is never randomized. ``gamma_l`` maximizes the per-member ELBO
``a_l + b_l gamma + c_l log(gamma)`` in closed form.

Sums over ensemble members are taken in sorted order so every moment is
bitwise invariant to member order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError
from .hetero_model import HeteroNet, features, predict

GAMMA_FORMAT = "bde-gammas/1"


@dataclass(frozen=True)
class GammaSet:
    gammas: np.ndarray
    coeffs: np.ndarray  # (L, 3) rows of (a_l, b_l, c_l)
    lam: float
    n: int

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=np.float64)
        c = np.asarray(self.coeffs, dtype=np.float64).reshape(-1, 3)
        if g.shape != (c.shape[0],):
            raise ShapeError("one (a, b, c) row per gamma required")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "coeffs", c)

    def __len__(self) -> int:
        return self.gammas.shape[0]

    def to_dict(self) -> dict:
        return {
            "format": GAMMA_FORMAT,
            "lambda": self.lam,
            "n": self.n,
            "gammas": self.gammas.tolist(),
            "coeffs": self.coeffs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> GammaSet:
        if d.get("format") != GAMMA_FORMAT:
            raise DomainError(f"unsupported gamma format {d.get('format')!r}")
        return cls(np.array(d["gammas"]), np.array(d["coeffs"]), d["lambda"], d["n"])

    def save(self, path) -> None:
        # json floats are written with repr(), an exact float64 round trip
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> GammaSet:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class MomentPair:
    """Mean and covariance; shapes ``(p_y,)``/``(p_y, p_y)`` or batched with a leading ``n``."""

    mean: np.ndarray
    cov: np.ndarray

    def variances(self) -> np.ndarray:
        return np.diagonal(self.cov, axis1=-2, axis2=-1)


def _train_arrays(train_data):
    x = np.asarray(train_data.inputs, dtype=np.float64)
    y = np.asarray(train_data.targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] == 0:
        raise DomainError("training data is empty")
    return x, y


def _feature_energy(member: HeteroNet, x):
    """Per-point ``||h(x_i)||^2 / sigma^2(x_i)`` along with means and variances."""
    h = features(member, x)
    mean, var = predict(member, x)
    return np.sum(h * h, axis=1) / var, mean, var


def elbo_coeffs(member: HeteroNet, train_data, lam: float, size: int) -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` of member ``l``'s ELBO term ``a + b*gamma + c*log(gamma)``.

    ``size`` is the number of ensemble members L (it enters ``a`` through
    ``log L``). With ``lam == 0`` the prior is improper and ``a`` is ``-inf``.
    """
    x, y = _train_arrays(train_data)
    p_y, p_eta = member.p_y, member.p_eta
    p_w = p_y * p_eta
    energy, mean, var = _feature_energy(member, x)
    resid = y - mean
    nll = float(np.sum(np.sum(resid * resid, axis=1) / var + p_y * np.log(var)))
    w_sq = float(np.sum(member.mean_weight ** 2))
    with np.errstate(divide="ignore"):
        log_lam = np.log(lam)
    a = np.log(size) - 0.5 * (nll + lam * w_sq - p_w - p_w * log_lam)
    b = -0.5 * (p_y * float(np.sum(energy)) + p_w * lam)
    c = 0.5 * p_w
    return float(a), float(b), float(c)


def compute_gamma(member: HeteroNet, train_data, lam: float) -> float:
    """Closed-form ELBO maximizer ``-c/b = p_eta / (sum ||h||^2/sigma^2 + p_eta*lam)``."""
    _, b, c = elbo_coeffs(member, train_data, lam, 1)
    if not b < 0:
        raise DomainError("degenerate input: lambda is zero and every penultimate feature vanishes")
    return -c / b


def compute_gammas(ensemble, train_data, lam: float | None = None) -> GammaSet:
    """Per-member variances for the whole ensemble (post-processing step)."""
    lam = ensemble.cfg.lam if lam is None else lam
    size = len(ensemble)
    coeffs = [elbo_coeffs(m, train_data, lam, size) for m in ensemble.members]
    gammas = []
    for i, (_, b, c) in enumerate(coeffs):
        if not b < 0:
            raise DomainError(f"member {i}: degenerate input, lambda is zero and all features vanish")
        gammas.append(-c / b)
    return GammaSet(np.array(gammas), np.array(coeffs), float(lam), len(train_data.inputs))


def elbo_value(coeffs, gammas) -> float:
    """Mixture ELBO ``(1/L) sum_l (a_l + b_l gamma_l + c_l log gamma_l)``."""
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1, 3)
    gammas = np.asarray(gammas, dtype=np.float64).reshape(-1)
    if gammas.shape[0] != coeffs.shape[0]:
        raise ShapeError("one gamma per coefficient row required")
    if np.any(gammas <= 0):
        raise DomainError("gammas must be strictly positive")
    a, b, c = coeffs.T
    return float(np.mean(a + b * gammas + c * np.log(gammas)))


def grid_search_gamma(b: float, c: float, lo: float, hi: float, num: int = 200) -> float:
    """Numerical cross-check: best of a log-spaced grid for ``b*gamma + c*log(gamma)``."""
    grid = np.geomspace(lo, hi, num)
    return float(grid[np.argmax(b * grid + c * np.log(grid))])


def separation_ratio(ensemble, gammas) -> float:
    """Smallest ``||W_l - W_k||_F^2 / (p_w * (gamma_l + gamma_k))`` over member pairs.

    The closed-form KL treatment of the mixture is accurate when members sit
    far apart relative to their own spread, i.e. when this is well above 1.
    It is a diagnostic only; ``inf`` for a single member.
    """
    g = _gamma_array(gammas, len(ensemble))
    w = np.array([m.mean_weight.ravel() for m in ensemble.members])
    if len(w) < 2:
        return float("inf")
    d2 = np.sum((w[:, None, :] - w[None, :, :]) ** 2, axis=-1)
    scale = w.shape[1] * (g[:, None] + g[None, :])
    iu = np.triu_indices(len(w), 1)
    return float(np.min(d2[iu] / scale[iu]))


def _gamma_array(gammas, size: int) -> np.ndarray:
    g = gammas.gammas if isinstance(gammas, GammaSet) else np.asarray(gammas, dtype=np.float64)
    g = np.atleast_1d(g)
    if g.shape != (size,):
        raise ShapeError(f"expected {size} gammas, got shape {g.shape}")
    return g


def _sorted_mean(a: np.ndarray) -> np.ndarray:
    # order-independent mean over axis 0
    return np.sort(a, axis=0).sum(axis=0) / a.shape[0]


@dataclass
class MemberOutputs:
    means: np.ndarray  # (L, n, p_y)
    variances: np.ndarray  # (L, n)
    feats: np.ndarray  # (L, n, p_eta)
    single: bool


def member_outputs(ensemble, x) -> MemberOutputs:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    means, variances, feats = [], [], []
    for m in ensemble.members:
        h = features(m, xb)
        mu, var = predict(m, xb)
        means.append(mu)
        variances.append(var)
        feats.append(h)
    return MemberOutputs(np.array(means), np.array(variances), np.array(feats), single)


def _finish(mean, cov, single) -> MomentPair:
    if single:
        return MomentPair(mean[0], cov[0])
    return MomentPair(mean, cov)


def _spread(out: MemberOutputs):
    mean = _sorted_mean(out.means)
    dev = out.means - mean
    cov = _sorted_mean(dev[..., :, None] * dev[..., None, :])
    return mean, cov


def _eye(out: MemberOutputs):
    return np.eye(out.means.shape[-1])


def _aleatoric(out: MemberOutputs):
    return _sorted_mean(out.variances)


def _weight_term(out: MemberOutputs, g: np.ndarray):
    """``(1/L) sum_l gamma_l ||h_l(x)||^2``, the scalar in front of ``I_{p_y}``."""
    sq = np.sum(out.feats * out.feats, axis=-1)
    return _sorted_mean(g[:, None] * sq)


def regression_moments_classical(ensemble, x) -> MomentPair:
    out = member_outputs(ensemble, x)
    mean, cov = _spread(out)
    return _finish(mean, cov, out.single)


def predictive_moments_classical(ensemble, x) -> MomentPair:
    out = member_outputs(ensemble, x)
    mean, cov = _spread(out)
    cov = cov + _aleatoric(out)[:, None, None] * _eye(out)
    return _finish(mean, cov, out.single)


def regression_moments_extended(ensemble, gammas, x) -> MomentPair:
    """Classical spread plus ``(1/L) sum gamma_l J_l J_l^T`` with ``J_l J_l^T = ||h_l(x)||^2 I``."""
    g = _gamma_array(gammas, len(ensemble))
    out = member_outputs(ensemble, x)
    mean, cov = _spread(out)
    cov = cov + _weight_term(out, g)[:, None, None] * _eye(out)
    return _finish(mean, cov, out.single)


def predictive_moments_extended(ensemble, gammas, x) -> MomentPair:
    g = _gamma_array(gammas, len(ensemble))
    out = member_outputs(ensemble, x)
    mean, cov = _spread(out)
    cov = cov + (_weight_term(out, g) + _aleatoric(out))[:, None, None] * _eye(out)
    return _finish(mean, cov, out.single)


def mean_head_jacobian(member: HeteroNet, x) -> np.ndarray:
    """``d(W h(x)) / d vec(W)`` with row-major ``vec``; shape ``(p_y, p_y * p_eta)``."""
    h = features(member, np.asarray(x, dtype=np.float64))
    if h.ndim != 1:
        raise ShapeError("jacobian is defined for a single input vector")
    return np.kron(np.eye(member.p_y), h[None, :])


def _draw(ensemble, gammas, x, rng, size, with_noise, chunk=100_000):
    g = _gamma_array(gammas, len(ensemble))
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("samplers take a single input vector")
    out = member_outputs(ensemble, x)
    feats = out.feats[:, 0, :]  # (L, p_eta)
    sigma2 = out.variances[:, 0]
    weights = np.array([m.mean_weight for m in ensemble.members])  # (L, p_y, p_eta)
    n = 1 if size is None else int(size)
    L, p_y, p_eta = weights.shape
    samples = np.empty((n, p_y))
    picks = np.empty(n, dtype=np.int64)
    for start in range(0, n, chunk):
        k = min(chunk, n - start)
        # 1. member uniformly; 2. last-layer weights around that member's values; 3. evaluate
        ls = rng.integers(0, L, size=k)
        eps = rng.standard_normal((k, p_y, p_eta))
        w = weights[ls] + np.sqrt(g[ls])[:, None, None] * eps
        eta = np.einsum("kij,kj->ki", w, feats[ls])
        if with_noise:
            # 4. observation noise of the selected member
            eta = eta + np.sqrt(sigma2[ls])[:, None] * rng.standard_normal((k, p_y))
        samples[start : start + k] = eta
        picks[start : start + k] = ls
    if size is None:
        return samples[0], picks[0]
    return samples, picks


def sample_regression(ensemble, gammas, x, rng: np.random.Generator, size: int | None = None,
                      return_members: bool = False):
    """Draw(s) from the regression-function posterior at ``x``."""
    samples, picks = _draw(ensemble, gammas, x, rng, size, with_noise=False)
    return (samples, picks) if return_members else samples


def sample_predictive(ensemble, gammas, x, rng: np.random.Generator, size: int | None = None,
                      return_members: bool = False):
    """Draw(s) from the posterior predictive distribution at ``x``."""
    samples, picks = _draw(ensemble, gammas, x, rng, size, with_noise=True)
    return (samples, picks) if return_members else samples
