"""Config-driven experiments: data, ensemble training, gammas, evaluation, artifacts.

Seed scheme: a master seed ``m`` fans out to independent streams through
``SeedSequence([m, k])`` with ``k = 0`` (training data), ``1`` (test data),
``2`` (train/test split) and ``3`` (ensemble). Member ``l`` of the ensemble is
seeded with ``ensemble_seed + l``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import datasets as ds
from .bayes_post import GammaSet, compute_gammas, predictive_moments_classical, separation_ratio, \
    predictive_moments_extended, regression_moments_classical, regression_moments_extended
from .ensemble import Ensemble, load_ensemble, save_ensemble, train_ensemble
from .errors import ConfigError
from .hetero_model import TrainConfig
from .metrics import RATIO_MODES, VARIANTS, EvalReport, evaluate
from .plotting import BandPanel, LinePanel, write_svg

log = logging.getLogger(__name__)

DATASET_KINDS = ("quartic1d", "quartic2d", "file")
STREAM_TRAIN_DATA, STREAM_TEST_DATA, STREAM_SPLIT, STREAM_ENSEMBLE = range(4)
REPORT_COLUMNS = ("dataset", "variant", "L", "rmse", "epistemic_cov", "total_cov", "ratio")
TRUTH_COLUMNS = ("dataset", "variant", "L", "truth_rmse", "truth_epistemic_cov")
SWEEP_AXES = ("train_size", "ensemble_size")


class StageError(RuntimeError):
    """Failure inside one stage of an experiment; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    """Every field except ``dataset`` has a default.

    ``lr`` and ``lam`` are expressions: a number (``1e-3``), a fraction
    (``1/200``) or ``1/N``, which resolves to one over the training size.
    """

    dataset: str
    name: str = ""
    n_train: int = 200
    n_test: int = 1000
    noise_std: float | None = None
    path: str | None = None
    target_column: int = -1
    delimiter: str = ","
    header: bool = False
    train_fraction: str = "0.8"
    normalize_inputs: bool | None = None
    hidden: tuple[int, ...] = (128, 64, 32)
    epochs: int = 60
    batch_size: int = 64
    lr: str = "1e-3"
    lam: str = "1/N"
    schedule: str = "step"
    schedule_epochs: int = 5
    schedule_factor: float | None = None
    ensemble_size: int = 10
    seed: int = 0
    threads: int = 1
    variance_floor: float = 1e-6
    ratio_mode: str = "pointwise"
    variant: str = "both"

    def __post_init__(self):
        if self.dataset not in DATASET_KINDS:
            raise ConfigError(f"dataset must be one of {DATASET_KINDS}, got {self.dataset!r}")
        if self.dataset == "file" and not self.path:
            raise ConfigError("dataset = file requires a path")
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be >= 1")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be >= 1")
        if self.ratio_mode not in RATIO_MODES:
            raise ConfigError(f"ratio_mode must be one of {RATIO_MODES}")
        if self.variant not in (*VARIANTS, "both"):
            raise ConfigError("variant must be classical, extended or both")
        resolve_rate(self.lr, 1)
        resolve_rate(self.lam, 1)

    @property
    def dataset_id(self) -> str:
        return self.name or (Path(self.path).stem if self.dataset == "file" else self.dataset)

    @property
    def variants(self) -> tuple[str, ...]:
        return VARIANTS if self.variant == "both" else (self.variant,)


def resolve_rate(expr, n: int) -> float:
    text = str(expr).strip().replace(" ", "")
    if text.upper() == "1/N":
        return 1.0 / n
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse rate {expr!r}") from None


def _parse_bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _convert(name: str, value: str):
    if name == "hidden":
        return tuple(int(p) for p in value.replace(" ", "").split(",") if p)
    if name in ("noise_std", "schedule_factor"):
        return None if value.lower() in ("", "none") else float(value)
    if name == "normalize_inputs":
        return None if value.lower() in ("", "auto", "none") else _parse_bool(value)
    if name == "header":
        return _parse_bool(value)
    if name == "path":
        return value or None
    if name in ("n_train", "n_test", "target_column", "epochs", "batch_size", "schedule_epochs",
                "ensemble_size", "seed", "threads"):
        return int(value)
    if name == "variance_floor":
        return float(value)
    return value


def parse_config(text: str, base_dir=None, overrides: dict | None = None) -> ExperimentConfig:
    """Parse line-oriented ``key = value`` text; ``#`` starts a comment."""
    known = {f.name for f in fields(ExperimentConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "dataset" not in values:
        raise ConfigError("config must set 'dataset'")
    if values.get("path") and base_dir is not None and not Path(values["path"]).is_absolute():
        values["path"] = str((Path(base_dir) / values["path"]).resolve())
    return ExperimentConfig(**values)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), path.parent, overrides)


def derive_seed(master: int, stream: int) -> int:
    return int(np.random.SeedSequence([master, stream]).generate_state(1)[0])


def prepare_data(cfg: ExperimentConfig, master_seed: int | None = None):
    """Build normalized ``(train, test, stats)`` for a config; deterministic per seed."""
    seed = cfg.seed if master_seed is None else master_seed
    if cfg.dataset in ("quartic1d", "quartic2d"):
        gen = ds.gen_quartic_1d if cfg.dataset == "quartic1d" else ds.gen_quartic_2d
        kw = {} if cfg.noise_std is None else {"noise_std": cfg.noise_std}
        train = gen(cfg.n_train, derive_seed(seed, STREAM_TRAIN_DATA), **kw)
        test = gen(cfg.n_test, derive_seed(seed, STREAM_TEST_DATA), **kw)
        norm_inputs = bool(cfg.normalize_inputs)
    else:
        delim = {"whitespace": None, "semicolon": ";", "tab": "\t", "comma": ","}.get(
            cfg.delimiter, cfg.delimiter)
        full = ds.load_delimited(cfg.path, cfg.target_column, delim, cfg.header, cfg.dataset_id)
        train, test = ds.split(full, resolve_rate(cfg.train_fraction, 1), derive_seed(seed, STREAM_SPLIT))
        norm_inputs = True if cfg.normalize_inputs is None else cfg.normalize_inputs
    train, test, stats = ds.normalize(train, test, inputs=norm_inputs)
    return train, test, stats


def train_config(cfg: ExperimentConfig, n_train: int, master_seed: int | None = None) -> TrainConfig:
    seed = cfg.seed if master_seed is None else master_seed
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=min(cfg.batch_size, n_train),
        lr=resolve_rate(cfg.lr, n_train),
        lam=resolve_rate(cfg.lam, n_train),
        schedule=cfg.schedule,
        schedule_epochs=cfg.schedule_epochs,
        schedule_factor=cfg.schedule_factor,
        seed=derive_seed(seed, STREAM_ENSEMBLE) % (2**31),
        hidden=tuple(cfg.hidden),
        variance_floor=cfg.variance_floor,
    )


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def _sort_key(r: EvalReport):
    return (r.dataset, r.size, r.variant)


def report_table(reports) -> str:
    """Tab-separated table, one row per report, sorted by (dataset, L, variant)."""
    reports = list(reports)
    if not reports:
        raise ConfigError("no reports to tabulate")
    lines = ["\t".join(REPORT_COLUMNS)]
    for r in sorted(reports, key=_sort_key):
        lines.append("\t".join([r.dataset, r.variant, str(r.size), _fmt(r.rmse),
                                _fmt(r.epistemic_coverage), _fmt(r.total_coverage),
                                _fmt(r.variance_ratio)]))
    return "\n".join(lines) + "\n"


def truth_table(reports) -> str:
    lines = ["\t".join(TRUTH_COLUMNS)]
    for r in sorted(reports, key=_sort_key):
        lines.append("\t".join([r.dataset, r.variant, str(r.size), _fmt(r.truth_rmse),
                                _fmt(r.truth_epistemic_coverage)]))
    return "\n".join(lines) + "\n"


def parse_report_table(text: str) -> list[EvalReport]:
    rows = [line.split("\t") for line in text.strip().splitlines()]
    if not rows or tuple(rows[0]) != REPORT_COLUMNS:
        raise ConfigError("not a report table: header mismatch")
    return [
        EvalReport(d, v, int(n), float(r), float(e), float(t), float(q))
        for d, v, n, r, e, t, q in rows[1:]
    ]


@dataclass
class RunResult:
    reports: list[EvalReport]
    ensemble: Ensemble
    gammas: GammaSet
    out_dir: Path


def write_reports(reports, out_dir: Path) -> None:
    (out_dir / "report.tsv").write_text(report_table(reports))
    if all(r.truth_rmse is not None for r in reports):
        (out_dir / "truth.tsv").write_text(truth_table(reports))


def band_figure(ensemble: Ensemble, gammas: GammaSet, test, stats, path, dataset: str = "",
                num: int = 300) -> Path:
    """Mean with 1.96-sigma bands (total and epistemic) for both variants on a 1-D grid."""
    lo, hi = float(test.inputs.min()), float(test.inputs.max())
    grid = np.linspace(lo, hi, num)[:, None]
    truth = None
    if dataset == "quartic1d":
        truth = (ds.quartic_1d(stats.inverse_inputs(grid))[:, 0] - stats.y_mean[0]) / stats.y_std[0]
    panels = []
    for variant, reg_fn, pred_fn in (
        ("classical", lambda x: regression_moments_classical(ensemble, x),
         lambda x: predictive_moments_classical(ensemble, x)),
        ("extended", lambda x: regression_moments_extended(ensemble, gammas, x),
         lambda x: predictive_moments_extended(ensemble, gammas, x)),
    ):
        for label, mom, pts in (("total", pred_fn(grid), (test.inputs[:, 0], test.targets[:, 0])),
                                ("epistemic", reg_fn(grid), None)):
            mean = mom.mean[:, 0]
            half = 1.96 * np.sqrt(mom.variances()[:, 0])
            panels.append(BandPanel(f"{variant}: {label}", grid[:, 0], mean, mean - half,
                                    mean + half, pts, truth))
    return write_svg(panels, path)


def run_experiment(cfg: ExperimentConfig, out_dir, master_seed: int | None = None,
                   threads: int | None = None, plot: bool = True) -> RunResult:
    """Train, post-process, evaluate and write every artifact to ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = cfg.threads if threads is None else threads
    try:
        train, test, stats = prepare_data(cfg, master_seed)
    except Exception as exc:
        raise StageError("data", exc) from exc
    tcfg = train_config(cfg, len(train), master_seed)
    try:
        ensemble = train_ensemble(train, tcfg, cfg.ensemble_size, threads, stats)
    except Exception as exc:
        raise StageError("train", exc) from exc
    save_ensemble(ensemble, out_dir / "ensemble")
    try:
        gammas = compute_gammas(ensemble, train)
    except Exception as exc:
        raise StageError("gamma", exc) from exc
    gammas.save(out_dir / "gammas.json")
    sep = separation_ratio(ensemble, gammas)
    caveats = out_dir / "caveats.txt"
    if sep < 1.0:
        msg = (f"member separation ratio {sep:.3g} < 1: members overlap relative to their "
               "gamma spread, so the mixture KL approximation is loose\n")
        log.warning(msg.strip())
        caveats.write_text(msg)
    elif caveats.exists():
        caveats.unlink()
    try:
        reports = evaluate(ensemble, gammas, test, cfg.dataset_id, cfg.ratio_mode, cfg.variants)
    except Exception as exc:
        raise StageError("eval", exc) from exc
    write_reports(reports, out_dir)
    if plot and ensemble.p_x == 1:
        band_figure(ensemble, gammas, test, stats, out_dir / "figure.svg", cfg.dataset)
    log.info("run finished: %s", out_dir)
    return RunResult(reports, ensemble, gammas, out_dir)


def evaluate_saved(cfg: ExperimentConfig, out_dir, master_seed: int | None = None) -> list[EvalReport]:
    """Reload ensemble and gammas from ``out_dir`` and score them again."""
    out_dir = Path(out_dir)
    _, test, _ = prepare_data(cfg, master_seed)
    ensemble = load_ensemble(out_dir / "ensemble")
    gammas = GammaSet.load(out_dir / "gammas.json")
    return evaluate(ensemble, gammas, test, cfg.dataset_id, cfg.ratio_mode, cfg.variants)


@dataclass
class SweepEntry:
    value: int
    reports: list[EvalReport] | None
    error: str | None = None


def sweep(cfg: ExperimentConfig, axis: str, values, out_dir, master_seed: int | None = None,
          threads: int | None = None) -> list[SweepEntry]:
    """One experiment per value of ``axis``; failures are recorded and the sweep moves on."""
    values = [int(v) for v in values]
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    if values != sorted(values):
        raise ConfigError("sweep values must be ascending")
    if axis == "train_size" and cfg.dataset == "file":
        raise ConfigError("train_size sweeps need a synthetic dataset")
    out_dir = Path(out_dir)
    entries = []
    for v in values:
        field = "n_train" if axis == "train_size" else "ensemble_size"
        sub = replace(cfg, **{field: v})
        try:
            res = run_experiment(sub, out_dir / f"{axis}_{v}", master_seed, threads, plot=False)
            entries.append(SweepEntry(v, res.reports))
        except StageError as exc:
            log.warning("sweep %s=%d failed: %s", axis, v, exc)
            entries.append(SweepEntry(v, None, str(exc)))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.tsv").write_text(sweep_table(axis, entries))
    sweep_figure(axis, entries, out_dir / "sweep.svg")
    return entries


def sweep_table(axis: str, entries) -> str:
    cols = (axis, "variant", "rmse", "epistemic_cov", "total_cov", "ratio", "truth_rmse",
            "truth_epistemic_cov", "error")
    lines = ["\t".join(cols)]
    for e in entries:
        if e.reports is None:
            lines.append("\t".join([str(e.value), "", "", "", "", "", "", "", e.error or ""]))
            continue
        for r in e.reports:
            lines.append("\t".join([str(e.value), r.variant, _fmt(r.rmse), _fmt(r.epistemic_coverage),
                                    _fmt(r.total_coverage), _fmt(r.variance_ratio), _fmt(r.truth_rmse),
                                    _fmt(r.truth_epistemic_coverage), ""]))
    return "\n".join(lines) + "\n"


def sweep_figure(axis: str, entries, path) -> Path | None:
    ok = [e for e in entries if e.reports is not None]
    if not ok:
        return None
    cov_series, rmse_series = {}, {}
    for variant in VARIANTS:
        xs, cov, err = [], [], []
        for e in ok:
            rep = next((r for r in e.reports if r.variant == variant), None)
            if rep is None:
                continue
            xs.append(e.value)
            truth = rep.truth_epistemic_coverage
            cov.append(rep.epistemic_coverage if truth is None else truth)
            err.append(rep.rmse if rep.truth_rmse is None else rep.truth_rmse)
        if xs:
            cov_series[variant] = (xs, cov)
            rmse_series[variant] = (xs, err)
    return write_svg([LinePanel("epistemic coverage", axis, cov_series),
                      LinePanel("rmse", axis, rmse_series)], path)
