"""Command line entry point: ``bde <subcommand> --config FILE --out DIR``.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 training error,
5 post-processing or evaluation error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .bayes_post import GammaSet, compute_gammas, sample_predictive, sample_regression
from .ensemble import load_ensemble, save_ensemble, train_ensemble
from .errors import ConfigError

log = logging.getLogger("bde")

EXIT_USAGE, EXIT_DATA, EXIT_TRAIN, EXIT_POST = 2, 3, 4, 5
STAGE_EXIT = {"data": EXIT_DATA, "train": EXIT_TRAIN, "gamma": EXIT_POST, "eval": EXIT_POST}


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="key = value experiment file")
    p.add_argument("--out", help="output directory (default: runs/<dataset>)")
    p.add_argument("--seed", type=int, help="master seed, overrides the config")
    p.add_argument("--threads", type=int, help="worker threads for member training")
    p.add_argument("--variant", choices=("classical", "extended", "both"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bde", description="Bayesian post-processing of deep ensembles")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run", help="data, training, gammas, evaluation and plots in one go"))
    _common(sub.add_parser("gen-data", help="write the train/test data of a config as CSV"))
    _common(sub.add_parser("train", help="train the ensemble and save its manifest"))
    _common(sub.add_parser("gamma", help="compute per-member gammas for a saved ensemble"))
    _common(sub.add_parser("eval", help="score a saved ensemble and gammas"))

    p = sub.add_parser("sample", help="draw from the posterior at one input")
    _common(p)
    p.add_argument("--x", required=True, help="comma-separated (normalized) input vector")
    p.add_argument("--n", type=int, default=1000, help="number of draws")
    p.add_argument("--kind", choices=("regression", "predictive"), default="predictive")

    p = sub.add_parser("sweep", help="repeat an experiment over train or ensemble sizes")
    _common(p)
    p.add_argument("--axis", choices=ex.SWEEP_AXES, required=True)
    p.add_argument("--values", required=True, help="comma-separated ascending integers")

    p = sub.add_parser("report", help="merge report tables into one sorted table")
    p.add_argument("tables", nargs="+", help="report.tsv files")
    p.add_argument("--out", help="write the merged table here instead of stdout")
    return parser


def _load(args):
    overrides = {"seed": args.seed, "threads": args.threads, "variant": args.variant}
    cfg = ex.load_config(args.config, overrides)
    out = Path(args.out) if args.out else Path("runs") / cfg.dataset_id
    return cfg, out


def _write_csv(path: Path, data) -> None:
    cols = [f"x{i + 1}" for i in range(data.p_x)] + [f"y{j + 1}" for j in range(data.p_y)]
    table = np.hstack([data.inputs, data.targets])
    if data.truth is not None:
        cols += [f"truth{j + 1}" for j in range(data.p_y)]
        table = np.hstack([table, data.truth])
    np.savetxt(path, table, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def cmd_run(args) -> int:
    cfg, out = _load(args)
    result = ex.run_experiment(cfg, out)
    sys.stdout.write(ex.report_table(result.reports))
    return 0


def cmd_gen_data(args) -> int:
    cfg, out = _load(args)
    try:
        train, test, stats = ex.prepare_data(cfg)
    except Exception as exc:
        raise ex.StageError("data", exc) from exc
    out.mkdir(parents=True, exist_ok=True)
    # written in the original (un-normalized) units
    for name, d in (("train", train), ("test", test)):
        raw = type(d)(stats.inverse_inputs(d.inputs), stats.inverse_targets(d.targets),
                      None if d.truth is None else stats.inverse_targets(d.truth), d.tag)
        _write_csv(out / f"{name}.csv", raw)
    print(f"wrote {out / 'train.csv'} ({len(train)} rows) and {out / 'test.csv'} ({len(test)} rows)")
    return 0


def cmd_train(args) -> int:
    cfg, out = _load(args)
    try:
        train, _, stats = ex.prepare_data(cfg)
    except Exception as exc:
        raise ex.StageError("data", exc) from exc
    try:
        ens = train_ensemble(train, ex.train_config(cfg, len(train)), cfg.ensemble_size, cfg.threads, stats)
    except Exception as exc:
        raise ex.StageError("train", exc) from exc
    print(save_ensemble(ens, out / "ensemble"))
    return 0


def cmd_gamma(args) -> int:
    cfg, out = _load(args)
    try:
        train, _, _ = ex.prepare_data(cfg)
    except Exception as exc:
        raise ex.StageError("data", exc) from exc
    try:
        gammas = compute_gammas(load_ensemble(out / "ensemble"), train)
    except Exception as exc:
        raise ex.StageError("gamma", exc) from exc
    gammas.save(out / "gammas.json")
    for i, g in enumerate(gammas.gammas):
        print(f"member {i}: gamma = {g!r}")
    return 0


def cmd_eval(args) -> int:
    cfg, out = _load(args)
    try:
        reports = ex.evaluate_saved(cfg, out)
    except Exception as exc:
        raise ex.StageError("eval", exc) from exc
    ex.write_reports(reports, out)
    sys.stdout.write(ex.report_table(reports))
    return 0


def cmd_sample(args) -> int:
    cfg, out = _load(args)
    x = np.array([float(v) for v in args.x.split(",")])
    ens = load_ensemble(out / "ensemble")
    variant = cfg.variant if args.variant is None else args.variant
    if variant == "classical":
        gammas = np.zeros(len(ens))
    else:
        gammas = GammaSet.load(out / "gammas.json")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5A]))
    draw = sample_regression if args.kind == "regression" else sample_predictive
    samples = draw(ens, gammas, x, rng, size=args.n)
    path = out / f"samples_{args.kind}.csv"
    np.savetxt(path, samples, delimiter=",", fmt="%.17g")
    print(f"{args.n} draws written to {path}; mean {samples.mean(axis=0)}, var {samples.var(axis=0)}")
    return 0


def cmd_sweep(args) -> int:
    cfg, out = _load(args)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --values {args.values!r}") from None
    entries = ex.sweep(cfg, args.axis, values, out)
    sys.stdout.write(ex.sweep_table(args.axis, entries))
    return 0


def cmd_report(args) -> int:
    reports = []
    for t in args.tables:
        reports += ex.parse_report_table(Path(t).read_text())
    text = ex.report_table(reports)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {
    "run": cmd_run, "gen-data": cmd_gen_data, "train": cmd_train, "gamma": cmd_gamma,
    "eval": cmd_eval, "sample": cmd_sample, "sweep": cmd_sweep, "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ex.StageError as exc:
        print(f"error in stage {exc}", file=sys.stderr)
        return STAGE_EXIT.get(exc.stage, EXIT_POST)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error in stage config: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
