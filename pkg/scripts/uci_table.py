"""UCI benchmarks with ensembles of 5 and 10 members, merged into one table.

Download the data files into ``data/`` first (or pass ``--data-dir``):
qsar_aquatic_toxicity.csv, yacht_hydrodynamics.data, blogData_train.csv,
YearPredictionMSD.txt.

    python3 scripts/uci_table.py --datasets qsar yacht
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from bayesian_deep_ensembles import experiment as ex

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--datasets", nargs="+", default=["qsar", "yacht", "blog", "msd"])
    ap.add_argument("--sizes", type=int, nargs="+", default=[5, 10])
    ap.add_argument("--data-dir", help="directory holding the raw files")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="runs/uci")
    args = ap.parse_args()

    reports = []
    for name in args.datasets:
        cfg = ex.load_config(CONFIGS / f"{name}.cfg")
        if args.data_dir:
            cfg = replace(cfg, path=str(Path(args.data_dir) / Path(cfg.path).name))
        if not Path(cfg.path).is_file():
            print(f"skipping {name}: {cfg.path} not found", file=sys.stderr)
            continue
        for size in args.sizes:
            out = Path(args.out) / f"{name}_L{size}"
            res = ex.run_experiment(replace(cfg, ensemble_size=size), out, args.seed, args.threads)
            reports += res.reports
    if reports:
        text = ex.report_table(reports)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "table.tsv").write_text(text)
        print(text, end="")


if __name__ == "__main__":
    main()
