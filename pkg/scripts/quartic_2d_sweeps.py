"""Train-size and ensemble-size sweeps on the 2-D quartic task.

    python3 scripts/quartic_2d_sweeps.py --seeds 0 1 2 --out runs/quartic2d
"""

import argparse
from dataclasses import replace
from pathlib import Path

from bayesian_deep_ensembles import experiment as ex

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "quartic2d.cfg"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--train-sizes", type=int, nargs="+", default=[200, 400, 600, 1000])
    ap.add_argument("--ensemble-sizes", type=int, nargs="+", default=[1, 2, 5, 10])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="runs/quartic2d")
    args = ap.parse_args()

    cfg = ex.load_config(args.config)
    for seed in args.seeds:
        for axis, values, sub in (
            ("train_size", args.train_sizes, replace(cfg, ensemble_size=10)),
            # ensemble-size sweeps use a learning rate of one over the training size
            ("ensemble_size", args.ensemble_sizes, replace(cfg, n_train=600, lr="1/N")),
        ):
            out = Path(args.out) / f"{axis}_seed{seed}"
            entries = ex.sweep(sub, axis, values, out, master_seed=seed, threads=args.threads)
            print(f"# seed {seed}, {axis} ({out / 'sweep.svg'})")
            print(ex.sweep_table(axis, entries), end="")


if __name__ == "__main__":
    main()
