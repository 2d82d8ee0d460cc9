"""Quartic 1-D experiment over several master seeds, with coverage medians.

    python3 scripts/quartic_1d.py --seeds 0 1 2 3 4 --out runs/quartic1d
"""

import argparse
from pathlib import Path

import numpy as np

from bayesian_deep_ensembles import experiment as ex

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "quartic1d.cfg"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--out", default="runs/quartic1d")
    args = ap.parse_args()

    cfg = ex.load_config(args.config)
    rows = {"classical": [], "extended": []}
    for s in args.seeds:
        res = ex.run_experiment(cfg, Path(args.out) / f"seed{s}", master_seed=s)
        for r in res.reports:
            rows[r.variant].append((r.truth_epistemic_coverage, r.total_coverage, r.truth_rmse))
        print(f"seed {s}: " + ", ".join(
            f"{r.variant} truth-cov {r.truth_epistemic_coverage:.3f} total {r.total_coverage:.3f}"
            for r in res.reports))
    for variant, vals in rows.items():
        truth, total, err = np.median(np.array(vals), axis=0)
        print(f"median {variant}: truth coverage {truth:.3f}, total coverage {total:.3f}, truth rmse {err:.3f}")


if __name__ == "__main__":
    main()
