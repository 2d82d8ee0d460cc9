"""Independently trained ensembles of heteroscedastic networks."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .datasets import NormStats
from .errors import ConfigError, EnsembleError, TrainingError
from .hetero_model import HeteroNet, TrainConfig, features, train_map
from .nn_core import params_from_dict, params_to_dict

MANIFEST_FORMAT = "bde-ensemble/1"


@dataclass(frozen=True)
class Ensemble:
    members: tuple[HeteroNet, ...]
    cfg: TrainConfig
    seeds: tuple[int, ...]
    norm_stats: NormStats | None = None

    def __post_init__(self):
        if len(self.members) < 1:
            raise ConfigError("an ensemble needs at least one member")
        if len(self.seeds) != len(self.members):
            raise ConfigError("one seed per member required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("member seeds must be pairwise distinct")
        dims = {(m.p_x, m.p_y, m.p_eta) for m in self.members}
        if len(dims) != 1:
            raise ConfigError(f"members disagree on architecture: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def p_x(self) -> int:
        return self.members[0].p_x

    @property
    def p_y(self) -> int:
        return self.members[0].p_y

    @property
    def p_eta(self) -> int:
        return self.members[0].p_eta


def member_seeds(ensemble_seed: int, size: int) -> list[int]:
    return [ensemble_seed + i for i in range(size)]


def train_ensemble(data, cfg: TrainConfig, size: int, threads: int = 1,
                   norm_stats: NormStats | None = None) -> Ensemble:
    """Train ``size`` members on the same data, member ``l`` seeded with ``cfg.seed + l``.

    Members share nothing mutable, so ``threads > 1`` yields exactly the same
    ensemble as serial training.
    """
    if size < 1:
        raise ConfigError(f"ensemble size must be >= 1, got {size}")
    seeds = member_seeds(cfg.seed, size)

    def train_one(index):
        try:
            return train_map(data, replace(cfg, seed=seeds[index]))
        except TrainingError as exc:
            raise EnsembleError(f"member {index} (seed {seeds[index]}): {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            members = list(pool.map(train_one, range(size)))
    else:
        members = [train_one(i) for i in range(size)]
    return Ensemble(tuple(members), cfg, tuple(seeds), norm_stats)


def penultimate_features(member: HeteroNet, x) -> np.ndarray:
    """Activations feeding the mean head, length ``p_eta`` per input."""
    return features(member, x)


def _cfg_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["hidden"] = list(cfg.hidden)
    return d


def _cfg_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    d["hidden"] = tuple(d["hidden"])
    return TrainConfig(**d)


def save_ensemble(ensemble: Ensemble, directory) -> Path:
    """Write one parameter file per member plus ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, member in enumerate(ensemble.members):
        name = f"member_{i:03d}.json"
        payload = {
            "variance_floor": member.variance_floor,
            "trunk": params_to_dict(member.trunk),
            "mean_head": params_to_dict(member.mean_head),
            "var_head": params_to_dict(member.var_head),
        }
        (directory / name).write_text(json.dumps(payload))
        files.append(name)
    manifest = {
        "format": MANIFEST_FORMAT,
        "size": len(ensemble),
        "seeds": list(ensemble.seeds),
        "train_config": _cfg_to_dict(ensemble.cfg),
        "norm_stats": None if ensemble.norm_stats is None else ensemble.norm_stats.to_dict(),
        "members": files,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_ensemble(directory) -> Ensemble:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"unsupported manifest format {manifest.get('format')!r}")
    members = []
    for name in manifest["members"]:
        payload = json.loads((directory / name).read_text())
        members.append(HeteroNet(
            params_from_dict(payload["trunk"]),
            params_from_dict(payload["mean_head"]),
            params_from_dict(payload["var_head"]),
            payload["variance_floor"],
        ))
    stats = manifest["norm_stats"]
    return Ensemble(
        tuple(members),
        _cfg_from_dict(manifest["train_config"]),
        tuple(manifest["seeds"]),
        None if stats is None else NormStats.from_dict(stats),
    )
