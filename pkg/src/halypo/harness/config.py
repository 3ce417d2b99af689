"""Run configuration: JSON schema, parsing and fingerprinting."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..core import DifferentiableGame
from ..errors import ConfigError
from ..games import game_from_dict
from ..optimizers import OptimizerConfig, Schedule

SCHEMA_VERSION = 1


def load_schema() -> dict:
    return json.loads(resources.files("halypo.data").joinpath("run_config.schema.json").read_text())


@dataclass
class RunConfig:
    game: dict
    optimizer: OptimizerConfig
    n_steps: int
    theta0: list | dict
    log_every: int = 1
    name: str = "run"
    outputs: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    def build_game(self) -> DifferentiableGame:
        try:
            return game_from_dict(self.game)
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc), "game") from exc

    def initial_theta(self, game: DifferentiableGame, seed: int | None = None) -> np.ndarray:
        if isinstance(self.theta0, list):
            theta = np.asarray(self.theta0, dtype=float)
            if theta.shape != (game.dim,):
                raise ConfigError(f"expected {game.dim} entries, got {theta.size}", "theta0")
            return theta
        init = self.theta0
        seed = init.get("seed", 0) if seed is None else seed
        rng = np.random.default_rng(seed)
        return float(init["random_gaussian"]["scale"]) * rng.standard_normal(game.dim)

    def with_seed(self, seed: int) -> "RunConfig":
        raw = json.loads(json.dumps(self.raw))
        if isinstance(raw["theta0"], dict):
            raw["theta0"]["seed"] = seed
        return parse_config(raw)

    def fingerprint(self) -> str:
        return config_fingerprint(self.raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_fingerprint(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode("ascii")).hexdigest()


def _schedule(d: dict) -> Schedule:
    return Schedule(**d)


def parse_config(raw: dict) -> RunConfig:
    """Validate a config dict and build a RunConfig.

    Schema violations raise ConfigError naming the offending field.
    """
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(exc.message, path) from None

    opt = dict(raw.get("optimizer", {}))
    sched = opt.pop("schedule", {})
    try:
        optimizer = OptimizerConfig(schedule=_schedule(sched), **opt)
    except TypeError as exc:
        raise ConfigError(str(exc), "optimizer") from None

    cfg = RunConfig(
        game=raw["game"],
        optimizer=optimizer,
        n_steps=int(raw["n_steps"]),
        theta0=raw["theta0"],
        log_every=int(raw.get("log_every", 1)),
        name=raw.get("name", "run"),
        outputs=raw.get("outputs", {}),
        raw=raw,
    )
    game = cfg.build_game()
    cfg.initial_theta(game)
    return cfg


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
    return parse_config(raw)
