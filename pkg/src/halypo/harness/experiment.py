"""Single runs and seed sweeps driven by a RunConfig."""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import HalypoError
from ..metrics import summarize
from ..optimizers import TrajectoryLog, run_trajectory
from .config import RunConfig
from .persist import persist_log
from .plot import render_plot

SUMMARY_FIELDS = ("steady_state_V", "mean_alignment", "gcr", "gap_decay_rate", "convergence_step")


@dataclass
class RunResult:
    log: TrajectoryLog
    wall_time: float
    seed: int | None = None
    files: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.log.error is None

    def meta(self) -> dict:
        return {
            "fingerprint": self.log.fingerprint,
            "seed": self.seed,
            "steps": len(self.log.records),
            "wall_time_s": self.wall_time,
            "field_evals": self.log.field_evals,
            "error": self.log.error,
        }


def run_experiment(config: RunConfig, seed: int | None = None) -> RunResult:
    """Run one trajectory; the log carries the config fingerprint and summary."""
    game = config.build_game()
    theta0 = config.initial_theta(game, seed)
    t0 = time.perf_counter()
    log = run_trajectory(game, theta0, config.optimizer, config.n_steps)
    wall = time.perf_counter() - t0
    log.fingerprint = config.fingerprint()
    if log.records:
        log.summary = summarize(log)
    return RunResult(log=log, wall_time=wall, seed=seed)


def write_outputs(result: RunResult, config: RunConfig, out_dir) -> dict:
    """Persist CSV, JSON, an SVG of V, and a meta file with timings under ``out_dir``."""
    out = Path(out_dir)
    names = {"csv": "trajectory.csv", "json": "trajectory.json", "svg": "gap.svg"}
    names.update(config.outputs)
    files = {
        "csv": persist_log(result.log, "csv", out / names["csv"], config.log_every),
        "json": persist_log(result.log, "json", out / names["json"]),
    }
    recs = result.log.records
    if len(recs) >= 2:
        files["svg"] = out / names["svg"]
        render_plot(
            {config.name: ([r.k for r in recs], [r.V for r in recs])},
            files["svg"],
            logy=True,
            title=f"{config.name}: rationality gap",
            ylabel="V",
        )
    meta_path = out / "meta.json"
    meta_path.write_text(json.dumps(result.meta(), indent=1, sort_keys=True) + "\n")
    files["meta"] = meta_path
    result.files = {k: str(v) for k, v in files.items()}
    return result.files


def _aggregate(summaries: list[dict]) -> dict:
    agg = {}
    for name in SUMMARY_FIELDS:
        vals = [s[name] for s in summaries if s.get(name) is not None]
        if vals:
            arr = np.asarray(vals, dtype=float)
            agg[name] = {"mean": float(arr.mean()), "std": float(arr.std()), "count": len(vals)}
        else:
            agg[name] = {"mean": None, "std": None, "count": 0}
    return agg


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HALYPO_THREADS", "1")))
    except ValueError:
        return 1


def sweep(config: RunConfig, seeds) -> dict:
    """Run ``config`` once per seed and aggregate the summaries (mean, population std).

    Seeds only change a Gaussian initial point. Failed runs are counted and
    left out of the aggregate. ``HALYPO_THREADS`` caps the worker count.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")

    def one(seed):
        try:
            return run_experiment(config, seed)
        except HalypoError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=min(_threads(), len(seeds))) as pool:
        results = list(pool.map(one, seeds))

    per_seed, ok = [], []
    for seed, res in zip(seeds, results):
        if isinstance(res, Exception):
            per_seed.append({"seed": seed, "error": str(res), "summary": None})
            continue
        summary = res.log.summary.to_dict() if res.log.summary else None
        per_seed.append({"seed": seed, "error": res.log.error, "summary": summary})
        if res.ok and summary is not None:
            ok.append(summary)
    return {
        "fingerprint": config.fingerprint(),
        "n_seeds": len(seeds),
        "failures": len(seeds) - len(ok),
        "aggregate": _aggregate(ok),
        "runs": per_seed,
    }
