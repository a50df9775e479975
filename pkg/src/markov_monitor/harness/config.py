"""YAML experiment configuration.

Schema (all keys optional unless noted)::

    chain:                      # required; one of
      transition: [[...], ...]  #   inline matrix, one row per line
      preset: five-state | absorbing
      random: {states: 5, count: 30, seed: 7}
    loss: distance | unit | [[...], ...]     # default: preset's loss, else distance
    policies: [optimal, greedy, stationary, psgd-greedy, uniform, uniform-np]
    thresholds: [1, 10, 10]     # adds a fixed "threshold" policy
    query_cost: 1.4             # scalar c
    c_grid: {start: 0.1, stop: 3.0, step: 0.05}   # or an explicit list
    max_inter_query: 10         # N cap
    interval: 2                 # uniform sampling interval
    delta_grid: [1, 2, ..., 10] # default 1..N
    horizon: 100000
    episodes: 20
    seed: 0
    initial_state: 0
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from ..chain import ABSORBING_TRANSITION, FIVE_STATE_TRANSITION, ChainSpec, distance_loss, unit_loss
from ..errors import ChainError, ConfigError

KNOWN_POLICIES = ("optimal", "greedy", "stationary", "psgd-greedy", "uniform", "uniform-np", "threshold")
DEFAULT_POLICIES = ("optimal", "greedy", "stationary", "psgd-greedy", "uniform")

PRESETS = {
    "five-state": (FIVE_STATE_TRANSITION, "distance"),
    "absorbing": (ABSORBING_TRANSITION, "unit"),
}


@dataclass(frozen=True)
class RandomChains:
    states: int = 5
    count: int = 30
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    transition: Optional[np.ndarray] = None
    random: Optional[RandomChains] = None
    loss: object = "distance"
    policies: tuple = DEFAULT_POLICIES
    thresholds: Optional[tuple] = None
    query_cost: float = 1.4
    c_grid: tuple = ()
    max_inter_query: int = 10
    interval: int = 2
    delta_grid: tuple = ()
    horizon: int = 100_000
    episodes: int = 20
    seed: int = 0
    initial_state: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.max_inter_query < 1:
            raise ConfigError("max_inter_query must be >= 1")
        if (self.transition is None) == (self.random is None):
            raise ConfigError("exactly one of an inline/preset transition matrix or random chains is required")
        unknown = set(self.policies) - set(KNOWN_POLICIES)
        if unknown:
            raise ConfigError(f"unknown policies: {sorted(unknown)}")
        if self.transition is not None:
            try:
                self.chain()
            except ChainError as exc:
                raise ConfigError(str(exc)) from exc
            if not 0 <= self.initial_state < self.num_states:
                raise ConfigError(f"initial_state {self.initial_state} out of range")

    @property
    def num_states(self) -> int:
        if self.transition is not None:
            return np.asarray(self.transition).shape[0]
        return self.random.states

    def loss_matrix(self, K: int | None = None) -> np.ndarray:
        K = K or self.num_states
        if isinstance(self.loss, str):
            if self.loss == "distance":
                return distance_loss(K)
            if self.loss == "unit":
                return unit_loss(K)
            raise ConfigError(f"unknown loss {self.loss!r}")
        return np.asarray(self.loss, dtype=float)

    def chain(self, transition=None) -> ChainSpec:
        P = self.transition if transition is None else transition
        return ChainSpec(P, self.loss_matrix(np.asarray(P).shape[0]))

    def costs(self) -> tuple:
        return self.c_grid or (self.query_cost,)

    def deltas(self) -> tuple:
        return self.delta_grid or tuple(range(1, self.max_inter_query + 1))

    def with_overrides(self, **kw) -> ExperimentConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _grid(spec) -> tuple:
    if spec is None:
        return ()
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except KeyError as exc:
            raise ConfigError(f"c_grid needs start/stop/step, missing {exc}") from None
        n = int(round((stop - start) / step)) + 1
        return tuple(round(start + k * step, 10) for k in range(n))
    if isinstance(spec, (list, tuple)):
        return tuple(float(v) for v in spec)
    return (float(spec),)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = dict(raw)
    chain = raw.pop("chain", None)
    if not isinstance(chain, dict):
        raise ConfigError("config needs a 'chain' mapping")
    kw: dict = {}
    default_loss = "distance"
    if "preset" in chain:
        try:
            P, default_loss = PRESETS[chain["preset"]]
        except KeyError:
            raise ConfigError(f"unknown chain preset {chain['preset']!r}") from None
        kw["transition"] = P
    elif "transition" in chain:
        kw["transition"] = np.asarray(chain["transition"], dtype=float)
    elif "random" in chain:
        r = chain["random"] or {}
        kw["random"] = RandomChains(int(r.get("states", 5)), int(r.get("count", 30)), int(r.get("seed", 0)))
    else:
        raise ConfigError("chain needs one of: preset, transition, random")

    kw["loss"] = raw.pop("loss", default_loss)
    if "policies" in raw:
        kw["policies"] = tuple(raw.pop("policies"))
    if "thresholds" in raw:
        kw["thresholds"] = tuple(int(m) for m in raw.pop("thresholds"))
    if "c_grid" in raw:
        kw["c_grid"] = _grid(raw.pop("c_grid"))
    if "delta_grid" in raw:
        kw["delta_grid"] = tuple(int(d) for d in raw.pop("delta_grid"))
    for key, cast in (("query_cost", float), ("max_inter_query", int), ("interval", int), ("horizon", int),
                      ("episodes", int), ("seed", int), ("initial_state", int), ("workers", int)):
        if key in raw:
            kw[key] = cast(raw.pop(key))
    if raw:
        raise ConfigError(f"unknown config keys: {sorted(raw)}")
    return ExperimentConfig(**kw)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    try:
        return config_from_dict(raw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
