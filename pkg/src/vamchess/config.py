"""Run configuration: a single JSON document whose keys mirror the
domain-type field names one-for-one, so a config file plus a seed fully
describes a run. CLI flags override individual keys.
"""

from __future__ import annotations

import copy
import json
from typing import Any

from vamchess.engine import EngineConfig
from vamchess.maskmdp import MaskMdpConfig
from vamchess.rollout import (
    EngineGreedy,
    GreedyOracle,
    GrpoConfig,
    Policy,
    RemoteEndpoint,
    RoundRobinScript,
    SoftmaxOracle,
    UniformRandom,
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 0,
    "engine": {
        "opponent": {
            "command": "toy",
            "skill_level": 0,
            "search_depth": 1,
            "movetime_ms": None,
            "show_wdl": False,
            "threads": 1,
            "options": {},
        },
        "analyzer": {
            "command": "toy",
            "skill_level": 20,
            "search_depth": 20,
            "movetime_ms": 1000,
            "show_wdl": True,
            "threads": 1,
            "options": {},
        },
    },
    "verifier": {
        "reward_kind": "expected_score",
        "depth": 10,
    },
    "grpo": {
        "group_size": 8,
        "max_rounds": 4,
        "clip_epsilon": 0.2,
        "kl_coef": 1e-3,
        "std_floor": 1e-8,
        "temperature": 1.0,
        "top_p": 1.0,
        "max_response_tokens": 2000,
    },
    "mask_mdp": {
        "penalty": 1.0,
        "gamma": 0.99,
    },
    "policy": {
        "kind": "uniform_random",
        "rng_seed": 0,
    },
    "paths": {
        "dataset": None,
        "buffer": "buffer.jsonl",
        "reports": "reports",
    },
    "collect": {
        "pool_size": 16,
        "budget": 64,
        "opponent_depth": 1,
        "invalid_retries": 3,
    },
    "eval": {
        "depths": [1, 5],
        "games_per_depth": 50,
        "cap": 1000,
        "max_plies": 200,
        "invalid_retries": 3,
        "workers": 1,
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then the config file, then explicit overrides."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _deep_merge(cfg, file_cfg)
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    return cfg


def apply_dotted_override(cfg: dict, dotted: str) -> None:
    """`--set a.b.c=value` override; values parse as JSON when possible."""
    if "=" not in dotted:
        raise ConfigError(f"override {dotted!r} must look like key.path=value")
    key_path, raw_value = dotted.split("=", 1)
    try:
        value = json.loads(raw_value)
    except ValueError:
        value = raw_value
    node = cfg
    keys = key_path.split(".")
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            node[key] = {}
        node = node[key]
    node[keys[-1]] = value


def engine_config(cfg: dict, which: str) -> EngineConfig:
    try:
        section = cfg["engine"][which]
        return EngineConfig(
            command=section["command"],
            skill_level=section["skill_level"],
            search_depth=section["search_depth"],
            movetime_ms=section.get("movetime_ms"),
            show_wdl=section["show_wdl"],
            threads=section["threads"],
            options=dict(section.get("options", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad engine.{which} config: {exc}") from exc


def grpo_config(cfg: dict) -> GrpoConfig:
    section = cfg["grpo"]
    try:
        grpo = GrpoConfig(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grpo config: {exc}") from exc
    if grpo.group_size < 2:
        raise ConfigError("grpo.group_size must be >= 2 for advantage normalization")
    return grpo


def mask_mdp_config(cfg: dict) -> MaskMdpConfig:
    try:
        return MaskMdpConfig(**cfg["mask_mdp"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad mask_mdp config: {exc}") from exc


def build_policy(cfg: dict, seed_offset: int = 0) -> Policy:
    """Policy instance from the policy section; local kinds fold the
    offset into their seed so distinct workers stay deterministic."""
    section = cfg["policy"]
    kind = section.get("kind")
    rng_seed = int(section.get("rng_seed", 0)) + seed_offset
    if kind == "greedy_oracle":
        return GreedyOracle()
    if kind == "round_robin":
        return RoundRobinScript()
    if kind == "uniform_random":
        return UniformRandom(rng_seed=rng_seed)
    if kind == "softmax_oracle":
        return SoftmaxOracle(
            temperature=float(section.get("temperature", 1.0)),
            malformed_rate=float(section.get("malformed_rate", 0.0)),
            rng_seed=rng_seed,
        )
    if kind == "engine_greedy":
        return EngineGreedy(
            engine_cfg=engine_config(cfg, section.get("engine", "analyzer")),
            depth=int(section.get("depth", cfg["verifier"]["depth"])),
            reward_kind=section.get("reward_kind", cfg["verifier"]["reward_kind"]),
        )
    if kind == "remote":
        grpo = cfg["grpo"]
        return RemoteEndpoint(
            url=section["url"],
            temperature=float(grpo.get("temperature", 1.0)),
            top_p=float(grpo.get("top_p", 1.0)),
            max_tokens=int(grpo.get("max_response_tokens", 2000)),
        )
    raise ConfigError(f"unknown policy kind {kind!r}")
