"""Policies, grouped sampling, iterative mask pruning, and GRPO math.

Pruning: for one base position, repeatedly sample a group of G outputs
against the current mask, reward each output against that same mask, and
remove the distinct valid sampled actions before the next round, until
the target action shows up in a group or the round budget runs out. The
target is never pruned (it is only reachable through the break), so it
stays in every mask.

Local policy kinds are deterministic given (seed, call counter): each
`generate` call derives a fresh RNG from both, so repeated calls differ
but whole runs replay exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from vamchess import board
from vamchess.maskmdp import masked_reward
from vamchess.prompts import (
    VAM_SELECTION,
    ParsedOutput,
    PromptSpec,
    build_prompt,
    parse_output,
)
from vamchess.verifier import TargetAction, ValueMap, target_action


class GroupTooSmall(ValueError):
    """Advantage normalization needs at least two samples."""


class LengthMismatch(ValueError):
    """Paired per-sample lists of different lengths."""


class EndpointUnavailable(RuntimeError):
    """Remote generation endpoint unreachable after retries."""


class GenerationTimeout(RuntimeError):
    """Remote generation endpoint timed out after retries."""


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 8
    max_rounds: int = 4
    clip_epsilon: float = 0.2
    kl_coef: float = 1e-3
    std_floor: float = 1e-8
    temperature: float = 1.0
    top_p: float = 1.0
    max_response_tokens: int = 2000

    def __post_init__(self):
        if self.group_size < 1:
            raise ValueError("group size must be >= 1")
        if self.max_rounds < 1:
            raise ValueError("max rounds must be >= 1")
        if self.clip_epsilon <= 0:
            raise ValueError("clip epsilon must be positive")
        if self.kl_coef < 0:
            raise ValueError("kl coefficient must be >= 0")


@dataclass(frozen=True)
class DecisionContext:
    """What value-aware local policies see alongside the prompt text."""

    fen: str
    legal_moves: tuple[str, ...]
    mask: tuple[str, ...] | None = None
    value_map: ValueMap | None = None

    @property
    def choices(self) -> tuple[str, ...]:
        return self.mask if self.mask is not None else self.legal_moves


def _derive_rng(seed: int, counter: int) -> random.Random:
    digest = hashlib.blake2b(
        f"{seed}:{counter}".encode(), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


def format_move_output(move: str) -> str:
    return f"<think>selected {move}</think><uci_move>{move}</uci_move>"


class Policy:
    """One raw text output per request, given a prompt (and context)."""

    kind = "abstract"

    def generate(self, prompt: str, ctx: DecisionContext | None, n: int) -> list[str]:
        raise NotImplementedError


class GreedyOracle(Policy):
    """Always emits the value-map argmax within the current choices."""

    kind = "greedy_oracle"

    def generate(self, prompt, ctx, n):
        vm = ctx.value_map
        if vm is None:
            raise ValueError("greedy oracle needs a value map in context")
        best = target_action(vm, ctx.choices).move
        return [format_move_output(best)] * n


class RoundRobinScript(Policy):
    """Cycles through the current choices with a persistent counter."""

    kind = "round_robin"

    def __init__(self):
        self._cursor = 0

    def generate(self, prompt, ctx, n):
        out = []
        choices = ctx.choices
        for _ in range(n):
            out.append(format_move_output(choices[self._cursor % len(choices)]))
            self._cursor += 1
        return out


class UniformRandom(Policy):
    """Uniform over the current choices, seeded per call."""

    kind = "uniform_random"

    def __init__(self, rng_seed: int = 0):
        self.rng_seed = rng_seed
        self._calls = 0

    def generate(self, prompt, ctx, n):
        rng = _derive_rng(self.rng_seed, self._calls)
        self._calls += 1
        return [format_move_output(rng.choice(ctx.choices)) for _ in range(n)]


class SoftmaxOracle(Policy):
    """Samples choices proportional to exp(score / temperature); emits a
    malformed string instead with probability `malformed_rate`."""

    kind = "softmax_oracle"

    def __init__(self, temperature: float = 1.0, malformed_rate: float = 0.0,
                 rng_seed: int = 0):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= malformed_rate <= 1.0:
            raise ValueError("malformed rate must be in [0, 1]")
        self.temperature = temperature
        self.malformed_rate = malformed_rate
        self.rng_seed = rng_seed
        self._calls = 0

    def generate(self, prompt, ctx, n):
        rng = _derive_rng(self.rng_seed, self._calls)
        self._calls += 1
        choices = ctx.choices
        scores = [ctx.value_map.scores.get(m, 0.0) if ctx.value_map else 0.0
                  for m in choices]
        peak = max(scores)
        weights = [math.exp((s - peak) / self.temperature) for s in scores]
        out = []
        for _ in range(n):
            if rng.random() < self.malformed_rate:
                out.append("<think>...</think>I resign.")
            else:
                out.append(format_move_output(
                    rng.choices(choices, weights=weights, k=1)[0]))
        return out


class EngineGreedy(Policy):
    """Plays the argmax of a fresh engine value map at every decision.

    Owns its engine subprocess (lazily spawned); close() releases it.
    Used where no precomputed value map travels with the prompt, e.g.
    full-game evaluation.
    """

    kind = "engine_greedy"

    def __init__(self, engine_cfg, depth: int = 10,
                 reward_kind: str = "expected_score"):
        self.engine_cfg = engine_cfg
        self.depth = depth
        self.reward_kind = reward_kind
        self._engine = None

    def _handle(self):
        if self._engine is None:
            from vamchess.engine import UciEngine

            self._engine = UciEngine(self.engine_cfg)
        return self._engine

    def close(self):
        if self._engine is not None:
            self._engine.close()
            self._engine = None

    def generate(self, prompt, ctx, n):
        from vamchess.verifier import build_value_map

        position = board.parse_fen(ctx.fen)
        vm = build_value_map(self._handle(), position, self.reward_kind,
                             self.depth)
        best = target_action(vm, ctx.choices).move
        return [format_move_output(best)] * n


class RemoteEndpoint(Policy):
    """HTTP generation endpoint: POST {prompt, n, temperature, top_p,
    max_tokens} and read {"outputs": [str, ...]}."""

    kind = "remote"

    def __init__(self, url: str, temperature: float = 1.0, top_p: float = 1.0,
                 max_tokens: int = 2000, timeout_s: float = 120.0, retries: int = 3):
        self.url = url
        self.temperature = temperature
        self.top_p = top_p
        self.max_tokens = max_tokens
        self.timeout_s = timeout_s
        self.retries = retries

    def generate(self, prompt, ctx, n):
        import requests

        payload = {
            "prompt": prompt,
            "n": n,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
        }
        last_exc = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(self.url, json=payload, timeout=self.timeout_s)
                resp.raise_for_status()
                outputs = resp.json()["outputs"]
                if len(outputs) != n:
                    raise EndpointUnavailable(
                        f"endpoint returned {len(outputs)} outputs, wanted {n}")
                return list(outputs)
            except requests.Timeout as exc:
                last_exc = GenerationTimeout(str(exc))
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_exc = EndpointUnavailable(str(exc))
            time.sleep(min(2.0 ** attempt, 8.0) * 0.25)
        raise last_exc


def sample_group(policy: Policy, prompt: str, group_size: int,
                 ctx: DecisionContext | None = None) -> list[str]:
    if group_size < 1:
        raise ValueError("group size must be >= 1")
    outputs = policy.generate(prompt, ctx, group_size)
    if len(outputs) != group_size:
        raise RuntimeError(f"policy produced {len(outputs)} outputs, wanted {group_size}")
    return outputs


@dataclass
class RolloutGroup:
    base_fen: str
    mask_snapshot: tuple[str, ...]
    prompt_text: str
    outputs: list[str]
    parsed: list[ParsedOutput]
    rewards: list[float]
    advantages: list[float]
    round_index: int  # 1-based


@dataclass
class PruneTrace:
    groups: list[RolloutGroup]
    target: TargetAction
    target_found_round: Optional[int]
    rounds_used: int


def grpo_advantages(rewards: Sequence[float], std_floor: float = 1e-8) -> list[float]:
    """Within-group reward z-scores using the population standard
    deviation; a group with (near-)constant rewards gets all zeros."""
    n = len(rewards)
    if n < 2:
        raise GroupTooSmall(f"need >= 2 rewards, got {n}")
    mean = sum(rewards) / n
    var = sum((r - mean) ** 2 for r in rewards) / n
    std = math.sqrt(var)
    if std < std_floor:
        return [0.0] * n
    return [(r - mean) / std for r in rewards]


def grpo_surrogate(logp_new: Sequence[float], logp_old: Sequence[float],
                   advantages: Sequence[float], clip_epsilon: float) -> float:
    """Clipped surrogate objective, averaged over the group."""
    if not len(logp_new) == len(logp_old) == len(advantages):
        raise LengthMismatch("logp/advantage lists must have equal length")
    total = 0.0
    for lp_new, lp_old, adv in zip(logp_new, logp_old, advantages):
        ratio = math.exp(lp_new - lp_old)
        clipped = min(max(ratio, 1.0 - clip_epsilon), 1.0 + clip_epsilon)
        total += min(ratio * adv, clipped * adv)
    return total / len(advantages)


def kl_penalty(logp_new: Sequence[float], logp_ref: Sequence[float]) -> float:
    """Nonnegative per-sample KL estimator exp(d) - d - 1 with
    d = logp_ref - logp_new, averaged over the group."""
    if len(logp_new) != len(logp_ref):
        raise LengthMismatch("logp lists must have equal length")
    total = 0.0
    for lp_new, lp_ref in zip(logp_new, logp_ref):
        d = lp_ref - lp_new
        total += math.exp(d) - d - 1.0
    return total / len(logp_new)


def _group_advantages(rewards: list[float], cfg: GrpoConfig) -> list[float]:
    if len(rewards) < 2:
        return [0.0] * len(rewards)
    return grpo_advantages(rewards, cfg.std_floor)


def prune_and_sample(policy: Policy, position: board.Position, vm: ValueMap,
                     initial_mask, cfg: GrpoConfig, penalty: float = 1.0) -> PruneTrace:
    """Iterative action-space pruning over one base position.

    Per round: render the selection prompt for the current mask, sample G
    outputs, reward them against that mask, and record the group. Break
    as soon as the target action appears among the distinct valid sampled
    actions; otherwise remove those actions from the mask and go again,
    up to the round budget. An all-invalid round leaves the mask as is.
    """
    mask = tuple(sorted(set(initial_mask)))
    if not mask:
        raise ValueError("initial mask must be non-empty")
    target = target_action(vm, mask)
    legal = board.legal_moves(position)
    legal_set = set(legal)

    groups: list[RolloutGroup] = []
    found_round = None
    rounds_used = 0
    for round_index in range(1, cfg.max_rounds + 1):
        rounds_used = round_index
        spec = PromptSpec(template=VAM_SELECTION, fen=position.fen,
                          legal_moves=legal, allowed_moves=mask)
        prompt = build_prompt(spec)
        ctx = DecisionContext(fen=position.fen, legal_moves=legal,
                              mask=mask, value_map=vm)
        outputs = sample_group(policy, prompt, cfg.group_size, ctx)
        parsed = [parse_output(o, legal_set, set(mask)) for o in outputs]
        rewards = [masked_reward(vm, mask, p, penalty) for p in parsed]
        groups.append(RolloutGroup(
            base_fen=position.fen,
            mask_snapshot=mask,
            prompt_text=prompt,
            outputs=list(outputs),
            parsed=parsed,
            rewards=rewards,
            advantages=_group_advantages(rewards, cfg),
            round_index=round_index,
        ))
        sampled_valid = {p.move for p in parsed if p.is_valid}
        if target.move in sampled_valid:
            found_round = round_index
            break
        mask = tuple(m for m in mask if m not in sampled_valid)
    return PruneTrace(groups=groups, target=target,
                      target_found_round=found_round, rounds_used=rounds_used)


def group_to_json_obj(group: RolloutGroup) -> dict:
    return {
        "fen": group.base_fen,
        "mask": list(group.mask_snapshot),
        "prompt": group.prompt_text,
        "outputs": group.outputs,
        "verdicts": [p.to_json_obj() for p in group.parsed],
        "rewards": group.rewards,
        "advantages": group.advantages,
        "round_index": group.round_index,
    }


def export_batch(traces: Sequence[PruneTrace], path) -> int:
    """Write one JSONL record per rollout group; groups from every round
    are exported with equal weight. Returns the record count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            for group in trace.groups:
                fh.write(json.dumps(group_to_json_obj(group),
                                    sort_keys=True, separators=(",", ":")))
                fh.write("\n")
                count += 1
    return count
