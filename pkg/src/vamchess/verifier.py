"""Engine-derived verifier scores and target-action selection.

Three reward variants over win/draw/loss likelihoods: expected score
(p_W + p_D/2), raw win rate (p_W), and a within-position rank transform
of the expected score. All scores live in [0, 1]. Ties anywhere are
broken by the lexicographically smallest UCI string so results are
reproducible across runs and implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

EXPECTED_SCORE = "expected_score"
WIN_RATE = "win_rate"
RANK = "rank"
REWARD_KINDS = (EXPECTED_SCORE, WIN_RATE, RANK)


class UnnormalizedWdl(ValueError):
    """WDL triple with negative entries or components not summing to 1."""


class EmptyMask(ValueError):
    """Target requested over an empty candidate set."""


class UnknownMove(KeyError):
    """Mask contains a move absent from the value map."""


def _check_wdl(wdl) -> tuple[float, float, float]:
    w, d, l = wdl
    if w < 0 or d < 0 or l < 0 or abs(w + d + l - 1.0) > 1e-6:
        raise UnnormalizedWdl(f"bad WDL triple {wdl!r}")
    return w, d, l


def mu_exp(wdl) -> float:
    """Expected-score proxy: p_W + p_D / 2."""
    w, d, _ = _check_wdl(wdl)
    return w + d / 2.0


def mu_win(wdl) -> float:
    """Win-rate reward: p_W."""
    w, _, _ = _check_wdl(wdl)
    return w


def mu_rank(exp_scores: dict[str, float]) -> dict[str, float]:
    """Rank transform: best expected score maps to 1, worst to 0, linear
    in descending rank; a singleton maps to 1."""
    if not exp_scores:
        raise EmptyMask("rank transform needs at least one move")
    n = len(exp_scores)
    ordered = sorted(exp_scores, key=lambda m: (-exp_scores[m], m))
    if n == 1:
        return {ordered[0]: 1.0}
    return {m: 1.0 - i / (n - 1) for i, m in enumerate(ordered)}


def wdl_from_eval(ev) -> tuple[tuple[float, float, float], str]:
    """WDL for an EngineEval plus the source it came from.

    Mate scores are decided outcomes; otherwise the engine's native WDL
    is used when reported, with a logistic fallback from centipawns
    (p_W = 1 / (1 + 10^(-cp/400)), p_D = 0).
    """
    if ev.mate is not None:
        return ((1.0, 0.0, 0.0), "terminal") if ev.mate > 0 else ((0.0, 0.0, 1.0), "terminal")
    if ev.wdl is not None:
        return ev.wdl, "engine"
    p_w = 1.0 / (1.0 + math.pow(10.0, -ev.cp / 400.0))
    return (p_w, 0.0, 1.0 - p_w), "logistic"


@dataclass(frozen=True)
class ValueMap:
    """Per-move verifier scores for one position."""

    scores: dict[str, float]
    reward_kind: str
    source_depth: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reward_kind not in REWARD_KINDS:
            raise ValueError(f"unknown reward kind {self.reward_kind!r}")
        for move, score in self.scores.items():
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"score out of range for {move}: {score}")


@dataclass(frozen=True)
class TargetAction:
    move: str
    score: float
    tie_count: int


def target_action(vm: ValueMap, mask) -> TargetAction:
    """Argmax of the value map restricted to `mask`, lexicographic tie-break."""
    candidates = sorted(mask)
    if not candidates:
        raise EmptyMask("empty mask")
    missing = [m for m in candidates if m not in vm.scores]
    if missing:
        raise UnknownMove(f"mask moves absent from value map: {missing}")
    top = max(vm.scores[m] for m in candidates)
    best = next(m for m in candidates if vm.scores[m] == top)
    ties = sum(1 for m in candidates if vm.scores[m] == top)
    return TargetAction(move=best, score=top, tie_count=ties)


def build_value_map(engine, position, kind: str, depth: int) -> ValueMap:
    """Score every legal move of `position` through the engine.

    The rank variant ranks by expected score first, then applies the
    rank transform, so its ordering matches the expected-score ordering.
    """
    from vamchess.board import game_outcome, legal_moves

    if game_outcome(position).is_terminal:
        raise ValueError("cannot build a value map for a terminal position")
    moves = legal_moves(position)
    raw = engine.score_moves(position, moves, depth)
    exp_scores = {}
    win_scores = {}
    sources = set()
    for move in moves:
        wdl, source = wdl_from_eval(raw[move])
        sources.add(source)
        exp_scores[move] = mu_exp(wdl)
        win_scores[move] = mu_win(wdl)
    if kind == EXPECTED_SCORE:
        scores = exp_scores
    elif kind == WIN_RATE:
        scores = win_scores
    elif kind == RANK:
        scores = mu_rank(exp_scores)
    else:
        raise ValueError(f"unknown reward kind {kind!r}")
    meta = {"wdl_source": sources.pop() if len(sources) == 1 else "mixed"}
    return ValueMap(scores=scores, reward_kind=kind, source_depth=depth, metadata=meta)
