"""Puzzle and full-game evaluation.

Full games: the policy plays a fixed engine opponent from the standard
start; every model move is analyzed before and after by a separate
analyzer engine, both evaluations converted to the mover's point of view
with mate mapped to the cap (1000) and centipawns clamped to it. Per-move
centipawn loss is max(0, E_before - E_after), also clamped. Per-game ACPL
is the mean over the model's moves; a forfeit with no valid moves scores
the worst case (the cap). Across games we report both the mean of
per-game ACPL values and the move-weighted mean.

Puzzles: one generation per position; pass@1 counts exact solution
matches, with invalid outputs as failures.
"""

from __future__ import annotations

import csv
import json
import random
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from vamchess import board
from vamchess.datapipe import MissingSolution, TrainingRecord
from vamchess.engine import EngineConfig, EngineEval, UciEngine
from vamchess.prompts import (
    BASELINE,
    VAM_SELECTION,
    PromptSpec,
    build_prompt,
    compliance_stats,
    parse_output,
)
from vamchess.rollout import DecisionContext, Policy, sample_group

CP_CAP = 1000


def cpl(e_before: float, e_after: float, cap: float = CP_CAP) -> float:
    """Per-move centipawn loss, clipped at 0 and clamped to the cap."""
    return min(cap, max(0.0, e_before - e_after))


def to_mover_pov(ev: EngineEval, mover: str, cap: float = CP_CAP) -> float:
    """Signed centipawns for the mover: mate maps to +/-cap, centipawn
    magnitudes clamp to cap, and the sign flips when the evaluation was
    reported for the other side."""
    if ev.mate is not None:
        value = cap if ev.mate > 0 else -cap
    else:
        value = min(cap, max(-cap, float(ev.cp)))
    return value if ev.pov == mover else -value


@dataclass(frozen=True)
class MoveAnalysis:
    ply: int
    mover: str
    move: str
    e_before: float
    e_after: float
    loss: float
    bound_fired: str  # "depth" or "movetime"


@dataclass
class GameRecord:
    model_color: str
    opponent_depth: int
    result: str  # win | loss | draw | forfeit
    result_detail: str
    plies: int
    moves: list[MoveAnalysis] = field(default_factory=list)
    invalid_attempts: int = 0
    game_index: int = 0

    def per_game_acpl(self, cap: float = CP_CAP) -> float:
        if not self.moves:
            return float(cap)
        return sum(m.loss for m in self.moves) / len(self.moves)


@dataclass
class AcplReport:
    overall_acpl: float
    acpl_per_move: float
    games: int
    forfeits: int
    per_depth: dict
    seed: int = 0

    def to_json_obj(self) -> dict:
        return {
            "overall_acpl": self.overall_acpl,
            "acpl_per_move": self.acpl_per_move,
            "games": self.games,
            "forfeits": self.forfeits,
            "per_depth": self.per_depth,
            "seed": self.seed,
        }


@dataclass
class PuzzleResult:
    total: int
    passed: int
    pass1_rate: float
    format_rate: float
    legality_rate: float
    mask_rate: float
    mean_selected_value: Optional[float]

    def to_json_obj(self) -> dict:
        return {
            "total": self.total,
            "passed": self.passed,
            "pass1_rate": self.pass1_rate,
            "format_rate": self.format_rate,
            "legality_rate": self.legality_rate,
            "mask_rate": self.mask_rate,
            "mean_selected_value": self.mean_selected_value,
        }


@dataclass(frozen=True)
class GameEvalConfig:
    analyzer_depth: int = 20
    analyzer_movetime_ms: Optional[int] = 1000
    cap: float = CP_CAP
    max_plies: int = 200
    invalid_retries: int = 3
    prompt_mode: str = BASELINE
    workers: int = 1


def _analyze(analyzer: UciEngine, position: board.Position, mover: str,
             cfg: GameEvalConfig) -> tuple[float, str]:
    """Mover-POV score of a position; terminal positions skip the engine."""
    outcome = board.game_outcome(position)
    if outcome.kind == "checkmate":
        return (cfg.cap if outcome.winner == mover else -cfg.cap), "terminal"
    if outcome.is_terminal:
        return 0.0, "terminal"
    ev = analyzer.evaluate(position, cfg.analyzer_depth, cfg.analyzer_movetime_ms)
    reached = ev.depth if ev.depth is not None else 0
    bound = "depth" if reached >= cfg.analyzer_depth else "movetime"
    return to_mover_pov(ev, mover, cfg.cap), bound


def play_game(policy: Policy, opponent: UciEngine, model_color: str,
              analyzer: UciEngine, cfg: GameEvalConfig = GameEvalConfig(),
              opponent_depth: int = 1, game_index: int = 0) -> GameRecord:
    """One full game from the standard start position.

    The model answers the baseline prompt (full legal list) unless the
    config selects the selection template with the full legal set as the
    mask. Unparsable or illegal outputs retry up to the limit; exhaustion
    forfeits the game.
    """
    position = board.startpos()
    history = Counter({board.position_key(position): 1})
    record = GameRecord(model_color=model_color, opponent_depth=opponent_depth,
                        result="draw", result_detail="", plies=0,
                        game_index=game_index)

    while True:
        outcome = board.game_outcome(position)
        if outcome.is_terminal:
            _classify(record, outcome, model_color)
            break
        if history[board.position_key(position)] >= 5:
            record.result = "draw"
            record.result_detail = "fivefold-repetition"
            break
        if record.plies >= cfg.max_plies:
            record.result = "draw"
            record.result_detail = "ply-cap"
            break

        mover = position.side_to_move
        if mover == model_color:
            legal = board.legal_moves(position)
            if cfg.prompt_mode == VAM_SELECTION:
                spec = PromptSpec(template=VAM_SELECTION, fen=position.fen,
                                  legal_moves=legal, allowed_moves=legal)
                mask = set(legal)
            else:
                spec = PromptSpec(template=BASELINE, fen=position.fen,
                                  legal_moves=legal)
                mask = None
            prompt = build_prompt(spec)
            ctx = DecisionContext(fen=position.fen, legal_moves=legal,
                                  mask=legal if mask else None)
            move = None
            for _ in range(cfg.invalid_retries):
                raw = sample_group(policy, prompt, 1, ctx)[0]
                parsed = parse_output(raw, set(legal), mask)
                if parsed.is_valid:
                    move = parsed.move
                    break
                record.invalid_attempts += 1
            if move is None:
                record.result = "forfeit"
                record.result_detail = "invalid-retries-exhausted"
                break
            e_before, _ = _analyze(analyzer, position, mover, cfg)
            next_position = board.apply_move(position, move)
            e_after, bound = _analyze(analyzer, next_position, mover, cfg)
            record.moves.append(MoveAnalysis(
                ply=record.plies, mover=mover, move=move,
                e_before=e_before, e_after=e_after,
                loss=cpl(e_before, e_after, cfg.cap), bound_fired=bound))
            position = next_position
        else:
            move = opponent.best_move(position, opponent_depth)
            position = board.apply_move(position, move)
        record.plies += 1
        history[board.position_key(position)] += 1
    return record


def _classify(record: GameRecord, outcome: board.Outcome, model_color: str):
    if outcome.kind == "checkmate":
        record.result = "win" if outcome.winner == model_color else "loss"
        record.result_detail = "checkmate"
    elif outcome.kind == "stalemate":
        record.result = "draw"
        record.result_detail = "stalemate"
    else:
        record.result = "draw"
        record.result_detail = outcome.reason or "draw"


def aggregate_games(games: Sequence[GameRecord], cap: float = CP_CAP,
                    seed: int = 0) -> AcplReport:
    """Both aggregates: mean of per-game ACPL and move-weighted mean."""
    if not games:
        raise ValueError("no games to aggregate")
    per_depth: dict = {}
    for game in games:
        bucket = per_depth.setdefault(game.opponent_depth, [])
        bucket.append(game)
    per_depth_out = {}
    for depth, bucket in sorted(per_depth.items()):
        per_depth_out[depth] = _aggregate_bucket(bucket, cap)
    top = _aggregate_bucket(list(games), cap)
    return AcplReport(
        overall_acpl=top["overall_acpl"],
        acpl_per_move=top["acpl_per_move"],
        games=len(games),
        forfeits=sum(1 for g in games if g.result == "forfeit"),
        per_depth=per_depth_out,
        seed=seed,
    )


def _aggregate_bucket(games: list[GameRecord], cap: float) -> dict:
    per_game = [g.per_game_acpl(cap) for g in games]
    all_losses = [m.loss for g in games for m in g.moves]
    return {
        "overall_acpl": sum(per_game) / len(per_game),
        "acpl_per_move": (sum(all_losses) / len(all_losses)) if all_losses else float(cap),
        "games": len(games),
        "model_moves": len(all_losses),
        "forfeits": sum(1 for g in games if g.result == "forfeit"),
        "results": dict(sorted(Counter(g.result for g in games).items())),
    }


def eval_games(policy_factory: Callable[[int], Policy],
               opponent_cfg: EngineConfig, analyzer_cfg: EngineConfig,
               depths: Sequence[int], games_per_depth: int, seed: int,
               cfg: GameEvalConfig = GameEvalConfig()) -> tuple[AcplReport, list[GameRecord]]:
    """Color-balanced match suite: per depth, half the games as white and
    half as black, order shuffled deterministically from the seed."""
    if games_per_depth % 2 != 0:
        raise ValueError("games_per_depth must be even for exact color balance")
    plan = []
    index = 0
    for depth in depths:
        colors = ["w"] * (games_per_depth // 2) + ["b"] * (games_per_depth // 2)
        random.Random(f"{seed}:{depth}").shuffle(colors)
        for color in colors:
            plan.append((index, depth, color))
            index += 1

    results: dict[int, GameRecord] = {}
    if cfg.workers <= 1:
        with UciEngine(opponent_cfg) as opponent, UciEngine(analyzer_cfg) as analyzer:
            for game_index, depth, color in plan:
                policy = policy_factory(seed * 1_000_003 + game_index)
                try:
                    results[game_index] = play_game(
                        policy, opponent, color, analyzer, cfg,
                        opponent_depth=depth, game_index=game_index)
                finally:
                    if hasattr(policy, "close"):
                        policy.close()
    else:
        local = threading.local()
        spawned: list[UciEngine] = []
        spawn_lock = threading.Lock()

        def run(item):
            game_index, depth, color = item
            if not hasattr(local, "opponent"):
                local.opponent = UciEngine(opponent_cfg)
                local.analyzer = UciEngine(analyzer_cfg)
                with spawn_lock:
                    spawned.extend([local.opponent, local.analyzer])
            policy = policy_factory(seed * 1_000_003 + game_index)
            try:
                return game_index, play_game(policy, local.opponent, color,
                                             local.analyzer, cfg,
                                             opponent_depth=depth,
                                             game_index=game_index)
            finally:
                if hasattr(policy, "close"):
                    policy.close()

        try:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                for game_index, record in pool.map(run, plan):
                    results[game_index] = record
        finally:
            for engine in spawned:
                engine.close()

    games = [results[i] for i in sorted(results)]
    return aggregate_games(games, cfg.cap, seed), games


def eval_puzzles(policy: Policy, puzzles: Sequence[TrainingRecord],
                 mode: str = BASELINE) -> PuzzleResult:
    """One generation per puzzle; pass iff the parsed move equals the
    dataset-provided solution."""
    if not puzzles:
        raise ValueError("no puzzles to evaluate")
    parsed_all = []
    passed = 0
    selected_values = []
    for record in puzzles:
        if record.solution_uci is None:
            raise MissingSolution(f"puzzle {record.fen!r} has no solution move")
        legal = record.legal_moves_uci
        if mode == VAM_SELECTION:
            allowed = record.allowed_moves or legal
            spec = PromptSpec(template=VAM_SELECTION, fen=record.fen,
                              legal_moves=legal, allowed_moves=allowed)
            mask = set(allowed)
            ctx_mask = tuple(allowed)
        else:
            spec = PromptSpec(template=BASELINE, fen=record.fen, legal_moves=legal)
            mask = None
            ctx_mask = None
        prompt = build_prompt(spec)
        ctx = DecisionContext(fen=record.fen, legal_moves=legal, mask=ctx_mask,
                              value_map=record.value_map)
        raw = sample_group(policy, prompt, 1, ctx)[0]
        parsed = parse_output(raw, set(legal), mask)
        parsed_all.append(parsed)
        if parsed.is_valid and parsed.move == record.solution_uci:
            passed += 1
        if parsed.is_valid and record.value_map.scores:
            selected_values.append(record.value_map.scores[parsed.move])
    stats = compliance_stats(parsed_all)
    return PuzzleResult(
        total=len(puzzles),
        passed=passed,
        pass1_rate=passed / len(puzzles),
        format_rate=stats["format_rate"],
        legality_rate=stats["legality_rate"],
        mask_rate=stats["mask_rate"],
        mean_selected_value=(sum(selected_values) / len(selected_values)
                             if selected_values else None),
    )


# -- report files ---------------------------------------------------------

def write_games_csv(games: Sequence[GameRecord], path, cap: float = CP_CAP):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["game_index", "opponent_depth", "model_color", "result",
                         "result_detail", "plies", "model_moves", "acpl",
                         "invalid_attempts"])
        for g in games:
            writer.writerow([g.game_index, g.opponent_depth, g.model_color,
                             g.result, g.result_detail, g.plies, len(g.moves),
                             f"{g.per_game_acpl(cap):.6f}", g.invalid_attempts])


def write_moves_csv(games: Sequence[GameRecord], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["game_index", "ply", "mover", "move", "e_before",
                         "e_after", "cpl", "bound_fired"])
        for g in games:
            for m in g.moves:
                writer.writerow([g.game_index, m.ply, m.mover, m.move,
                                 f"{m.e_before:.1f}", f"{m.e_after:.1f}",
                                 f"{m.loss:.1f}", m.bound_fired])


def write_report_json(obj: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
