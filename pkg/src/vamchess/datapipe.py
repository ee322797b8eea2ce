"""Training-position datasets: validation, persistence, engine-play
collection, and the rejection-sampling filter.

Buffers are line-delimited JSON with canonical serialization (sorted
keys, compact separators) so identical runs produce byte-identical
files. Value maps are stored as JSON objects keyed by UCI strings.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from vamchess import board
from vamchess.prompts import BASELINE, PromptSpec, build_prompt, parse_output
from vamchess.rollout import DecisionContext, Policy, sample_group
from vamchess.verifier import REWARD_KINDS, ValueMap, build_value_map


class SchemaError(ValueError):
    """Malformed or inconsistent dataset content."""

    def __init__(self, message: str, line: int | None = None,
                 offset: int | None = None):
        where = ""
        if line is not None:
            where += f" (line {line})"
        if offset is not None:
            where += f" (byte offset {offset})"
        super().__init__(message + where)
        self.line = line
        self.offset = offset


class MissingSolution(ValueError):
    """Operation requires records with a dataset-provided solution move."""


FIXED_DATASET = "fixed_dataset"
ENGINE_PLAY = "engine_play"


@dataclass(frozen=True)
class TrainingRecord:
    fen: str
    legal_moves_uci: tuple[str, ...]
    value_map: ValueMap
    solution_uci: Optional[str] = None
    allowed_moves: Optional[tuple[str, ...]] = None
    source: str = FIXED_DATASET
    metadata: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        obj = {
            "fen": self.fen,
            "legal_moves_uci": list(self.legal_moves_uci),
            "value_map": {
                "scores": self.value_map.scores,
                "reward_kind": self.value_map.reward_kind,
                "source_depth": self.value_map.source_depth,
                "metadata": self.value_map.metadata,
            },
            "source": self.source,
            "metadata": self.metadata,
        }
        if self.solution_uci is not None:
            obj["solution_uci"] = self.solution_uci
        if self.allowed_moves is not None:
            obj["considered_moves_uci"] = list(self.allowed_moves)
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TrainingRecord":
        try:
            vm = obj["value_map"]
            allowed = obj.get("considered_moves_uci", obj.get("allowed_moves"))
            return cls(
                fen=obj["fen"],
                legal_moves_uci=tuple(obj["legal_moves_uci"]),
                value_map=ValueMap(
                    scores=dict(vm["scores"]),
                    reward_kind=vm.get("reward_kind", "expected_score"),
                    source_depth=int(vm.get("source_depth", 0)),
                    metadata=dict(vm.get("metadata", {})),
                ),
                solution_uci=obj.get("solution_uci"),
                allowed_moves=tuple(allowed) if allowed is not None else None,
                source=obj.get("source", FIXED_DATASET),
                metadata=dict(obj.get("metadata", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad record: {exc}") from exc


def validate_record(record: TrainingRecord) -> list[str]:
    """All contract violations for one record; empty means valid."""
    violations = []
    try:
        position = board.parse_fen(record.fen)
    except board.MalformedFen as exc:
        return [f"bad fen: {exc}"]
    legal = board.legal_moves(position)
    if tuple(sorted(record.legal_moves_uci)) != legal:
        violations.append("legal_moves_uci does not match the position's legal set")
    vm_keys = tuple(sorted(record.value_map.scores))
    if vm_keys != legal:
        violations.append("value_map keys do not equal the legal set")
    for move, score in record.value_map.scores.items():
        if not 0.0 <= score <= 1.0:
            violations.append(f"value out of [0,1] for {move}: {score}")
    if record.value_map.reward_kind not in REWARD_KINDS:
        violations.append(f"unknown reward kind {record.value_map.reward_kind!r}")
    if record.solution_uci is not None and record.solution_uci not in set(legal):
        violations.append(f"solution {record.solution_uci!r} not legal")
    if record.allowed_moves is not None:
        extra = set(record.allowed_moves) - set(legal)
        if extra:
            violations.append(f"allowed moves not legal: {sorted(extra)}")
        if not record.allowed_moves:
            violations.append("allowed_moves present but empty")
    return violations


def record_to_line(record: TrainingRecord) -> str:
    return json.dumps(record.to_json_obj(), sort_keys=True, separators=(",", ":"))


def persist_buffer(records: Sequence[TrainingRecord], path, append: bool = False) -> int:
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_line(record))
            fh.write("\n")
    return len(records)


def _iter_jsonl(path):
    """Yields (line_number, byte_offset, decoded object); raises
    SchemaError with the byte offset for truncated/undecodable lines."""
    with open(path, "rb") as fh:
        data = fh.read()
    offset = 0
    line_no = 0
    while offset < len(data):
        end = data.find(b"\n", offset)
        if end < 0:
            raise SchemaError("truncated final line (no trailing newline)",
                              line=line_no + 1, offset=offset)
        raw = data[offset:end]
        line_no += 1
        if raw.strip():
            try:
                yield line_no, offset, json.loads(raw.decode("utf-8"))
            except (ValueError, UnicodeDecodeError) as exc:
                raise SchemaError(f"undecodable record: {exc}",
                                  line=line_no, offset=offset) from exc
        offset = end + 1


def load_buffer(path) -> list[TrainingRecord]:
    records = []
    for line_no, offset, obj in _iter_jsonl(path):
        try:
            records.append(TrainingRecord.from_json_obj(obj))
        except SchemaError as exc:
            raise SchemaError(str(exc), line=line_no, offset=offset) from exc
    return records


def load_dataset(path) -> list[TrainingRecord]:
    """Load and fully validate a fixed dataset; the first invalid line
    raises SchemaError carrying its line number."""
    records = []
    for line_no, offset, obj in _iter_jsonl(path):
        try:
            record = TrainingRecord.from_json_obj(obj)
        except SchemaError as exc:
            raise SchemaError(str(exc), line=line_no, offset=offset) from exc
        violations = validate_record(record)
        if violations:
            raise SchemaError("; ".join(violations), line=line_no)
        records.append(record)
    return records


@dataclass
class _GameInstance:
    position: board.Position
    model_color: str
    history: Counter
    game_index: int

    @classmethod
    def fresh(cls, model_color: str, game_index: int) -> "_GameInstance":
        pos = board.startpos()
        return cls(position=pos, model_color=model_color,
                   history=Counter({board.position_key(pos): 1}),
                   game_index=game_index)

    def finished(self) -> bool:
        if board.game_outcome(self.position).is_terminal:
            return True
        return self.history[board.position_key(self.position)] >= 5


@dataclass
class PlayPool:
    """N concurrent games of `policy` against a fixed engine opponent."""

    policy: Policy
    opponent: "object"  # UciEngine
    size: int = 16
    opponent_depth: int = 1
    invalid_retries: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("pool size must be >= 1")
        self.games_started = self.size
        self.forfeits = 0
        self.completed = 0
        self.instances = [
            _GameInstance.fresh("w" if i % 2 == 0 else "b", i)
            for i in range(self.size)
        ]

    def _replace(self, idx: int, forfeited: bool):
        if forfeited:
            self.forfeits += 1
        else:
            self.completed += 1
        color = self.instances[idx].model_color
        self.instances[idx] = _GameInstance.fresh(color, self.games_started)
        self.games_started += 1

    def _model_move(self, instance: _GameInstance) -> Optional[str]:
        pos = instance.position
        legal = board.legal_moves(pos)
        spec = PromptSpec(template=BASELINE, fen=pos.fen, legal_moves=legal)
        prompt = build_prompt(spec)
        ctx = DecisionContext(fen=pos.fen, legal_moves=legal)
        for _ in range(self.invalid_retries):
            raw = sample_group(self.policy, prompt, 1, ctx)[0]
            parsed = parse_output(raw, set(legal))
            if parsed.is_valid:
                return parsed.move
        return None

    def step_all(self):
        """Advance every instance one ply; forfeited or finished games are
        replaced with fresh ones."""
        for idx, instance in enumerate(self.instances):
            if instance.finished():
                self._replace(idx, forfeited=False)
                instance = self.instances[idx]
            pos = instance.position
            if pos.side_to_move == instance.model_color:
                move = self._model_move(instance)
                if move is None:
                    self._replace(idx, forfeited=True)
                    continue
            else:
                move = self.opponent.best_move(pos, self.opponent_depth)
            instance.position = board.apply_move(pos, move)
            instance.history[board.position_key(instance.position)] += 1


def collect_by_play(pool: PlayPool, verifier_engine, budget: int, *,
                    reward_kind: str = "expected_score",
                    verifier_depth: int = 10) -> list[TrainingRecord]:
    """Engine-play position generation: sweep the pool, recording every
    visited non-terminal state with a fresh value map, then step all
    instances; stop at exactly `budget` records."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    records: list[TrainingRecord] = []
    metadata = {
        "verifier_depth": verifier_depth,
        "reward_kind": reward_kind,
        "collection_seed": pool.seed,
    }
    while len(records) < budget:
        for instance in pool.instances:
            if instance.finished():
                continue
            position = instance.position
            vm = build_value_map(verifier_engine, position, reward_kind,
                                 verifier_depth)
            records.append(TrainingRecord(
                fen=position.fen,
                legal_moves_uci=board.legal_moves(position),
                value_map=vm,
                source=ENGINE_PLAY,
                metadata=dict(metadata),
            ))
            if len(records) >= budget:
                break
        if len(records) >= budget:
            break
        pool.step_all()
    return records


def rejection_filter(records: Sequence[TrainingRecord], policy: Policy,
                     samples_per_prompt: int) -> tuple[list[dict], float]:
    """Keep (prompt, generation) pairs whose parsed move matches the
    record's solution; malformed and illegal generations are rejected."""
    if samples_per_prompt < 1:
        raise ValueError("samples_per_prompt must be >= 1")
    accepted = []
    total = 0
    for record in records:
        if record.solution_uci is None:
            raise MissingSolution(f"record {record.fen!r} has no solution move")
        legal = record.legal_moves_uci
        spec = PromptSpec(template=BASELINE, fen=record.fen, legal_moves=legal)
        prompt = build_prompt(spec)
        ctx = DecisionContext(fen=record.fen, legal_moves=legal,
                              value_map=record.value_map)
        outputs = sample_group(policy, prompt, samples_per_prompt, ctx)
        total += len(outputs)
        for raw in outputs:
            parsed = parse_output(raw, set(legal))
            if parsed.is_valid and parsed.move == record.solution_uci:
                accepted.append({
                    "fen": record.fen,
                    "prompt": prompt,
                    "response": raw,
                    "solution_uci": record.solution_uci,
                })
    return accepted, (len(accepted) / total if total else 0.0)
