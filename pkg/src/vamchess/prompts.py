"""Prompt rendering and strict output parsing.

Templates live as checked-in text fixtures with literal `{{ ... }}`
placeholders; rendering is plain substitution, no re-flowing, so golden
tests can compare bytes. Parsing enforces the strict output contract:
exactly one <uci_move> tag, lowercase UCI payload (surrounding whitespace
trimmed), legality, and mask membership when a mask applies. Failures are
verdicts, not exceptions, with a fixed precedence: malformed, then
illegal, then out-of-mask.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

VAM_SELECTION = "vam_selection"
BASELINE = "baseline"

VALID = "valid"
MALFORMED = "malformed"
ILLEGAL = "illegal"
OUT_OF_MASK = "out_of_mask"

_UCI_PAYLOAD_RE = re.compile(r"[a-h][1-8][a-h][1-8][qrbn]?")
_TAG_RE = re.compile(r"<uci_move>(.*?)</uci_move>", re.DOTALL)
_THINK_RE = re.compile(r"<think>.*?</think>", re.DOTALL)

_FEN_SLOT = "{{ FEN }}"
_LEGAL_SLOT = "{{ legal_moves_uci_list | join(', ') }}"
_ALLOWED_SLOT = "{{ considered_moves_uci_list | join(', ') }}"


class MissingAllowedMoves(ValueError):
    """Selection prompt requested without an allowed-moves list."""


class EmptyList(ValueError):
    """Compliance stats over an empty output list."""


def load_template(name: str) -> str:
    return resources.files("vamchess.templates").joinpath(f"{name}.txt").read_text("utf-8")


@dataclass(frozen=True)
class PromptSpec:
    template: str  # VAM_SELECTION or BASELINE
    fen: str
    legal_moves: tuple[str, ...]
    allowed_moves: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.template not in (VAM_SELECTION, BASELINE):
            raise ValueError(f"unknown template {self.template!r}")
        if not self.legal_moves:
            raise ValueError("legal move list must be non-empty")
        if self.allowed_moves is not None:
            if not self.allowed_moves:
                raise ValueError("allowed move list must be non-empty")
            extra = set(self.allowed_moves) - set(self.legal_moves)
            if extra:
                raise ValueError(f"allowed moves not legal: {sorted(extra)}")


def build_prompt(spec: PromptSpec) -> str:
    text = load_template(spec.template)
    text = text.replace(_FEN_SLOT, spec.fen)
    text = text.replace(_LEGAL_SLOT, ", ".join(spec.legal_moves))
    if spec.template == VAM_SELECTION:
        if spec.allowed_moves is None:
            raise MissingAllowedMoves("selection template needs allowed_moves")
        text = text.replace(_ALLOWED_SLOT, ", ".join(spec.allowed_moves))
    return text


@dataclass(frozen=True)
class ParsedOutput:
    verdict: str
    move: str | None = None
    reason: str | None = None
    raw_length_chars: int = 0
    had_think_block: bool = False

    @property
    def is_valid(self) -> bool:
        return self.verdict == VALID

    def to_json_obj(self) -> dict:
        return {
            "verdict": self.verdict,
            "move": self.move,
            "reason": self.reason,
            "raw_length_chars": self.raw_length_chars,
            "had_think_block": self.had_think_block,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ParsedOutput":
        return cls(
            verdict=obj["verdict"],
            move=obj.get("move"),
            reason=obj.get("reason"),
            raw_length_chars=obj.get("raw_length_chars", 0),
            had_think_block=obj.get("had_think_block", False),
        )


def parse_output(raw: str, legal, mask=None) -> ParsedOutput:
    """Classify a raw model output against the legal set and optional mask."""
    length = len(raw)
    thought = bool(_THINK_RE.search(raw))

    def verdict(kind, move=None, reason=None):
        return ParsedOutput(kind, move=move, reason=reason,
                            raw_length_chars=length, had_think_block=thought)

    tags = _TAG_RE.findall(raw)
    if not tags:
        return verdict(MALFORMED, reason="missing-tag")
    if len(tags) > 1:
        return verdict(MALFORMED, reason="multiple-tags")
    payload = tags[0].strip()
    if not _UCI_PAYLOAD_RE.fullmatch(payload):
        return verdict(MALFORMED, reason="bad-uci-payload")
    if payload not in set(legal):
        return verdict(ILLEGAL, move=payload)
    if mask is not None and payload not in set(mask):
        return verdict(OUT_OF_MASK, move=payload)
    return verdict(VALID, move=payload)


def compliance_stats(outputs) -> dict[str, float]:
    """Format / legality / mask-compliance rates over parsed outputs."""
    if not outputs:
        raise EmptyList("no outputs to aggregate")
    n = len(outputs)
    fmt = sum(1 for o in outputs if o.verdict != MALFORMED)
    legal = sum(1 for o in outputs if o.verdict in (VALID, OUT_OF_MASK))
    in_mask = sum(1 for o in outputs if o.verdict == VALID)
    return {
        "format_rate": fmt / n,
        "legality_rate": legal / n,
        "mask_rate": in_mask / n,
    }
