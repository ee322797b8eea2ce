"""Chess positions: FEN parsing, legal moves, move application, outcomes.

Wraps the move-generation kernel (compiled extension when built, plain
Python otherwise). Positions are immutable; legal move lists are returned
in lexicographic UCI order so every consumer sees the same ordering.
"""

from __future__ import annotations

import importlib.util
import os
import re
import sys
from dataclasses import dataclass
from functools import cached_property


def _load_pure_kernel():
    """Load the interpreted kernel source even when the extension is built."""
    path = os.path.join(os.path.dirname(__file__), "_movegen.py")
    spec = importlib.util.spec_from_file_location("vamchess._movegen_pure", path)
    mod = importlib.util.module_from_spec(spec)
    sys.modules["vamchess._movegen_pure"] = mod
    spec.loader.exec_module(mod)
    return mod


if os.environ.get("VAMCHESS_PURE_KERNEL"):
    _mg = _load_pure_kernel()
else:
    from vamchess import _movegen as _mg


def kernel_backend() -> str:
    """"compiled" when the Cython extension is active, else "pure"."""
    return "compiled" if _mg.compiled_backend() else "pure"


STARTPOS_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"

WHITE = "w"
BLACK = "b"

UCI_MOVE_RE = re.compile(r"[a-h][1-8][a-h][1-8][qrbn]?")

_PIECE_FROM_CHAR = {
    "P": 1, "N": 2, "B": 3, "R": 4, "Q": 5, "K": 6,
    "p": 9, "n": 10, "b": 11, "r": 12, "q": 13, "k": 14,
}
_CHAR_FROM_PIECE = {v: k for k, v in _PIECE_FROM_CHAR.items()}
_PROMO_FROM_CHAR = {"n": 2, "b": 3, "r": 4, "q": 5}
_CHAR_FROM_PROMO = {v: k for k, v in _PROMO_FROM_CHAR.items()}
_CASTLE_BITS = {"K": 1, "Q": 2, "k": 4, "q": 8}


class MalformedFen(ValueError):
    """FEN text that is syntactically or semantically invalid."""


class IllegalMove(ValueError):
    """Move not legal in the position it was applied to."""


def is_uci(text: str) -> bool:
    return bool(UCI_MOVE_RE.fullmatch(text))


def _sq_from_name(name: str) -> int:
    return (ord(name[1]) - ord("1")) * 16 + (ord(name[0]) - ord("a"))


def _sq_name(sq: int) -> str:
    return chr(ord("a") + (sq & 7)) + chr(ord("1") + (sq >> 4))


def _move_uci(move: int) -> str:
    promo = (move >> 16) & 0xFF
    text = _sq_name(move & 0xFF) + _sq_name((move >> 8) & 0xFF)
    if promo:
        text += _CHAR_FROM_PROMO[promo]
    return text


@dataclass(frozen=True)
class Outcome:
    kind: str  # ongoing | checkmate | stalemate | draw
    winner: str | None = None  # "w" / "b" for checkmate
    reason: str | None = None  # draw detail

    @property
    def is_terminal(self) -> bool:
        return self.kind != "ongoing"


ONGOING = Outcome("ongoing")


@dataclass(frozen=True)
class Position:
    """Immutable chess position; construct via `parse_fen` or `startpos`."""

    board: bytes
    stm: int  # 0 = white, 1 = black
    castling: int
    ep: int  # 0x88 square or -1; normalized (set only if a legal capture exists)
    halfmove: int
    fullmove: int

    @property
    def side_to_move(self) -> str:
        return WHITE if self.stm == 0 else BLACK

    @property
    def ply_count(self) -> int:
        return (self.fullmove - 1) * 2 + self.stm

    @cached_property
    def fen(self) -> str:
        ranks = []
        for r in range(7, -1, -1):
            row = []
            run = 0
            for f in range(8):
                p = self.board[r * 16 + f]
                if p == 0:
                    run += 1
                else:
                    if run:
                        row.append(str(run))
                        run = 0
                    row.append(_CHAR_FROM_PIECE[p])
            if run:
                row.append(str(run))
            ranks.append("".join(row))
        castle = "".join(c for c, bit in _CASTLE_BITS.items() if self.castling & bit) or "-"
        ep = _sq_name(self.ep) if self.ep >= 0 else "-"
        return (f"{'/'.join(ranks)} {self.side_to_move} {castle} {ep} "
                f"{self.halfmove} {self.fullmove}")

    @cached_property
    def _legal_encoded(self) -> dict[str, int]:
        moves = _mg.legal_moves(bytearray(self.board), self.stm, self.castling, self.ep)
        return {uci: m for uci, m in sorted((_move_uci(m), m) for m in moves)}

    def __str__(self) -> str:
        return self.fen


def startpos() -> Position:
    return parse_fen(STARTPOS_FEN)


def parse_fen(text: str) -> Position:
    """Parse and validate a six-field FEN string.

    The en-passant field is normalized: it is retained only when a legal
    en-passant capture actually exists, so `fen` round-trips canonically.
    """
    if not isinstance(text, str):
        raise MalformedFen("FEN must be a string")
    fields = text.split()
    if len(fields) != 6:
        raise MalformedFen(f"expected 6 FEN fields, got {len(fields)}")
    placement, stm_f, castle_f, ep_f, half_f, full_f = fields

    ranks = placement.split("/")
    if len(ranks) != 8:
        raise MalformedFen(f"expected 8 ranks, got {len(ranks)}")
    board = bytearray(128)
    kings = [0, 0]
    for i, rank in enumerate(ranks):
        r = 7 - i
        f = 0
        for ch in rank:
            if ch.isdigit():
                if ch == "0" or ch == "9":
                    raise MalformedFen(f"bad skip count {ch!r} in rank {r + 1}")
                f += int(ch)
            elif ch in _PIECE_FROM_CHAR:
                if f > 7:
                    raise MalformedFen(f"rank {r + 1} overflows 8 files")
                p = _PIECE_FROM_CHAR[ch]
                board[r * 16 + f] = p
                if p & 7 == 6:
                    kings[p >> 3] += 1
                if p & 7 == 1 and (r == 0 or r == 7):
                    raise MalformedFen("pawn on back rank")
                f += 1
            else:
                raise MalformedFen(f"bad piece char {ch!r}")
        if f != 8:
            raise MalformedFen(f"rank {r + 1} has {f} files, expected 8")
    if kings != [1, 1]:
        raise MalformedFen(f"need one king per side, got {kings}")

    if stm_f not in ("w", "b"):
        raise MalformedFen(f"bad side-to-move {stm_f!r}")
    stm = 0 if stm_f == "w" else 1

    castling = 0
    if castle_f != "-":
        for ch in castle_f:
            bit = _CASTLE_BITS.get(ch)
            if bit is None or castling & bit:
                raise MalformedFen(f"bad castling field {castle_f!r}")
            castling |= bit
    if castling & 1 and not (board[4] == 6 and board[7] == 4):
        raise MalformedFen("castling right K without king e1 / rook h1")
    if castling & 2 and not (board[4] == 6 and board[0] == 4):
        raise MalformedFen("castling right Q without king e1 / rook a1")
    if castling & 4 and not (board[116] == 14 and board[119] == 12):
        raise MalformedFen("castling right k without king e8 / rook h8")
    if castling & 8 and not (board[116] == 14 and board[112] == 12):
        raise MalformedFen("castling right q without king e8 / rook a8")

    ep = -1
    if ep_f != "-":
        if not re.fullmatch(r"[a-h][36]", ep_f):
            raise MalformedFen(f"bad en-passant field {ep_f!r}")
        ep = _sq_from_name(ep_f)
        expect_rank = 5 if stm == 0 else 2
        if ep >> 4 != expect_rank:
            raise MalformedFen("en-passant square on wrong rank for side to move")
        pawn = 9 if stm == 0 else 1
        behind = ep - 16 if stm == 0 else ep + 16
        ahead = ep + 16 if stm == 0 else ep - 16
        if board[ep] != 0 or board[behind] != pawn or board[ahead] != 0:
            raise MalformedFen("en-passant square inconsistent with pawns")

    try:
        halfmove = int(half_f)
        fullmove = int(full_f)
    except ValueError:
        raise MalformedFen("move counters must be integers") from None
    if halfmove < 0 or fullmove < 1:
        raise MalformedFen("move counters out of range")

    if _mg.attacked(board, _mg.king_square(board, stm ^ 1), stm):
        raise MalformedFen("side not to move is in check")

    if ep >= 0 and not _mg.ep_capture_exists(board, stm, castling, ep):
        ep = -1

    return Position(bytes(board), stm, castling, ep, halfmove, fullmove)


def legal_moves(p: Position) -> tuple[str, ...]:
    """All legal moves as UCI strings, lexicographically sorted."""
    return tuple(p._legal_encoded)


def apply_move(p: Position, uci: str) -> Position:
    move = p._legal_encoded.get(uci)
    if move is None:
        raise IllegalMove(f"{uci!r} is not legal in {p.fen!r}")
    reset = _mg.is_capture_or_pawn(bytearray(p.board), p.ep, move)
    nb, castling, ep = _mg.apply_to_board(
        bytearray(p.board), p.stm, p.castling, p.ep, move)
    stm = p.stm ^ 1
    if ep >= 0 and not _mg.ep_capture_exists(nb, stm, castling, ep):
        ep = -1
    return Position(
        board=bytes(nb),
        stm=stm,
        castling=castling,
        ep=ep,
        halfmove=0 if reset else p.halfmove + 1,
        fullmove=p.fullmove + (1 if p.stm == 1 else 0),
    )


def is_check(p: Position) -> bool:
    return bool(_mg.in_check(bytearray(p.board), p.stm))


def game_outcome(p: Position) -> Outcome:
    """Classify the position under forced-termination rules only.

    Covers checkmate, stalemate, insufficient material, and the 75-move
    rule. Fivefold repetition needs game history; play loops track it via
    `position_key` counts.
    """
    b = bytearray(p.board)
    if not _mg.has_any_legal(b, p.stm, p.castling, p.ep):
        if _mg.in_check(b, p.stm):
            return Outcome("checkmate", winner=WHITE if p.stm == 1 else BLACK)
        return Outcome("stalemate")
    if p.halfmove >= 150:
        return Outcome("draw", reason="seventyfive-moves")
    if _mg.insufficient_material(b):
        return Outcome("draw", reason="insufficient-material")
    return ONGOING


def position_key(p: Position) -> str:
    """Repetition key: FEN without the move counters."""
    return " ".join(p.fen.split()[:4])


def perft(p: Position, depth: int) -> int:
    if depth < 0:
        raise ValueError("perft depth must be >= 0")
    return _mg.perft(bytearray(p.board), p.stm, p.castling, p.ep, depth)
