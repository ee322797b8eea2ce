"""Independent reference move generator used only by tests.

Deliberately different from the package kernel: 8x8 nested lists in FEN
rank order, coordinate arithmetic per piece, and legality decided by a
"can the opponent capture the king afterwards" probe instead of ray-based
attack detection. Slow but simple; disagreements with the kernel flag a
bug in one of the two.
"""

from __future__ import annotations

import copy

FILES = "abcdefgh"

_OFFSETS = {
    "n": [(2, 1), (2, -1), (-2, 1), (-2, -1), (1, 2), (1, -2), (-1, 2), (-1, -2)],
    "k": [(1, 1), (1, 0), (1, -1), (0, 1), (0, -1), (-1, 1), (-1, 0), (-1, -1)],
    "b": [(1, 1), (1, -1), (-1, 1), (-1, -1)],
    "r": [(1, 0), (-1, 0), (0, 1), (0, -1)],
}
_OFFSETS["q"] = _OFFSETS["b"] + _OFFSETS["r"]


class RefBoard:
    """rows[0] is rank 8; each cell a FEN piece char or '.'."""

    def __init__(self, fen: str):
        placement, stm, castling, ep = fen.split()[:4]
        self.rows = []
        for rank in placement.split("/"):
            row = []
            for ch in rank:
                if ch.isdigit():
                    row.extend(["."] * int(ch))
                else:
                    row.append(ch)
            self.rows.append(row)
        self.white_to_move = stm == "w"
        self.castling = castling
        self.ep = ep

    def piece_at(self, square: str) -> str:
        r, c = _rc(square)
        return self.rows[r][c]


def _rc(square: str) -> tuple[int, int]:
    return 8 - int(square[1]), FILES.index(square[0])


def _square(r: int, c: int) -> str:
    return FILES[c] + str(8 - r)


def _is_white(piece: str) -> bool:
    return piece.isupper()


def _do_move(b: RefBoard, uci: str) -> RefBoard:
    nb = copy.deepcopy(b)
    fr, fc = _rc(uci[:2])
    tr, tc = _rc(uci[2:4])
    piece = nb.rows[fr][fc]
    nb.rows[fr][fc] = "."
    if piece.lower() == "p" and uci[2:4] == b.ep and nb.rows[tr][tc] == ".":
        nb.rows[fr][tc] = "."  # captured pawn sits beside the origin rank
    if len(uci) == 5:
        promo = uci[4]
        nb.rows[tr][tc] = promo.upper() if _is_white(piece) else promo
    else:
        nb.rows[tr][tc] = piece
    if piece.lower() == "k" and abs(tc - fc) == 2:
        if tc == 6:
            nb.rows[tr][5], nb.rows[tr][7] = nb.rows[tr][7], "."
        else:
            nb.rows[tr][3], nb.rows[tr][0] = nb.rows[tr][0], "."
    nb.white_to_move = not b.white_to_move
    return nb


def _capture_targets(b: RefBoard, white: bool) -> set[str]:
    """Squares holding a piece that `white` could capture in one move."""
    out = set()
    for r in range(8):
        for c in range(8):
            piece = b.rows[r][c]
            if piece == "." or _is_white(piece) != white:
                continue
            kind = piece.lower()
            if kind == "p":
                dr = -1 if white else 1
                for dc in (-1, 1):
                    tr, tc = r + dr, c + dc
                    if 0 <= tr < 8 and 0 <= tc < 8:
                        tgt = b.rows[tr][tc]
                        if tgt != "." and _is_white(tgt) != white:
                            out.add(_square(tr, tc))
            elif kind in ("n", "k"):
                for dr, dc in _OFFSETS[kind]:
                    tr, tc = r + dr, c + dc
                    if 0 <= tr < 8 and 0 <= tc < 8:
                        tgt = b.rows[tr][tc]
                        if tgt != "." and _is_white(tgt) != white:
                            out.add(_square(tr, tc))
            else:
                for dr, dc in _OFFSETS[kind]:
                    tr, tc = r + dr, c + dc
                    while 0 <= tr < 8 and 0 <= tc < 8:
                        tgt = b.rows[tr][tc]
                        if tgt != ".":
                            if _is_white(tgt) != white:
                                out.add(_square(tr, tc))
                            break
                        tr += dr
                        tc += dc
    return out


def _square_attacked(b: RefBoard, square: str, by_white: bool) -> bool:
    """Probe: drop a ghost enemy king on the square and see if it is capturable."""
    probe = copy.deepcopy(b)
    r, c = _rc(square)
    probe.rows[r][c] = "k" if by_white else "K"
    return square in _capture_targets(probe, by_white)


def _king_square(b: RefBoard, white: bool) -> str:
    target = "K" if white else "k"
    for r in range(8):
        for c in range(8):
            if b.rows[r][c] == target:
                return _square(r, c)
    raise AssertionError("king missing")


def _pseudo_moves(b: RefBoard, white: bool) -> list[str]:
    moves = []
    for r in range(8):
        for c in range(8):
            piece = b.rows[r][c]
            if piece == "." or _is_white(piece) != white:
                continue
            frm = _square(r, c)
            kind = piece.lower()
            if kind == "p":
                dr = -1 if white else 1
                last = 0 if white else 7
                if b.rows[r + dr][c] == ".":
                    _add_pawn(moves, frm, _square(r + dr, c), r + dr == last)
                    start = 6 if white else 1
                    if r == start and b.rows[r + 2 * dr][c] == ".":
                        moves.append(frm + _square(r + 2 * dr, c))
                for dc in (-1, 1):
                    tr, tc = r + dr, c + dc
                    if not (0 <= tc < 8 and 0 <= tr < 8):
                        continue
                    to = _square(tr, tc)
                    tgt = b.rows[tr][tc]
                    if (tgt != "." and _is_white(tgt) != white) or to == b.ep:
                        _add_pawn(moves, frm, to, tr == last)
            elif kind in ("n", "k"):
                for dr, dc in _OFFSETS[kind]:
                    tr, tc = r + dr, c + dc
                    if 0 <= tr < 8 and 0 <= tc < 8:
                        tgt = b.rows[tr][tc]
                        if tgt == "." or _is_white(tgt) != white:
                            moves.append(frm + _square(tr, tc))
            else:
                for dr, dc in _OFFSETS[kind]:
                    tr, tc = r + dr, c + dc
                    while 0 <= tr < 8 and 0 <= tc < 8:
                        tgt = b.rows[tr][tc]
                        if tgt == ".":
                            moves.append(frm + _square(tr, tc))
                        else:
                            if _is_white(tgt) != white:
                                moves.append(frm + _square(tr, tc))
                            break
                        tr += dr
                        tc += dc
    moves.extend(_castles(b, white))
    return moves


def _add_pawn(moves: list[str], frm: str, to: str, promotes: bool) -> None:
    if promotes:
        moves.extend(frm + to + p for p in "qrbn")
    else:
        moves.append(frm + to)


def _castles(b: RefBoard, white: bool) -> list[str]:
    out = []
    rank = 7 if white else 0
    rights = b.castling
    king, rook = ("K", "R") if white else ("k", "r")
    if _square_attacked(b, _square(rank, 4), not white):
        return out
    side = "K" if white else "k"
    if side in rights and b.rows[rank][4] == king and b.rows[rank][7] == rook:
        if (b.rows[rank][5] == "." and b.rows[rank][6] == "."
                and not _square_attacked(b, _square(rank, 5), not white)
                and not _square_attacked(b, _square(rank, 6), not white)):
            out.append(_square(rank, 4) + _square(rank, 6))
    side = "Q" if white else "q"
    if side in rights and b.rows[rank][4] == king and b.rows[rank][0] == rook:
        if (b.rows[rank][1] == "." and b.rows[rank][2] == "." and b.rows[rank][3] == "."
                and not _square_attacked(b, _square(rank, 2), not white)
                and not _square_attacked(b, _square(rank, 3), not white)):
            out.append(_square(rank, 4) + _square(rank, 2))
    return out


def legal_move_set(fen: str) -> set[str]:
    b = RefBoard(fen)
    white = b.white_to_move
    legal = set()
    for uci in _pseudo_moves(b, white):
        after = _do_move(b, uci)
        if _king_square(after, white) not in _capture_targets(after, not white):
            legal.add(uci)
    return legal


def successor_fen(fen: str, uci: str) -> str:
    """Successor FEN with castling/ep bookkeeping; counters set to '0 1'."""
    b = RefBoard(fen)
    moved = b.piece_at(uci[:2])
    after = _do_move(b, uci)

    rights = b.castling.replace("-", "")
    for corner, char in (("h1", "K"), ("a1", "Q"), ("h8", "k"), ("a8", "q")):
        rank = 7 if char.isupper() else 0
        king_home = _square(rank, 4)
        rook = "R" if char.isupper() else "r"
        if uci[:2] == king_home and moved.lower() == "k":
            rights = rights.replace(char, "")
        if corner in (uci[:2], uci[2:4]) and (moved == rook or uci[2:4] == corner):
            rights = rights.replace(char, "")

    ep = "-"
    if moved.lower() == "p" and abs(int(uci[3]) - int(uci[1])) == 2:
        ep = uci[0] + str((int(uci[1]) + int(uci[3])) // 2)

    rows = []
    for row in after.rows:
        out = ""
        run = 0
        for cell in row:
            if cell == ".":
                run += 1
            else:
                if run:
                    out += str(run)
                    run = 0
                out += cell
        if run:
            out += str(run)
        rows.append(out)
    stm = "w" if after.white_to_move else "b"
    return f"{'/'.join(rows)} {stm} {rights or '-'} {ep} 0 1"


def ref_perft(fen: str, depth: int) -> int:
    """Node counts over the reference generator only."""
    if depth == 0:
        return 1
    moves = legal_move_set(fen)
    if depth == 1:
        return len(moves)
    return sum(ref_perft(successor_fen(fen, m), depth - 1) for m in moves)
