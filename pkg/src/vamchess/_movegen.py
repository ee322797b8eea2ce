# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""0x88 mailbox move-generation and search kernel.

Hot paths of the chess core and the bundled toy engine: pseudo-legal
generation, legality filtering, move application, attack detection,
perft node counting, and a fixed-depth alpha-beta search over a material
plus piece-square evaluation. Written in Cython pure-Python mode so the
identical source runs interpreted when the compiled extension is
unavailable; `compiled_backend()` reports which one is active.

Board layout: 128-byte bytearray, square index = rank * 16 + file with
rank 0 = rank "1". Indices with (sq & 0x88) != 0 are off the board.
Piece codes: type in bits 0-2 (1=P 2=N 3=B 4=R 5=Q 6=K), color in bit 3
(0 = white, 1 = black). Moves are ints: from | (to << 8) | (promo << 16).
"""

import cython

from time import monotonic as _monotonic

# Typed module-level variables compile to direct C accesses instead of
# module-dict lookups; interpreted mode sees the plain values.
EMPTY = cython.declare(cython.int, 0)
PAWN = cython.declare(cython.int, 1)
KNIGHT = cython.declare(cython.int, 2)
BISHOP = cython.declare(cython.int, 3)
ROOK = cython.declare(cython.int, 4)
QUEEN = cython.declare(cython.int, 5)
KING = cython.declare(cython.int, 6)

WHITE = cython.declare(cython.int, 0)
BLACK = cython.declare(cython.int, 1)

CASTLE_WK = cython.declare(cython.int, 1)
CASTLE_WQ = cython.declare(cython.int, 2)
CASTLE_BK = cython.declare(cython.int, 4)
CASTLE_BQ = cython.declare(cython.int, 8)

# Offsets biased by +64 so they pack into bytes objects (constant-time
# indexing in both backends).
_KNIGHT_D = cython.declare(bytes, bytes(d + 64 for d in (33, 31, 18, 14, -14, -18, -31, -33)))
_KING_D = cython.declare(bytes, bytes(d + 64 for d in (17, 16, 15, 1, -1, -15, -16, -17)))
_DIAG_D = cython.declare(bytes, bytes(d + 64 for d in (17, 15, -15, -17)))
_ORTHO_D = cython.declare(bytes, bytes(d + 64 for d in (16, 1, -1, -16)))


def compiled_backend() -> bool:
    return cython.compiled


@cython.ccall
def attacked(board: bytearray, sq: cython.int, by: cython.int) -> cython.int:
    """1 if `sq` is attacked by any piece of color `by`."""
    i: cython.int
    s: cython.int
    d: cython.int
    p: cython.int
    base: cython.int = by << 3
    knight_d: bytes = _KNIGHT_D
    king_d: bytes = _KING_D
    diag_d: bytes = _DIAG_D
    ortho_d: bytes = _ORTHO_D

    if by == WHITE:
        s = sq - 15
        if not s & 0x88 and board[s] == PAWN:
            return 1
        s = sq - 17
        if not s & 0x88 and board[s] == PAWN:
            return 1
    else:
        s = sq + 15
        if not s & 0x88 and board[s] == PAWN + 8:
            return 1
        s = sq + 17
        if not s & 0x88 and board[s] == PAWN + 8:
            return 1

    for i in range(8):
        s = sq + knight_d[i] - 64
        if not s & 0x88 and board[s] == base + KNIGHT:
            return 1
    for i in range(8):
        s = sq + king_d[i] - 64
        if not s & 0x88 and board[s] == base + KING:
            return 1

    for i in range(4):
        d = diag_d[i] - 64
        s = sq + d
        while not s & 0x88:
            p = board[s]
            if p != EMPTY:
                if p == base + BISHOP or p == base + QUEEN:
                    return 1
                break
            s += d
    for i in range(4):
        d = ortho_d[i] - 64
        s = sq + d
        while not s & 0x88:
            p = board[s]
            if p != EMPTY:
                if p == base + ROOK or p == base + QUEEN:
                    return 1
                break
            s += d
    return 0


@cython.ccall
def king_square(board: bytearray, color: cython.int) -> cython.int:
    sq: cython.int
    k: cython.int = (color << 3) + KING
    for sq in range(128):
        if not sq & 0x88 and board[sq] == k:
            return sq
    return -1


@cython.ccall
def in_check(board: bytearray, stm: cython.int) -> cython.int:
    return attacked(board, king_square(board, stm), stm ^ 1)


def pseudo_moves(board: bytearray, stm: cython.int, castling: cython.int,
                 ep: cython.int) -> list:
    """Pseudo-legal moves (castling path/check rules included)."""
    res = []
    sq: cython.int
    t: cython.int
    i: cython.int
    p: cython.int
    pt: cython.int
    tgt: cython.int
    d: cython.int
    forward: cython.int = 16 if stm == WHITE else -16
    start_rank: cython.int = 1 if stm == WHITE else 6
    promo_rank: cython.int = 7 if stm == WHITE else 0
    opp: cython.int = stm ^ 1

    for sq in range(128):
        if sq & 0x88:
            continue
        p = board[sq]
        if p == EMPTY or (p >> 3) != stm:
            continue
        pt = p & 7

        if pt == PAWN:
            t = sq + forward
            if not t & 0x88 and board[t] == EMPTY:
                if (t >> 4) == promo_rank:
                    res.append(sq + (t << 8) + (QUEEN << 16))
                    res.append(sq + (t << 8) + (ROOK << 16))
                    res.append(sq + (t << 8) + (BISHOP << 16))
                    res.append(sq + (t << 8) + (KNIGHT << 16))
                else:
                    res.append(sq + (t << 8))
                    if (sq >> 4) == start_rank and board[t + forward] == EMPTY:
                        res.append(sq + ((t + forward) << 8))
            for d in (forward - 1, forward + 1):
                t = sq + d
                if t & 0x88:
                    continue
                tgt = board[t]
                if (tgt != EMPTY and (tgt >> 3) == opp) or t == ep:
                    if (t >> 4) == promo_rank:
                        res.append(sq + (t << 8) + (QUEEN << 16))
                        res.append(sq + (t << 8) + (ROOK << 16))
                        res.append(sq + (t << 8) + (BISHOP << 16))
                        res.append(sq + (t << 8) + (KNIGHT << 16))
                    else:
                        res.append(sq + (t << 8))
        elif pt == KNIGHT:
            for i in range(8):
                t = sq + _KNIGHT_D[i] - 64
                if not t & 0x88:
                    tgt = board[t]
                    if tgt == EMPTY or (tgt >> 3) == opp:
                        res.append(sq + (t << 8))
        elif pt == KING:
            for i in range(8):
                t = sq + _KING_D[i] - 64
                if not t & 0x88:
                    tgt = board[t]
                    if tgt == EMPTY or (tgt >> 3) == opp:
                        res.append(sq + (t << 8))
            if stm == WHITE and sq == 4:
                if (castling & CASTLE_WK and board[5] == EMPTY
                        and board[6] == EMPTY and board[7] == ROOK
                        and not attacked(board, 4, BLACK)
                        and not attacked(board, 5, BLACK)
                        and not attacked(board, 6, BLACK)):
                    res.append(4 + (6 << 8))
                if (castling & CASTLE_WQ and board[3] == EMPTY
                        and board[2] == EMPTY and board[1] == EMPTY
                        and board[0] == ROOK
                        and not attacked(board, 4, BLACK)
                        and not attacked(board, 3, BLACK)
                        and not attacked(board, 2, BLACK)):
                    res.append(4 + (2 << 8))
            elif stm == BLACK and sq == 116:
                if (castling & CASTLE_BK and board[117] == EMPTY
                        and board[118] == EMPTY and board[119] == ROOK + 8
                        and not attacked(board, 116, WHITE)
                        and not attacked(board, 117, WHITE)
                        and not attacked(board, 118, WHITE)):
                    res.append(116 + (118 << 8))
                if (castling & CASTLE_BQ and board[115] == EMPTY
                        and board[114] == EMPTY and board[113] == EMPTY
                        and board[112] == ROOK + 8
                        and not attacked(board, 116, WHITE)
                        and not attacked(board, 115, WHITE)
                        and not attacked(board, 114, WHITE)):
                    res.append(116 + (114 << 8))
        else:
            if pt == BISHOP or pt == QUEEN:
                for i in range(4):
                    t = sq + _DIAG_D[i] - 64
                    while not t & 0x88:
                        tgt = board[t]
                        if tgt == EMPTY:
                            res.append(sq + (t << 8))
                        else:
                            if (tgt >> 3) == opp:
                                res.append(sq + (t << 8))
                            break
                        t += _DIAG_D[i] - 64
            if pt == ROOK or pt == QUEEN:
                for i in range(4):
                    t = sq + _ORTHO_D[i] - 64
                    while not t & 0x88:
                        tgt = board[t]
                        if tgt == EMPTY:
                            res.append(sq + (t << 8))
                        else:
                            if (tgt >> 3) == opp:
                                res.append(sq + (t << 8))
                            break
                        t += _ORTHO_D[i] - 64
    return res


@cython.ccall
def apply_to_board(board: bytearray, stm: cython.int, castling: cython.int,
                   ep: cython.int, move: cython.int) -> tuple:
    """Apply a move; returns (new_board, new_castling, new_ep)."""
    frm: cython.int = move & 0xFF
    to: cython.int = (move >> 8) & 0xFF
    promo: cython.int = (move >> 16) & 0xFF
    b: bytearray = bytearray(board)
    p: cython.int = b[frm]
    pt: cython.int = p & 7
    color: cython.int = p >> 3
    captured: cython.int = b[to]
    new_ep: cython.int = -1

    b[frm] = EMPTY
    if pt == PAWN:
        if to == ep and captured == EMPTY and (to - frm) != 16 and (frm - to) != 16:
            if color == WHITE:
                b[to - 16] = EMPTY
            else:
                b[to + 16] = EMPTY
        if to - frm == 32 or frm - to == 32:
            new_ep = (frm + to) // 2
    if promo:
        b[to] = promo + (color << 3)
    else:
        b[to] = p
    if pt == KING:
        if color == WHITE:
            castling &= ~(CASTLE_WK | CASTLE_WQ)
        else:
            castling &= ~(CASTLE_BK | CASTLE_BQ)
        if to - frm == 2:
            b[to - 1] = b[to + 1]
            b[to + 1] = EMPTY
        elif frm - to == 2:
            b[to + 1] = b[frm - 4]
            b[frm - 4] = EMPTY
    if frm == 0 or to == 0:
        castling &= ~CASTLE_WQ
    if frm == 7 or to == 7:
        castling &= ~CASTLE_WK
    if frm == 112 or to == 112:
        castling &= ~CASTLE_BQ
    if frm == 119 or to == 119:
        castling &= ~CASTLE_BK
    return b, castling, new_ep


@cython.ccall
def is_capture_or_pawn(board: bytearray, ep: cython.int, move: cython.int) -> cython.int:
    """1 if the move resets the halfmove clock (pawn move or capture)."""
    frm: cython.int = move & 0xFF
    to: cython.int = (move >> 8) & 0xFF
    if (board[frm] & 7) == PAWN:
        return 1
    if board[to] != EMPTY:
        return 1
    return 0


def legal_moves(board: bytearray, stm: cython.int, castling: cython.int,
                ep: cython.int) -> list:
    res = []
    m: cython.int
    ksq: cython.int = king_square(board, stm)
    opp: cython.int = stm ^ 1
    for m in pseudo_moves(board, stm, castling, ep):
        nb, _, _ = apply_to_board(board, stm, castling, ep, m)
        if not attacked(nb, (m >> 8) & 0xFF if (m & 0xFF) == ksq else ksq, opp):
            res.append(m)
    return res


def has_any_legal(board: bytearray, stm: cython.int, castling: cython.int,
                  ep: cython.int) -> cython.int:
    m: cython.int
    ksq: cython.int = king_square(board, stm)
    opp: cython.int = stm ^ 1
    for m in pseudo_moves(board, stm, castling, ep):
        nb, _, _ = apply_to_board(board, stm, castling, ep, m)
        if not attacked(nb, (m >> 8) & 0xFF if (m & 0xFF) == ksq else ksq, opp):
            return 1
    return 0


@cython.cfunc
def _make_inplace(board: bytearray, stm: cython.int, ep: cython.int,
                  m: cython.int) -> cython.int:
    """Apply `m` on the shared board; returns the captured piece code.

    Every side effect is derivable from (move, captured, stm), so
    `_unmake_inplace` restores the position without saved state.
    """
    frm: cython.int = m & 0xFF
    to: cython.int = (m >> 8) & 0xFF
    promo: cython.int = (m >> 16) & 0xFF
    p: cython.int = board[frm]
    captured: cython.int = board[to]
    board[frm] = EMPTY
    if promo:
        board[to] = promo + (stm << 3)
    else:
        board[to] = p
    if (p & 7) == PAWN and to == ep and captured == EMPTY \
            and (to - frm) != 16 and (frm - to) != 16:
        if stm == WHITE:
            board[to - 16] = EMPTY
        else:
            board[to + 16] = EMPTY
    elif (p & 7) == KING:
        if to - frm == 2:
            board[to - 1] = board[to + 1]
            board[to + 1] = EMPTY
        elif frm - to == 2:
            board[to + 1] = board[frm - 4]
            board[frm - 4] = EMPTY
    return captured


@cython.cfunc
def _unmake_inplace(board: bytearray, stm: cython.int, ep: cython.int,
                    m: cython.int, captured: cython.int) -> cython.void:
    frm: cython.int = m & 0xFF
    to: cython.int = (m >> 8) & 0xFF
    promo: cython.int = (m >> 16) & 0xFF
    p: cython.int = board[to]
    if promo:
        p = PAWN + (stm << 3)
    board[frm] = p
    board[to] = captured
    if (p & 7) == PAWN and to == ep and captured == EMPTY \
            and (to - frm) != 16 and (frm - to) != 16:
        if stm == WHITE:
            board[to - 16] = PAWN + 8
        else:
            board[to + 16] = PAWN
    elif (p & 7) == KING:
        if to - frm == 2:
            board[to + 1] = board[to - 1]
            board[to - 1] = EMPTY
        elif frm - to == 2:
            board[frm - 4] = board[to + 1]
            board[to + 1] = EMPTY


@cython.cfunc
def _child_state(castling: cython.int, frm: cython.int, to: cython.int,
                 pt: cython.int, stm: cython.int) -> cython.int:
    """Castling rights and en-passant square after a move, packed as
    (castling | (ep + 1) << 4); ep -1 packs to 0."""
    new_ep: cython.int = -1
    if pt == PAWN and (to - frm == 32 or frm - to == 32):
        new_ep = (frm + to) // 2
    if pt == KING:
        if stm == WHITE:
            castling &= ~(CASTLE_WK | CASTLE_WQ)
        else:
            castling &= ~(CASTLE_BK | CASTLE_BQ)
    if frm == 0 or to == 0:
        castling &= ~CASTLE_WQ
    if frm == 7 or to == 7:
        castling &= ~CASTLE_WK
    if frm == 112 or to == 112:
        castling &= ~CASTLE_BQ
    if frm == 119 or to == 119:
        castling &= ~CASTLE_BK
    return castling + ((new_ep + 1) << 4)


def perft(board: bytearray, stm: cython.int, castling: cython.int,
          ep: cython.int, depth: cython.int) -> object:
    """Legal-move-tree node count; mutates a scratch copy internally."""
    if depth <= 0:
        return 1
    return _perft_inner(bytearray(board), stm, castling, ep, depth)


@cython.cfunc
def _perft_inner(board: bytearray, stm: cython.int, castling: cython.int,
                 ep: cython.int, depth: cython.int) -> object:
    opp: cython.int = stm ^ 1
    ksq: cython.int = king_square(board, stm)
    total = 0
    m: cython.int
    frm: cython.int
    to: cython.int
    pt: cython.int
    captured: cython.int
    packed: cython.int
    for m in pseudo_moves(board, stm, castling, ep):
        frm = m & 0xFF
        to = (m >> 8) & 0xFF
        pt = board[frm] & 7
        captured = _make_inplace(board, stm, ep, m)
        if not attacked(board, to if pt == KING else ksq, opp):
            if depth == 1:
                total += 1
            else:
                packed = _child_state(castling, frm, to, pt, stm)
                total += _perft_inner(board, opp, packed & 0xF,
                                      ((packed >> 4) & 0xFF) - 1, depth - 1)
        _unmake_inplace(board, stm, ep, m, captured)
    return total


def ep_capture_exists(board: bytearray, stm: cython.int, castling: cython.int,
                      ep: cython.int) -> cython.int:
    """1 if a fully legal en-passant capture onto `ep` exists for `stm`."""
    if ep < 0:
        return 0
    forward: cython.int = 16 if stm == WHITE else -16
    pawn: cython.int = (stm << 3) + PAWN
    d: cython.int
    src: cython.int
    for d in (-1, 1):
        src = ep - forward + d
        if src & 0x88 or board[src] != pawn:
            continue
        nb, _, _ = apply_to_board(board, stm, castling, ep, src + (ep << 8))
        if not attacked(nb, king_square(nb, stm), stm ^ 1):
            return 1
    return 0


# Exposed as a module attribute for consumers; the typed alias below is
# what the compiled search reads.
MATE_VALUE = 100000
_MATE = cython.declare(cython.int, 100000)

# Piece-square tables, a1-first from white's perspective, packed into one
# bytes blob (value + 64) at offset piece_type * 64. Black mirrors with
# index ^ 56.
_PST_TABLES = {
    PAWN: (
        0, 0, 0, 0, 0, 0, 0, 0,
        5, 10, 10, -20, -20, 10, 10, 5,
        5, -5, -10, 0, 0, -10, -5, 5,
        0, 0, 0, 20, 20, 0, 0, 0,
        5, 5, 10, 25, 25, 10, 5, 5,
        10, 10, 20, 30, 30, 20, 10, 10,
        50, 50, 50, 50, 50, 50, 50, 50,
        0, 0, 0, 0, 0, 0, 0, 0,
    ),
    KNIGHT: (
        -50, -40, -30, -30, -30, -30, -40, -50,
        -40, -20, 0, 5, 5, 0, -20, -40,
        -30, 5, 10, 15, 15, 10, 5, -30,
        -30, 0, 15, 20, 20, 15, 0, -30,
        -30, 5, 15, 20, 20, 15, 5, -30,
        -30, 0, 10, 15, 15, 10, 0, -30,
        -40, -20, 0, 0, 0, 0, -20, -40,
        -50, -40, -30, -30, -30, -30, -40, -50,
    ),
    BISHOP: (
        -20, -10, -10, -10, -10, -10, -10, -20,
        -10, 5, 0, 0, 0, 0, 5, -10,
        -10, 10, 10, 10, 10, 10, 10, -10,
        -10, 0, 10, 10, 10, 10, 0, -10,
        -10, 5, 5, 10, 10, 5, 5, -10,
        -10, 0, 5, 10, 10, 5, 0, -10,
        -10, 0, 0, 0, 0, 0, 0, -10,
        -20, -10, -10, -10, -10, -10, -10, -20,
    ),
    ROOK: (
        0, 0, 0, 5, 5, 0, 0, 0,
        -5, 0, 0, 0, 0, 0, 0, -5,
        -5, 0, 0, 0, 0, 0, 0, -5,
        -5, 0, 0, 0, 0, 0, 0, -5,
        -5, 0, 0, 0, 0, 0, 0, -5,
        -5, 0, 0, 0, 0, 0, 0, -5,
        5, 10, 10, 10, 10, 10, 10, 5,
        0, 0, 0, 0, 0, 0, 0, 0,
    ),
    QUEEN: (
        -20, -10, -10, -5, -5, -10, -10, -20,
        -10, 0, 5, 0, 0, 0, 0, -10,
        -10, 5, 5, 5, 5, 5, 0, -10,
        0, 0, 5, 5, 5, 5, 0, -5,
        -5, 0, 5, 5, 5, 5, 0, -5,
        -10, 0, 5, 5, 5, 5, 0, -10,
        -10, 0, 0, 0, 0, 0, 0, -10,
        -20, -10, -10, -5, -5, -10, -10, -20,
    ),
    KING: (
        20, 30, 10, 0, 0, 10, 30, 20,
        20, 20, 0, 0, 0, 0, 20, 20,
        -10, -20, -20, -20, -20, -20, -20, -10,
        -20, -30, -30, -40, -40, -30, -30, -20,
        -30, -40, -40, -50, -50, -40, -40, -30,
        -30, -40, -40, -50, -50, -40, -40, -30,
        -30, -40, -40, -50, -50, -40, -40, -30,
        -30, -40, -40, -50, -50, -40, -40, -30,
    ),
}
_PST = cython.declare(bytes, bytes(
    _PST_TABLES[pt][i] + 64 if pt else 64
    for pt in (0, 1, 2, 3, 4, 5, 6)
    for i in range(64)
))


@cython.cfunc
def _piece_value(pt: cython.int) -> cython.int:
    if pt == PAWN:
        return 100
    if pt == KNIGHT:
        return 320
    if pt == BISHOP:
        return 330
    if pt == ROOK:
        return 500
    if pt == QUEEN:
        return 900
    return 0


@cython.ccall
def static_eval(board: bytearray, stm: cython.int) -> cython.int:
    """Material plus piece-square score from the side to move, plus tempo."""
    sq: cython.int
    p: cython.int
    pt: cython.int
    idx: cython.int
    score: cython.int = 0
    pst: bytes = _PST
    for sq in range(128):
        if sq & 0x88:
            continue
        p = board[sq]
        if p == EMPTY:
            continue
        pt = p & 7
        idx = ((sq >> 4) << 3) + (sq & 7)
        if p >> 3:
            score -= _piece_value(pt) + pst[(pt << 6) + (idx ^ 56)] - 64
        else:
            score += _piece_value(pt) + pst[(pt << 6) + idx] - 64
    if stm == BLACK:
        score = -score
    return score + 10


@cython.cclass
class SearchState:
    nodes: cython.longlong
    hard_cap: cython.longlong
    deadline: cython.double
    aborted: cython.bint

    def __init__(self, hard_cap, deadline):
        self.nodes = 0
        self.hard_cap = hard_cap
        self.deadline = deadline
        self.aborted = 0


@cython.cfunc
def _order_pseudo(board: bytearray, stm: cython.int, castling: cython.int,
                  ep: cython.int) -> list:
    """Pseudo-legal moves, captures first by victim value; deterministic."""
    moves = pseudo_moves(board, stm, castling, ep)
    buckets = ([], [], [], [], [], [])
    m: cython.int
    victim: cython.int
    for m in moves:
        victim = board[(m >> 8) & 0xFF] & 7
        buckets[5 - victim if victim else 5].append(m)
    out = []
    for i in range(6):
        out.extend(buckets[i])
    return out


@cython.cfunc
def _negamax(board: bytearray, stm: cython.int, castling: cython.int,
             ep: cython.int, depth: cython.int, ply: cython.int,
             alpha: cython.int, beta: cython.int, st: SearchState) -> cython.int:
    st.nodes += 1
    if st.aborted:
        return 0
    if st.hard_cap > 0 and st.nodes > st.hard_cap:
        st.aborted = 1
        return 0
    if st.deadline > 0 and (st.nodes & 1023) == 0 and _monotonic() > st.deadline:
        st.aborted = 1
        return 0
    opp: cython.int = stm ^ 1
    ksq: cython.int = king_square(board, stm)
    best: cython.int = -2 * _MATE
    value: cython.int
    m: cython.int
    frm: cython.int
    to: cython.int
    pt: cython.int
    captured: cython.int
    packed: cython.int
    found_legal: cython.int = 0
    for m in _order_pseudo(board, stm, castling, ep):
        frm = m & 0xFF
        to = (m >> 8) & 0xFF
        pt = board[frm] & 7
        captured = _make_inplace(board, stm, ep, m)
        if attacked(board, to if pt == KING else ksq, opp):
            _unmake_inplace(board, stm, ep, m, captured)
            continue
        found_legal = 1
        if depth <= 0:
            # Leaf with at least one legal reply: stand on the static eval.
            _unmake_inplace(board, stm, ep, m, captured)
            return static_eval(board, stm)
        packed = _child_state(castling, frm, to, pt, stm)
        value = -_negamax(board, opp, packed & 0xF, ((packed >> 4) & 0xFF) - 1,
                          depth - 1, ply + 1, -beta, -alpha, st)
        _unmake_inplace(board, stm, ep, m, captured)
        if st.aborted:
            return 0
        if value > best:
            best = value
        if best > alpha:
            alpha = best
        if alpha >= beta:
            return best
    if not found_legal:
        if in_check(board, stm):
            return -(_MATE - ply)
        return 0
    return best


def search_fixed(board: bytearray, stm: cython.int, castling: cython.int,
                 ep: cython.int, depth: cython.int,
                 hard_cap, deadline: cython.double) -> tuple:
    """One fixed-depth root search.

    Returns (value, best_move, nodes, aborted). `hard_cap` bounds total
    nodes deterministically (0 = unbounded); `deadline` is a monotonic
    timestamp for wall-clock aborts (0 = none). Aborted searches carry no
    usable value or move. Mutates a scratch copy, not the input board.
    """
    st = SearchState(hard_cap if hard_cap else 0, deadline)
    scratch: bytearray = bytearray(board)
    opp: cython.int = stm ^ 1
    ksq: cython.int = king_square(scratch, stm)
    best_move: cython.int = 0
    best_value: cython.int = -2 * _MATE
    value: cython.int
    m: cython.int
    frm: cython.int
    to: cython.int
    pt: cython.int
    captured: cython.int
    packed: cython.int
    for m in _order_pseudo(scratch, stm, castling, ep):
        frm = m & 0xFF
        to = (m >> 8) & 0xFF
        pt = scratch[frm] & 7
        captured = _make_inplace(scratch, stm, ep, m)
        if attacked(scratch, to if pt == KING else ksq, opp):
            _unmake_inplace(scratch, stm, ep, m, captured)
            continue
        packed = _child_state(castling, frm, to, pt, stm)
        value = -_negamax(scratch, opp, packed & 0xF, ((packed >> 4) & 0xFF) - 1,
                          depth - 1, 1, -2 * _MATE, -best_value, st)
        _unmake_inplace(scratch, stm, ep, m, captured)
        if st.aborted:
            return 0, 0, st.nodes, True
        if value > best_value:
            best_value = value
            best_move = m
    return best_value, best_move, st.nodes, False


def insufficient_material(board: bytearray) -> cython.int:
    """1 for material where no sequence of legal moves can mate either side."""
    sq: cython.int
    p: cython.int
    pt: cython.int
    minors: cython.int = 0
    bishops: cython.int = 0
    bishop_color_mask: cython.int = 0
    for sq in range(128):
        if sq & 0x88:
            continue
        p = board[sq]
        if p == EMPTY:
            continue
        pt = p & 7
        if pt == PAWN or pt == ROOK or pt == QUEEN:
            return 0
        if pt == KNIGHT:
            minors += 1
        elif pt == BISHOP:
            minors += 1
            bishops += 1
            bishop_color_mask |= 1 + (((sq >> 4) + (sq & 7)) & 1)
    if minors <= 1:
        return 1
    if bishops == minors and (bishop_color_mask == 1 or bishop_color_mask == 2):
        return 1
    return 0
