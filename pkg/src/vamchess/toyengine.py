"""Small deterministic UCI engine, spawned as a subprocess for tests and
offline runs (`python -m vamchess.toyengine` or the vamchess-toy-engine
script). Any real UCI engine (e.g. Stockfish) can be dropped in instead
via the engine command config.

Search: fixed-depth iterative-deepening negamax with alpha-beta over a
material + piece-square evaluation. Everything that can stop a search is
deterministic for a fixed depth: move ordering is by (captured value,
move encoding) and the node budget is counted, not timed. A movetime
limit adds wall-clock stops for analysis-style queries where exact
reproducibility does not matter.

Reports cp / mate scores and, when UCI_ShowWDL is enabled, a win/draw/
loss triple in permille derived from the score by a fixed logistic curve
(monotone in cp, so WDL-based orderings match cp orderings).
"""

from __future__ import annotations

import argparse
import math
import sys
import time

from vamchess import _movegen as mg
from vamchess import board

MATE = mg.MATE_VALUE


def wdl_permille(cp: int) -> tuple[int, int, int]:
    """Fixed logistic map from centipawns to (win, draw, loss) permille."""
    w_frac = 1.0 / (1.0 + math.pow(10.0, -cp / 400.0))
    d_frac = 0.6 * math.exp(-((cp / 350.0) ** 2))
    w = round(1000 * w_frac * (1.0 - d_frac))
    d = round(1000 * d_frac)
    loss = 1000 - w - d
    if loss < 0:
        d += loss
        loss = 0
    return w, d, loss


class Searcher:
    """Iterative deepening around the kernel's fixed-depth search."""

    def __init__(self, node_budget: int):
        self.node_budget = node_budget
        self.nodes = 0

    def iterate(self, b, stm, castling, ep, max_depth, movetime_ms, emit):
        """Deepen until the depth target, the node budget, or the movetime.

        Node-budget stops are deterministic: complete iterations only,
        with a hard in-iteration cap at 4x the budget that discards the
        partial iteration. The first iteration always completes so a
        move always exists. Wall-clock stops apply only when a movetime
        was requested.
        """
        start = time.monotonic()
        deadline = start + movetime_ms / 1000.0 if movetime_ms else 0.0
        result = None
        for depth in range(1, max_depth + 1):
            hard_cap = 0 if depth == 1 else self.node_budget * 4
            value, move, used, aborted = mg.search_fixed(
                b, stm, castling, ep, depth, hard_cap, deadline)
            self.nodes += used
            if aborted:
                break
            result = (depth, value, move)
            emit(depth, value, move, self.nodes,
                 int((time.monotonic() - start) * 1000))
            if abs(value) > MATE - 100:
                break
            if self.nodes > self.node_budget:
                break
            if movetime_ms and (time.monotonic() - start) * 1000 >= movetime_ms / 2:
                break
        return result


def _score_tokens(value: int) -> str:
    if abs(value) > MATE - 1000:
        plies = MATE - abs(value)
        full_moves = (plies + 1) // 2
        return f"mate {full_moves if value > 0 else -full_moves}"
    return f"cp {value}"


class UciSession:
    def __init__(self, out, hide_wdl: bool = False):
        self.out = out
        self.hide_wdl = hide_wdl
        self.show_wdl = False
        self.node_budget = 200000
        self.position = board.startpos()

    def _print(self, text: str):
        self.out.write(text + "\n")
        self.out.flush()

    def handle(self, line: str) -> bool:
        """Process one command; False means quit."""
        parts = line.split()
        if not parts:
            return True
        cmd = parts[0]
        if cmd == "uci":
            self._print("id name vamchess-toy")
            self._print("id author vamchess")
            self._print("option name Threads type spin default 1 min 1 max 64")
            self._print("option name Skill Level type spin default 20 min 0 max 20")
            if not self.hide_wdl:
                self._print("option name UCI_ShowWDL type check default false")
            self._print("option name NodeBudget type spin default 200000 min 100 max 100000000")
            self._print("option name MultiPV type spin default 1 min 1 max 1")
            self._print("uciok")
        elif cmd == "isready":
            self._print("readyok")
        elif cmd == "setoption":
            self._setoption(line)
        elif cmd == "ucinewgame":
            self.position = board.startpos()
        elif cmd == "position":
            self._position(parts[1:])
        elif cmd == "go":
            self._go(parts[1:])
        elif cmd == "stop":
            pass  # searches are synchronous and bounded
        elif cmd == "quit":
            return False
        return True

    def _setoption(self, line: str):
        tokens = line.split()
        try:
            name_start = tokens.index("name") + 1
            value_start = tokens.index("value")
        except ValueError:
            return
        name = " ".join(tokens[name_start:value_start])
        value = " ".join(tokens[value_start + 1:])
        if name == "UCI_ShowWDL" and not self.hide_wdl:
            self.show_wdl = value.lower() == "true"
        elif name == "NodeBudget":
            self.node_budget = max(100, int(value))

    def _position(self, args: list[str]):
        if not args:
            return
        if args[0] == "startpos":
            pos = board.startpos()
            moves = args[2:] if len(args) > 1 and args[1] == "moves" else []
        elif args[0] == "fen":
            try:
                cut = args.index("moves")
                fen_fields, moves = args[1:cut], args[cut + 1:]
            except ValueError:
                fen_fields, moves = args[1:], []
            pos = board.parse_fen(" ".join(fen_fields))
        else:
            return
        for uci in moves:
            pos = board.apply_move(pos, uci)
        self.position = pos

    def _go(self, args: list[str]):
        depth = 4
        movetime = None
        for i, tok in enumerate(args):
            if tok == "depth":
                depth = int(args[i + 1])
            elif tok == "movetime":
                movetime = int(args[i + 1])

        pos = self.position
        moves = board.legal_moves(pos)
        if not moves:
            score = "mate 0" if board.is_check(pos) else "cp 0"
            self._print(f"info depth 0 score {score}")
            self._print("bestmove (none)")
            return

        searcher = Searcher(self.node_budget)

        def emit(d, value, move, nodes, elapsed_ms):
            score = _score_tokens(value)
            wdl = ""
            if self.show_wdl:
                if abs(value) > MATE - 1000:
                    w, dr, l = (1000, 0, 0) if value > 0 else (0, 0, 1000)
                else:
                    w, dr, l = wdl_permille(value)
                wdl = f" wdl {w} {dr} {l}"
            uci = board._move_uci(move)
            self._print(f"info depth {d} score {score}{wdl} nodes {nodes} "
                        f"time {elapsed_ms} pv {uci}")

        result = searcher.iterate(bytearray(pos.board), pos.stm, pos.castling,
                                  pos.ep, depth, movetime, emit)
        if result is None:
            # movetime expired inside the first iteration: any legal move
            best = pos._legal_encoded[moves[0]]
            self._print("info depth 0 score cp 0")
        else:
            best = result[2]
        self._print(f"bestmove {board._move_uci(best)}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="deterministic toy UCI engine")
    parser.add_argument("--no-wdl", action="store_true",
                        help="do not advertise the UCI_ShowWDL option")
    args = parser.parse_args(argv)
    session = UciSession(sys.stdout, hide_wdl=args.no_wdl)
    for line in sys.stdin:
        if not session.handle(line.strip()):
            break
    return 0


if __name__ == "__main__":
    sys.exit(main())
