"""UCI engine client.

Talks the text protocol to an external engine process over stdin/stdout:
handshake (uci/uciok, setoption, isready/readyok), fixed-depth analysis,
per-candidate child scoring, and best-move queries. A reader thread feeds
a queue so every read carries a deadline.

Determinism contract: one thread per engine, fixed depth, and a
`ucinewgame` before every query so cached search state never leaks
between evaluations. Scores are reported from the side to move of the
queried position; `score_moves` flips child evaluations back to the
mover's point of view.
"""

from __future__ import annotations

import queue
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from vamchess.board import Position, apply_move, game_outcome, legal_moves

TOY_ENGINE_COMMAND = "toy"


class EngineError(Exception):
    pass


class EngineSpawnFailure(EngineError):
    pass


class HandshakeTimeout(EngineError):
    pass


class UnsupportedOption(EngineError):
    pass


class EngineTimeout(EngineError):
    pass


class ProtocolError(EngineError):
    pass


class NoBestMove(EngineError):
    pass


class IllegalCandidate(ValueError):
    """score_moves candidate outside the position's legal set."""


@dataclass(frozen=True)
class EngineConfig:
    command: str | Sequence[str] = TOY_ENGINE_COMMAND
    skill_level: int = 0
    search_depth: int = 1
    movetime_ms: Optional[int] = None
    show_wdl: bool = True
    threads: int = 1
    query_timeout_s: float = 10.0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.skill_level <= 20:
            raise ValueError("skill level must be in 0..20")
        if self.search_depth < 1:
            raise ValueError("search depth must be >= 1")
        if self.movetime_ms is not None and self.movetime_ms <= 0:
            raise ValueError("movetime must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def argv(self) -> list[str]:
        if self.command == TOY_ENGINE_COMMAND:
            return [sys.executable, "-m", "vamchess.toyengine"]
        if isinstance(self.command, str):
            return [self.command]
        return list(self.command)


@dataclass(frozen=True)
class EngineEval:
    """Score from the point of view of `pov` (the queried side to move).

    Exactly one of cp / mate is set; mate counts are nonzero full moves.
    `wdl` is normalized to sum 1 when present.
    """

    cp: Optional[int] = None
    mate: Optional[int] = None
    wdl: Optional[tuple[float, float, float]] = None
    pov: str = "w"
    depth: Optional[int] = None

    def __post_init__(self):
        if (self.cp is None) == (self.mate is None):
            raise ValueError("exactly one of cp/mate must be set")
        if self.mate == 0:
            raise ValueError("mate distance cannot be 0")
        if self.wdl is not None:
            w, d, l = self.wdl
            if min(w, d, l) < -1e-9 or abs(w + d + l - 1.0) > 1e-6:
                raise ValueError(f"unnormalized wdl {self.wdl}")

    @property
    def is_mate(self) -> bool:
        return self.mate is not None

    def flipped(self) -> "EngineEval":
        """Same score seen from the other side."""
        return EngineEval(
            cp=-self.cp if self.cp is not None else None,
            mate=-self.mate if self.mate is not None else None,
            wdl=(self.wdl[2], self.wdl[1], self.wdl[0]) if self.wdl else None,
            pov="b" if self.pov == "w" else "w",
            depth=self.depth,
        )


def parse_info_line(line: str) -> Optional[dict]:
    """Extract depth/score/wdl from a UCI `info` line; None if scoreless."""
    tokens = line.split()
    if not tokens or tokens[0] != "info" or "score" not in tokens:
        return None
    out = {}
    i = 1
    try:
        while i < len(tokens):
            tok = tokens[i]
            if tok == "depth":
                out["depth"] = int(tokens[i + 1])
                i += 2
            elif tok == "multipv":
                out["multipv"] = int(tokens[i + 1])
                i += 2
            elif tok == "score":
                kind = tokens[i + 1]
                if kind not in ("cp", "mate"):
                    raise ValueError(kind)
                out[kind] = int(tokens[i + 2])
                i += 3
                if i < len(tokens) and tokens[i] in ("lowerbound", "upperbound"):
                    out["bound"] = tokens[i]
                    i += 1
            elif tok == "wdl":
                out["wdl"] = (int(tokens[i + 1]), int(tokens[i + 2]),
                              int(tokens[i + 3]))
                i += 4
            elif tok == "pv":
                out["pv"] = tokens[i + 1:]
                break
            else:
                i += 1
    except (IndexError, ValueError) as exc:
        raise ProtocolError(f"unparsable info line {line!r}") from exc
    if "cp" not in out and "mate" not in out:
        return None
    return out


class UciEngine:
    """One engine process; commands on a handle are strictly serialized."""

    def __init__(self, cfg: EngineConfig):
        self.cfg = cfg
        self.options_available: dict[str, str] = {}
        self._lock = threading.Lock()
        self._lines: queue.Queue = queue.Queue()
        try:
            self._proc = subprocess.Popen(
                cfg.argv(), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            raise EngineSpawnFailure(f"cannot spawn {cfg.argv()}: {exc}") from exc
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._handshake()

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)  # EOF marker

    def _send(self, command: str):
        if self._proc.poll() is not None:
            raise ProtocolError("engine process has exited")
        self._proc.stdin.write(command + "\n")
        self._proc.stdin.flush()

    def _read_until(self, sentinel: str, timeout: float,
                    collect=None) -> None:
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise EngineTimeout(f"no {sentinel!r} within {timeout}s")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise EngineTimeout(f"no {sentinel!r} within {timeout}s") from None
            if line is None:
                raise ProtocolError("engine closed its output stream")
            if collect is not None:
                collect(line)
            if line.split()[:1] == [sentinel]:
                return

    def _handshake(self):
        timeout = self.cfg.query_timeout_s

        def collect(line):
            parts = line.split()
            if len(parts) >= 3 and parts[0] == "option" and parts[1] == "name":
                try:
                    cut = parts.index("type")
                except ValueError:
                    cut = len(parts)
                self.options_available[" ".join(parts[2:cut])] = line

        try:
            self._send("uci")
            self._read_until("uciok", timeout, collect)
        except EngineTimeout as exc:
            self.close()
            raise HandshakeTimeout(str(exc)) from exc

        if self.cfg.show_wdl and "UCI_ShowWDL" not in self.options_available:
            self.close()
            raise UnsupportedOption("engine does not expose UCI_ShowWDL")

        self._setoption("Threads", self.cfg.threads)
        if "Skill Level" in self.options_available:
            self._setoption("Skill Level", self.cfg.skill_level)
        if self.cfg.show_wdl:
            self._setoption("UCI_ShowWDL", "true")
        for name, value in sorted(self.cfg.options.items()):
            self._setoption(name, value)
        self._send("isready")
        self._read_until("readyok", timeout)

    def _setoption(self, name: str, value):
        if isinstance(value, bool):
            value = "true" if value else "false"
        self._send(f"setoption name {name} value {value}")

    def close(self):
        if self._proc.poll() is None:
            try:
                self._send("quit")
                self._proc.wait(timeout=2.0)
            except (ProtocolError, subprocess.TimeoutExpired, OSError):
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- queries ---------------------------------------------------------

    def _drain(self):
        while True:
            try:
                line = self._lines.get_nowait()
            except queue.Empty:
                return
            if line is None:
                raise ProtocolError("engine closed its output stream")

    def _go(self, position: Position, depth: int,
            movetime_ms: Optional[int]) -> tuple[dict, str]:
        """Run one search; returns (last score info, bestmove token)."""
        self._drain()  # stale output from an earlier timed-out search
        self._send("ucinewgame")
        self._send("isready")
        self._read_until("readyok", self.cfg.query_timeout_s)
        self._send(f"position fen {position.fen}")
        go = f"go depth {depth}"
        if movetime_ms is not None:
            go += f" movetime {movetime_ms}"
        self._send(go)

        budget = self.cfg.query_timeout_s + (movetime_ms or 0) / 1000.0
        deadline = time.monotonic() + budget
        last_info: dict = {}
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise EngineTimeout(f"search exceeded {budget}s")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise EngineTimeout(f"search exceeded {budget}s") from None
            if line is None:
                raise ProtocolError("engine died mid-search")
            if line.startswith("bestmove"):
                parts = line.split()
                if len(parts) < 2:
                    raise ProtocolError(f"bad bestmove line {line!r}")
                return last_info, parts[1]
            info = parse_info_line(line)
            if info is not None and info.get("multipv", 1) == 1:
                last_info = info

    def _query(self, position: Position, depth: int,
               movetime_ms: Optional[int]) -> tuple[dict, str]:
        """_go with stop/retry on timeouts (3 attempts, then hard error)."""
        last_exc = None
        for _ in range(3):
            try:
                with self._lock:
                    return self._go(position, depth, movetime_ms)
            except EngineTimeout as exc:
                last_exc = exc
                try:
                    with self._lock:
                        self._send("stop")
                        self._send("isready")
                        self._read_until("readyok", 2.0)
                except EngineError:
                    break
        raise last_exc

    def evaluate(self, position: Position, depth: int,
                 movetime_ms: Optional[int] = None) -> EngineEval:
        """Evaluation from the side to move's point of view."""
        info, _ = self._query(position, depth, movetime_ms)
        if not info:
            raise ProtocolError("engine produced no scored info line")
        wdl = None
        if "wdl" in info:
            w, d, l = info["wdl"]
            total = w + d + l
            if total <= 0:
                raise ProtocolError(f"bad wdl triple {info['wdl']}")
            wdl = (w / total, d / total, l / total)
        return EngineEval(
            cp=info.get("cp"),
            mate=info.get("mate"),
            wdl=wdl,
            pov=position.side_to_move,
            depth=info.get("depth"),
        )

    def score_moves(self, position: Position, candidates, depth: int) -> dict[str, EngineEval]:
        """One eval per candidate, all from the mover's point of view.

        Each candidate is scored by evaluating the child position it
        leads to and negating; terminal children are scored directly
        (mate in 1 for checkmate, a dead draw as cp 0).
        """
        legal = set(legal_moves(position))
        bad = [m for m in candidates if m not in legal]
        if bad:
            raise IllegalCandidate(f"not legal here: {bad}")
        mover = position.side_to_move
        out = {}
        for move in candidates:
            child = apply_move(position, move)
            outcome = game_outcome(child)
            if outcome.kind == "checkmate":
                out[move] = EngineEval(mate=1, wdl=(1.0, 0.0, 0.0), pov=mover)
            elif outcome.is_terminal:
                out[move] = EngineEval(cp=0, wdl=(0.0, 1.0, 0.0), pov=mover)
            else:
                out[move] = self.evaluate(child, depth).flipped()
        return out

    def best_move(self, position: Position, depth: int,
                  movetime_ms: Optional[int] = None) -> str:
        if game_outcome(position).is_terminal:
            raise ValueError("no best move in a terminal position")
        _, best = self._query(position, depth, movetime_ms)
        if best in ("(none)", "0000"):
            raise NoBestMove(f"engine returned {best!r}")
        if best not in set(legal_moves(position)):
            raise ProtocolError(f"engine best move {best!r} is illegal")
        return best


def start(cfg: EngineConfig) -> UciEngine:
    """Spawn and handshake an engine process."""
    return UciEngine(cfg)


class EnginePool:
    """Fixed pool of handles from one config; acquire() to borrow."""

    def __init__(self, cfg: EngineConfig, size: int = 1):
        if size < 1:
            raise ValueError("pool size must be >= 1")
        self._handles = [UciEngine(cfg) for _ in range(size)]
        self._free: queue.Queue = queue.Queue()
        for h in self._handles:
            self._free.put(h)

    def acquire(self):
        import contextlib

        @contextlib.contextmanager
        def ctx():
            handle = self._free.get()
            try:
                yield handle
            finally:
                self._free.put(handle)

        return ctx()

    def close_all(self):
        for h in self._handles:
            h.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close_all()
