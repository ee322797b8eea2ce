import random
import sys

import pytest

from vamchess import board
from vamchess.engine import (
    EngineConfig,
    EngineEval,
    EngineSpawnFailure,
    IllegalCandidate,
    ProtocolError,
    UnsupportedOption,
    EnginePool,
    parse_info_line,
    start,
)
from vamchess.verifier import mu_exp, wdl_from_eval

MATE_IN_ONE = "6k1/5ppp/8/8/8/8/8/4R2K w - - 0 1"  # Re8#


@pytest.fixture(scope="module")
def engine():
    cfg = EngineConfig(command="toy", show_wdl=True,
                       options={"NodeBudget": 20000})
    with start(cfg) as handle:
        yield handle


class TestStart:
    def test_spawn_failure(self):
        with pytest.raises(EngineSpawnFailure):
            start(EngineConfig(command="/nonexistent/engine/binary"))

    def test_wdl_unsupported(self):
        cfg = EngineConfig(
            command=[sys.executable, "-m", "vamchess.toyengine", "--no-wdl"],
            show_wdl=True)
        with pytest.raises(UnsupportedOption):
            start(cfg)

    def test_handshake_collects_options(self, engine):
        assert "UCI_ShowWDL" in engine.options_available
        assert "Skill Level" in engine.options_available

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EngineConfig(skill_level=21)
        with pytest.raises(ValueError):
            EngineConfig(search_depth=0)
        with pytest.raises(ValueError):
            EngineConfig(movetime_ms=0)


class TestParseInfoLine:
    def test_cp_line(self):
        info = parse_info_line("info depth 12 score cp 35 nodes 100 pv e2e4")
        assert info == {"depth": 12, "cp": 35, "pv": ["e2e4"]}

    def test_mate_and_wdl(self):
        info = parse_info_line(
            "info depth 5 multipv 1 score mate -3 wdl 0 12 988 pv a2a3")
        assert info["mate"] == -3
        assert info["wdl"] == (0, 12, 988)

    def test_scoreless_returns_none(self):
        assert parse_info_line("info depth 3 nodes 4242") is None
        assert parse_info_line("bestmove e2e4") is None

    def test_bound_markers_tolerated(self):
        info = parse_info_line("info depth 9 score cp 10 lowerbound nodes 5")
        assert info["cp"] == 10
        assert info["bound"] == "lowerbound"

    def test_unparsable_raises(self):
        with pytest.raises(ProtocolError):
            parse_info_line("info score cp notanumber")


class TestEvaluate:
    def test_startpos_sane_and_wdl(self, engine):
        ev = engine.evaluate(board.startpos(), 1)
        assert ev.mate is None
        assert abs(ev.cp) < 200
        assert ev.pov == "w"
        w, d, l = ev.wdl
        assert abs(w + d + l - 1.0) < 1e-6

    def test_mate_in_one(self, engine):
        ev = engine.evaluate(board.parse_fen(MATE_IN_ONE), 2)
        assert ev.mate == 1
        assert ev.wdl == (1.0, 0.0, 0.0)

    def test_deterministic_at_fixed_depth(self, engine):
        p = board.parse_fen(
            "r1bqkbnr/pppp1ppp/2n5/4p3/4P3/5N2/PPPP1PPP/RNBQKB1R w KQkq - 2 3")
        assert engine.evaluate(p, 2) == engine.evaluate(p, 2)

    def test_black_pov(self, engine):
        p = board.apply_move(board.startpos(), "e2e4")
        ev = engine.evaluate(p, 1)
        assert ev.pov == "b"


class TestScoreMoves:
    def test_keyset_equals_candidates(self, engine):
        rng = random.Random(17)
        p = board.startpos()
        legal = board.legal_moves(p)
        for _ in range(3):
            candidates = tuple(sorted(rng.sample(legal, rng.randint(1, 6))))
            scores = engine.score_moves(p, candidates, 1)
            assert tuple(sorted(scores)) == candidates

    def test_singleton(self, engine):
        scores = engine.score_moves(board.startpos(), ("e2e4",), 1)
        assert set(scores) == {"e2e4"}

    def test_illegal_candidate(self, engine):
        with pytest.raises(IllegalCandidate):
            engine.score_moves(board.startpos(), ("e2e5",), 1)

    def test_mating_move_ranks_strictly_highest(self, engine):
        p = board.parse_fen(MATE_IN_ONE)
        scores = engine.score_moves(p, board.legal_moves(p), 2)
        mu = {m: mu_exp(wdl_from_eval(ev)[0]) for m, ev in scores.items()}
        assert scores["e1e8"].mate == 1
        for move, value in mu.items():
            if move != "e1e8":
                assert value < mu["e1e8"]

    def test_pov_is_the_mover(self, engine):
        scores = engine.score_moves(board.startpos(), ("e2e4",), 1)
        assert scores["e2e4"].pov == "w"

    def test_child_eval_negation_consistency(self, engine):
        # The per-candidate score equals the flipped child evaluation.
        p = board.startpos()
        for move in ("e2e4", "g1f3"):
            child = board.apply_move(p, move)
            direct = engine.evaluate(child, 1)
            scored = engine.score_moves(p, (move,), 1)[move]
            assert scored.cp == -direct.cp
            assert scored.pov != direct.pov


class TestBestMove:
    def test_mating_move_found(self, engine):
        assert engine.best_move(board.parse_fen(MATE_IN_ONE), 2) == "e1e8"

    def test_member_of_legal_set(self, engine):
        move = engine.best_move(board.startpos(), 1)
        assert move in set(board.legal_moves(board.startpos()))

    def test_terminal_position_rejected(self, engine):
        mated = board.parse_fen(
            "rnb1kbnr/pppp1ppp/8/4p3/6Pq/5P2/PPPPP2P/RNBQKBNR w KQkq - 1 3")
        with pytest.raises(ValueError):
            engine.best_move(mated, 1)


class TestEngineEval:
    def test_exactly_one_score_kind(self):
        with pytest.raises(ValueError):
            EngineEval(cp=10, mate=2)
        with pytest.raises(ValueError):
            EngineEval()

    def test_mate_zero_rejected(self):
        with pytest.raises(ValueError):
            EngineEval(mate=0)

    def test_wdl_must_normalize(self):
        with pytest.raises(ValueError):
            EngineEval(cp=0, wdl=(0.5, 0.5, 0.5))

    def test_flip(self):
        ev = EngineEval(cp=30, wdl=(0.6, 0.3, 0.1), pov="w", depth=4)
        back = ev.flipped()
        assert back.cp == -30
        assert back.wdl == (0.1, 0.3, 0.6)
        assert back.pov == "b"
        assert back.flipped() == ev


def test_pool_serializes_handles():
    cfg = EngineConfig(command="toy", show_wdl=False,
                       options={"NodeBudget": 2000})
    with EnginePool(cfg, size=2) as pool:
        with pool.acquire() as a:
            with pool.acquire() as b:
                assert a is not b
                assert a.best_move(board.startpos(), 1)
                assert b.best_move(board.startpos(), 1)
