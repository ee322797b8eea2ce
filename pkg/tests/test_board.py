import random

import pytest

import oracle_movegen
from vamchess import board
from vamchess.board import (
    IllegalMove,
    MalformedFen,
    apply_move,
    game_outcome,
    legal_moves,
    parse_fen,
    position_key,
    startpos,
)

KIWIPETE = "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1"


class TestParseFen:
    def test_startpos_roundtrip(self):
        p = parse_fen(board.STARTPOS_FEN)
        assert p.fen == board.STARTPOS_FEN
        assert p.side_to_move == "w"
        assert p.ply_count == 0

    def test_garbage_rejected(self):
        with pytest.raises(MalformedFen):
            parse_fen("not a fen")

    def test_nine_ranks_rejected(self):
        fen = "8/8/8/8/8/8/8/8/8 w - - 0 1"
        with pytest.raises(MalformedFen):
            parse_fen(fen)

    @pytest.mark.parametrize("fen", [
        "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0",  # 5 fields
        "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR x KQkq - 0 1",  # bad stm
        "rnbqkbnr/pppppppp/9/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",  # bad skip
        "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBN1 w KQkq - 0 1",  # K right, no h1 rook
        "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq e9 0 1",  # bad ep square
        "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - -1 1",  # negative counter
        "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 x",  # non-int counter
        "Pnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",  # pawn on rank 8
        "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQ1BNR w - - 0 1",  # missing white king
        "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNRR w - - 0 1",  # 9 files
    ])
    def test_rejections(self, fen):
        with pytest.raises(MalformedFen):
            parse_fen(fen)

    def test_side_not_to_move_in_check_rejected(self):
        # white king attacked but black to move: the king could be captured
        with pytest.raises(MalformedFen):
            parse_fen("4k3/8/8/8/7b/8/8/4K3 b - - 0 1")

    def test_ep_square_dropped_without_legal_capture(self):
        # e3 reachable double push but no black pawn can take en passant
        p = parse_fen("rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq e3 0 1")
        assert p.fen.split()[3] == "-"

    def test_ep_square_kept_with_legal_capture(self):
        p = apply_move(apply_move(apply_move(
            startpos(), "e2e4"), "a7a6"), "e4e5")
        p = apply_move(p, "d7d5")
        assert p.fen.split()[3] == "d6"
        assert "e5d6" in legal_moves(p)

    def test_counters_preserved_verbatim(self):
        fen = "r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 37 91"
        assert parse_fen(fen).fen == fen


class TestMoves:
    def test_e2e4(self):
        p = apply_move(startpos(), "e2e4")
        assert p.fen == "rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq - 0 1"
        assert p.side_to_move == "b"
        assert p.ply_count == 1

    def test_castling_is_king_move(self):
        p = parse_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1")
        after = apply_move(p, "e1g1")
        assert after.fen.split()[0] == "r3k2r/8/8/8/8/8/8/R4RK1"
        assert after.fen.split()[2] == "kq"

    def test_illegal_move_rejected(self):
        with pytest.raises(IllegalMove):
            apply_move(startpos(), "e2e5")

    def test_promotion(self):
        p = parse_fen("8/P7/8/8/8/4k3/8/4K3 w - - 0 1")
        after = apply_move(p, "a7a8q")
        assert after.fen.split()[0] == "Q7/8/8/8/8/4k3/8/4K3"

    def test_lexicographic_order_and_determinism(self):
        p = parse_fen(KIWIPETE)
        first = legal_moves(p)
        second = legal_moves(parse_fen(KIWIPETE))
        assert first == second
        assert list(first) == sorted(first)

    def test_start_has_20_moves(self):
        assert len(legal_moves(startpos())) == 20

    def test_halfmove_clock(self):
        p = apply_move(startpos(), "g1f3")  # knight move: clock ticks
        assert p.halfmove == 1
        p = apply_move(p, "e7e5")  # pawn move: reset
        assert p.halfmove == 0


class TestOutcome:
    def test_start_ongoing(self):
        assert game_outcome(startpos()).kind == "ongoing"

    def test_fools_mate(self):
        p = parse_fen("rnb1kbnr/pppp1ppp/8/4p3/6Pq/5P2/PPPPP2P/RNBQKBNR w KQkq - 1 3")
        out = game_outcome(p)
        assert out.kind == "checkmate"
        assert out.winner == "b"

    def test_stalemate(self):
        p = parse_fen("7k/5Q2/6K1/8/8/8/8/8 b - - 0 1")
        assert game_outcome(p).kind == "stalemate"
        assert legal_moves(p) == ()

    def test_king_vs_king_draw(self):
        out = game_outcome(parse_fen("8/8/8/8/8/4k3/8/4K3 w - - 0 1"))
        assert out.kind == "draw"
        assert out.reason == "insufficient-material"

    def test_king_bishop_vs_king_draw(self):
        out = game_outcome(parse_fen("8/8/8/8/8/4kb2/8/4K3 w - - 0 1"))
        assert out == board.Outcome("draw", reason="insufficient-material")

    def test_two_knights_not_auto_draw(self):
        out = game_outcome(parse_fen("8/8/8/4k3/8/8/3n1n2/4K3 w - - 0 1"))
        assert out.kind == "ongoing"

    def test_seventyfive_move_rule(self):
        out = game_outcome(parse_fen("8/8/8/4k3/8/8/8/4K2R w - - 150 99"))
        assert out == board.Outcome("draw", reason="seventyfive-moves")

    def test_checkmate_beats_move_counter(self):
        p = parse_fen("rnb1kbnr/pppp1ppp/8/4p3/6Pq/5P2/PPPPP2P/RNBQKBNR w KQkq - 150 99")
        assert game_outcome(p).kind == "checkmate"


def _random_walk_positions(seed, games, max_plies):
    rng = random.Random(seed)
    seen = []
    for _ in range(games):
        p = startpos()
        for _ in range(max_plies):
            moves = legal_moves(p)
            if not moves or game_outcome(p).is_terminal:
                break
            p = apply_move(p, rng.choice(moves))
            seen.append(p)
    return seen


def test_fuzzed_move_sets_match_reference():
    for p in _random_walk_positions(seed=11071, games=25, max_plies=60):
        assert set(legal_moves(p)) == oracle_movegen.legal_move_set(p.fen), p.fen


def test_fuzzed_fen_roundtrip():
    for p in _random_walk_positions(seed=7, games=15, max_plies=80):
        again = parse_fen(p.fen)
        assert again == p
        assert again.fen == p.fen


def test_position_key_strips_counters():
    key = position_key(parse_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 37 91"))
    assert key == "r3k2r/8/8/8/8/8/8/R3K2R w KQkq -"


def test_pure_kernel_matches_active_backend():
    pure = board._load_pure_kernel()
    assert not pure.compiled_backend()
    for p in _random_walk_positions(seed=99, games=4, max_plies=30):
        got = sorted(pure.legal_moves(bytearray(p.board), p.stm, p.castling, p.ep))
        want = sorted(p._legal_encoded.values())
        assert got == want, p.fen
    assert pure.perft(bytearray(startpos().board), 0, 15, -1, 3) == 8902
