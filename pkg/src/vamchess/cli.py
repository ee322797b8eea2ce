"""Command-line entry point.

Subcommands: collect (engine-play position generation), prune (masked
rollout groups with iterative pruning, exported as a training batch),
eval-puzzles, eval-games, engine-check, and export (validate and
canonically rewrite a buffer). Every command is driven by a JSON config
plus a seed, and every report embeds the resolved config.

Exit codes: 0 success, 2 config/usage, 3 IO/schema, 4 engine,
5 generation endpoint.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from collections import Counter

from vamchess import board, datapipe, evaluation, rollout
from vamchess.config import (
    SCHEMA_VERSION,
    ConfigError,
    apply_dotted_override,
    build_policy,
    engine_config,
    grpo_config,
    load_config,
    mask_mdp_config,
)
from vamchess.engine import EngineError, UciEngine
from vamchess.prompts import BASELINE, VAM_SELECTION

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ENGINE = 4
EXIT_ENDPOINT = 5


def _report_envelope(cfg: dict, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "seed": cfg["seed"],
            "config": cfg, "report": body}


def cmd_collect(cfg: dict, args) -> int:
    budget = args.budget if args.budget is not None else cfg["collect"]["budget"]
    out_path = args.out or cfg["paths"]["buffer"]
    policy = build_policy(cfg)
    opponent_cfg = engine_config(cfg, "opponent")
    analyzer_cfg = engine_config(cfg, "analyzer")
    with UciEngine(opponent_cfg) as opponent, UciEngine(analyzer_cfg) as verifier:
        pool = datapipe.PlayPool(
            policy=policy,
            opponent=opponent,
            size=cfg["collect"]["pool_size"],
            opponent_depth=cfg["collect"]["opponent_depth"],
            invalid_retries=cfg["collect"]["invalid_retries"],
            seed=cfg["seed"],
        )
        records = datapipe.collect_by_play(
            pool, verifier, budget,
            reward_kind=cfg["verifier"]["reward_kind"],
            verifier_depth=cfg["verifier"]["depth"],
        )
    for record in records:
        violations = datapipe.validate_record(record)
        if violations:
            raise datapipe.SchemaError(f"collected record failed validation: {violations}")
    datapipe.persist_buffer(records, out_path)
    print(f"collect: wrote {len(records)} records to {out_path} "
          f"(games started {pool.games_started}, completed {pool.completed}, "
          f"forfeits {pool.forfeits})")
    return EXIT_OK


def cmd_prune(cfg: dict, args) -> int:
    dataset_path = args.dataset or cfg["paths"]["dataset"]
    if not dataset_path:
        raise ConfigError("prune needs a dataset (--dataset or paths.dataset)")
    out_path = args.out or "batch.jsonl"
    records = datapipe.load_dataset(dataset_path)
    if not records:
        print("prune: dataset is empty; wrote 0 records")
        rollout.export_batch([], out_path)
        return EXIT_OK
    n_states = args.states if args.states is not None else len(records)
    rng = random.Random(cfg["seed"])
    sampled = [records[rng.randrange(len(records))] for _ in range(n_states)]

    policy = build_policy(cfg)
    grpo = grpo_config(cfg)
    penalty = mask_mdp_config(cfg).penalty
    traces = []
    for record in sampled:
        position = board.parse_fen(record.fen)
        mask = record.allowed_moves or record.legal_moves_uci
        traces.append(rollout.prune_and_sample(
            policy, position, record.value_map, mask, grpo, penalty))
    count = rollout.export_batch(traces, out_path)

    rounds_hist = Counter(t.rounds_used for t in traces)
    found = sum(1 for t in traces if t.target_found_round is not None)
    hist = " ".join(f"{r}:{rounds_hist[r]}" for r in sorted(rounds_hist))
    print(f"prune: {len(traces)} states -> {count} groups at {out_path}; "
          f"rounds histogram {{{hist}}}; "
          f"target-found rate {found / len(traces):.3f}")
    return EXIT_OK


def cmd_eval_puzzles(cfg: dict, args) -> int:
    puzzles_path = args.puzzles or cfg["paths"]["dataset"]
    if not puzzles_path:
        raise ConfigError("eval-puzzles needs a puzzle file (--puzzles or paths.dataset)")
    mode = VAM_SELECTION if args.mode == "vam" else BASELINE
    puzzles = datapipe.load_dataset(puzzles_path)
    policy = build_policy(cfg)
    result = evaluation.eval_puzzles(policy, puzzles, mode)
    out_dir = args.out or cfg["paths"]["reports"]
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "puzzles.json")
    evaluation.write_report_json(
        _report_envelope(cfg, {"mode": mode, **result.to_json_obj()}), report_path)
    print(f"eval-puzzles: {result.passed}/{result.total} pass@1="
          f"{result.pass1_rate:.4f} format={result.format_rate:.4f} "
          f"legal={result.legality_rate:.4f} -> {report_path}")
    return EXIT_OK


def cmd_eval_games(cfg: dict, args) -> int:
    depths = ([int(d) for d in args.depths.split(",")] if args.depths
              else list(cfg["eval"]["depths"]))
    games_per_depth = (args.games if args.games is not None
                       else cfg["eval"]["games_per_depth"])
    opponent_cfg = engine_config(cfg, "opponent")
    analyzer_cfg = engine_config(cfg, "analyzer")
    game_cfg = evaluation.GameEvalConfig(
        analyzer_depth=analyzer_cfg.search_depth,
        analyzer_movetime_ms=analyzer_cfg.movetime_ms,
        cap=cfg["eval"]["cap"],
        max_plies=cfg["eval"]["max_plies"],
        invalid_retries=cfg["eval"]["invalid_retries"],
        workers=cfg["eval"]["workers"],
    )
    report, games = evaluation.eval_games(
        lambda game_seed: build_policy(cfg, seed_offset=game_seed),
        opponent_cfg, analyzer_cfg, depths, games_per_depth,
        cfg["seed"], game_cfg)
    out_dir = args.out or cfg["paths"]["reports"]
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "acpl.json")
    evaluation.write_report_json(
        _report_envelope(cfg, report.to_json_obj()), report_path)
    evaluation.write_games_csv(games, os.path.join(out_dir, "games.csv"),
                               cfg["eval"]["cap"])
    evaluation.write_moves_csv(games, os.path.join(out_dir, "moves.csv"))
    print(f"eval-games: {report.games} games, overall ACPL "
          f"{report.overall_acpl:.2f}, per-move {report.acpl_per_move:.2f}, "
          f"forfeits {report.forfeits} -> {report_path}")
    return EXIT_OK


def cmd_engine_check(cfg: dict, args) -> int:
    import dataclasses

    failures = 0
    for which in ("opponent", "analyzer"):
        ecfg = engine_config(cfg, which)
        # Probe without requiring WDL so a missing option is a warning here,
        # not a handshake failure.
        probe_cfg = dataclasses.replace(ecfg, show_wdl=False)
        print(f"[{which}] spawning {probe_cfg.argv()}")
        try:
            engine = UciEngine(probe_cfg)
        except EngineError as exc:
            print(f"[{which}] FAIL handshake: {exc}")
            failures += 1
            continue
        with engine:
            print(f"[{which}] handshake ok; {len(engine.options_available)} options")
            if "UCI_ShowWDL" in engine.options_available:
                print(f"[{which}] WDL: native engine support")
            elif ecfg.show_wdl:
                print(f"[{which}] WDL: requested but unsupported; logistic "
                      f"fallback from centipawns will be used")
            else:
                print(f"[{which}] WDL: not supported; logistic fallback from "
                      f"centipawns will be used")
            pos = board.startpos()
            # Fixed shallow depth, no movetime: the self-test must not
            # depend on wall-clock stops.
            probe_depth = min(ecfg.search_depth, 4)
            first = engine.evaluate(pos, probe_depth)
            second = engine.evaluate(pos, probe_depth)
            if first == second:
                print(f"[{which}] determinism ok: {first.cp if first.cp is not None else first.mate}")
            else:
                print(f"[{which}] FAIL determinism: {first} != {second}")
                failures += 1
    if failures:
        print(f"engine-check: {failures} probe(s) failed")
        return EXIT_ENGINE
    print("engine-check: all probes passed")
    return EXIT_OK


def cmd_export(cfg: dict, args) -> int:
    records = datapipe.load_buffer(args.infile)
    bad = 0
    for record in records:
        if datapipe.validate_record(record):
            bad += 1
    if bad:
        raise datapipe.SchemaError(f"{bad} records failed validation")
    out_path = args.out or args.infile
    datapipe.persist_buffer(records, out_path)
    print(f"export: rewrote {len(records)} validated records to {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vamchess",
        description="mask-conditioned chess move-selection harness")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--set", action="append", default=[], metavar="K=V",
                        dest="overrides", help="dotted config override, e.g. "
                        "grpo.group_size=4 (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="engine-play position generation")
    p.add_argument("--budget", type=int, help="records to collect")
    p.add_argument("--out", help="buffer path")

    p = sub.add_parser("prune", help="pruned rollout groups -> training batch")
    p.add_argument("--dataset", help="fixed dataset (JSONL)")
    p.add_argument("--states", type=int, help="number of base states to sample")
    p.add_argument("--out", help="batch path")

    p = sub.add_parser("eval-puzzles", help="pass@1 puzzle evaluation")
    p.add_argument("--puzzles", help="puzzle dataset (JSONL)")
    p.add_argument("--mode", choices=["baseline", "vam"], default="baseline")
    p.add_argument("--out", help="report directory")

    p = sub.add_parser("eval-games", help="full-game ACPL evaluation")
    p.add_argument("--depths", help="comma-separated opponent depths")
    p.add_argument("--games", type=int, help="games per depth (even)")
    p.add_argument("--out", help="report directory")

    sub.add_parser("engine-check", help="handshake, WDL probe, determinism self-test")

    p = sub.add_parser("export", help="validate and canonically rewrite a buffer")
    p.add_argument("infile", help="buffer to read")
    p.add_argument("--out", help="destination (defaults to in-place)")

    return parser


_COMMANDS = {
    "collect": cmd_collect,
    "prune": cmd_prune,
    "eval-puzzles": cmd_eval_puzzles,
    "eval-games": cmd_eval_games,
    "engine-check": cmd_engine_check,
    "export": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        for item in args.overrides:
            apply_dotted_override(cfg, item)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except datapipe.SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except (rollout.EndpointUnavailable, rollout.GenerationTimeout) as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT


if __name__ == "__main__":
    sys.exit(main())
