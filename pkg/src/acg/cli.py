"""Command-line entry point: ``acg <subcommand> [flags]``.

Every subcommand writes a ``key = value`` report to ``--output`` (default
stdout). Exit codes: 0 success, 2 bad input, 3 semidecision timeout.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import BudgetError, EigenError, FormatError, NotPSDError, ShapeError
from .game import Game, make_chsh, parse_game, validate
from .linalg import lambda_max
from .optimize import OptimizerConfig, best_deterministic, optimize_delta, seesaw_commuting
from .parallel import worker_count
from .report import format_report
from .semidecide import family_by_name, parse_witness, semidecide, serialize_witness, verify_witness
from .strategy import (
    defects,
    game_operator,
    game_value,
    parse_effects,
    parse_strategy,
    round_to_povm,
    serialize_effects,
    serialize_strategy,
    tsirelson_strategy,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_TIMEOUT = 3

BUILTIN_GAMES = {"chsh": make_chsh}
BUILTIN_STRATEGIES = {"tsirelson": tsirelson_strategy}


class UsageError(Exception):
    """Bad flags or inputs; reported on one line with exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_delta(text: str) -> Fraction:
    try:
        d = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"delta must be a rational p/q, got {text!r}") from None
    if not 0 <= d <= 1:
        raise argparse.ArgumentTypeError(f"delta must lie in [0, 1], got {text}")
    return d


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonnegative(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {v}")
    return v


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must be 'd' or 'dA,dB', got {text!r}") from None
    if len(dims) not in (1, 2) or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"dims must be 'd' or 'dA,dB' with positive entries, got {text!r}")
    return dims


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def load_game(source: str) -> Game:
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name not in BUILTIN_GAMES:
            raise UsageError(f"unknown builtin game {name!r}; known: {', '.join(BUILTIN_GAMES)}")
        return BUILTIN_GAMES[name]()
    g = parse_game(_read(source))
    report = validate(g)
    if not report.ok:
        raise UsageError(f"invalid game {source}: {'; '.join(report.violations)}")
    return g


def load_strategy(source: str):
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name not in BUILTIN_STRATEGIES:
            raise UsageError(f"unknown builtin strategy {name!r}; known: {', '.join(BUILTIN_STRATEGIES)}")
        return BUILTIN_STRATEGIES[name]()
    return parse_strategy(_read(source))


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None


# ---------------------------------------------------------------------------
# Subcommands return (exit code, report pairs).


def cmd_value(args):
    g = load_game(args.game)
    s = load_strategy(args.strategy)
    rep = defects(s)
    return EXIT_OK, [
        ("game", g.name),
        ("value", game_value(g, s)),
        ("lambda_max", lambda_max(game_operator(g, s.alice, s.bob))),
        ("defect_op_max", rep.op_max),
        ("defect_st_max", rep.st_max),
    ]


def cmd_classical(args):
    g = load_game(args.game)
    value, fa, fb = best_deterministic(g)
    return EXIT_OK, [
        ("game", g.name),
        ("value", value),
        ("alice", " ".join(str(a + 1) for a in fa)),
        ("bob", " ".join(str(b + 1) for b in fb)),
    ]


def cmd_optimize(args):
    g = load_game(args.game)
    if len(args.dims) == 2:
        if args.delta is not None:
            raise UsageError("--delta applies to single-space search; give --dims d")
        cfg = OptimizerConfig(seed=args.seed, restarts=args.restarts, dims=args.dims)
        res = seesaw_commuting(g, cfg)
        search = "seesaw"
    else:
        mode = args.mode if args.delta is not None else "unconstrained"
        cfg = OptimizerConfig(seed=args.seed, restarts=args.restarts, dims=args.dims,
                              delta=args.delta, mode=mode)
        res = optimize_delta(g, cfg)
        search = "delta"
    if args.strategy_out:
        _write(args.strategy_out, serialize_strategy(res.strategy))
    head = [("game", g.name), ("search", search), ("dims", ",".join(map(str, args.dims))),
            ("seed", args.seed)]
    return EXIT_OK, head + res.lines()


def cmd_round(args):
    xs = parse_effects(_read(args.povm))
    r = round_to_povm(xs)
    if args.povm_out:
        _write(args.povm_out, serialize_effects(r.povm.effects))
    total = sum(r.povm.effects)
    return EXIT_OK, [
        ("outcomes", len(xs)),
        ("dim", xs[0].shape[0]),
        ("phi_k", r.phi_k),
        ("distance", r.distance),
        ("completeness_error", float(np.max(np.abs(total - np.eye(total.shape[0]))))),
    ]


def cmd_semidecide(args):
    fam = family_by_name(args.family, args.delta)
    out = semidecide(fam, args.z, args.budget)
    pairs = [
        ("family", fam.name),
        ("z", args.z or "-"),
        ("delta", fam.delta(args.z)),
        ("budget", args.budget),
        ("outcome", out.label),
        ("examined", out.examined),
        ("emitted", out.emitted),
        ("defect_rejected", out.defect_rejected),
    ]
    if not out.accepted:
        return EXIT_TIMEOUT, pairs
    w = out.witness
    if args.witness_out:
        _write(args.witness_out, serialize_witness(w))
    return EXIT_OK, pairs + [
        ("index", w.index),
        ("dim", w.d),
        ("q", w.q),
        ("bound", w.bound),
        ("bound_float", float(w.bound)),
        ("defect_op_max", w.defect_op_max),
    ]


def cmd_verify(args):
    w = parse_witness(_read(args.witness))
    fam = family_by_name(w.family, w.delta if args.delta is None else args.delta)
    res = verify_witness(w, fam, w.z)
    pairs = [("family", w.family), ("z", w.z or "-"), ("index", w.index)]
    pairs += [(f"check_{i + 1}", line) for i, line in enumerate(res.trail)]
    pairs.append(("verified", res.ok))
    return (EXIT_OK if res.ok else EXIT_INVALID), pairs


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="acg", description="Almost-commuting nonlocal game toolkit.")
    sub = p.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
        sp.set_defaults(func=fn)
        return sp

    def game_flag(sp):
        sp.add_argument("--game", required=True, metavar="PATH",
                        help="game file, or builtin:chsh")

    sp = add("value", cmd_value, "Winning probability and defects of a strategy.")
    game_flag(sp)
    sp.add_argument("--strategy", required=True, metavar="PATH",
                    help="strategy file, or builtin:tsirelson")

    sp = add("classical", cmd_classical, "Exact classical value by enumerating deterministic strategies.")
    game_flag(sp)

    sp = add("optimize", cmd_optimize,
             "Lower bound on the game value: see-saw for --dims dA,dB, delta search for --dims d.")
    game_flag(sp)
    sp.add_argument("--dims", type=_dims, default=(2, 2), help="'dA,dB' or 'd' (default 2,2)")
    sp.add_argument("--delta", type=parse_delta, help="defect bound p/q in [0, 1]")
    sp.add_argument("--mode", choices=("op", "st"), default="op", help="defect kind (default op)")
    sp.add_argument("--restarts", type=_positive, default=8, help="random restarts (default 8)")
    sp.add_argument("--seed", type=_nonnegative, default=0, help="base seed (default 0)")
    sp.add_argument("--strategy-out", metavar="PATH", help="write the best strategy here")

    sp = add("round", cmd_round, "Round a near-POVM to an exact POVM.")
    sp.add_argument("--povm", required=True, metavar="PATH", help="file with the effects to round")
    sp.add_argument("--povm-out", metavar="PATH", help="write the rounded POVM here")

    sp = add("semidecide", cmd_semidecide, "Search for an accepting witness; exit 3 on timeout.")
    sp.add_argument("--family", required=True, choices=("toy", "chsh"), help="language family")
    sp.add_argument("--z", default="", help="input bit string (default empty)")
    sp.add_argument("--budget", type=_positive, required=True, help="number of cursor indices to examine")
    sp.add_argument("--delta", type=parse_delta, help="override the family's defect bound")
    sp.add_argument("--witness-out", metavar="PATH", help="write the accepting witness here")

    sp = add("verify", cmd_verify, "Recheck a witness file in exact arithmetic.")
    sp.add_argument("--witness", required=True, metavar="PATH", help="witness file")
    sp.add_argument("--delta", type=parse_delta, help="defect bound (default: the witness's own)")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        worker_count()  # reject a malformed ACG_THREADS before doing any work
        code, pairs = args.func(args)
        _write(args.output, format_report(pairs))
        return code
    except (UsageError, FormatError, ShapeError, NotPSDError, EigenError, BudgetError,
            ValueError) as exc:
        print(f"acg: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
