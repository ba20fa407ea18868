"""Command-line front end.

    mpgame simulate --gamma 1 --beta 0.3 --bob squeeze_left --rounds 60 --out t.json
    mpgame play --gamma 1 --beta 0.3
    mpgame constants --gamma 1 -N 1000
    mpgame cylinders --gamma 1 --generation 2 --max-symbol 5
    mpgame verify --gamma 0.5,1,2
    mpgame dimension --gamma 1 --K 2,5,10,50 --depth 4

Any subcommand accepts ``--config FILE`` with ``key = value`` lines; flags given
on the command line override the file.  Exit codes: 0 pass, 1 check failure,
2 usage error, 3 resource error.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import dataclasses
import io
import itertools
import json
import logging
import math
import sys

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _game_args(p):
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.3)
    p.add_argument("--alpha", type=float, default=None, help="default: the strategy's own alpha")
    p.add_argument("--variant", choices=("strong", "classic"), default="strong")
    p.add_argument("--rounds", type=_positive_int, default=60)
    p.add_argument("--game", choices=("EF", "Ef"), default="EF",
                   help="EF: induced map on [r1, 1]; Ef: the map itself on [0, 1]")
    p.add_argument("--prec", type=int, default=None, help="working precision in bits")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="mpgame", description="Interval games for an intermittent map.")
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        return p

    p = add("simulate", "play one game against a scripted adversary and audit it")
    _game_args(p)
    p.add_argument("--bob", choices=("random", "squeeze_left", "boundary_hugger", "scripted"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--script", help="JSON list of [left, right] Bob moves (for --bob scripted)")

    p = add("play", "play Bob yourself at the terminal")
    _game_args(p)

    p = add("constants", "estimate the map's constants")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("-N", type=int, default=1000)
    p.add_argument("--prec", type=int, default=256)
    p.add_argument("--seed", type=int, default=1)

    p = add("cylinders", "CSV of all cylinders of a generation with bounded symbols")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--generation", type=int, default=1)
    p.add_argument("--max-symbol", type=int, default=5)
    p.add_argument("--prec", type=int, default=256)

    p = add("verify", "run the invariant suite and aggregate pass/fail")
    p.add_argument("--gamma", type=_floats, default=[0.5, 1.0, 2.0])
    p.add_argument("--betas", type=_floats, default=[0.1, 0.3, 0.6])
    p.add_argument("--bobs", default="squeeze_left,boundary_hugger,random")
    p.add_argument("--seeds", type=_ints, default=[1])
    p.add_argument("--rounds", type=_positive_int, default=60)
    p.add_argument("--jobs", type=int, default=1)

    p = add("dimension", "survivor-set dimension estimates")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--K", type=_ints, default=[2, 5, 10, 50])
    p.add_argument("--depth", type=int, default=4)
    return top


def read_config(path: str) -> list:
    """A key = value file as a list of command-line tokens."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}")
    argv = []
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected 'key = value', got {line!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        if not key or not value:
            raise UsageError(f"{path}:{no}: empty key or value")
        flag = key.replace("_", "-")
        argv += [("-" if flag == "N" else "--") + flag, value]
    return argv


def parse_args(argv) -> argparse.Namespace:
    argv = list(argv)
    parser = build_parser()
    # splice the config file in right after the subcommand so later flags win
    for i, tok in enumerate(argv):
        if tok == "--config" or tok.startswith("--config="):
            if "=" in tok:
                path, drop = tok.split("=", 1)[1], 1
            elif i + 1 < len(argv):
                path, drop = argv[i + 1], 2
            else:
                raise UsageError("--config needs a path")
            rest = argv[:i] + argv[i + drop:]
            cmd = next((j for j, t in enumerate(rest) if not t.startswith("-")), None)
            if cmd is None:
                raise UsageError("missing subcommand")
            argv = rest[:cmd + 1] + read_config(path) + rest[cmd + 1:]
            break
    return parser.parse_args(argv)


def _emit(text: str, out: str):
    if out == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


# ---- games -------------------------------------------------------------

def _checked(t):
    """Transcript with audit and avoidance reports attached, and whether everything passed."""
    from .game import audit_P_invariants, audit_rules, verify_avoidance
    reports = {"rules": audit_rules(t).to_dict()}
    if t.checkpoints:
        reports["invariants"] = audit_P_invariants(t).to_dict()
        reports["avoidance"] = verify_avoidance(t).to_dict()
    ok = reports["rules"]["passed"]
    ok = ok and reports.get("invariants", {"passed": True})["passed"]
    ok = ok and reports.get("avoidance", {"status": "pass"})["status"] != "fail"
    return t.with_reports(**reports), ok


def _play(args, bob, seed):
    from .game import play_EF, play_Ef
    if args.game == "EF":
        return play_EF(args.gamma, args.beta, bob, seed=seed, rounds=args.rounds, variant=args.variant,
                       prec=args.prec, alpha=args.alpha)
    if args.variant != "strong" or args.alpha is not None:
        raise UsageError("the game for f is played in the strong variant with the lifted alpha")
    return play_Ef(args.gamma, args.beta, bob, seed=seed, rounds=args.rounds, prec=args.prec)


def cmd_simulate(args) -> int:
    bob = args.bob
    if bob == "scripted":
        if not args.script:
            raise UsageError("--bob scripted needs --script FILE")
        with open(args.script) as fh:
            bob = [(str(a), str(b)) for a, b in json.load(fh)]
    t = _play(args, bob, args.seed)
    if args.bob == "scripted":
        t = dataclasses.replace(t, bob="scripted")
    t, ok = _checked(t)
    _emit(t.to_json(), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _interval(pair, prec):
    from .numerics import ClosedInterval, hp
    a, b = pair
    return ClosedInterval(hp(a, prec), hp(b, prec))


def _context(tree, B):
    from .numerics import MPGameError
    try:
        res = tree.commensurate_generation(B)
        w = res.itinerary
        shown = ",".join(map(str, w[:8])) + ("..." if len(w) > 8 else "")
        return f"commensurate with generation {res.generation}, witness ({shown})"
    except MPGameError as e:
        return f"cylinder context unavailable ({e})"


def cmd_play(args, stdin=None, stdout=None) -> int:
    """Human plays Bob.  Enter 'left right' as decimals, or 'q' to stop."""
    from .game import RuleViolation, apply_move, choose_precision, new_game
    from .game.runner import finish, setup_EF, setup_Ef
    from .dynamics import MPParams
    from .game.alice import default_alpha
    from .cylinders import default_C5
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    prec = args.prec
    if prec is None:
        if args.game == "EF":
            a = args.alpha or default_alpha(args.gamma, default_C5(args.gamma), 256)
            prec = choose_precision(1 - MPParams.create(args.gamma, 256).r1, a, args.beta, args.rounds)
        else:
            prec = 2048
    if args.game == "EF":
        config, alice, tree, B1 = setup_EF(args.gamma, args.beta, args.variant, args.rounds, prec,
                                           alpha=args.alpha)
    else:
        config, alice, tree, B1 = setup_Ef(args.gamma, args.beta, args.rounds, prec)
    state = new_game(config, B1)
    status = "complete"
    say = lambda s: print(s, file=stdout, flush=True)  # noqa: E731
    seen = 0
    for rnd in range(1, args.rounds + 1):
        A = alice.move(state)
        trial = apply_move(state, A)
        say(f"round {rnd}: B = {state.last}")
        if args.game == "EF":
            say("  " + _context(tree, state.last))
        cps = getattr(alice, "checkpoints", ())
        if len(cps) > seen:
            c = cps[-1]
            say(f"  checkpoint {c.j} at generation {c.g} ({c.case}{'/' + c.subcase if c.subcase else ''})")
            seen = len(cps)
        say(f"  Alice plays A = {A}")
        while True:
            stdout.write("Bob> ")
            stdout.flush()
            line = stdin.readline()
            if not line or line.strip().lower() in ("q", "quit", "resign"):
                status = "resigned"
                break
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                say("enter two decimal endpoints, or q")
                continue
            try:
                B = _interval(parts, prec)
                state = apply_move(trial, B)
                break
            except RuleViolation as e:
                say(f"illegal move, {e.rule} rule: {e.detail}")
            except (ValueError, TypeError) as e:
                say(f"cannot parse move: {e}")
        if status == "resigned":
            break
    t = finish(state, alice, args.game, args.gamma, "human", 0, status)
    t, ok = _checked(t)
    _emit(t.to_json(), args.out)
    return EXIT_OK if ok else EXIT_FAIL


# ---- analysis ----------------------------------------------------------

def cmd_constants(args) -> int:
    from .analysis import estimate_constants, reports_to_json
    from .dynamics import MPParams
    est = estimate_constants(MPParams.create(args.gamma, args.prec), N=args.N, seed=args.seed)
    _emit(reports_to_json(est), args.out)
    return EXIT_OK


def cmd_cylinders(args) -> int:
    from .cylinders import CylinderTree
    from .dynamics import MPParams
    from .numerics import to_decimal
    if args.generation < 0 or args.max_symbol < 1:
        raise UsageError("need generation >= 0 and max-symbol >= 1")
    n = args.max_symbol ** args.generation
    if n > 1_000_000:
        from .numerics import ResourceError
        raise ResourceError(f"{n} cylinders requested; lower --generation or --max-symbol")
    tree = CylinderTree(MPParams.create(args.gamma, args.prec))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["itinerary", "left", "right", "width"])
    for itin in itertools.product(range(1, args.max_symbol + 1), repeat=args.generation):
        c = tree.cylinder(itin)
        w.writerow([" ".join(map(str, itin)), to_decimal(c.left, args.prec), to_decimal(c.right, args.prec),
                    to_decimal(c.width(), args.prec)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_dimension(args) -> int:
    from .analysis import dimension_report
    from .dynamics import MPParams
    params = MPParams.create(args.gamma, 128)
    out = [dimension_report(params, K, args.depth).to_dict() for K in args.K]
    dims = [r["dimension"] for r in out]
    monotone = all(a <= b for a, b in zip(dims, dims[1:]))
    _emit(json.dumps({"reports": out, "nondecreasing": monotone}, indent=1), args.out)
    return EXIT_OK


def _verify_static(gamma: float) -> dict:
    import gmpy2
    from .analysis import check_asymptotics, lyapunov_estimate
    from .dynamics import MPParams, get_cache, mp_eval
    from .numerics import precision
    params = MPParams.create(gamma, 256)
    cache = get_cache(params)
    with precision(256):
        tol = gmpy2.mpfr(2) ** -200
        worst = max(max(abs(mp_eval(params, cache.r(n + 1)) - cache.r(n)),
                        abs(mp_eval(params, cache.p(n)) - cache.r(n))) for n in range(1, 1001))
        lyap = lyapunov_estimate(params, 1, 50)
        lyap_err = abs(lyap - gmpy2.log(2 + params.gamma))
    band = check_asymptotics(params, 10_000)
    return {
        "sequences": {"passed": bool(worst <= tol), "max_error": float(worst)},
        "asymptotics": {"passed": band.passed, "band": list(band.band), "worst": band.worst_defect},
        "lyapunov_fixed_point": {"passed": bool(lyap_err <= 1e-6), "error": float(lyap_err)},
    }


def _verify_game(job) -> dict:
    gamma, beta, bob, seed, rounds = job
    from .game import audit_P_invariants, play_EF, verify_avoidance
    t = play_EF(gamma, beta, bob, seed=seed, rounds=rounds)
    a = audit_P_invariants(t)
    v = verify_avoidance(t)
    return {"gamma": gamma, "beta": beta, "bob": bob, "seed": seed, "checkpoints": len(t.checkpoints),
            "invariants": a.passed, "avoidance": v.status, "t_verified": v.t_verified,
            "passed": a.passed and v.status != "fail", "failures": a.failures()[:5]}


def cmd_verify(args) -> int:
    bobs = [b.strip() for b in args.bobs.split(",") if b.strip()]
    for b in bobs:
        if b not in ("random", "squeeze_left", "boundary_hugger"):
            raise UsageError(f"unknown bob {b!r}")
    jobs = []
    for g, beta, b in itertools.product(args.gamma, args.betas, bobs):
        for s in (args.seeds if b == "random" else [0]):
            jobs.append((g, beta, b, s, args.rounds))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            static = dict(zip(map(str, args.gamma), ex.map(_verify_static, args.gamma)))
            games = list(ex.map(_verify_game, jobs))
    else:
        static = {str(g): _verify_static(g) for g in args.gamma}
        games = [_verify_game(j) for j in jobs]
    ok = all(c["passed"] for s in static.values() for c in s.values()) and all(g["passed"] for g in games)
    _emit(json.dumps({"passed": ok, "static": static, "games": games}, indent=1), args.out)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "play": cmd_play, "constants": cmd_constants,
            "cylinders": cmd_cylinders, "verify": cmd_verify, "dimension": cmd_dimension}


def main(argv=None) -> int:
    from .numerics import DomainError, MPGameError, ResourceError
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except UsageError as e:
        print(json.dumps({"error": "usage", "detail": str(e)}), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # argparse
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(json.dumps({"error": "usage", "detail": str(e)}), file=sys.stderr)
        return EXIT_USAGE
    except ResourceError as e:
        print(json.dumps({"error": "resource", "detail": str(e),
                          "hint": "lower the depth, symbol bound or rounds, or raise the budget"}), file=sys.stderr)
        return EXIT_RESOURCE
    except (DomainError, MPGameError) as e:
        print(json.dumps({"error": type(e).__name__, "detail": str(e)}), file=sys.stderr)
        return EXIT_USAGE if isinstance(e, DomainError) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
