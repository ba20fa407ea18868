"""Drives games: precision choice, restarts on precision loss, replay."""

from __future__ import annotations

import logging
import math

import gmpy2

from gmpy2 import mpfr

from ..cylinders import CylinderTree, default_C5
from ..dynamics import MPParams
from ..numerics import ClosedInterval, MPGameError, PrecisionError, hp, precision
from .alice import AliceEF, StrategyContext, default_alpha
from .bob import ScriptedBob, make_bob
from .engine import GameConfig, apply_move, new_game
from .lift import AliceEf, ConstantUnderestimateError, lift_ratios
from .transcript import Transcript

log = logging.getLogger(__name__)

GUARD_BITS = 64


def choose_precision(width, alpha, beta, rounds: int) -> int:
    """Twice the bits of |B_1| (alpha beta)^rounds plus a guard.

    Doubling keeps endpoint rounding below the 2^(-prec/2) relative tolerance
    of the size rule even for the narrowest interval of the game.
    """
    bits = -math.log2(float(width)) - rounds * math.log2(float(alpha) * float(beta))
    return max(256, 2 * int(math.ceil(bits)) + GUARD_BITS)


def run_game(config: GameConfig, alice, bob, rounds: int, B1: ClosedInterval, kind: str = "EF",
             gamma=None, bob_name: str = "", seed: int = 0) -> Transcript:
    """Alternate moves for ``rounds`` Alice/Bob pairs; the final interval is B_{rounds+1}."""
    if rounds < 0:
        raise MPGameError("rounds must be nonnegative")
    state = new_game(config, B1)
    for _ in range(rounds):
        state = apply_move(state, alice.move(state))
        state = apply_move(state, bob(state))
    return finish(state, alice, kind, gamma, bob_name, seed)


def finish(state, alice, kind: str, gamma, bob_name: str, seed: int, status: str = "complete") -> Transcript:
    """Package a state that ends on a Bob move into a transcript."""
    config = state.config
    if hasattr(alice, "observe"):
        alice.observe(state)
    consts = alice.header() if hasattr(alice, "header") else {}
    cps = tuple(getattr(alice, "checkpoints", ()))
    inner = None
    if kind == "Ef" and getattr(alice, "astate", None) is not None and alice.astate.inner_game is not None:
        g = alice.astate.inner_game
        inner = Transcript("EF", hp(gamma, config.prec_bits), config.prec_bits, "strong", g.config.alpha,
                           g.config.beta, g.completed_rounds, "lifted", seed, g.history, cps,
                           {k: consts.get(k) for k in ("alpha_F", "beta_F", "C5_hat", "d1", "d2", "K")})
    return Transcript(kind, hp(gamma if gamma is not None else 0, config.prec_bits), config.prec_bits,
                      config.variant, config.alpha, config.beta, state.completed_rounds, bob_name, seed,
                      state.history, cps, consts, status, tuple(sorted(state.injected)), inner)


def _bob_for(bob, tree, seed):
    if isinstance(bob, str):
        return make_bob(bob, tree, seed), bob
    if isinstance(bob, list):
        return ScriptedBob(bob), "scripted"
    return bob, getattr(bob, "name", "custom")


def play_EF(gamma, beta, bob="random", seed: int = 0, rounds: int = 60, variant: str = "strong",
            prec: int | None = None, B1=None, alpha=None, C5=None, max_escalations: int = 3) -> Transcript:
    """An induced-map game on [r1, 1] with Alice's winning strategy."""
    C5 = C5 if C5 is not None else default_C5(gamma)
    alpha0 = alpha if alpha is not None else default_alpha(gamma, C5, 256)
    if prec is None:
        p0 = MPParams.create(gamma, 256)
        width = (B1.right - B1.left) if B1 is not None else 1 - p0.r1
        prec = choose_precision(width, alpha0, beta, rounds)
    last = None
    for _ in range(max_escalations + 1):
        try:
            return _play_EF_once(gamma, beta, bob, seed, rounds, variant, prec, B1, alpha, C5)
        except PrecisionError as e:
            log.info("precision %d insufficient (%s); doubling", prec, e)
            last = e
            prec *= 2
    raise last


def setup_EF(gamma, beta, variant="strong", rounds=60, prec=256, B1=None, alpha=None, C5=None):
    """(config, alice, tree, B1) for an induced-map game at a fixed precision."""
    C5 = C5 if C5 is not None else default_C5(gamma)
    params = MPParams.create(gamma, prec)
    tree = CylinderTree(params)
    C5p = hp(C5, prec)
    a = hp(alpha, prec) if alpha is not None else default_alpha(params.gamma, C5p, prec)
    ctx = StrategyContext(params, tree, a, hp(beta, prec), C5p)
    field = ClosedInterval(params.r1, hp(1, prec))
    B1 = field if B1 is None else ClosedInterval(hp(B1.left, prec), hp(B1.right, prec))
    config = GameConfig(a, hp(beta, prec), variant, rounds, prec, field)
    return config, AliceEF(ctx), tree, B1


def _play_EF_once(gamma, beta, bob, seed, rounds, variant, prec, B1, alpha, C5, bob_name=None):
    config, alice, tree, B1 = setup_EF(gamma, beta, variant, rounds, prec, B1, alpha, C5)
    policy, name = _bob_for(bob, tree, seed)
    return run_game(config, alice, policy, rounds, B1, "EF", gamma, bob_name or name, seed)


def play_Ef(gamma, beta_f, bob="random", seed: int = 0, rounds: int = 60, prec: int | None = None,
            B1=None, C2=None, C5=None, max_escalations: int = 3, max_replays: int = 4) -> Transcript:
    """A game for f on [0, 1], won by lifting the induced-map strategy."""
    from ..analysis import default_C2
    C5 = C5 if C5 is not None else default_C5(gamma)
    C2 = hp(C2, 256) if C2 is not None else default_C2(gamma)
    for _ in range(max_replays + 1):
        alpha_F = default_alpha(gamma, C5, 256)
        alpha_f, _ = lift_ratios(alpha_F, beta_f, C2, 256)
        p = prec
        if p is None:
            width = (B1.right - B1.left) if B1 is not None else 1
            p = choose_precision(width, alpha_f, beta_f, rounds)
        try:
            for _ in range(max_escalations + 1):
                try:
                    return _play_Ef_once(gamma, beta_f, bob, seed, rounds, p, B1, C2, C5)
                except PrecisionError as e:
                    log.info("precision %d insufficient (%s); doubling", p, e)
                    p *= 2
            raise PrecisionError("precision escalation exhausted", p)
        except ConstantUnderestimateError as e:
            log.info("distortion constant %s too small (%s); enlarging", float(C2), e)
            with precision(256):
                C2 = C2 * mpfr("1.5")
    raise ConstantUnderestimateError("distortion constant still too small after replays")


def setup_Ef(gamma, beta_f, rounds=60, prec=256, B1=None, C2=None, C5=None):
    """(config, alice, tree, B1) for a game for f on [0, 1] at a fixed precision."""
    from ..analysis import default_C2
    C5 = C5 if C5 is not None else default_C5(gamma)
    C2 = C2 if C2 is not None else default_C2(gamma)
    params = MPParams.create(gamma, prec)
    tree = CylinderTree(params)
    C5p = hp(C5, prec)
    alpha_F = default_alpha(params.gamma, C5p, prec)
    alice = AliceEf(StrategyContext(params, tree, alpha_F, hp(beta_f, prec), C5p), beta_f, hp(C2, prec))
    s = alice.astate
    with precision(prec):
        if not s.beta_f < gmpy2.exp(-s.C2_hat):
            raise MPGameError(f"beta_f = {float(s.beta_f)} must be below exp(-C2) = {float(gmpy2.exp(-s.C2_hat)):.4g}")
    field = ClosedInterval.make(0, 1, prec)
    B1 = field if B1 is None else ClosedInterval(hp(B1.left, prec), hp(B1.right, prec))
    config = GameConfig(s.alpha_f, s.beta_f, "strong", rounds, prec, field)
    return config, alice, tree, B1


def _play_Ef_once(gamma, beta_f, bob, seed, rounds, prec, B1, C2, C5, bob_name=None):
    config, alice, tree, B1 = setup_Ef(gamma, beta_f, rounds, prec, B1, C2, C5)
    policy, name = _bob_for(bob, tree, seed)
    return run_game(config, alice, policy, rounds, B1, "Ef", gamma, bob_name or name, seed)


def replay(transcript: Transcript) -> Transcript:
    """Re-run the engine on the logged Bob moves at the logged precision."""
    script = [transcript.history[i] for i in range(2, len(transcript.history), 2)]
    B1 = transcript.history[0]
    if transcript.kind == "EF":
        C5 = transcript.constants.get("C5_hat")
        return _play_EF_once(transcript.gamma, transcript.beta, script, transcript.seed, transcript.rounds,
                             transcript.variant, transcript.prec, B1, transcript.alpha, C5, transcript.bob)
    c = transcript.constants
    return _play_Ef_once(transcript.gamma, transcript.beta, script, transcript.seed, transcript.rounds,
                         transcript.prec, B1, c["C2_hat"], c["C5_hat"], transcript.bob)
