"""Strategy for orbits of f avoiding [0, r_M), obtained by conjugating the induced game.

Once Bob's interval sits in a single cell [r_{n+1}, r_n], the left branch
iterated n times maps it onto a subinterval of [r1, 1].  Alice keeps an
auxiliary induced-map game running on the images and pulls its answers back.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from typing import Optional

import gmpy2
from gmpy2 import mpfr

from ..numerics import ClosedInterval, MPGameError, hp, precision
from .alice import AliceStateEF, StrategyContext, alice_move_EF, classify
from .engine import GameConfig, GameState, RuleViolation, apply_move, new_game


class ConstantUnderestimateError(MPGameError):
    """A realized distortion ratio broke the bound implied by the distortion constant."""


@dataclass(frozen=True)
class AliceStateEf:
    inner_ctx: StrategyContext = field(compare=False, repr=False)
    alpha_f: mpfr = None
    beta_f: mpfr = None
    alpha_F: mpfr = None
    beta_F: mpfr = None
    C2_hat: mpfr = None
    n: Optional[int] = None
    phase: str = "prelude"
    inner: Optional[AliceStateEF] = None
    inner_game: Optional[GameState] = field(default=None, compare=False, repr=False)
    lifted_at: Optional[int] = None  # Bob move index where the lift started
    seen_n: int = 0


def lift_ratios(alpha_F, beta_f, C2, prec):
    """alpha_f and beta_F from the induced-game ratios and the distortion constant."""
    with precision(prec):
        shrink = gmpy2.exp(-mpfr(C2))
        return shrink * mpfr(alpha_F), shrink * mpfr(beta_f)


def cell_of(cache, B: ClosedInterval) -> Optional[int]:
    """n >= 0 with B inside [r_{n+1}, r_n], or None."""
    if B.left <= 0:
        return None
    m = 0 if B.right == 1 else cache.r_index(B.right)
    for n in (m, m + 1):
        if B.right <= cache.r(n) and B.left >= cache.r(n + 1):
            return n
    return None


def prelude_move(cache, B: ClosedInterval, alpha_f, prec) -> ClosedInterval:
    """Right alpha_f-block of the largest cell piece of B, or of B itself."""
    with precision(prec):
        w = alpha_f * (B.right - B.left)
        m = 0 if B.right == 1 else cache.r_index(B.right)
        pieces = [ClosedInterval(max(B.left, cache.r(m + 1)), B.right)] if B.left < B.right else []
        if B.left < cache.r(m + 1) and B.right > cache.r(m + 1):
            lo = max(B.left, cache.r(m + 2))
            if lo < cache.r(m + 1):
                pieces.append(ClosedInterval(lo, cache.r(m + 1)))
        best = max(pieces, key=lambda P: P.right - P.left) if pieces else B
        if best.right - best.left < w:
            best = B
        return ClosedInterval(best.right - w, best.right)


def _image(br, B: ClosedInterval, n: int, clamp: Optional[ClosedInterval]) -> ClosedInterval:
    lo, hi = br.forward_left(B.left, n), br.forward_left(B.right, n)
    if clamp is not None:
        lo, hi = max(lo, clamp.left), min(hi, clamp.right)
    return ClosedInterval(lo, min(hi, mpfr(1)))


def _sync(state: GameState, astate: AliceStateEf) -> AliceStateEf:
    """Feed Bob's latest interval into the auxiliary game."""
    nb = state.round
    if nb == astate.seen_n:
        return astate
    ctx = astate.inner_ctx
    cache, br, prec = ctx.tree.cache, ctx.params.branches, ctx.prec
    B = state.last
    if astate.phase == "prelude":
        n = cell_of(cache, B)
        if n is None:
            return replace(astate, seen_n=nb)
        cfg = GameConfig(astate.alpha_F, astate.beta_F, "strong", state.config.max_rounds, prec,
                         ClosedInterval(ctx.params.r1, hp(1, prec)))
        Bp = _image(br, B, n, None)
        if Bp.left < ctx.params.r1:
            Bp = ClosedInterval(+ctx.params.r1, Bp.right)
        g = new_game(cfg, Bp)
        return replace(astate, phase="lifted", n=n, inner_game=g, lifted_at=nb, seen_n=nb,
                       inner=AliceStateEF.initial(ctx))
    g = astate.inner_game
    Ap = g.last
    Bp = _image(br, B, astate.n, Ap)
    try:
        g = apply_move(g, Bp)
    except RuleViolation as e:
        raise ConstantUnderestimateError(
            f"image of Bob's move breaks the auxiliary size rule ({e}); distortion constant too small") from e
    inner = classify(g, astate.inner)
    return replace(astate, inner_game=g, inner=inner, seen_n=nb)


def alice_move_Ef(state: GameState, astate: AliceStateEf):
    if state.to_move != "alice":
        raise MPGameError("not Alice's turn")
    astate = _sync(state, astate)
    ctx = astate.inner_ctx
    prec = ctx.prec
    B = state.last
    if astate.phase == "prelude":
        return prelude_move(ctx.tree.cache, B, astate.alpha_f, prec), astate
    g = astate.inner_game
    Ap, inner = alice_move_EF(g, astate.inner)
    g = apply_move(g, Ap)
    br = ctx.params.branches
    lo, hi = br.left_pullback(astate.n, Ap.left), br.left_pullback(astate.n, Ap.right)
    A = ClosedInterval(max(lo, B.left), min(hi, B.right))
    with precision(prec + 32):
        need = astate.alpha_f * (B.right - B.left) * (1 - state.config.tolerance())
        if A.right - A.left < need:
            raise ConstantUnderestimateError("pulled-back move is shorter than alpha_f |B|")
    return A, replace(astate, inner=inner, inner_game=g)


class AliceEf:
    kind = "Ef"

    def __init__(self, inner_ctx: StrategyContext, beta_f, C2):
        prec = inner_ctx.prec
        alpha_f, beta_F = lift_ratios(inner_ctx.alpha, beta_f, C2, prec)
        inner_ctx = dataclasses.replace(inner_ctx, beta=beta_F)
        self.ctx = inner_ctx
        self.astate = AliceStateEf(inner_ctx=inner_ctx, alpha_f=alpha_f, beta_f=hp(beta_f, prec),
                                   alpha_F=inner_ctx.alpha, beta_F=beta_F, C2_hat=hp(C2, prec))

    def move(self, state: GameState) -> ClosedInterval:
        A, self.astate = alice_move_Ef(state, self.astate)
        return A

    def observe(self, state: GameState):
        if state.to_move == "alice":
            self.astate = _sync(state, self.astate)

    @property
    def checkpoints(self):
        return self.astate.inner.checkpoints if self.astate.inner else ()

    def header(self) -> dict:
        s = self.astate
        inner = s.inner
        return {"alpha": s.alpha_f, "beta": s.beta_f, "alpha_F": s.alpha_F, "beta_F": s.beta_F,
                "C2_hat": s.C2_hat, "C5_hat": self.ctx.C5, "n": s.n, "lifted_at": s.lifted_at,
                "d1": inner.d1 if inner else None, "d2": inner.d2 if inner else None,
                "K": inner.K_target if inner else None}
