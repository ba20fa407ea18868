"""Alice's strong-winning strategy for orbits of the induced map avoiding (r1, p_K).

The strategy tracks checkpoints: Bob intervals whose commensurate generation
(the least g such that the interval contains a generation-g cylinder) jumps
above the previous checkpoint's.  At each checkpoint Alice either plays just
left of a low-generation left endpoint (case 2) or plays inside the parent of
the rightmost contained cylinder (case 1), then waits for the next jump.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import gmpy2
from gmpy2 import mpfr

from ..cylinders import CylinderTree, _Node
from ..dynamics import MPParams
from ..numerics import ClosedInterval, MPGameError, hp, precision
from .engine import GameState


class StrategyError(MPGameError):
    """The strategy's preconditions failed (usually an underestimated constant)."""


def default_alpha(gamma, C5, prec: int) -> mpfr:
    with precision(prec):
        g = mpfr(gamma)
        return mpfr(2) ** (-2 - 1 / g) / mpfr(C5)


@dataclass
class StrategyContext:
    params: MPParams
    tree: CylinderTree
    alpha: mpfr
    beta: mpfr
    C5: mpfr

    @property
    def prec(self) -> int:
        return self.params.prec


@dataclass(frozen=True)
class Checkpoint:
    j: int
    n: int            # Bob move index: B_n is history[2(n-1)]
    g: int
    witness: tuple    # itinerary of the rightmost generation-g cylinder inside B_n
    case: str = ""    # "case1" / "case2" once Alice has answered, "" for the final one
    subcase: str = ""
    forced: bool = False  # reached as the reply to a case-2 move
    injected: bool = False

    def as_dict(self) -> dict:
        return {"j": self.j, "n": self.n, "g": self.g, "witness": list(self.witness),
                "case": self.case, "subcase": self.subcase, "forced": self.forced,
                "injected": self.injected}


@dataclass(frozen=True)
class AliceStateEF:
    ctx: StrategyContext = field(compare=False, repr=False)
    j: int = 0
    n_j: int = 0
    g_j: int = 0
    d1: Optional[mpfr] = None
    d2: Optional[mpfr] = None
    d1_prime: Optional[mpfr] = None
    d2_prime: Optional[mpfr] = None
    C5_hat: Optional[mpfr] = None
    K_target: Optional[int] = None
    phase: str = "warmup"
    forced_next: bool = False
    checkpoints: tuple = ()
    seen_n: int = 0   # last Bob move already classified
    hint: Optional[_Node] = field(default=None, compare=False, repr=False)

    @classmethod
    def initial(cls, ctx: StrategyContext) -> "AliceStateEF":
        return cls(ctx=ctx, C5_hat=ctx.C5)


def _block_right(B: ClosedInterval, alpha, prec) -> ClosedInterval:
    with precision(prec):
        return ClosedInterval(B.right - alpha * (B.right - B.left), B.right)


def _block_left(B: ClosedInterval, alpha, prec) -> ClosedInterval:
    with precision(prec):
        return ClosedInterval(B.left, B.left + alpha * (B.right - B.left))


def _block_centered(C: ClosedInterval, width, prec) -> ClosedInterval:
    with precision(prec):
        c = (C.left + C.right) / 2
        return ClosedInterval(c - width / 2, c + width / 2)


def first_move(B: ClosedInterval, alpha, avoid, prec) -> ClosedInterval:
    """Right, left or centred alpha-block of B, the first that misses every point in ``avoid``."""
    with precision(prec):
        w = alpha * (B.right - B.left)
    for A in (_block_right(B, alpha, prec), _block_left(B, alpha, prec), _block_centered(B, w, prec)):
        if not any(A.contains(p) for p in avoid):
            return A
    raise StrategyError("no alpha-block avoids the designated points")


def fix_constants(ctx: StrategyContext, B2: ClosedInterval, g1: int) -> dict:
    """d1', d2' measured on the first checkpoint interval, then d1, d2 and K."""
    t, prec = ctx.tree, ctx.prec
    levels = t.meeting_levels(B2, g1 - 1)
    with precision(prec + 32):
        w = B2.right - B2.left
        d1p = max((t.right_of(n) - t.left_of(n)) / w for n in levels[g1 - 1])
        d2p = mpfr(1)
        for lvl in levels[: g1 - 1]:
            for n in lvl:
                L = t.left_of(n)
                if L >= B2.right:
                    continue
                if L >= B2.left:
                    raise StrategyError("a low-generation left endpoint lies inside the first checkpoint")
                d2p = max(d2p, (t.right_of(n) - L) / (B2.left - L))
        g = ctx.params.gamma
        a, b, C5 = ctx.alpha, ctx.beta, ctx.C5
        safety = mpfr("1.01")
        d1 = safety * max(d1p, mpfr(2) ** (1 + 1 / g) * C5 ** 2 / (a * b))
        d2 = safety * max(d2p, mpfr(2) ** (1 + 2 / g) * C5 ** 4 / (a * b), 2 * d1 / (1 - 2 * a))
        K = int(gmpy2.ceil((C5 * d2) ** g))
    return {"d1": hp(d1, prec), "d2": hp(d2, prec), "d1_prime": hp(d1p, prec),
            "d2_prime": hp(d2p, prec), "K": K}


def classify(state: GameState, astate: AliceStateEF) -> AliceStateEF:
    """Register Bob's latest interval: detect a new checkpoint and update the descent hint."""
    n = state.round
    if state.to_move != "alice" or n == astate.seen_n or n == 1:
        return astate
    ctx = astate.ctx
    t = ctx.tree
    B = state.last
    res = t.commensurate_generation(B, hint=astate.hint)
    hint = t.containing_chain(B, astate.hint)
    if astate.j == 0:
        if res.generation == 0:
            raise StrategyError("second Bob interval contains the whole field")
        consts = fix_constants(ctx, B, res.generation)
        cp = Checkpoint(1, n, res.generation, res.itinerary)
        return replace(astate, j=1, n_j=n, g_j=res.generation, d1=consts["d1"], d2=consts["d2"],
                       d1_prime=consts["d1_prime"], d2_prime=consts["d2_prime"], K_target=consts["K"],
                       phase="checkpoint", checkpoints=(cp,), seen_n=n, hint=hint, forced_next=False)
    g = res.generation
    if g < astate.g_j:
        raise StrategyError(f"commensurate generation decreased ({astate.g_j} -> {g}); intervals not nested")
    if astate.forced_next and g == astate.g_j:
        raise StrategyError("reply to a case-2 move is not a new checkpoint")
    if g > astate.g_j:
        cp = Checkpoint(astate.j + 1, n, g, res.itinerary, forced=astate.forced_next)
        return replace(astate, j=astate.j + 1, n_j=n, g_j=g, phase="checkpoint",
                       checkpoints=astate.checkpoints + (cp,), seen_n=n, hint=hint, forced_next=False)
    return replace(astate, phase="waiting", seen_n=n, hint=hint)


def checkpoint_move(ctx: StrategyContext, B: ClosedInterval, g: int, witness: tuple):
    """Alice's answer at a checkpoint; returns (A, case, subcase)."""
    t, prec, alpha = ctx.tree, ctx.prec, ctx.alpha
    mid = B.midpoint()
    with precision(prec):
        w = alpha * (B.right - B.left)
    found = [e for e in t.left_endpoint_scan(B, g - 1) if e.point > mid]
    if found:
        # case 2: play just left of the low-generation left endpoint
        e = min(found, key=lambda e: e.generation)
        with precision(prec):
            A = ClosedInterval(e.point - w, e.point)
        return A, "case2", ""
    node = t.node(witness)
    sigma = node.parent
    if t.left_of(t.child(sigma, 1)) > B.right:
        with precision(prec):
            A = ClosedInterval(B.right - w, B.right)
        return A, "case1", "1"
    J2 = t.interval_of(t.child(sigma, 2))
    if not J2.subset(B) or J2.width() <= w:
        raise StrategyError("second child too small for an alpha-block; length constant underestimated")
    return _block_centered(J2, w, prec), "case1", "2"


def alice_move_EF(state: GameState, astate: AliceStateEF):
    """Alice's move for the current position; returns (A, updated state)."""
    if state.to_move != "alice":
        raise MPGameError("not Alice's turn")
    ctx = astate.ctx
    B = state.last
    if state.round == 1:
        A = first_move(B, ctx.alpha, (ctx.params.r1, mpfr(1)), ctx.prec)
        return A, replace(astate, phase="warmup", seen_n=1)
    astate = classify(state, astate)
    if astate.phase == "checkpoint":
        cp = astate.checkpoints[-1]
        A, case, sub = checkpoint_move(ctx, B, astate.g_j, cp.witness)
        cp = replace(cp, case=case, subcase=sub)
        return A, replace(astate, checkpoints=astate.checkpoints[:-1] + (cp,),
                          forced_next=(case == "case2"), phase="waiting")
    return _block_right(B, ctx.alpha, ctx.prec), astate


class AliceEF:
    """Stateful wrapper so the runner can treat strategies uniformly."""

    kind = "EF"

    def __init__(self, ctx: StrategyContext):
        self.ctx = ctx
        self.astate = AliceStateEF.initial(ctx)

    def move(self, state: GameState) -> ClosedInterval:
        A, self.astate = alice_move_EF(state, self.astate)
        return A

    def observe(self, state: GameState):
        if state.to_move == "alice" and state.round > 1:
            self.astate = classify(state, self.astate)

    @property
    def checkpoints(self):
        return self.astate.checkpoints

    def header(self) -> dict:
        s = self.astate
        return {"alpha": self.ctx.alpha, "beta": self.ctx.beta, "C5_hat": self.ctx.C5,
                "d1": s.d1, "d2": s.d2, "d1_prime": s.d1_prime, "d2_prime": s.d2_prime,
                "K": s.K_target}
