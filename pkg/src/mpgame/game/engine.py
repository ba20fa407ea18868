"""Referee for Schmidt's game on an interval: nesting and size-ratio rules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from gmpy2 import mpfr

from ..numerics import ClosedInterval, DomainError, MPGameError, hp, precision

ALICE = "alice"
BOB = "bob"


class RuleViolation(MPGameError):
    """An illegal move; ``rule`` is "nesting" or "ratio", ``offender`` the player."""

    def __init__(self, rule: str, offender: str, detail: str = ""):
        super().__init__(f"{offender} violated the {rule} rule" + (f": {detail}" if detail else ""))
        self.rule = rule
        self.offender = offender
        self.detail = detail


@dataclass(frozen=True)
class GameConfig:
    alpha: mpfr
    beta: mpfr
    variant: str = "strong"
    max_rounds: int = 60
    prec_bits: int = 256
    field: Optional[ClosedInterval] = None  # None means [0, 1]

    def __post_init__(self):
        if self.variant not in ("classic", "strong"):
            raise DomainError(f"unknown variant {self.variant!r}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise DomainError(f"{name} must lie in (0, 1)")
        if self.max_rounds < 0:
            raise DomainError("max_rounds must be nonnegative")

    @classmethod
    def make(cls, alpha, beta, variant="strong", max_rounds=60, prec_bits=256, field=None):
        return cls(hp(alpha, prec_bits), hp(beta, prec_bits), variant, int(max_rounds), int(prec_bits), field)

    def field_interval(self) -> ClosedInterval:
        return self.field or ClosedInterval.make(0, 1, self.prec_bits)

    def tolerance(self) -> mpfr:
        return mpfr(2) ** (-(self.prec_bits // 2))


@dataclass(frozen=True)
class GameState:
    config: GameConfig
    history: tuple  # B1, A1, B2, A2, ...
    injected: frozenset = field(default_factory=frozenset)  # history indices played without the size rule

    @property
    def to_move(self) -> str:
        return ALICE if len(self.history) % 2 == 1 else BOB

    @property
    def round(self) -> int:
        return len(self.history) // 2 + 1

    @property
    def last(self) -> ClosedInterval:
        return self.history[-1]

    @property
    def bob_moves(self) -> tuple:
        return self.history[0::2]

    @property
    def alice_moves(self) -> tuple:
        return self.history[1::2]

    @property
    def completed_rounds(self) -> int:
        return (len(self.history) - 1) // 2


def new_game(config: GameConfig, B1: ClosedInterval) -> GameState:
    if not isinstance(B1, ClosedInterval):
        raise DomainError("B1 must be a ClosedInterval")
    fld = config.field_interval()
    if not B1.subset(fld):
        raise DomainError(f"B1 {B1!r} is not inside the playing field {fld!r}")
    return GameState(config, (B1,))


def check_move(config: GameConfig, prev: ClosedInterval, interval: ClosedInterval, mover: str,
               enforce_size: bool = True):
    """Raise RuleViolation unless ``interval`` is a legal reply to ``prev``."""
    if not interval.subset(prev):
        raise RuleViolation("nesting", mover, f"{interval!r} not inside {prev!r}")
    if not enforce_size:
        return
    ratio = config.alpha if mover == ALICE else config.beta
    tol = config.tolerance()
    with precision(config.prec_bits + 32):
        target = ratio * (prev.right - prev.left)
        w = interval.right - interval.left
        if config.variant == "classic":
            ok = abs(w - target) <= tol * target
        else:
            ok = w >= target * (1 - tol)
    if not ok:
        need = "=" if config.variant == "classic" else ">="
        raise RuleViolation("ratio", mover,
                            f"width {float(w):.6g} but rule requires {need} {float(target):.6g}")


def apply_move(state: GameState, interval: ClosedInterval, enforce: bool = True) -> GameState:
    """Append a move after checking it; ``enforce=False`` skips only the size rule (fault injection)."""
    mover = state.to_move
    check_move(state.config, state.last, interval, mover, enforce_size=enforce)
    injected = state.injected if enforce else state.injected | {len(state.history)}
    return replace(state, history=state.history + (interval,), injected=injected)


def recheck(state: GameState) -> list:
    """Re-verify every move of a history; returns (index, RuleViolation) pairs."""
    bad = []
    h = state.history
    for i in range(1, len(h)):
        mover = ALICE if i % 2 == 1 else BOB
        try:
            check_move(state.config, h[i - 1], h[i], mover, enforce_size=i not in state.injected)
        except RuleViolation as e:
            bad.append((i, e))
    return bad
