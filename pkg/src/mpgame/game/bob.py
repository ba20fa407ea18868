"""Adversaries for the game harness."""

from __future__ import annotations

import json
import random

from gmpy2 import mpfr

from ..cylinders import CylinderTree
from ..numerics import ClosedInterval, MPGameError, hp, precision
from .engine import GameState, RuleViolation, check_move


class ScriptError(MPGameError):
    pass


def _width(state: GameState):
    A = state.last
    with precision(state.config.prec_bits):
        return A, state.config.beta * (A.right - A.left)


def _placed(A: ClosedInterval, left, w, prec) -> ClosedInterval:
    # keep the block inside A despite rounding
    with precision(prec):
        left = max(A.left, min(left, A.right - w))
        right = min(A.right, left + w)
    return ClosedInterval(left, right)


class RandomBob:
    """Width exactly beta|A| at a uniformly random position (seeded)."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)

    def __call__(self, state: GameState) -> ClosedInterval:
        A, w = _width(state)
        prec = state.config.prec_bits
        u = hp(self.rng.random(), prec)
        with precision(prec):
            left = A.left + u * ((A.right - A.left) - w)
        return _placed(A, left, w, prec)


class SqueezeLeftBob:
    """Leftmost legal interval: drives the play toward the accumulation points."""

    name = "squeeze_left"

    def __call__(self, state: GameState) -> ClosedInterval:
        A, w = _width(state)
        with precision(state.config.prec_bits):
            return ClosedInterval(A.left, A.left + w)


class BoundaryHuggerBob:
    """Centres its interval on the lowest-generation cylinder left endpoint inside A."""

    name = "boundary_hugger"

    def __init__(self, tree: CylinderTree):
        self.tree = tree

    def _target(self, A: ClosedInterval):
        t = self.tree
        res = t.commensurate_generation(A)
        pts = t.left_endpoint_scan(A, res.generation - 1) if res.generation >= 1 else []
        if pts:
            return min(pts, key=lambda e: e.generation).point
        return t.left_of(t.node(res.itinerary))

    def __call__(self, state: GameState) -> ClosedInterval:
        A, w = _width(state)
        prec = state.config.prec_bits
        target = self._target_in(A, prec)
        with precision(prec):
            left = target - w / 2
        return _placed(A, left, w, prec)

    def _target_in(self, A: ClosedInterval, prec):
        r1 = self.tree.params.r1
        if A.left >= r1:
            return self._target(A)
        cache = self.tree.cache
        # inside [0, r1): aim at the largest r_n in A, else at a pulled-back endpoint
        n = cache.r_index(A.right) if A.right < 1 else 0
        if A.contains(cache.r(n + 1)) and n + 1 < cache.max_index:
            return cache.r(n + 1)
        if A.contains(cache.r(n)):
            return cache.r(n)
        br = self.tree.br
        img = ClosedInterval(br.forward_left(A.left, n), min(br.forward_left(A.right, n), mpfr(1)))
        if img.left < r1 or img.width() <= 0:
            with precision(prec):
                return (A.left + A.right) / 2
        return br.left_pullback(n, self._target(img))


class ScriptedBob:
    """Replays a fixed list of intervals; an illegal entry raises ScriptError."""

    name = "scripted"

    def __init__(self, moves):
        self.moves = list(moves)
        self.i = 0

    @classmethod
    def from_json(cls, text: str, prec: int | None = None):
        """Moves as [left, right] decimal pairs; converted at the game's precision unless prec is given."""
        try:
            pairs = json.loads(text)
            moves = [(str(a), str(b)) if prec is None else ClosedInterval(hp(a, prec), hp(b, prec))
                     for a, b in pairs]
        except (ValueError, TypeError) as e:
            raise ScriptError(f"malformed Bob script: {e}") from e
        return cls(moves)

    def __call__(self, state: GameState) -> ClosedInterval:
        if self.i >= len(self.moves):
            raise ScriptError("Bob script exhausted")
        B = self.moves[self.i]
        p = state.config.prec_bits
        try:
            if not isinstance(B, ClosedInterval):
                B = ClosedInterval(hp(B[0], p), hp(B[1], p))
            elif B.prec != p:
                B = ClosedInterval(hp(B.left, p), hp(B.right, p))
        except (ValueError, TypeError, IndexError) as e:
            raise ScriptError(f"scripted move {self.i + 1} is malformed: {e}") from e
        try:
            check_move(state.config, state.last, B, "bob")
        except RuleViolation as e:
            raise ScriptError(f"scripted move {self.i + 1} is illegal: {e}") from e
        self.i += 1
        return B


def make_bob(kind: str, tree: CylinderTree | None = None, seed: int = 0, script=None):
    if kind == "random":
        return RandomBob(seed)
    if kind == "squeeze_left":
        return SqueezeLeftBob()
    if kind == "boundary_hugger":
        if tree is None:
            raise MPGameError("boundary_hugger needs a cylinder tree")
        return BoundaryHuggerBob(tree)
    if kind == "scripted":
        return ScriptedBob(script or [])
    raise MPGameError(f"unknown Bob policy {kind!r}")


def bob_policy(kind: str, state: GameState, tree: CylinderTree | None = None, seed: int = 0, script=None):
    """One move of the named policy from a fresh policy object."""
    return make_bob(kind, tree, seed, script)(state)
