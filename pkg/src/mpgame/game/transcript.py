"""Game transcripts: JSON round trip with decimal strings and a fixed field order."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import json
from typing import Optional

from gmpy2 import mpfr

from ..numerics import ClosedInterval, hp, precision, to_decimal
from .alice import Checkpoint
from .engine import GameConfig, GameState

FORMAT = "mpgame-transcript/1"


def _enc(v, prec):
    if isinstance(v, mpfr):
        return to_decimal(v, prec)
    if isinstance(v, ClosedInterval):
        return [to_decimal(v.left, prec), to_decimal(v.right, prec)]
    if isinstance(v, dict):
        return {k: _enc(x, prec) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_enc(x, prec) for x in v]
    return v


@dataclass(frozen=True)
class Transcript:
    kind: str                 # "EF" (induced map on [r1, 1]) or "Ef" (f on [0, 1])
    gamma: mpfr
    prec: int
    variant: str
    alpha: mpfr
    beta: mpfr
    rounds: int
    bob: str
    seed: int
    history: tuple
    checkpoints: tuple = ()
    constants: dict = field(default_factory=dict)
    status: str = "complete"
    injected: tuple = ()
    inner: Optional["Transcript"] = None
    reports: dict = field(default_factory=dict)

    @property
    def final(self) -> ClosedInterval:
        return self.history[-1]

    def bob_move(self, n: int) -> ClosedInterval:
        """B_n (1-based)."""
        return self.history[2 * (n - 1)]

    def omega(self):
        """Midpoint and half-width of the final interval."""
        B = self.final
        with precision(self.prec):
            return B.midpoint(), (B.right - B.left) / 2

    def config(self) -> GameConfig:
        fld = None
        if self.kind == "EF":
            from ..dynamics import MPParams
            fld = ClosedInterval(MPParams.create(self.gamma, self.prec).r1, hp(1, self.prec))
        return GameConfig(self.alpha, self.beta, self.variant, self.rounds, self.prec, fld)

    def state(self) -> GameState:
        return GameState(self.config(), tuple(self.history), frozenset(self.injected))

    def bob_script(self) -> list:
        """Bob's moves after B_1 as decimal pairs (replay input)."""
        return [_enc(B, self.prec) for B in self.history[2::2]]

    def with_reports(self, **reports) -> "Transcript":
        merged = dict(self.reports)
        merged.update(reports)
        return replace(self, reports=merged)

    def to_dict(self) -> dict:
        p = self.prec
        mid, half = self.omega()
        return {
            "format": FORMAT,
            "kind": self.kind,
            "gamma": to_decimal(self.gamma, p),
            "prec_bits": p,
            "variant": self.variant,
            "alpha": to_decimal(self.alpha, p),
            "beta": to_decimal(self.beta, p),
            "rounds": self.rounds,
            "bob": self.bob,
            "seed": self.seed,
            "status": self.status,
            "constants": _enc(self.constants, p),
            "history": [_enc(B, p) for B in self.history],
            "injected": list(self.injected),
            "checkpoints": [c.as_dict() for c in self.checkpoints],
            "final": _enc(self.final, p),
            "omega": {"mid": to_decimal(mid, p), "radius": to_decimal(half, p)},
            "inner": self.inner.to_dict() if self.inner is not None else None,
            "reports": _enc(self.reports, p),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        p = int(d["prec_bits"])

        def num(s):
            return None if s is None else hp(s, p)

        consts = {}
        for k, v in d.get("constants", {}).items():
            consts[k] = v if (v is None or isinstance(v, int)) else num(v)
        hist = tuple(ClosedInterval(hp(a, p), hp(b, p)) for a, b in d["history"])
        cps = tuple(Checkpoint(c["j"], c["n"], c["g"], tuple(c["witness"]), c["case"], c["subcase"],
                               c["forced"], c["injected"]) for c in d["checkpoints"])
        return cls(d["kind"], hp(d["gamma"], p), p, d["variant"], hp(d["alpha"], p), hp(d["beta"], p),
                   int(d["rounds"]), d["bob"], int(d["seed"]), hist, cps, consts, d["status"],
                   tuple(d.get("injected", ())),
                   cls.from_dict(d["inner"]) if d.get("inner") else None,
                   d.get("reports", {}))

    @classmethod
    def from_json(cls, text: str) -> "Transcript":
        return cls.from_dict(json.loads(text))
