"""Independent checks of finished transcripts.

The auditor rebuilds its own cylinder tree, so nothing computed during play
is trusted.  Checkpoint invariants:

  P1  B is commensurate with generation g_j;
  P2  |B| > |J| / d1 for every generation-(g_j - 1) cylinder J meeting B;
  P3  B misses (left(J), left(J) + |J| / d2) for every J of generation <= g_j - 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from gmpy2 import mpfr

from ..cylinders import CylinderTree
from ..dynamics import MPParams, _branches
from ..numerics import ClosedInterval, MPGameError, PrecisionError, ResourceError, hp, precision
from .alice import Checkpoint
from .engine import apply_move, recheck
from .transcript import Transcript

_CAPS = (1_000, 10_000, 100_000, 1_000_000)


def _caps(limit: int):
    """Escalating index caps up to ``limit``: small ones first, so honest games stay cheap."""
    out = [c for c in _CAPS if c < limit]
    return out + [limit]


@dataclass
class AuditReport:
    checks: list = field(default_factory=list)  # dicts: j, invariant, passed, detail

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c["passed"]]

    def add(self, j, invariant, passed, detail=""):
        self.checks.append({"j": j, "invariant": invariant, "passed": bool(passed), "detail": detail})

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": self.checks}


@dataclass
class AvoidanceReport:
    kind: str
    status: str          # "pass", "fail" or "inconclusive"
    t_verified: int      # iterates checked
    bound: int           # K for the induced map, M for f
    detail: str = ""
    symbols: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "status": self.status, "t_verified": self.t_verified,
                "bound": self.bound, "detail": self.detail, "symbols": self.symbols}


def _fresh_tree(t: Transcript) -> CylinderTree:
    return CylinderTree(MPParams.create(t.gamma, t.prec))


def _induced(t: Transcript) -> Transcript:
    if t.kind == "EF":
        return t
    if t.inner is None:
        raise MPGameError("the lift never started; no induced-map game to audit")
    return t.inner


def audit_rules(t: Transcript) -> AuditReport:
    """Nesting and size rules of every move, re-checked from scratch."""
    rep = AuditReport()
    for i, e in recheck(t.state()):
        rep.add(None, f"rule@{i}", False, str(e))
    if not rep.checks:
        rep.add(None, "rules", True, f"{len(t.history) - 1} moves")
    return rep


def audit_P_invariants(t: Transcript, tree: CylinderTree | None = None) -> AuditReport:
    t = _induced(t)
    tree = tree or _fresh_tree(t)
    rep = AuditReport()
    d1, d2 = t.constants.get("d1"), t.constants.get("d2")
    if not t.checkpoints:
        rep.add(None, "checkpoints", False, "transcript has no checkpoint")
        return rep
    prev = None
    prec = t.prec
    for cp in t.checkpoints:
        B = t.bob_move(cp.n)
        try:
            res = tree.commensurate_generation(B)
            rep.add(cp.j, "P1", res.generation == cp.g, f"logged g={cp.g}, recomputed g={res.generation}")
        except (ResourceError, PrecisionError) as e:
            rep.add(cp.j, "P1", False, f"undecidable: {e}")
            continue
        g = cp.g
        try:
            levels = tree.meeting_levels(B, g - 1)
        except ResourceError as e:
            rep.add(cp.j, "P2", False, f"unbounded meeting set: {e}")
            rep.add(cp.j, "P3", False, "unbounded meeting set")
            continue
        with precision(prec + 32):
            w = B.right - B.left
            bad2 = [n.itin for n in levels[g - 1] if not w * d1 > tree.right_of(n) - tree.left_of(n)]
            bad3 = []
            for lvl in levels[: max(g - 1, 0)]:
                for n in lvl:
                    L = tree.left_of(n)
                    if L >= B.right:
                        continue
                    if L >= B.left or B.left < L + (tree.right_of(n) - L) / d2:
                        bad3.append(n.itin)
        rep.add(cp.j, "P2", not bad2, f"violated by {bad2[:3]}" if bad2 else f"{len(levels[g - 1])} cylinders")
        rep.add(cp.j, "P3", not bad3, f"violated by {bad3[:3]}" if bad3 else "")
        if prev is not None:
            rep.add(cp.j, "increasing", cp.n > prev.n and cp.g > prev.g, f"n {prev.n}->{cp.n}, g {prev.g}->{cp.g}")
            if prev.case == "case2":
                rep.add(cp.j, "case2-immediate", cp.n == prev.n + 1, f"n {prev.n}->{cp.n}")
        prev = cp
    return rep


def _deepest_container(tree: CylinderTree, B: ClosedInterval):
    return tree.containing_chain(B)


def verify_avoidance(t: Transcript, kind: str | None = None, K: int | None = None) -> AvoidanceReport:
    kind = kind or t.kind
    if kind == "EF":
        return _verify_EF(_induced(t) if t.kind == "Ef" else t, K)
    if kind == "Ef":
        return _verify_Ef(t)
    raise MPGameError(f"unknown avoidance kind {kind!r}")


def _verify_EF(t: Transcript, K: int | None) -> AvoidanceReport:
    K = int(K if K is not None else t.constants["K"])
    tree = _fresh_tree(t)
    B = t.final
    node = _deepest_container(tree, B)
    sigma = list(node.itin)
    if node.depth == 0 and not (tree.params.r1 < B.left):
        return AvoidanceReport("EF", "inconclusive", 0, K, "final interval reaches r1")
    over = [(i, s) for i, s in enumerate(sigma) if s > K]
    if over:
        return AvoidanceReport("EF", "fail", over[0][0], K, f"symbol {over[0][1]} > K at position {over[0][0]}",
                               sigma)
    # the last verifiable iterate: where in J_sigma the left end of B falls
    cap = min(K, tree.cache.max_index)
    if B.left == tree.left_of(node):
        return AvoidanceReport("EF", "fail", len(sigma), K, "left end of the final interval is an accumulation point",
                               sigma)
    for c in _caps(cap):
        if B.left >= tree.lk(node, c):
            return AvoidanceReport("EF", "pass", len(sigma) + 1, K, "", sigma)
    if cap < K:
        return AvoidanceReport("EF", "inconclusive", len(sigma), K,
                               f"next symbol exceeds the search cap {cap}", sigma)
    return AvoidanceReport("EF", "fail", len(sigma), K, "next symbol exceeds K", sigma)


def _verify_Ef(t: Transcript, max_steps: int = 100_000) -> AvoidanceReport:
    c = t.constants
    if c.get("n") is None or c.get("K") is None:
        return AvoidanceReport("Ef", "inconclusive", 0, 0, "the lift never reached a checkpoint")
    M = 2 + max(int(c["K"]), int(c["n"]))
    params = MPParams.create(t.gamma, t.prec)
    cache = CylinderTree(params).cache
    work = t.prec + 64
    br = _branches(params.gamma, work)
    caps = _caps(min(M, cache.max_index))
    used = caps[0]
    with precision(work):
        r1 = params.r1
        grow = 2 + params.gamma
        ulp = mpfr(2) ** (-work + 4)
        lo, hi = t.final.left, t.final.right
        err = mpfr(0)
        steps = 0
        while steps < max_steps:
            # r_M <= r_c for every cap c <= M, so clearing r_c already clears r_M
            cleared = False
            for bound in caps:
                rb = cache.r(bound)
                if lo - err >= rb:
                    cleared = True
                    used = max(used, bound)
                    break
            if not cleared:
                if bound == M and lo + err < rb:
                    return AvoidanceReport("Ef", "fail", steps, M, f"iterate {steps} enters [0, r_M)")
                return AvoidanceReport("Ef", "inconclusive" if steps == 0 else "pass", steps, M,
                                       f"iterate {steps} not resolved against r_{bound}")
            # f is increasing on each branch; stop where the next image stops being monotone
            if lo < r1 <= hi or hi - lo <= 4 * err:
                break
            lo, hi = br.f(lo), br.f(hi)
            err = err * grow + ulp
            steps += 1
    if steps == 0:
        return AvoidanceReport("Ef", "inconclusive", 0, M, "final interval too wide")
    detail = "" if used == M else f"checked against r_{used} >= r_M"
    return AvoidanceReport("Ef", "pass", steps + 1, M, detail)


def inject_fault(t: Transcript, j: int, bob=None) -> Transcript:
    """Replace Alice's answer at checkpoint j by a move inside (left(J), left(J) + |J|/d2).

    J is the logged witness of checkpoint j.  Bob replies (squeeze-left by
    default) and the reply is logged as checkpoint j + 1; the game stops there.
    """
    if t.kind != "EF":
        raise MPGameError("fault injection is defined for induced-map transcripts")
    cps = {c.j: c for c in t.checkpoints}
    if j not in cps:
        raise MPGameError(f"no checkpoint {j}")
    cp = cps[j]
    tree = _fresh_tree(t)
    node = tree.node(cp.witness)
    d2 = t.constants["d2"]
    with precision(t.prec):
        L = tree.left_of(node)
        span = (tree.right_of(node) - L) / d2
        A = ClosedInterval(L + span / 3, L + 2 * span / 3)
    idx = 2 * (cp.n - 1)
    state = t.state()
    state = replace(state, history=state.history[: idx + 1], injected=frozenset())
    state = apply_move(state, A, enforce=False)
    if bob is None:
        from .bob import SqueezeLeftBob
        bob = SqueezeLeftBob()
    state = apply_move(state, bob(state))
    Bn = state.last
    res = tree.commensurate_generation(Bn)
    kept = tuple(replace(c, case="injected", injected=True) if c.j == j else c
                 for c in t.checkpoints if c.j <= j)
    new_cp = Checkpoint(j + 1, cp.n + 1, res.generation, res.itinerary, forced=True, injected=True)
    rounds = cp.n
    return replace(t, history=state.history, checkpoints=kept + (new_cp,), status="fault_injected",
                   injected=tuple(sorted(state.injected)), rounds=rounds, reports={})
