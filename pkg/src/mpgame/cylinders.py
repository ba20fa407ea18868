"""Cylinder intervals J_sigma of the induced map and the commensurability calculus.

J_sigma for sigma = (m_1, ..., m_k) is the image of [r1, 1] under the
composition of inverse branches phi_{m_1} o ... o phi_{m_k}.  Children
J_{sigma 1}, J_{sigma 2}, ... tile J_sigma from right to left, and the left
endpoint of J_{sigma k} is the image of p_k under the parent's pullback.

Endpoints are canonical: every right endpoint is computed as the left
endpoint of a sibling (or as 1), so intervals that share a boundary share the
very same float and ties compare exactly.  All searches over children are
driven by memoized left endpoints with an exponential/binary search seeded
from an approximate forward image ("chart coordinate") of the query point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math
import random
import threading

import gmpy2
from gmpy2 import mpfr

from .dynamics import MPParams, SequenceCache, get_cache
from .numerics import (
    ClosedInterval, DomainError, MPGameError, PrecisionError, ResourceError, hp, precision,
)

Itinerary = tuple


class _Node:
    __slots__ = ("parent", "k", "depth", "itin", "left", "right", "kids")

    def __init__(self, parent, k, itin):
        self.parent = parent
        self.k = k
        self.depth = len(itin)
        self.itin = itin
        self.left = None
        self.right = None
        self.kids = {}


@dataclass(frozen=True)
class Cylinder:
    itinerary: tuple
    interval: ClosedInterval

    @property
    def generation(self) -> int:
        return len(self.itinerary)

    @property
    def left(self):
        return self.interval.left

    @property
    def right(self):
        return self.interval.right

    def width(self):
        return self.interval.width()


@dataclass(frozen=True)
class CommensurabilityResult:
    generation: int
    itinerary: tuple
    tree: "CylinderTree" = field(repr=False, compare=False)

    @property
    def witness(self) -> Cylinder:
        """The rightmost contained cylinder with its endpoints (computed on demand)."""
        return self.tree.cylinder(self.itinerary)


@dataclass(frozen=True)
class LeftEndpoint:
    point: mpfr
    generation: int
    itinerary: tuple  # the cylinder whose left endpoint this is


class _Item:
    """A node with chart coordinates of a query [a, b] and their log2 error bounds."""
    __slots__ = ("node", "ya", "yb", "ea", "eb", "up")

    def __init__(self, node, ya, yb, ea, eb, up):
        self.node, self.ya, self.yb, self.ea, self.eb, self.up = node, ya, yb, ea, eb, up


class CylinderTree:
    """Lazily materialized cylinder hierarchy for one (gamma, precision)."""

    def __init__(self, params: MPParams, cache: SequenceCache | None = None,
                 max_depth: int = 100_000, max_list: int = 100_000):
        self.params = params
        self.cache = cache or get_cache(params)
        self.br = params.branches
        self.prec = params.prec
        self.max_depth = max_depth
        self.max_list = max_list
        self._lock = threading.RLock()
        self.root = _Node(None, 0, ())
        self.root.left = params.r1
        self.root.right = hp(1, self.prec)
        self.tie_eps = mpfr(2) ** (-self.prec + 16)

    # -- nodes and endpoints -------------------------------------------
    def node(self, itin) -> _Node:
        n = self.root
        for k in itin:
            n = self.child(n, int(k))
        return n

    def child(self, node: _Node, k: int) -> _Node:
        c = node.kids.get(k)
        if c is None:
            if k < 1:
                raise DomainError("symbols must be >= 1")
            with self._lock:
                c = node.kids.get(k)
                if c is None:
                    c = _Node(node, k, node.itin + (k,))
                    node.kids[k] = c
        return c

    def left_of(self, node: _Node) -> mpfr:
        if node.left is None:
            node.left = self.br.pullback(node.parent.itin, self.cache.p(node.k))
        return node.left

    def right_of(self, node: _Node) -> mpfr:
        if node.right is None:
            if node.k >= 2:
                node.right = self.left_of(self.child(node.parent, node.k - 1))
            else:
                node.right = self.right_of(node.parent)
        return node.right

    def lk(self, node: _Node, k: int) -> mpfr:
        """Left endpoint of child k; k = 0 gives the parent's right endpoint."""
        if k == 0:
            return self.right_of(node)
        return self.left_of(self.child(node, k))

    def interval_of(self, node: _Node) -> ClosedInterval:
        return ClosedInterval(self.left_of(node), self.right_of(node))

    def cylinder(self, node_or_itin) -> Cylinder:
        node = node_or_itin if isinstance(node_or_itin, _Node) else self.node(tuple(node_or_itin))
        return Cylinder(node.itin, self.interval_of(node))

    # -- comparisons ----------------------------------------------------
    def _check_tie(self, x, y):
        # distinct values closer than the resolution cannot be ordered reliably
        if x != y:
            with precision(self.prec):
                d = abs(x - y)
            if d <= self.tie_eps:
                raise PrecisionError("comparison within resolution of a cylinder endpoint", self.prec)

    def _le(self, x, y) -> bool:
        self._check_tie(x, y)
        return x <= y

    def _ge(self, x, y) -> bool:
        self._check_tie(x, y)
        return x >= y

    # -- chart coordinates ----------------------------------------------
    # lk(node, k) = Phi_node(p_k) with Phi_node increasing, so lk(node, k) <= x
    # iff p_k <= F^depth(x).  Each item carries F^depth of both query ends and a
    # log2 bound on their rounding error, propagated with the branch derivative.
    # Comparisons the chart cannot settle fall back to the exact endpoint.
    CHART_GUARD_BITS = 16

    def _root_item(self, a, b) -> _Item:
        e = float(-self.prec)
        return _Item(self.root, self._root_chart(a), self._root_chart(b), e, e, None)

    def _root_chart(self, x):
        r1 = self.params.r1
        return r1 if x < r1 else (mpfr(1) if x > 1 else x)

    def _grow(self, e, k, ld):
        # old error plus about 8k roundings, all amplified by the branch derivative
        return max(e, math.log2(8 * k) - self.prec) + ld + 1

    def _child_item(self, it: _Item, k: int) -> _Item:
        ya, la = self.br.chart_step_d(k, it.ya)
        yb, lb = self.br.chart_step_d(k, it.yb)
        return _Item(self.child(it.node, k), ya, yb, self._grow(it.ea, k, la), self._grow(it.eb, k, lb), it)

    def _item_for(self, node: _Node, a, b) -> _Item:
        it = self._root_item(a, b)
        for k in node.itin:
            it = self._child_item(it, k)
        return it

    def _decide(self, v, y, e) -> int:
        """Sign of v - y when it clears the error bound e (log2), else 0."""
        with precision(self.prec):
            d = v - y
        if d == 0:
            return 0
        if gmpy2.get_exp(d) - 1 > max(e, 8 - self.prec) + self.CHART_GUARD_BITS:
            return 1 if d > 0 else -1
        return 0

    def _exact_cmp(self, v, x) -> int:
        self._check_tie(v, x)
        return (v > x) - (v < x)

    def _cmp_lk(self, it: _Item, k: int, x, side: str) -> int:
        """Sign of lk(node, k) - x, x being the query end ``side`` ("a" or "b")."""
        node = it.node
        y, e = (it.ya, it.ea) if side == "a" else (it.yb, it.eb)
        if k == 0:
            if node.depth == 0:
                return self._exact_cmp(node.right, x)
            if self._decide(self.root.right, y, e) > 0:
                return 1
            if it.up is not None:
                return self._cmp_lk(it.up, node.k - 1, x, side)
            return self._exact_cmp(self.right_of(node), x)
        s = self._decide(self.cache.p(k), y, e)
        if s:
            return s
        return self._exact_cmp(self.lk(node, k), x)

    def _cmp_left(self, it: _Item, x, side: str) -> int:
        """Sign of left(node) - x."""
        node = it.node
        if node.depth == 0:
            return self._exact_cmp(node.left, x)
        y, e = (it.ya, it.ea) if side == "a" else (it.yb, it.eb)
        if self._decide(self.params.r1, y, e) < 0:
            return -1
        if it.up is not None:
            return self._cmp_lk(it.up, node.k, x, side)
        return self._exact_cmp(self.left_of(node), x)

    # -- searches over children -----------------------------------------
    def _seed(self, y) -> int:
        if y is None or y <= self.params.r1:
            return max(1, len(self.cache) // 2)
        try:
            return self.cache.cell_index(y)
        except ResourceError:
            # only a guess; the search itself decides whether the budget is really exceeded
            return self.cache.max_index

    def _first_true(self, pred, k0: int) -> int:
        """Least k >= 1 with pred(k), for pred monotone False->True and pred(0) False."""
        cap = self.cache.max_index
        k0 = max(1, min(k0, cap))
        if pred(k0):
            hi, step = k0, 1
            while True:
                lo = hi - step
                if lo <= 0:
                    lo = 0
                    break
                if not pred(lo):
                    break
                hi, step = lo, step * 2
        else:
            lo, step = k0, 1
            while True:
                hi = lo + step
                if hi > cap:
                    if pred(cap):
                        hi = cap
                        break
                    raise ResourceError(f"child index beyond budget {cap}; query point too close to a left endpoint")
                if pred(hi):
                    break
                lo, step = hi, step * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if pred(mid):
                hi = mid
            else:
                lo = mid
        return hi

    def _first_le(self, it: _Item, x, side: str) -> int:
        if self._cmp_lk(it, 0, x, side) <= 0:
            return 0
        y = it.ya if side == "a" else it.yb
        return self._first_true(lambda k: self._cmp_lk(it, k, x, side) <= 0, self._seed(y))

    def _last_ge(self, it: _Item, x, side: str):
        if self._cmp_left(it, x, side) >= 0:
            return None
        if self._cmp_lk(it, 0, x, side) < 0:
            raise DomainError("last_ge: node lies left of the query")
        y = it.ya if side == "a" else it.yb
        return self._first_true(lambda k: self._cmp_lk(it, k, x, side) < 0, self._seed(y)) - 1

    def first_le(self, node: _Node, b) -> int:
        """k_a = min{k >= 0 : lk(k) <= b}; requires left(node) < b."""
        return self._first_le(self._item_for(node, b, b), b, "b")

    def last_ge(self, node: _Node, a):
        """k_b = max{k >= 0 : lk(k) >= a}, or None when a <= left(node) (unbounded)."""
        return self._last_ge(self._item_for(node, a, a), a, "a")

    # -- descents -------------------------------------------------------
    def commensurate_generation(self, B: ClosedInterval, hint: _Node | None = None) -> CommensurabilityResult:
        """Least g such that B contains a member of G_g, with the rightmost such member.

        ``hint`` may be any cylinder known to contain B; the descent then starts there.
        """
        a, b = B.left, B.right
        if a <= self.root.left and self.root.right <= b:
            return CommensurabilityResult(0, (), self)
        if hint is not None and hint.depth > 0:
            if self.left_of(hint) == a and self.right_of(hint) == b:
                return CommensurabilityResult(hint.depth, hint.itin, self)
            if not (self.left_of(hint) <= a and b <= self.right_of(hint)):
                raise DomainError("hint cylinder does not contain B")
            level = [self._item_for(hint, a, b)]
        else:
            level = [self._root_item(a, b)]
        depth = level[0].node.depth
        while True:
            if depth >= self.max_depth:
                raise ResourceError(f"descent deeper than {self.max_depth}; increase precision or depth budget")
            # items run right to left, so the first contained child is the rightmost
            nxt = []
            for it in level:
                if self._cmp_left(it, b, "b") >= 0:
                    continue
                ka = self._first_le(it, b, "b")
                if self._cmp_lk(it, ka + 1, a, "a") >= 0:
                    return CommensurabilityResult(depth + 1, it.node.itin + (ka + 1,), self)
                if ka >= 1:
                    nxt.append((it, ka))
                if self._cmp_lk(it, ka, a, "a") >= 0:
                    nxt.append((it, ka + 1))
            if not nxt:
                raise MPGameError("descent lost the query interval")
            if len(nxt) > 2:
                raise PrecisionError("more than two cylinders meet an interval before containment", self.prec)
            level = [self._child_item(it, k) for it, k in nxt]
            depth += 1

    def meeting_levels(self, B: ClosedInterval, g_max: int, endpoints: list | None = None):
        """Lists of nodes of generations 0..g_max meeting B (closed semantics).

        If ``endpoints`` is given, the left endpoints of generations 1..g_max
        lying in B are appended to it along the way.
        """
        a, b = B.left, B.right
        out = []
        level = [self._root_item(a, b)]
        for depth in range(g_max + 1):
            out.append([it.node for it in level])
            if depth == g_max:
                break
            items = []
            for it in level:
                if self._cmp_left(it, b, "b") >= 0:
                    continue
                ka = self._first_le(it, b, "b")
                kb = self._last_ge(it, a, "a")
                if kb is None:
                    raise ResourceError(
                        f"infinitely many generation-{depth + 1} cylinders meet B (B reaches a left endpoint)")
                lo, hi = max(ka, 1), kb + 1
                if endpoints is not None:
                    for k in range(lo, kb + 1):
                        c = self.child(it.node, k)
                        endpoints.append(LeftEndpoint(self.left_of(c), depth + 1, c.itin))
                if hi - lo + 1 + len(items) > self.max_list:
                    raise ResourceError(f"more than {self.max_list} cylinders meet B at generation {depth + 1}")
                for k in range(lo, hi + 1):
                    items.append(self._child_item(it, k))
            level = items
        return out

    def elements_meeting(self, B: ClosedInterval, g: int) -> list:
        """All members of G_g whose closed interval meets B, ordered right to left."""
        nodes = self.meeting_levels(B, int(g))[-1]
        nodes = sorted(nodes, key=lambda n: self.left_of(n), reverse=True)
        return [self.cylinder(n) for n in nodes]

    def left_endpoint_scan(self, B: ClosedInterval, g_max: int) -> list:
        """Left endpoints of generation <= g_max lying in B, each with its generation."""
        a, b = B.left, B.right
        found = []
        if a <= self.root.left <= b:
            found.append(LeftEndpoint(self.root.left, 0, ()))
        if g_max >= 1:
            self.meeting_levels(B, g_max, endpoints=found)
        found.sort(key=lambda e: e.point)
        return found

    def containing_chain(self, B: ClosedInterval, hint: _Node | None = None) -> _Node:
        """Deepest cylinder containing B (descending one child at a time)."""
        a, b = B.left, B.right
        it = self._item_for(hint, a, b) if hint is not None else self._root_item(a, b)
        while it.node.depth < self.max_depth:
            ka = self._first_le(it, b, "b")
            k = max(ka, 1)
            if self._cmp_lk(it, k, a, "a") > 0:
                # b may sit exactly on lk(ka); then only child ka+1 can hold B
                if ka >= 1 and self._cmp_lk(it, ka, b, "b") == 0 and self._cmp_lk(it, ka + 1, a, "a") <= 0:
                    k = ka + 1
                else:
                    break
            it = self._child_item(it, k)
        return it.node

    # -- single-cylinder queries -----------------------------------------
    def symbol_at(self, itin, x) -> int:
        """The child index k with x in [J_{itin k}), x inside J_itin minus its left endpoint."""
        node = self.node(tuple(itin))
        if not self.left_of(node) < x <= self.right_of(node):
            raise DomainError("point outside the half-open cylinder")
        if x == self.right_of(node):
            return 1
        return self.first_le(node, x)


def _tree_for(params: MPParams) -> CylinderTree:
    return CylinderTree(params)


_TREES: dict = {}
_TREES_LOCK = threading.Lock()


def get_tree(params: MPParams) -> CylinderTree:
    """Shared tree per (gamma, precision), for standalone queries."""
    with _TREES_LOCK:
        t = _TREES.get(params.key)
        if t is None:
            t = _TREES[params.key] = CylinderTree(params)
        return t


# -- module-level operations ---------------------------------------------

def cylinder_endpoints(params: MPParams, cache: SequenceCache | None, sigma, max_depth: int = 10_000) -> ClosedInterval:
    sigma = tuple(int(s) for s in sigma)
    if any(s < 1 for s in sigma):
        raise DomainError("symbols must be >= 1")
    if len(sigma) > max_depth:
        raise ResourceError(f"itinerary longer than depth budget {max_depth}")
    return get_tree(params).interval_of(get_tree(params).node(sigma))


def children(params: MPParams, sigma, k_max: int) -> list:
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    t = get_tree(params)
    node = t.node(tuple(sigma))
    return [t.cylinder(t.child(node, k)) for k in range(1, int(k_max) + 1)]


def tail_length(params: MPParams, sigma, k: int) -> mpfr:
    """|union_{i >= k} J_{sigma i}| = lk(k-1) - left(J_sigma)."""
    if k < 1:
        raise DomainError("k must be >= 1")
    t = get_tree(params)
    node = t.node(tuple(sigma))
    with precision(params.prec):
        return t.lk(node, k - 1) - t.left_of(node)


def locate_K(params: MPParams, sigma, zeta, max_escalations: int = 4) -> int:
    """The K with left(J_sigma) + zeta |J_sigma| in [J_{sigma K})."""
    zeta = hp(zeta, params.prec)
    if not 0 < zeta < 1:
        raise DomainError("zeta must lie in (0, 1)")
    p = params
    for _ in range(max_escalations + 1):
        t = get_tree(p)
        node = t.node(tuple(sigma))
        with precision(p.prec):
            L, R = t.left_of(node), t.right_of(node)
            width = R - L
            q = L + hp(zeta, p.prec) * width
            K = t.first_le(node, q)
            guard = width * mpfr(2) ** (-(p.prec // 2))
            close = (q - t.lk(node, K) <= guard) or (t.lk(node, K - 1) - q <= guard)
        if not close:
            return K
        p = p.at_precision(2 * p.prec)
    return K


def estimate_C5(params: MPParams, depth: int = 4, k_max: int = 200, n_random: int = 16,
                seed: int = 0, safety: float = 1.5, return_details: bool = False):
    """Empirical stand-in for the length-ratio constant, inflated by ``safety``.

    Sup over sampled sigma (|sigma| <= depth) and 1 <= k <= k_max of
    max(q, 1/q) for q = ratio * k^(1+1/gamma) and q = tail_ratio * k^(1/gamma).
    """
    if depth < 0 or k_max < 1:
        raise DomainError("need depth >= 0 and k_max >= 1")
    t = get_tree(params)
    g = params.gamma_float
    sigmas = {()}
    for d in range(1, depth + 1):
        sigmas.update({(1,) * d, (2,) * d, (k_max,) * min(d, 2) + (1,) * (d - min(d, 2))})
    rng = random.Random(seed)
    for _ in range(n_random if depth > 0 else 0):
        d = rng.randint(1, depth)
        sigmas.add(tuple(int(math.exp(rng.uniform(0, math.log(100)))) for _ in range(d)))
    best, arg = 0.0, None
    for sigma in sorted(sigmas):
        node = t.node(sigma)
        L = t.left_of(node)
        with precision(params.prec):
            width = t.right_of(node) - L
            for k in range(1, k_max + 1):
                ratio = float((t.lk(node, k - 1) - t.lk(node, k)) / width)
                tail = float((t.lk(node, k - 1) - L) / width)
                q1 = ratio * k ** (1 + 1 / g)
                q2 = tail * k ** (1 / g)
                m = max(q1, 1 / q1, q2, 1 / q2)
                if m > best:
                    best, arg = m, (sigma, k)
    value = hp(best * safety, params.prec)
    if return_details:
        return value, {"raw_sup": best, "argmax": arg, "samples": len(sigmas), "k_max": k_max}
    return value


@lru_cache(maxsize=32)
def _default_C5(gamma_key: str) -> mpfr:
    return estimate_C5(MPParams.create(gamma_key, 256))


def default_C5(gamma) -> mpfr:
    """estimate_C5(depth=4, k_max=200) at 256 bits, computed once per gamma."""
    return _default_C5(str(hp(gamma, 256)))
