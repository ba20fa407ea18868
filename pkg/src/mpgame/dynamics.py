"""The Manneville-Pomeau map, its preimage sequences and the induced map.

    f(x) = x + x**(1+gamma)        for 0 <= x < r1
    f(x) = x + x**(1+gamma) - 1    for r1 <= x <= 1

r_n are the successive left-branch preimages of 1 (r_n -> 0) and p_n the
right-branch preimages of r_n (p_n -> r1).  The induced map F on [r1, 1]
equals f^m on the cell [p_m, p_{m-1}).
"""

from __future__ import annotations

from bisect import bisect_left
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache
import threading

import gmpy2
from gmpy2 import mpfr

from .kernels import Branches
from .numerics import (
    DEFAULT_PREC, BranchBoundaryError, DomainError, ResourceError, hp, precision,
)

DEFAULT_MAX_INDEX = 20_000_000   # index budget (time)
DENSE_INDEX = 2_000_000          # stored terms (memory)
CACHE_BIT_BUDGET = 400_000_000   # about 100 MB of mantissa per cache


def default_dense_limit(prec: int) -> int:
    return int(min(DENSE_INDEX, CACHE_BIT_BUDGET // max(int(prec), 1)))


@lru_cache(maxsize=64)
def _branches(gamma: mpfr, prec: int) -> Branches:
    # mpfr hashes by value, so equal gammas share one kernel per precision
    return Branches(gamma, prec)


@dataclass(frozen=True)
class MPParams:
    gamma: mpfr
    prec: int
    r1: mpfr

    @classmethod
    def create(cls, gamma, prec: int = DEFAULT_PREC) -> "MPParams":
        g = hp(gamma, prec)
        if not g > 0:
            raise DomainError("gamma must be positive")
        br = _branches(g, prec)
        return cls(g, int(prec), br.r1)

    @property
    def branches(self) -> Branches:
        return _branches(self.gamma, self.prec)

    @property
    def gamma_float(self) -> float:
        return float(self.gamma)

    def at_precision(self, prec: int) -> "MPParams":
        return MPParams.create(self.gamma, prec)

    @property
    def key(self):
        return (self.gamma, self.prec)


@dataclass(frozen=True)
class ReturnValue:
    image: mpfr
    return_time: int


@dataclass(frozen=True)
class DistortionSample:
    lhs: mpfr
    factor: mpfr

    @property
    def ratio(self) -> float:
        return float(self.lhs / self.factor) if self.factor > 0 else 0.0


def _neg(v):
    return -v


class SequenceCache:
    """Memo of r_0.. and p_0.. behind a lock.

    Indices up to ``dense_limit`` are stored outright.  Beyond that only every
    ``SPARSE_STRIDE``-th r_n is kept and the rest are recomputed on demand from
    the nearest stored one, so huge indices cost time rather than memory.
    """

    SPARSE_STRIDE = 256
    RECENT = 4096

    def __init__(self, params: MPParams, max_index: int | None = None, dense_limit: int | None = None):
        self.params = params
        self.max_index = DEFAULT_MAX_INDEX if max_index is None else int(max_index)
        dl = default_dense_limit(params.prec) if dense_limit is None else int(dense_limit)
        self.dense_limit = max(2, min(dl, self.max_index))
        self._lock = threading.RLock()
        one = hp(1, params.prec)
        self._r = [one, params.r1]
        self._p = [one]
        self._sparse = []  # r at dense_limit + i * stride
        self._recent = OrderedDict()

    def __len__(self):
        return len(self._r)

    def _check(self, n: int):
        if n < 0:
            raise DomainError("index must be nonnegative")
        if n > self.max_index:
            raise ResourceError(
                f"sequence index {n} exceeds budget {self.max_index}; raise max_index or coarsen the query")

    def _extend_r(self, n: int):
        self._check(n)
        with self._lock:
            have = len(self._r)
            if n < have:
                return
            want = max(n + 1, min(2 * have, have + (1 << 16)))
            want = min(want, self.dense_limit + 1)
            if want > have:
                self._r.extend(self.params.branches.extend_r(self._r[-1], want - have))

    def _extend_p(self, n: int):
        with self._lock:
            have = len(self._p)
            if n < have:
                return
            self._extend_r(n)
            upto = min(len(self._r), max(n + 1, 2 * have))
            self._p.extend(self.params.branches.right_inv_many(self._r[have:upto]))

    def _far_r(self, n: int) -> mpfr:
        with self._lock:
            hit = self._recent.get(("r", n))
            if hit is not None:
                self._recent.move_to_end(("r", n))
                return hit
            S, base = self.SPARSE_STRIDE, self.dense_limit
            if not self._sparse:
                self._extend_r(base)
                self._sparse.append(self._r[base])
            i = (n - base) // S
            br = self.params.branches
            while len(self._sparse) <= i:
                self._sparse.append(br.extend_r(self._sparse[-1], S)[-1])
            k = n - (base + i * S)
            x = self._sparse[i] if k == 0 else br.extend_r(self._sparse[i], k)[-1]
            self._remember(("r", n), x)
            return x

    def _remember(self, key, x):
        self._recent[key] = x
        if len(self._recent) > self.RECENT:
            self._recent.popitem(last=False)

    def r(self, n: int) -> mpfr:
        if n < len(self._r):
            if n < 0:
                raise DomainError("index must be nonnegative")
            return self._r[n]
        self._check(n)
        if n <= self.dense_limit:
            self._extend_r(n)
            return self._r[n]
        return self._far_r(n)

    def p(self, n: int) -> mpfr:
        if n < len(self._p):
            if n < 0:
                raise DomainError("index must be nonnegative")
            return self._p[n]
        self._check(n)
        if n <= self.dense_limit:
            self._extend_p(n)
            return self._p[n]
        with self._lock:
            hit = self._recent.get(("p", n))
            if hit is None:
                hit = self.params.branches.right_inv_many([self._far_r(n)])[0]
                self._remember(("p", n), hit)
            return hit

    def r_list(self, n: int):
        if n > self.dense_limit:
            raise ResourceError(f"list of {n + 1} terms exceeds the dense budget {self.dense_limit}")
        self.r(n)
        return self._r[: n + 1]

    def p_list(self, n: int):
        if n > self.dense_limit:
            raise ResourceError(f"list of {n + 1} terms exceeds the dense budget {self.dense_limit}")
        self.p(n)
        return self._p[: n + 1]

    def _guess_index(self, r: float) -> int:
        # asymptotics: r_n ~ (gamma n)^(-1/gamma), accurate to a few percent for large n
        g = self.params.gamma_float
        if r <= 0:
            return self.max_index
        return int(min(self.max_index, (r ** -g) / g + 2))

    def _last_true(self, pred, lo: int, guess: int) -> int:
        """Largest n >= lo with pred(n), pred monotone True -> False and pred(lo) True.

        Far terms cost time proportional to their index, so the search probes
        just below the guess and creeps upward instead of overshooting.
        """
        g0 = min(max(int(guess * 0.97), lo + 1), self.max_index)
        if pred(g0):
            lo = g0
            step = max(1, g0 // 128)
            hi = lo + step
            while hi <= self.max_index and pred(hi):
                lo, step = hi, step * 2
                hi = lo + step
            if hi > self.max_index:
                if lo == self.max_index or pred(self.max_index):
                    raise ResourceError(f"sequence index beyond budget {self.max_index}")
                hi = self.max_index
        else:
            hi = g0
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if pred(mid):
                lo = mid
            else:
                hi = mid
        return lo

    def cell_index(self, x: mpfr) -> int:
        """m >= 1 with p_m <= x < p_{m-1}; x = 1 is assigned to m = 1."""
        if not self.params.r1 < x <= 1:
            raise DomainError("cell_index needs r1 < x <= 1")
        if x == 1:
            return 1
        # near r1, p_m - r1 ~ r_m / f'(r1)
        r1 = float(self.params.r1)
        gap = float(x - self.params.r1) * (1 + (1 + self.params.gamma_float) * r1 ** self.params.gamma_float)
        while self._p[-1] > x and len(self._p) <= self.dense_limit:
            self._extend_p(min(self.dense_limit, max(2 * len(self._p), self._guess_index(gap))))
        if self._p[-1] <= x:
            return bisect_left(self._p, -x, key=_neg)
        # p_{m-1} > x: m - 1 is the last index with p above x
        return self._last_true(lambda n: self.p(n) > x, len(self._p) - 1, self._guess_index(gap)) + 1

    def r_index(self, x: mpfr) -> int:
        """n >= 0 with r_{n+1} <= x < r_n; x = 1 is assigned to n = 0."""
        if not 0 < x <= 1:
            raise DomainError("r_index needs 0 < x <= 1")
        if x == 1:
            return 0
        guess = self._guess_index(float(x))
        while self._r[-1] > x and len(self._r) <= self.dense_limit:
            self._extend_r(min(self.dense_limit, max(2 * len(self._r), guess)))
        if self._r[-1] <= x:
            return bisect_left(self._r, -x, key=_neg) - 1
        return self._last_true(lambda n: self.r(n) > x, len(self._r) - 1, guess)

    def r_index_bounded(self, x: mpfr, bound: int):
        """r_index(x) if it is < bound, else None (x < r_bound), computing at most r_bound."""
        if x <= 0 or self.r(bound) > x:
            return None
        return self.r_index(x)


_CACHES: dict = {}
_CACHES_LOCK = threading.Lock()


def get_cache(params: MPParams) -> SequenceCache:
    """Shared cache per (gamma, precision)."""
    with _CACHES_LOCK:
        c = _CACHES.get(params.key)
        if c is None:
            c = _CACHES[params.key] = SequenceCache(params)
        return c


def clear_caches():
    """Drop every shared sequence cache (they are rebuilt on demand)."""
    with _CACHES_LOCK:
        _CACHES.clear()


def _check_unit(x):
    if not 0 <= x <= 1:
        raise DomainError(f"x = {x} outside [0, 1]")


def mp_eval(params: MPParams, x) -> mpfr:
    with precision(params.prec):
        x = mpfr(x)
        _check_unit(x)
        v = x + x ** (params.gamma + 1)
        return v if x < params.r1 else v - 1


def mp_deriv(params: MPParams, x) -> mpfr:
    with precision(params.prec):
        x = mpfr(x)
        _check_unit(x)
        if x == 0:
            return mpfr(1)
        return 1 + (params.gamma + 1) * x ** params.gamma


def r_seq(params: MPParams, cache: SequenceCache | None, n: int) -> mpfr:
    return (cache or get_cache(params)).r(int(n))


def p_seq(params: MPParams, cache: SequenceCache | None, n: int) -> mpfr:
    return (cache or get_cache(params)).p(int(n))


def _tie_eps(prec: int) -> mpfr:
    return mpfr(2) ** (-prec + 16)


def induced_eval(params: MPParams, cache: SequenceCache | None, x) -> ReturnValue:
    """First return to [r1, 1]: (f^m(x), m) with x in the cell [p_m, p_{m-1})."""
    cache = cache or get_cache(params)
    x = hp(x, params.prec)
    if x < params.r1 or x > 1:
        raise DomainError("induced_eval needs r1 < x <= 1")
    if x == params.r1:
        raise BranchBoundaryError("x = r1 never returns", params.prec)
    m = cache.cell_index(x)
    eps = _tie_eps(params.prec)
    with precision(params.prec):
        near_left = 0 <= x - cache.p(m) <= eps
        near_right = m > 1 and 0 <= cache.p(m - 1) - x <= eps
    if near_left or near_right:
        raise BranchBoundaryError(f"x is within resolution of a branch endpoint (m={m})", params.prec)
    # guard bits absorb the expansion along the m steps
    hi = _branches(params.gamma, params.prec + 64)
    img = hi.forward(x, m)
    return ReturnValue(hp(img, params.prec), m)


def inverse_branch(params: MPParams, cache: SequenceCache | None, m: int, y) -> mpfr:
    """The x in [p_m, p_{m-1}] with F(x) = y on branch m."""
    m = int(m)
    if m < 1:
        raise DomainError("branch index must be >= 1")
    y = hp(y, params.prec)
    if not params.r1 <= y <= 1:
        raise DomainError("inverse_branch needs y in [r1, 1]")
    return params.branches.phi(m, y)


def distortion_sample(params: MPParams, cache: SequenceCache | None, m: int, n: int, x, y,
                      variant: str = "p") -> DistortionSample:
    """lhs = |log((f^m)'x / (f^m)'y)| and factor = |f^m x - f^m y| / (r_{n-m} - r_{n-m+1}).

    variant "p": x, y in [p_n, p_{n-1}); variant "r": x, y in [r_{n+1}, r_n).
    """
    cache = cache or get_cache(params)
    m, n = int(m), int(n)
    if not 1 <= m <= n:
        raise DomainError("need 1 <= m <= n")
    x, y = hp(x, params.prec), hp(y, params.prec)
    if variant == "p":
        ok = all(params.r1 < v <= 1 and cache.cell_index(v) == n for v in (x, y))
    elif variant == "r":
        ok = all(0 < v < 1 and cache.r_index(v) == n for v in (x, y))
    else:
        raise DomainError(f"unknown variant {variant!r}")
    if not ok:
        raise DomainError(f"x and y are not both in cell {n} ({variant})")
    prec = params.prec + 64
    hi = _branches(params.gamma, prec)
    dx, fx = hi.deriv_product(x, m)
    dy, fy = hi.deriv_product(y, m)
    with precision(prec):
        lhs = abs(gmpy2.log(dx / dy))
        factor = abs(fx - fy) / (cache.r(n - m) - cache.r(n - m + 1))
    return DistortionSample(hp(lhs, params.prec), hp(factor, params.prec))
