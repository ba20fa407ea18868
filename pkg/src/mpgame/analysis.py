"""Empirical constants, asymptotic bands, Lyapunov exponents and survivor-set dimension."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from functools import lru_cache
import io
import json
import math
import random
import warnings

import gmpy2
from gmpy2 import mpfr
import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .cylinders import default_C5, estimate_C5
from .dynamics import MPParams, _branches, distortion_sample, get_cache, mp_deriv
from .numerics import DomainError, PrecisionError, ResourceError, hp, precision, to_decimal


class DegenerateOrbitWarning(RuntimeWarning):
    """The orbit landed on a fixed point (0 or 1) exactly."""


C1_SAFETY = 1.1
C2_SAFETY = 1.5
LAMBDA_DEFLATION = 0.99


@dataclass(frozen=True)
class ConstantsEstimate:
    C1_hat: mpfr
    C2_hat: mpfr
    C3_hat: mpfr
    C4_hat: mpfr
    C5_hat: mpfr
    lambda_hat: mpfr
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        p = int(self.C1_hat.precision)
        out = {k: to_decimal(getattr(self, k), p)
               for k in ("C1_hat", "C2_hat", "C3_hat", "C4_hat", "C5_hat", "lambda_hat")}
        out["metadata"] = self.metadata
        return out


def _c1_defects(params: MPParams, N: int):
    """(max defect, q1 list, q2 list) for r_n n^(1/g) and (r_{n-1}-r_n) n^(1+1/g)."""
    cache = get_cache(params)
    rs = cache.r_list(N)
    g = params.gamma_float
    q1, q2 = [], []
    with precision(params.prec):
        for n in range(1, N + 1):
            q1.append(float(rs[n]) * n ** (1 / g))
            q2.append(float(rs[n - 1] - rs[n]) * n ** (1 + 1 / g))
    worst = max(max(max(q, 1 / q) for q in q1), max(max(q, 1 / q) for q in q2))
    return worst, q1, q2


def estimate_C1(params: MPParams, N: int) -> mpfr:
    worst, _, _ = _c1_defects(params, N)
    return hp(worst * C1_SAFETY, params.prec)


def _c2_samples(params: MPParams, depth: int, n_samples: int, seed: int):
    cache = get_cache(params)
    rng = random.Random(seed)
    out = []
    for _ in range(n_samples):
        n = int(math.exp(rng.uniform(0, math.log(depth)))) if depth > 1 else 1
        n = max(1, min(n, depth))
        m = rng.randint(1, n)
        lo, hi = cache.r(n + 1), cache.r(n)
        with precision(params.prec):
            # one point anywhere in the cell, the other close to it or to an end
            u = mpfr(rng.random())
            x = lo + u * (hi - lo)
            mode = rng.random()
            if mode < 0.4:
                v = u + mpfr(rng.uniform(-1e-3, 1e-3))
            elif mode < 0.7:
                v = mpfr(rng.choice((1e-9, 1 - 1e-9)))
            else:
                v = mpfr(rng.random())
            v = min(max(v, mpfr(0)), 1 - mpfr(2) ** -60)
            y = lo + v * (hi - lo)
        if x == y:
            continue
        out.append(distortion_sample(params, cache, m, n, x, y, variant="r").ratio)
    return out


def estimate_C2(params: MPParams, depth: int = 200, n_samples: int = 400, seed: int = 1) -> mpfr:
    ratios = _c2_samples(params, depth, n_samples, seed)
    return hp(max(ratios) * C2_SAFETY, params.prec)


@lru_cache(maxsize=32)
def _default_C2(gamma_key: str) -> mpfr:
    return estimate_C2(MPParams.create(gamma_key, 256))


def default_C2(gamma) -> mpfr:
    """Distortion constant for the left branch, computed once per gamma at 256 bits."""
    return _default_C2(str(hp(gamma, 256)))


def estimate_lambda(params: MPParams, m_max: int = 200) -> mpfr:
    """0.99 x min over branches of F' at the left end of its cell."""
    cache = get_cache(params)
    g1 = params.gamma + 1
    best = None
    with precision(params.prec):
        tail = mpfr(1)  # product of f'(r_j) for j = 2..m
        for m in range(1, m_max + 1):
            if m >= 2:
                tail *= 1 + g1 * cache.r(m) ** params.gamma
            v = (1 + g1 * cache.p(m) ** params.gamma) * tail
            best = v if best is None or v < best else best
        return best * mpfr(LAMBDA_DEFLATION)


def estimate_constants(params: MPParams, N: int = 1000, depth: int = 200, k_max: int = 200,
                       seed: int = 1) -> ConstantsEstimate:
    if N < 100:
        raise DomainError("N must be at least 100")
    C1 = estimate_C1(params, N)
    C2 = estimate_C2(params, depth=depth, seed=seed)
    lam = estimate_lambda(params)
    with precision(params.prec):
        C3 = C2 + params.gamma / params.r1
        C4 = C3 * lam / (lam - 1)
    C5 = estimate_C5(params, depth=4, k_max=k_max, seed=seed)
    meta = {"gamma": float(params.gamma), "N": N, "depth": depth, "k_max": k_max, "seed": seed,
            "safety": {"C1": C1_SAFETY, "C2": C2_SAFETY, "C5": 1.5, "lambda": LAMBDA_DEFLATION}}
    return ConstantsEstimate(C1, C2, C3, C4, C5, lam, meta)


@dataclass
class SampleCheck:
    """Violation counts of the distortion and length-ratio bounds on fresh samples."""
    samples: int
    distortion: int = 0
    ratio: int = 0
    tail: int = 0
    locator: int = 0
    unresolved: list = field(default_factory=list)  # (sigma, zeta) whose K lies past the index budget
    worst: dict = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return self.distortion + self.ratio + self.tail + self.locator

    def to_dict(self) -> dict:
        return {**asdict(self), "violations": self.violations}


def check_constants_on_samples(params: MPParams, est: ConstantsEstimate, n_samples: int = 10_000,
                               max_gen: int = 4, k_max: int = 100, max_symbol: int = 100,
                               seed: int = 7) -> SampleCheck:
    """Test fitted constants on samples drawn independently of the fit.

    Each sample is an itinerary of length 1..max_gen (log-uniform symbols up to
    max_symbol), a child index k <= k_max, two interior points and a uniform zeta.
    Checked: the bounded-distortion bound C4 along the first return steps, both
    length-ratio sandwiches with C5, and the K-locator sandwich.  A zeta so small
    that K passes the sequence index budget cannot be settled; such samples are
    listed in ``unresolved`` rather than counted as passes.
    """
    from .cylinders import get_tree, locate_K
    rng = random.Random(seed)
    t = get_tree(params)
    g = params.gamma_float
    C4, C5 = float(est.C4_hat), float(est.C5_hat)
    work = _branches(params.gamma, params.prec + 64)
    out = SampleCheck(n_samples)
    worst = {"distortion": 0.0, "ratio": 1.0, "tail": 1.0}

    def sym():
        return int(math.exp(rng.uniform(0, math.log(max_symbol + 1))))

    for _ in range(n_samples):
        sigma = tuple(sym() for _ in range(rng.randint(1, max_gen)))
        k = rng.randint(1, k_max)
        zeta = rng.random() or 0.5
        node = t.node(sigma)
        L, R = t.left_of(node), t.right_of(node)
        with precision(params.prec + 64):
            width = R - L
            x = L + hp(rng.uniform(0.001, 0.999), params.prec + 64) * width
            y = L + hp(rng.uniform(0.001, 0.999), params.prec + 64) * width
            # (F^j)' along the itinerary, j = len(sigma)
            steps = rng.randint(1, len(sigma))
            dx = dy = mpfr(1)
            for s in sigma[:steps]:
                ax, x = work.deriv_product(x, s)
                ay, y = work.deriv_product(y, s)
                dx, dy = dx * ax, dy * ay
            dist = abs(float(gmpy2.log(dx / dy)))
            ratio = float((t.lk(node, k - 1) - t.lk(node, k)) / width) * k ** (1 + 1 / g)
            tail = float((t.lk(node, k - 1) - L) / width) * k ** (1 / g)
        if dist > C4:
            out.distortion += 1
        if not 1 / C5 <= ratio <= C5:
            out.ratio += 1
        if not 1 / C5 <= tail <= C5:
            out.tail += 1
        worst["distortion"] = max(worst["distortion"], dist)
        worst["ratio"] = max(worst["ratio"], ratio, 1 / ratio)
        worst["tail"] = max(worst["tail"], tail, 1 / tail)
        lo_K, hi_K = (C5 * zeta) ** -g - 1, (zeta / C5) ** -g
        try:
            K = locate_K(params, sigma, zeta)
        except ResourceError:
            # only K > budget is known: a violation if the upper bound is below budget, else undecided
            if hi_K < t.cache.max_index:
                out.locator += 1
            else:
                out.unresolved.append((sigma, zeta))
            continue
        if not lo_K <= K <= hi_K:
            out.locator += 1
    out.worst = {**worst, "C4": C4, "C5": C5}
    return out


@dataclass
class AsymptoticsReport:
    gamma: float
    N: int
    fit_N: int
    band: tuple
    passed: bool
    worst_defect: float
    limit_estimate: float
    rows: list

    def to_dict(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "r_n_scaled", "gap_scaled"])
        w.writerows(self.rows)
        return buf.getvalue()


def check_asymptotics(params: MPParams, N: int) -> AsymptoticsReport:
    """Fit [1/C, C] on n <= N/100 and check it holds for every n <= N."""
    if N < 100:
        raise DomainError("N must be at least 100")
    fit_N = max(1, N // 100)
    worst_fit, _, _ = _c1_defects(params, fit_N)
    C = worst_fit * C1_SAFETY
    worst, q1, q2 = _c1_defects(params, N)
    passed = worst <= C
    # log-spaced table rows
    idx = sorted({int(round(10 ** (k / 20))) for k in range(int(20 * math.log10(N)) + 1)} | {1, N})
    rows = [(n, q1[n - 1], q2[n - 1]) for n in idx if n <= N]
    return AsymptoticsReport(float(params.gamma), N, fit_N, (1 / C, C), passed, worst, q1[-1], rows)


def lyapunov_estimate(params: MPParams, x0, n_iter: int) -> mpfr:
    """(1/n) sum_{k<n} log f'(f^k x0), with enough guard bits for the orbit."""
    n_iter = int(n_iter)
    if n_iter < 1:
        raise DomainError("n_iter must be >= 1")
    x0 = hp(x0, params.prec)
    if not 0 < x0 <= 1:
        raise DomainError("x0 must lie in (0, 1]")
    extra = math.ceil(n_iter * math.log2(2 + params.gamma_float)) + 32
    prec = params.prec + extra
    br = _branches(params.gamma, prec)
    prod, xn = br.deriv_product(x0, n_iter)
    if xn == 0 or xn == 1:
        warnings.warn("orbit reached a fixed point exactly", DegenerateOrbitWarning, stacklevel=2)
    with precision(prec):
        val = gmpy2.log(prod) / n_iter
    return hp(val, params.prec)


def induced_lyapunov_estimate(params: MPParams, x0, n_returns: int, max_steps: int = 1_000_000):
    """(1/n) sum_{i<n} log F'(F^i x0) for the first-return map on [r1, 1].

    Returns (estimate, f_steps).  Working precision grows with the number of
    f-steps; it is raised and the orbit recomputed if the first guess was short.
    """
    n_returns = int(n_returns)
    if n_returns < 1:
        raise DomainError("n_returns must be >= 1")
    x0 = hp(x0, params.prec)
    if not params.r1 < x0 <= 1:
        raise DomainError("x0 must lie in (r1, 1]")
    budget = 4 * n_returns
    while True:
        prec = params.prec + 64 + math.ceil(budget * math.log2(2 + params.gamma_float))
        br = _branches(params.gamma, prec)
        g1 = params.gamma + 1
        with precision(prec):
            r1 = hp(params.r1, prec)
            x, logsum, steps, returns = hp(x0, prec), mpfr(0), 0, 0
            while returns < n_returns and steps < budget:
                logsum += gmpy2.log(1 + g1 * x ** params.gamma)
                x = br.f(x)
                steps += 1
                if x >= r1:
                    returns += 1
        if returns == n_returns:
            if x == 1:
                warnings.warn("orbit reached a fixed point exactly", DegenerateOrbitWarning, stacklevel=2)
            with precision(prec):
                return hp(logsum / n_returns, params.prec), steps
        if budget >= max_steps:
            raise ResourceError(f"more than {max_steps} f-steps for {n_returns} returns")
        budget = min(max_steps, 4 * budget)


@dataclass
class OrbitExponents:
    """Lyapunov averages along the verified prefix of a transcript's final orbit."""
    returns: int         # induced-map steps (symbols of the verified itinerary)
    f_steps: int         # f-steps in those returns
    induced: float       # (1/returns) sum log F'
    f_average: float     # (1/f_steps) sum log f'
    induced_floor: float  # log f'(p_K') with K' = min(K, cap): every log F' term is at least this
    f_floor: float       # log f'(r_m), m the largest symbol: every log f' term is at least this
    max_symbol: int
    prec: int

    def to_dict(self) -> dict:
        return asdict(self)


def transcript_exponents(t, cap: int = 10_000, symbols=None) -> OrbitExponents:
    """Exponents of the F-orbit of the final midpoint through its verified itinerary.

    Each branch is applied as a block of f-steps with the derivative product,
    so huge return times stay cheap; precision grows with the accumulated
    log-derivative until the orbit error is negligible.  Capping K only raises
    the induced floor, so the comparison against it stays conservative.
    """
    from .game.audit import verify_avoidance
    from .game.audit import _induced

    t = _induced(t)
    if symbols is None:
        symbols = verify_avoidance(t).symbols
    sigma = [int(s) for s in symbols]
    if not sigma:
        raise DomainError("no verified itinerary to follow")
    params = MPParams.create(t.gamma, t.prec)
    cache = get_cache(params)
    x0 = t.final.midpoint()
    need = t.prec + 128
    while True:
        br = _branches(params.gamma, need)
        with precision(need):
            x, logsum = hp(x0, need), mpfr(0)
            for m in sigma:
                if not cache.p(m) <= x <= cache.p(m - 1):
                    raise PrecisionError("orbit left its cylinder; raise precision", need)
                prod, x = br.deriv_product(x, m)
                logsum += gmpy2.log(prod)
        bits = t.prec + int(float(logsum) / math.log(2)) + 128
        if need >= bits:
            break
        need = bits
    K = int(t.constants["K"])
    steps = sum(sigma)
    with precision(need):
        floor_F = gmpy2.log(mp_deriv(params, cache.p(min(K, cap))))
        floor_f = gmpy2.log(mp_deriv(params, cache.r(max(sigma))))
    return OrbitExponents(len(sigma), steps, float(logsum / len(sigma)), float(logsum / steps),
                          float(floor_F), float(floor_f), max(sigma), need)


@dataclass
class DimensionReport:
    gamma: float
    K: int
    depth: int
    dimension: float
    cylinders: int

    def to_dict(self) -> dict:
        return asdict(self)


def moran_root(lengths) -> float:
    """Root s of sum L^s = 1 for lengths in (0, 1)."""
    L = np.asarray(lengths, dtype=float)
    if L.size == 1:
        return 0.0
    logs = np.log(L)

    def pressure(s):
        return logsumexp(s * logs)

    if pressure(1.0) >= 0:
        return 1.0
    return float(brentq(pressure, 0.0, 1.0, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def dimension_estimate(params: MPParams, K: int, depth: int, budget: int = 10_000_000) -> float:
    """Pressure root over the cylinders of a given depth with all symbols <= K."""
    K, depth = int(K), int(depth)
    if K < 1 or depth < 1:
        raise DomainError("need K >= 1 and depth >= 1")
    if K ** depth > budget:
        raise ResourceError(f"K^depth = {K ** depth} cylinders exceeds the budget {budget}; lower K or depth")
    br = _branches(params.gamma, 128)
    return moran_root(br.moran_lengths(K, depth))


def dimension_report(params: MPParams, K: int, depth: int) -> DimensionReport:
    return DimensionReport(float(params.gamma), K, depth, dimension_estimate(params, K, depth), K ** depth)


def reports_to_json(obj) -> str:
    return json.dumps(obj.to_dict() if hasattr(obj, "to_dict") else obj, indent=1)
