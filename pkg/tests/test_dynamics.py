from decimal import Decimal, getcontext

import pytest
from gmpy2 import mpfr
from hypothesis import assume, given, settings, strategies as st

from mpgame.dynamics import (
    MPParams, SequenceCache, distortion_sample, get_cache, induced_eval, inverse_branch, mp_deriv, mp_eval,
    p_seq, r_seq,
)
from mpgame.kernels import available_backends
from mpgame.numerics import BranchBoundaryError, DomainError, hp, precision

TOL = mpfr(2) ** -200


def dec_root(h, lo, hi, digits=50):
    """Bisection in stdlib decimal: the x in [lo, hi] with h(x) = 0, h increasing."""
    getcontext().prec = digits + 15
    lo, hi = Decimal(lo), Decimal(hi)
    for _ in range(int(digits * 3.4) + 4):
        mid = (lo + hi) / 2
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def dec_sequences(gamma, n):
    """r_0..r_n and p_0..p_n by nested decimal bisection."""
    e = Decimal(gamma) + 1
    g = lambda x: x + x ** e if x > 0 else Decimal(0)
    r, p = [Decimal(1)], [Decimal(1)]
    for _ in range(n):
        t = r[-1]
        r.append(dec_root(lambda x: g(x) - t, 0, t))
        rn = r[-1]
        p.append(dec_root(lambda x: g(x) - 1 - rn, r[1], 1))
    return r, p


def close(a, b, eps="1e-40"):
    return abs(Decimal(str(a)) - Decimal(b)) < Decimal(eps)


# -- map and derivative ------------------------------------------------------

@pytest.mark.parametrize("x, y", [(0, 0), (1, 1), ("0.9", "0.71")])
def test_mp_eval_examples(p1, x, y):
    assert abs(mp_eval(p1, hp(x)) - hp(y)) < TOL


@pytest.mark.parametrize("g, x, d", [(1, 0, 1), (1, 1, 3), (2, "0.5", "1.75")])
def test_mp_deriv_examples(g, x, d):
    assert mp_deriv(MPParams.create(g, 256), hp(x)) == hp(d)


def test_domain_errors(p1):
    for bad in (-0.1, 1.1):
        with pytest.raises(DomainError):
            mp_eval(p1, bad)
        with pytest.raises(DomainError):
            mp_deriv(p1, bad)
    with pytest.raises(DomainError):
        MPParams.create(0)


def test_r1_is_root(params):
    r1 = params.r1
    with precision(params.prec):
        assert abs(r1 + r1 ** (params.gamma + 1) - 1) < TOL
    assert 0 < r1 < 1


# -- sequences ---------------------------------------------------------------

def test_sequence_oracles_gamma1(p1):
    c = SequenceCache(p1)
    assert r_seq(p1, c, 0) == 1 and p_seq(p1, c, 0) == 1
    assert str(r_seq(p1, c, 1)).startswith("0.6180339887")
    assert str(r_seq(p1, c, 2)).startswith("0.4316834165")
    assert str(p_seq(p1, c, 1)).startswith("0.8667603")
    assert str(p_seq(p1, c, 2)).startswith("0.7967973691")


@pytest.mark.parametrize("gamma", ["0.5", "1", "2"])
def test_sequences_match_decimal_bisection(gamma):
    params = MPParams.create(gamma, 256)
    c = SequenceCache(params)
    r, p = dec_sequences(gamma, 6)
    for n in range(7):
        assert close(c.r(n), r[n]), n
        assert close(c.p(n), p[n]), n


def test_sequence_functional_equations(params):
    c = get_cache(params)
    for n in (1, 2, 7, 50, 1000):
        assert abs(mp_eval(params, c.r(n + 1)) - c.r(n)) < TOL
        assert abs(mp_eval(params, c.p(n)) - c.r(n)) < TOL
        assert c.r(n + 1) < c.r(n)
        assert c.r(1) < c.p(n + 1) < c.p(n)


def test_sparse_cache_agrees_with_dense(p1):
    dense = SequenceCache(p1)
    sparse = SequenceCache(p1, dense_limit=100)
    for n in (50, 99, 100, 101, 357, 2000, 5003):
        assert sparse.r(n) == dense.r(n)
        assert sparse.p(n) == dense.p(n)


def test_index_budget(p1):
    c = SequenceCache(p1, max_index=100)
    with pytest.raises(Exception):
        c.r(101)
    with pytest.raises(DomainError):
        c.r(-1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3000), st.floats(0.01, 0.99))
def test_cell_and_r_index(n, t):
    params = MPParams.create(1, 256)
    c = get_cache(params)
    with precision(256):
        x = c.p(n) + hp(t) * (c.p(n - 1) - c.p(n))
        y = c.r(n + 1) + hp(t) * (c.r(n) - c.r(n + 1))
    assert c.cell_index(x) == n
    assert c.r_index(y) == n


# -- induced map ---------------------------------------------------------------

def test_induced_examples(p1):
    a = induced_eval(p1, None, hp("0.9"))
    assert a.return_time == 1 and abs(a.image - hp("0.71")) < TOL
    b = induced_eval(p1, None, hp("0.8"))
    assert b.return_time == 2 and abs(b.image - hp("0.6336")) < TOL
    near = induced_eval(p1, None, 1 - mpfr(2) ** -100)
    assert near.return_time == 1 and 1 - near.image < mpfr(2) ** -98


def test_induced_errors(p1):
    c = get_cache(p1)
    with pytest.raises(DomainError):
        induced_eval(p1, c, hp("0.5"))
    with pytest.raises(BranchBoundaryError):
        induced_eval(p1, c, p1.r1)
    with pytest.raises(BranchBoundaryError):
        induced_eval(p1, c, c.p(3))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 500), st.floats(0.02, 0.98))
def test_induced_image_returns(m, t):
    params = MPParams.create(2, 256)
    c = get_cache(params)
    with precision(256):
        x = c.p(m) + hp(t) * (c.p(m - 1) - c.p(m))
    res = induced_eval(params, c, x)
    assert res.return_time == m
    assert params.r1 <= res.image <= 1
    assert abs(inverse_branch(params, c, m, res.image) - x) < mpfr(2) ** -180


def test_inverse_branch_examples(p1):
    c = get_cache(p1)
    assert inverse_branch(p1, c, 1, 1) == 1
    assert abs(inverse_branch(p1, c, 1, p1.r1) - c.p(1)) < TOL
    # y = 1 is the image of the closed cell's right end, so branch 3 lands on p_2
    assert abs(inverse_branch(p1, c, 3, 1) - c.p(2)) < TOL
    x = inverse_branch(p1, c, 3, hp("0.9"))
    assert c.p(3) < x < c.p(2)
    y = x
    for _ in range(3):
        y = mp_eval(p1, y)
    assert abs(y - hp("0.9")) < TOL
    with pytest.raises(DomainError):
        inverse_branch(p1, c, 0, 1)
    with pytest.raises(DomainError):
        inverse_branch(p1, c, 2, hp("0.5"))


# -- distortion ----------------------------------------------------------------

def test_distortion_equal_points(p1):
    assert distortion_sample(p1, None, 2, 2, hp("0.8"), hp("0.8")).lhs == 0


def test_distortion_example(p1):
    from mpgame.analysis import estimate_constants

    s = distortion_sample(p1, None, 2, 2, hp("0.80"), hp("0.81"))
    assert s.lhs > 0
    C3 = estimate_constants(p1, 200).C3_hat
    assert s.ratio <= C3


def test_distortion_rejects_split_cells(p1):
    with pytest.raises(DomainError):
        distortion_sample(p1, None, 1, 2, hp("0.80"), hp("0.95"))


# -- backend parity ------------------------------------------------------------

BACKENDS = available_backends()


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")
@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["0.5", "1", "2", "0.3"]), st.sampled_from([64, 256, 600]),
       st.floats(0.0, 1.0), st.integers(1, 40))
def test_backends_bit_identical(gamma, prec, t, n):
    g = hp(gamma, prec)
    py, cc = BACKENDS["python"](g, prec), BACKENDS["compiled"](g, prec)
    assert py.r1 == cc.r1
    with precision(prec):
        y = py.r1 + hp(t, prec) * (1 - py.r1)
    assume(y > py.r1)
    assert py.left_inv(y) == cc.left_inv(y)
    assert py.right_inv(y) == cc.right_inv(y)
    assert py.phi(n, y) == cc.phi(n, y)
    x = py.phi(n, y)
    assert py.forward(x, n) == cc.forward(x, n)
    assert py.deriv_product(x, n) == cc.deriv_product(x, n)
