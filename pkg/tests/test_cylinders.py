import random

import pytest
from gmpy2 import mpfr
from hypothesis import given, settings, strategies as st

from mpgame.cylinders import (
    CylinderTree, children, cylinder_endpoints, estimate_C5, get_tree, locate_K, tail_length,
)
from mpgame.dynamics import MPParams, get_cache
from mpgame.numerics import ClosedInterval, DomainError, ResourceError, hp, precision

from oracles import brute_generation

TOL = mpfr(2) ** -200


def random_interval(rng, r1, lo_frac=0.05):
    """A random closed subinterval of [r1, 1] away from the left end."""
    lo = float(r1) + lo_frac * (1 - float(r1))
    a = rng.uniform(lo, 1)
    w = 10 ** rng.uniform(-5, -0.5)
    b = min(1.0, a + w)
    return ClosedInterval.make(a, b)


# -- endpoints and children ----------------------------------------------------

def test_endpoint_examples(p1):
    c = get_cache(p1)
    root = cylinder_endpoints(p1, None, ())
    assert root.left == p1.r1 and root.right == 1
    J1 = cylinder_endpoints(p1, None, (1,))
    assert J1.left == c.p(1) and J1.right == 1
    assert str(J1.left).startswith("0.8667603")
    J2 = cylinder_endpoints(p1, None, (2,))
    assert J2.left == c.p(2) and J2.right == c.p(1)
    with pytest.raises(DomainError):
        cylinder_endpoints(p1, None, (0,))


def test_children_examples(p1):
    kids = children(p1, (), 2)
    assert [k.itinerary for k in kids] == [(1,), (2,)]
    kids = children(p1, (1,), 3)
    assert kids[0].right == 1
    assert kids[0].left == kids[1].right and kids[1].left == kids[2].right
    w = [k.width() for k in kids]
    assert w[0] > w[1] > w[2]


def test_tail_length_examples(p1):
    c = get_cache(p1)
    with precision(256):
        assert abs(tail_length(p1, (), 2) - (c.p(1) - p1.r1)) < TOL
    assert str(tail_length(p1, (), 2)).startswith("0.2487")
    J = cylinder_endpoints(p1, None, (3, 1))
    assert tail_length(p1, (3, 1), 1) == J.width()


@pytest.mark.parametrize("sigma", [(), (1,), (4, 2), (1, 7, 3), (20, 1, 1, 5)])
def test_tiling(params, sigma):
    J = cylinder_endpoints(params, None, sigma)
    K = 30
    kids = children(params, sigma, K)
    with precision(params.prec):
        total = sum((k.width() for k in kids), mpfr(0)) + tail_length(params, sigma, K + 1)
    assert abs(total - J.width()) < TOL * J.width() * 2 ** 8
    w = [k.width() for k in children(params, sigma, 100)]
    assert all(x > y for x, y in zip(w, w[1:]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 30), max_size=4), st.lists(st.integers(1, 30), max_size=4))
def test_cylinders_nested_or_disjoint(s1, s2):
    params = MPParams.create(1, 256)
    A = cylinder_endpoints(params, None, s1)
    B = cylinder_endpoints(params, None, s2)
    prefix = s1[:len(s2)] == s2 or s2[:len(s1)] == s1
    if prefix:
        assert A.subset(B) or B.subset(A)
    else:
        assert A.right <= B.left or B.right <= A.left


# -- K locator and length ratios -----------------------------------------------

def test_locate_K_examples(p1):
    assert locate_K(p1, (), hp("0.5")) == 2
    assert locate_K(p1, (), hp("0.99999999")) == 1
    assert locate_K(p1, (2, 3), hp("0.999")) == 1
    with pytest.raises(DomainError):
        locate_K(p1, (), 0)
    with pytest.raises(DomainError):
        locate_K(p1, (), 1)


def test_locate_K_is_cell_of_query_point(params):
    t = get_tree(params)
    rng = random.Random(4)
    for _ in range(40):
        sigma = tuple(rng.randint(1, 12) for _ in range(rng.randint(0, 3)))
        zeta = rng.uniform(0.01, 0.99)
        K = locate_K(params, sigma, zeta)
        node = t.node(sigma)
        with precision(params.prec):
            q = t.left_of(node) + hp(zeta) * (t.right_of(node) - t.left_of(node))
        assert t.lk(node, K) <= q < t.lk(node, K - 1)


def test_C5_root_example(p1):
    c = get_cache(p1)
    ratio = float((1 - c.p(1)) / (1 - p1.r1))
    assert abs(ratio - 0.3488) < 1e-4
    value, info = estimate_C5(p1, depth=0, k_max=1, return_details=True)
    assert abs(info["raw_sup"] - 1 / ratio) < 1e-12
    assert abs(float(value) - 1.5 / ratio) < 1e-9


def test_C5_stabilizes(p1):
    c3 = float(estimate_C5(p1, depth=3, k_max=100))
    c4 = float(estimate_C5(p1, depth=4, k_max=100))
    assert c3 >= 1 and c4 >= 1
    assert abs(c4 - c3) <= 0.1 * c4


@pytest.mark.parametrize("gamma", [0.5, 1])
def test_length_ratio_sandwiches(gamma):
    params = MPParams.create(gamma, 256)
    C5 = float(estimate_C5(params, depth=3, k_max=60))
    t = get_tree(params)
    rng = random.Random(11)
    for _ in range(40):
        sigma = tuple(rng.randint(1, 40) for _ in range(rng.randint(0, 3)))
        node = t.node(sigma)
        L = t.left_of(node)
        width = float(t.right_of(node) - L)
        for k in (1, 2, 5, 17, 60):
            ratio = float(t.lk(node, k - 1) - t.lk(node, k)) / width
            tail = float(t.lk(node, k - 1) - L) / width
            assert 1 / C5 <= ratio * k ** (1 + 1 / gamma) <= C5
            assert 1 / C5 <= tail * k ** (1 / gamma) <= C5


# -- commensurability ------------------------------------------------------------

def test_generation_examples(p1):
    t = get_tree(p1)
    c = get_cache(p1)
    root = ClosedInterval(p1.r1, hp(1))
    assert t.commensurate_generation(root).generation == 0
    assert t.commensurate_generation(ClosedInterval(c.p(2), hp(1))).generation == 1
    for sigma in [(1,), (3, 2), (1, 5, 2), (2, 2, 2, 9)]:
        J = cylinder_endpoints(p1, None, sigma)
        res = t.commensurate_generation(J)
        assert res.generation == len(sigma) and res.itinerary == sigma
    B = ClosedInterval.make("0.80", "0.81")
    res = t.commensurate_generation(B)
    g = brute_generation(t, B.left, B.right)
    assert res.generation == g
    w = res.witness
    assert B.left <= w.left and w.right <= B.right


def test_generation_matches_brute_force():
    params = MPParams.create(1, 256)
    t = CylinderTree(params)
    rng = random.Random(2024)
    for _ in range(60):
        B = random_interval(rng, params.r1)
        res = t.commensurate_generation(B)
        g = brute_generation(t, B.left, B.right)
        assert res.generation == g
        assert B.left <= res.witness.left and res.witness.right <= B.right
        if res.generation >= 1:
            assert 1 <= len(t.elements_meeting(B, res.generation - 1)) <= 2


def test_elements_meeting_examples(p1):
    t = get_tree(p1)
    c = get_cache(p1)
    eps = hp("0.01")
    B = ClosedInterval(c.p(1) - eps, c.p(1) + eps)
    got = [e.itinerary for e in t.elements_meeting(B, 1)]
    assert got == [(1,), (2,)]
    inner = ClosedInterval.make("0.9", "0.95")
    assert [e.itinerary for e in t.elements_meeting(inner, 1)] == [(1,)]


def test_unique_container_two_generations_up(p1):
    t = get_tree(p1)
    rng = random.Random(8)
    for _ in range(30):
        B = random_interval(rng, p1.r1)
        g = t.commensurate_generation(B).generation
        if g < 2:
            continue
        up = t.elements_meeting(B, g - 2)
        assert len(up) == 1
        assert B.subset(up[0].interval) and up[0].interval.width() > B.width()


def test_left_endpoint_scan_examples(p1):
    t = get_tree(p1)
    c = get_cache(p1)
    inside = ClosedInterval(c.p(2) + hp("0.001"), c.p(1) - hp("0.001"))
    assert t.left_endpoint_scan(inside, 1) == []
    B = ClosedInterval(c.p(1) - hp("0.001"), c.p(1) + hp("0.001"))
    found = t.left_endpoint_scan(B, 1)
    assert [(e.point, e.generation) for e in found] == [(c.p(1), 1)]
    # generation-2 left endpoints accumulate at p_1 from the right
    with pytest.raises(ResourceError):
        t.left_endpoint_scan(B, 2)
    left_only = ClosedInterval(c.p(1) - hp("0.05"), c.p(1))
    deeper = t.left_endpoint_scan(left_only, 2)
    assert all(left_only.left <= e.point <= left_only.right for e in deeper)
    assert {e.generation for e in deeper} == {1, 2}
