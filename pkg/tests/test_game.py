import gmpy2
import pytest
from gmpy2 import mpfr

from mpgame.cylinders import CylinderTree, get_tree
from mpgame.dynamics import MPParams, get_cache
from mpgame.game import (
    ALICE, BOB, BoundaryHuggerBob, GameConfig, RandomBob, RuleViolation, ScriptError, ScriptedBob,
    SqueezeLeftBob, StrategyContext, Transcript, apply_move, audit_P_invariants, audit_rules, check_move,
    default_alpha, inject_fault, make_bob, new_game, play_EF, play_Ef, replay, run_game, verify_avoidance,
)
from mpgame.game.alice import checkpoint_move, first_move
from mpgame.game.lift import cell_of, lift_ratios, prelude_move
from mpgame.numerics import ClosedInterval, DomainError, hp, precision


def I(a, b, prec=256):
    return ClosedInterval.make(a, b, prec)


@pytest.fixture(scope="module")
def honest():
    return play_EF(1, 0.3, "squeeze_left", rounds=60)


# -- referee -------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(DomainError):
        GameConfig.make(0, 0.5)
    with pytest.raises(DomainError):
        GameConfig.make(0.5, 1)
    with pytest.raises(DomainError):
        GameConfig.make(0.5, 0.5, variant="weak")


def test_new_game(p1):
    fld = ClosedInterval(p1.r1, hp(1))
    cfg = GameConfig.make(0.1, 0.5, field=fld)
    s = new_game(cfg, fld)
    assert s.round == 1 and s.to_move == ALICE
    assert new_game(cfg, I("0.7", "0.9")).last == I("0.7", "0.9")
    with pytest.raises(DomainError):
        new_game(cfg, I("0.5", "0.9"))
    with pytest.raises(DomainError):
        new_game(GameConfig.make(0.1, 0.5), I("0", "1.5"))


def test_move_rules():
    classic = GameConfig.make(0.5, 0.5, "classic")
    strong = GameConfig.make(0.5, 0.5, "strong")
    B = I(0, 1)
    check_move(classic, B, I("0.25", "0.75"), ALICE)
    check_move(strong, B, I("0.2", "0.8"), ALICE)
    with pytest.raises(RuleViolation) as e:
        check_move(classic, B, I("0.2", "0.8"), ALICE)
    assert e.value.rule == "ratio" and e.value.offender == ALICE
    with pytest.raises(RuleViolation) as e:
        check_move(strong, B, I("0.1", "0.4"), ALICE)
    assert e.value.rule == "ratio"
    with pytest.raises(RuleViolation) as e:
        check_move(strong, I("0.2", "0.8"), I("0.1", "0.7"), BOB)
    assert e.value.rule == "nesting" and e.value.offender == BOB


def test_classic_ratio_product():
    cfg = GameConfig.make(0.5, 0.5, "classic", max_rounds=10)

    def left_half(state):
        B = state.last
        with precision(256):
            return ClosedInterval(B.left, (B.left + B.right) / 2)

    class Alice:
        def move(self, state):
            return left_half(state)

    t = run_game(cfg, Alice(), left_half, 10, I(0, 1))
    assert len(t.history) == 21
    assert t.final.width() == mpfr(2) ** -20


def test_zero_rounds():
    t = play_EF(1, 0.3, "random", rounds=0)
    assert len(t.history) == 1 and t.rounds == 0


# -- adversaries -----------------------------------------------------------------

def _bob_state(A, beta="0.5"):
    cfg = GameConfig.make(0.5, beta, "strong")
    return new_game(cfg, I(0, 1)).__class__(cfg, (I(0, 1), A))


def test_squeeze_left_example():
    B = SqueezeLeftBob()(_bob_state(I("0.7", "0.8")))
    assert B.left == hp("0.7")
    assert abs(B.right - hp("0.75")) < mpfr(2) ** -250


def test_random_bob_is_seeded():
    s = _bob_state(I("0.2", "0.9"), "0.3")
    assert RandomBob(5)(s) == RandomBob(5)(s)
    assert RandomBob(5)(s) != RandomBob(6)(s)
    check_move(s.config, s.last, RandomBob(5)(s), BOB)


def test_boundary_hugger_hits_p1(p1):
    c = get_cache(p1)
    A = ClosedInterval(c.p(1) - hp("0.02"), c.p(1) + hp("0.03"))
    cfg = GameConfig.make(0.5, "0.4", field=ClosedInterval(p1.r1, hp(1)))
    s = new_game(cfg, ClosedInterval(p1.r1, hp(1))).__class__(cfg, (ClosedInterval(p1.r1, hp(1)), A))
    B = BoundaryHuggerBob(get_tree(p1))(s)
    assert B.contains(c.p(1))
    check_move(cfg, A, B, BOB)


def test_scripted_bob_rejects_illegal_moves():
    s = _bob_state(I("0.2", "0.8"))
    bob = ScriptedBob.from_json('[["0.1", "0.5"]]')
    with pytest.raises(ScriptError):
        bob(s)
    with pytest.raises(ScriptError):
        ScriptedBob.from_json("not json")
    with pytest.raises(Exception):
        make_bob("nobody")


# -- Alice -----------------------------------------------------------------------

def test_first_move_avoids_field_ends(p1):
    B = ClosedInterval(p1.r1, hp(1))
    alpha = hp("0.1")
    A = first_move(B, alpha, (p1.r1, hp(1)), 256)
    assert not A.contains(p1.r1) and not A.contains(hp(1))
    with precision(256):
        assert A.width() >= alpha * B.width() * (1 - mpfr(2) ** -200)


def test_case1_subcase1_synthetic(p1):
    t = CylinderTree(p1)
    C5 = hp(4, 256)
    alpha = default_alpha(p1.gamma, C5, 256)
    ctx = StrategyContext(p1, t, alpha, hp("0.3"), C5)
    J23, J22, J21 = (t.interval_of(t.node(s)) for s in [(2, 3), (2, 2), (2, 1)])
    with precision(256):
        B = ClosedInterval(J23.left, J22.left + J22.width() / 8)
    assert B.right < J21.left
    res = t.commensurate_generation(B)
    assert res.generation == 2 and res.itinerary == (2, 3)
    A, case, sub = checkpoint_move(ctx, B, 2, res.itinerary)
    assert (case, sub) == ("case1", "1")
    with precision(256):
        assert A == ClosedInterval(B.right - alpha * (B.right - B.left), B.right)


def test_honest_game_passes_audits(honest):
    assert audit_rules(honest).passed
    rep = audit_P_invariants(honest)
    assert rep.passed, rep.failures()
    first = [c for c in rep.checks if c["j"] == 1]
    assert {c["invariant"] for c in first} >= {"P1", "P2", "P3"}
    av = verify_avoidance(honest)
    assert av.status == "pass" and av.t_verified >= len(honest.checkpoints) // 2
    assert all(s <= honest.constants["K"] for s in av.symbols)


def test_case1_subcase1_in_play(honest):
    h = honest.history
    hits = [c for c in honest.checkpoints if c.case == "case1" and c.subcase == "1"]
    for cp in hits:
        B, A = h[2 * (cp.n - 1)], h[2 * (cp.n - 1) + 1]
        with precision(honest.prec):
            assert A == ClosedInterval(B.right - honest.alpha * (B.right - B.left), B.right)


def test_transcript_round_trip(honest):
    text = honest.to_json()
    back = Transcript.from_json(text)
    assert back.history == honest.history
    assert back.checkpoints == honest.checkpoints
    assert back.to_json() == text


def test_replay_is_bit_identical(honest):
    again = replay(honest)
    assert again.history == honest.history
    assert again.checkpoints == honest.checkpoints


def test_determinism():
    a = play_EF(1, 0.3, "random", seed=3, rounds=30)
    b = play_EF(1, 0.3, "random", seed=3, rounds=30)
    assert a.to_json() == b.to_json()


def test_fault_injection_is_detected(honest):
    for j in (1, 3):
        bad = inject_fault(honest, j)
        assert not audit_rules(bad).passed or bad.injected
        rep = audit_P_invariants(bad)
        av = verify_avoidance(bad)
        assert not rep.passed or av.status == "fail"


# -- lift -------------------------------------------------------------------------

def test_lift_ratios():
    a, b = lift_ratios(hp("0.1"), hp("0.2"), hp(1), 256)
    with precision(256):
        assert abs(a - hp("0.1") * gmpy2.exp(mpfr(-1))) < mpfr(2) ** -250
        assert abs(b - hp("0.2") * gmpy2.exp(mpfr(-1))) < mpfr(2) ** -250


def test_cell_of_and_prelude(p1):
    c = get_cache(p1)
    assert cell_of(c, ClosedInterval(c.r(2), c.r(1))) == 1
    assert cell_of(c, I("0.9", "1")) == 0
    assert cell_of(c, I("0", "0.5")) is None
    A = prelude_move(c, I(0, 1), hp("0.1"), 256)
    assert not A.contains(hp(0))
    assert abs(A.width() - hp("0.1")) < mpfr(2) ** -250


def test_lift_from_first_cell():
    prec = 600
    params = MPParams.create(1, prec)
    c = get_cache(params)
    B1 = ClosedInterval(c.r(2), c.r(1))
    t = play_Ef(1, 0.1, "random", seed=2, rounds=20, B1=B1, prec=prec)
    assert t.constants["n"] == 1 and t.constants["lifted_at"] == 1
    assert t.inner.history[0].left >= params.r1
    assert audit_rules(t).passed


def test_lifted_game_avoids_small_r():
    t = play_Ef(1, 0.1, "squeeze_left", rounds=60)
    assert audit_rules(t).passed
    av = verify_avoidance(t)
    assert av.status == "pass" and av.t_verified >= 1
    assert audit_P_invariants(t).passed
