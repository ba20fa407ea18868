"""The interval game, Alice's strategies, adversaries and auditors."""

from .alice import AliceEF, Checkpoint, StrategyContext, StrategyError, alice_move_EF, default_alpha
from .audit import (AuditReport, AvoidanceReport, audit_P_invariants, audit_rules, inject_fault,
                    verify_avoidance)
from .bob import (BoundaryHuggerBob, RandomBob, ScriptError, ScriptedBob, SqueezeLeftBob, bob_policy,
                  make_bob)
from .engine import ALICE, BOB, GameConfig, GameState, RuleViolation, apply_move, check_move, new_game
from .lift import AliceEf, ConstantUnderestimateError, alice_move_Ef
from .runner import choose_precision, play_EF, play_Ef, replay, run_game
from .transcript import Transcript

__all__ = [
    "ALICE", "BOB", "AliceEF", "AliceEf", "AuditReport", "AvoidanceReport", "BoundaryHuggerBob",
    "Checkpoint", "ConstantUnderestimateError", "GameConfig", "GameState", "RandomBob", "RuleViolation",
    "ScriptError", "ScriptedBob", "SqueezeLeftBob", "StrategyContext", "StrategyError", "Transcript",
    "alice_move_EF", "alice_move_Ef", "apply_move", "audit_P_invariants", "audit_rules", "bob_policy",
    "check_move", "choose_precision", "default_alpha", "inject_fault", "make_bob", "new_game", "play_EF",
    "play_Ef", "replay", "run_game", "verify_avoidance",
]
