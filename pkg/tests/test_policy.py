import pytest

from salientbox.models import DecodeBranch, SubitizingOutput
from salientbox.policy import SubitizingGate

GATE = SubitizingGate(theta_c=0.7)


@pytest.mark.parametrize(
    "category, confidence, branch, target, fallback",
    [
        ("0", 0.95, DecodeBranch.EMPTY, None, False),
        ("0", 0.30, DecodeBranch.EMPTY, None, False),
        ("1", 0.95, DecodeBranch.SINGLE, 1, False),
        ("1", 0.50, DecodeBranch.MULTI, None, False),
        ("2", 0.95, DecodeBranch.MULTI, 2, True),
        ("2", 0.50, DecodeBranch.MULTI, None, False),
        ("3+", 0.95, DecodeBranch.MULTI, None, True),
        ("3+", 0.50, DecodeBranch.MULTI, None, False),
    ],
)
def test_gating_table(category, confidence, branch, target, fallback):
    decision = GATE.route(SubitizingOutput(category=category, confidence=confidence))
    assert decision.branch == branch
    assert decision.peak_target == target
    if branch == DecodeBranch.MULTI:
        assert decision.allow_fallback is fallback


def test_single_gate_is_strict():
    at_threshold = GATE.route(SubitizingOutput(category="1", confidence=0.7))
    assert at_threshold.branch == DecodeBranch.MULTI
    assert at_threshold.allow_fallback
    assert "low_confidence" in at_threshold.reasons


def test_bounded_sweep_is_inclusive():
    decision = GATE.route(SubitizingOutput(category="2", confidence=0.7))
    assert decision.peak_target == 2
