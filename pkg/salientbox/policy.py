from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from salientbox.models import CountCategory, DecodeBranch, SubitizingOutput


@dataclass
class GateDecision:
    branch: DecodeBranch
    # None means sweep every threshold level
    peak_target: Optional[int] = None
    allow_fallback: bool = False
    reasons: List[str] = field(default_factory=list)


class SubitizingGate:
    """Routes a subitizing output to the empty, single or multi decode branch."""

    def __init__(self, theta_c: float = 0.7) -> None:
        self.theta_c = theta_c

    def route(self, sub: SubitizingOutput) -> GateDecision:
        reasons: List[str] = []
        category = sub.category
        confident = sub.confidence >= self.theta_c

        if category == CountCategory.ZERO:
            reasons.append("no_objects")
            return GateDecision(branch=DecodeBranch.EMPTY, reasons=reasons)

        if category == CountCategory.ONE and sub.confidence > self.theta_c:
            reasons.append("confident_single")
            return GateDecision(branch=DecodeBranch.SINGLE, peak_target=1, reasons=reasons)

        peak_target: Optional[int] = None
        if category == CountCategory.TWO and confident:
            peak_target = 2
            reasons.append("bounded_sweep")
        else:
            reasons.append("open_count" if category == CountCategory.MANY else "low_confidence")
            reasons.append("unbounded_sweep")

        return GateDecision(
            branch=DecodeBranch.MULTI,
            peak_target=peak_target,
            allow_fallback=confident,
            reasons=reasons,
        )
