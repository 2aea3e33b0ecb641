"""Answer objects and their JSON form."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from decisive.finite_sts import ProbInterval


class Verdict(str, Enum):
    ALMOST_SURE = "AlmostSure"
    ZERO = "Zero"
    POSITIVE = "PositiveNotAlmostSure"
    UNKNOWN = "Unknown"


@dataclass
class ReachReport:
    verdict: Verdict
    prob_interval: ProbInterval | None = None
    diagnostics: dict = field(default_factory=dict)
    abstraction: object = field(default=None, repr=False)   # AbstractSts when one was built

    def to_dict(self) -> dict:
        iv = None
        if self.prob_interval is not None:
            iv = self.prob_interval.to_dict()
            iv["eps"] = self.diagnostics.get("eps")
        return {"verdict": self.verdict.value, "interval": iv, "diagnostics": self.diagnostics}
