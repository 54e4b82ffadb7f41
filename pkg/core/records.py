"""
Threshold and trial records shared by the psychophysics and fitting modules
"""
from dataclasses import dataclass, replace, asdict
from typing import Optional

from core.csf_model import ColorChannel
from core.exceptions import DomainError


@dataclass(frozen=True)
class TrialRecord:
    stimulus_ppd: float
    correct: bool
    channel: ColorChannel = ColorChannel.ACHROMATIC
    eccentricity: float = 0.0
    observer_id: str = "sim"

    def __post_init__(self):
        if not self.stimulus_ppd > 0:
            raise DomainError(f"stimulus_ppd must be positive, got {self.stimulus_ppd}")
        object.__setattr__(self, "channel", ColorChannel.parse(self.channel))
        object.__setattr__(self, "correct", bool(self.correct))

    def to_row(self) -> dict:
        row = asdict(self)
        row["channel"] = self.channel.value
        return row


@dataclass(frozen=True)
class ThresholdRecord:
    observer_id: str
    channel: ColorChannel
    eccentricity: float
    threshold_ppd: float
    excluded: bool = False
    exclusion_reason: str = ""
    stimulus_sensitivity: Optional[float] = None

    def __post_init__(self):
        if not self.threshold_ppd > 0:
            raise DomainError(f"threshold_ppd must be positive, got {self.threshold_ppd}")
        object.__setattr__(self, "channel", ColorChannel.parse(self.channel))

    def exclude(self, reason: str) -> "ThresholdRecord":
        return replace(self, excluded=True, exclusion_reason=reason)

    def to_row(self) -> dict:
        row = asdict(self)
        row["channel"] = self.channel.value
        return row
