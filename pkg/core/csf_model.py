"""
CSF Model - resolution limit as a function of eccentricity per colour channel

    log10 S(e, rho) = log10 S0 + k_rho * (1 + k_ecc * e) * rho

Thresholds are returned in ppd (twice the cut-off frequency in cpd).
"""
import json
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from configs.settings import PPD_PER_CPD
from core.exceptions import DomainError, UnboundedThresholdError
from utils.logger import setup_logger

logger = setup_logger(__name__)


class ColorChannel(str, Enum):
    ACHROMATIC = "achromatic"
    RED_GREEN = "red_green"
    YELLOW_VIOLET = "yellow_violet"

    @classmethod
    def parse(cls, value) -> "ColorChannel":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "ach": cls.ACHROMATIC, "achromatic": cls.ACHROMATIC, "bw": cls.ACHROMATIC,
            "rg": cls.RED_GREEN, "red_green": cls.RED_GREEN, "redgreen": cls.RED_GREEN,
            "yv": cls.YELLOW_VIOLET, "yellow_violet": cls.YELLOW_VIOLET, "yellowviolet": cls.YELLOW_VIOLET,
        }
        if key not in aliases:
            raise DomainError(f"Unknown colour channel '{value}'")
        return aliases[key]


@dataclass(frozen=True)
class ChannelParams:
    log_s0: float
    k_rho: float
    k_ecc: float
    stimulus_sensitivity: float
    cone_contrast: Optional[float] = None
    standard_errors: Dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.k_rho < 0:
            raise DomainError(f"k_rho must be negative, got {self.k_rho}")
        if not self.k_ecc > 0:
            raise DomainError(f"k_ecc must be positive, got {self.k_ecc}")
        if not self.log_s0 > 0:
            raise DomainError(f"log_s0 must be positive, got {self.log_s0}")
        if not self.stimulus_sensitivity > 0:
            raise DomainError(f"stimulus_sensitivity must be positive, got {self.stimulus_sensitivity}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ModelParamSet:
    channels: Dict[ColorChannel, ChannelParams]
    provenance: str = "reference-tableC"
    stimulus_colours: Dict[ColorChannel, list] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        missing = [c.value for c in ColorChannel if c not in self.channels]
        if missing:
            raise DomainError(f"Model parameter set is missing channels: {missing}")

    def __getitem__(self, channel) -> ChannelParams:
        return self.channels[ColorChannel.parse(channel)]

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParamSet":
        channels = {}
        for name, values in data["channels"].items():
            channels[ColorChannel.parse(name)] = ChannelParams(
                log_s0=float(values["log_s0"]),
                k_rho=float(values["k_rho"]),
                k_ecc=float(values["k_ecc"]),
                stimulus_sensitivity=float(values["stimulus_sensitivity"]),
                cone_contrast=values.get("cone_contrast"),
                standard_errors=dict(values.get("standard_errors", {})),
            )
        colours = {ColorChannel.parse(k): list(v) for k, v in data.get("stimulus_colours", {}).items()}
        return cls(channels=channels, provenance=data.get("provenance", "unknown"),
                   stimulus_colours=colours)

    @classmethod
    def load(cls, path) -> "ModelParamSet":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        model = cls.from_dict(data)
        logger.debug(f"Loaded model parameters '{model.provenance}' from {path}")
        return model

    def to_dict(self, source: str = "") -> dict:
        data = {
            "schema": 1,
            "provenance": self.provenance,
            "channels": {c.value: p.to_dict() for c, p in self.channels.items()},
            "stimulus_colours": {c.value: v for c, v in self.stimulus_colours.items()},
        }
        if source:
            data["source"] = source
        return data

    def save(self, path, source: str = ""):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(source), f, indent=4)

    def with_channel(self, channel, params: ChannelParams, provenance: Optional[str] = None) -> "ModelParamSet":
        channels = dict(self.channels)
        channels[ColorChannel.parse(channel)] = params
        return ModelParamSet(channels, provenance or self.provenance, self.stimulus_colours)

    def scaled_sensitivity(self, delta_log_s0: float) -> "ModelParamSet":
        """Copy with every baseline sensitivity raised by `delta_log_s0` log units"""
        channels = {
            c: ChannelParams(p.log_s0 + delta_log_s0, p.k_rho, p.k_ecc,
                             p.stimulus_sensitivity, p.cone_contrast)
            for c, p in self.channels.items()
        }
        return ModelParamSet(channels, f"{self.provenance}+{delta_log_s0:g}", self.stimulus_colours)

    @classmethod
    def all_pass(cls, base: Optional["ModelParamSet"] = None) -> "ModelParamSet":
        """Infinite sensitivity everywhere: filtering with it removes nothing"""
        channels = {
            c: ChannelParams(math.inf, -0.05, 0.1, 1.0)
            for c in ColorChannel
        }
        colours = base.stimulus_colours if base is not None else {}
        return cls(channels, "all-pass", colours)


def _check_non_negative(value, name):
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"{name} must be non-negative")
    return arr


def sensitivity(p: ChannelParams, e, rho):
    """
    log10 contrast sensitivity at eccentricity `e` (deg) and frequency `rho` (cpd)

    Accepts scalars or numpy arrays (broadcast together).
    """
    e_arr = _check_non_negative(e, "eccentricity")
    rho_arr = _check_non_negative(rho, "spatial frequency")
    result = p.log_s0 + p.k_rho * (1.0 + p.k_ecc * e_arr) * rho_arr
    return float(result) if result.ndim == 0 else result


def _cutoff_cpd(p: ChannelParams, e, log_s):
    e_arr = _check_non_negative(e, "eccentricity")
    rho = (log_s - p.log_s0) / (p.k_rho * (1.0 + p.k_ecc * e_arr))
    return float(rho) if rho.ndim == 0 else rho


def threshold_resolution(p: ChannelParams, e):
    """
    Finest resolvable resolution (ppd) for the channel's reference stimulus

    Raises:
        UnboundedThresholdError: if the stimulus sensitivity reaches the baseline
    """
    if p.stimulus_sensitivity >= 10.0 ** p.log_s0:
        raise UnboundedThresholdError(
            f"Stimulus sensitivity {p.stimulus_sensitivity} >= baseline {10.0 ** p.log_s0:.4g}; "
            f"threshold is unbounded"
        )
    return PPD_PER_CPD * _cutoff_cpd(p, e, math.log10(p.stimulus_sensitivity))


def threshold_resolution_at_contrast(p: ChannelParams, e, contrast: float):
    """Threshold resolution (ppd) for a stimulus of the given cone contrast in (0, 1]"""
    if not (0.0 < contrast <= 1.0):
        raise DomainError(f"contrast must lie in (0, 1], got {contrast}")
    return PPD_PER_CPD * _cutoff_cpd(p, e, math.log10(1.0 / contrast))


def resolution_ratio(model: ModelParamSet, channel, e) -> float:
    """Achromatic threshold divided by the channel's threshold at eccentricity e"""
    achromatic = threshold_resolution(model[ColorChannel.ACHROMATIC], e)
    return achromatic / threshold_resolution(model[channel], e)
