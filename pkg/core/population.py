"""
Population - distribution of resolution limits across observers

Thresholds are Gaussian in the transformed frequency f(rho) = rho ** (1/3)
(rho in cpd). The centre comes from the CSF model; sigma and scale are
tabulated at 0, 10 and 20 deg and linearly inter/extrapolated elsewhere.
"""
import json
import math
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from scipy.interpolate import interp1d
from scipy.special import ndtr, ndtri

from configs.settings import PPD_PER_CPD
from core.csf_model import ColorChannel, ModelParamSet, threshold_resolution
from core.exceptions import DomainError
from utils.logger import setup_logger

logger = setup_logger(__name__)


class FreqTransform:
    """f(rho) = cube root of rho (cpd) and its inverse"""

    @staticmethod
    def forward(rho):
        return np.cbrt(rho)

    @staticmethod
    def inverse(x):
        return np.power(x, 3)


f = FreqTransform.forward
f_inv = FreqTransform.inverse


@dataclass(frozen=True)
class PopulationParams:
    channel: ColorChannel
    eccentricity: float
    mu: float
    sigma: float
    scale: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.scale > 0 and self.mu > 0):
            raise DomainError(f"Invalid population parameters: {self}")


class PopulationModel:
    """
    Per-channel Gaussian table plus the CSF parameter set used for the centre

    Args:
        eccentricities: grid eccentricities (deg)
        table: channel -> {"sigma": [...], "scale": [...]} aligned with the grid
        model: CSF parameter set supplying mu
    """

    def __init__(self, eccentricities: Sequence[float], table: Dict[ColorChannel, dict],
                 model: ModelParamSet, source: str = ""):
        self.eccentricities = np.asarray(eccentricities, dtype=float)
        self.model = model
        self.source = source
        self.table = {}

        for channel in ColorChannel:
            if channel not in table:
                raise DomainError(f"Population table is missing channel '{channel.value}'")
            sigma = np.asarray(table[channel]["sigma"], dtype=float)
            scale = np.asarray(table[channel]["scale"], dtype=float)
            if sigma.shape != self.eccentricities.shape or scale.shape != self.eccentricities.shape:
                raise DomainError(f"Population table for '{channel.value}' does not match the grid")
            self.table[channel] = {
                "sigma": sigma,
                "scale": scale,
                "sigma_fn": interp1d(self.eccentricities, sigma, kind="linear", fill_value="extrapolate"),
                "scale_fn": interp1d(self.eccentricities, scale, kind="linear", fill_value="extrapolate"),
            }

    @classmethod
    def from_dict(cls, data: dict, model: ModelParamSet) -> "PopulationModel":
        table = {ColorChannel.parse(k): v for k, v in data["channels"].items()}
        return cls(data["eccentricities"], table, model, data.get("source", ""))

    @classmethod
    def load(cls, path, model: ModelParamSet) -> "PopulationModel":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        logger.debug(f"Loaded population table from {path}")
        return cls.from_dict(data, model)


def params_at(m: PopulationModel, c, e: float) -> PopulationParams:
    """Gaussian parameters for channel `c` at eccentricity `e` (deg)"""
    if not e >= 0:
        raise DomainError(f"eccentricity must be non-negative, got {e}")
    channel = ColorChannel.parse(c)
    cell = m.table[channel]

    exact = np.flatnonzero(m.eccentricities == e)
    if exact.size:
        sigma = float(cell["sigma"][exact[0]])
        scale = float(cell["scale"][exact[0]])
    else:
        sigma = float(cell["sigma_fn"](e))
        scale = float(cell["scale_fn"](e))

    if sigma <= 0:
        clamped = float(cell["sigma"][-1])
        logger.warning(
            f"Extrapolated sigma for {channel.value} at {e:g} deg is {sigma:.4g}; "
            f"clamping to the {m.eccentricities[-1]:g} deg value {clamped}"
        )
        sigma = clamped
    if scale <= 0:
        clamped = float(cell["scale"][-1])
        logger.warning(f"Extrapolated scale for {channel.value} at {e:g} deg clamped to {clamped}")
        scale = clamped

    mu = float(f(threshold_resolution(m.model[channel], e) / PPD_PER_CPD))
    return PopulationParams(channel, float(e), mu, sigma, scale)


def threshold_quantile(m: PopulationModel, c, e: float, q: float) -> float:
    """Threshold (ppd) below which a fraction `q` of observers lie"""
    if not (0.0 < q < 1.0):
        raise DomainError(f"quantile must lie in (0, 1), got {q}")
    p = params_at(m, c, e)
    x = p.mu + p.sigma * float(ndtri(q))
    if x < 0:
        return 0.0
    return PPD_PER_CPD * float(f_inv(x))


def fraction_satisfied(m: PopulationModel, c, e: float, display_ppd: float) -> float:
    """Fraction of observers whose threshold is at or below `display_ppd`"""
    if not display_ppd >= 0:
        raise DomainError(f"display_ppd must be non-negative, got {display_ppd}")
    p = params_at(m, c, e)
    if math.isinf(display_ppd):
        return 1.0
    return float(ndtr((float(f(display_ppd / PPD_PER_CPD)) - p.mu) / p.sigma))


def density(m: PopulationModel, c, e: float, rho):
    """Gaussian density over f(rho), including the 1/scale normalisation"""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0):
        raise DomainError("rho must be positive")
    p = params_at(m, c, e)
    z = (f(rho_arr) - p.mu) / p.sigma
    g = np.exp(-0.5 * z * z) / (p.scale * p.sigma * math.sqrt(2.0 * math.pi))
    return float(g) if g.ndim == 0 else g
