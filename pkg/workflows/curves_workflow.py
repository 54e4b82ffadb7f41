"""
Curves - plot-ready samples of population thresholds and display requirements

    1b: threshold ppd vs eccentricity, per channel and percentile
    1c: vertical lines needed vs distance in display heights (achromatic, fovea)
    1d: pixels per inch needed vs distance in metres (achromatic, fovea)
"""
from typing import List, Sequence

import numpy as np

from core.csf_model import ColorChannel
from core.exceptions import DomainError
from core.population import PopulationModel, threshold_quantile
from core.units import required_lines, required_ppi
from utils.logger import setup_logger

logger = setup_logger(__name__)

FIGURES = ("1b", "1c", "1d")
DEFAULT_RANGES = {
    "1b": (0.0, 20.0, 1.0),
    "1c": (0.5, 10.0, 0.05),
    "1d": (0.1, 1.0, 0.01),
}
DEFAULT_PERCENTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def sample_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid start, start+step, ... <= stop"""
    if not step > 0 or stop < start:
        raise DomainError(f"Invalid range start={start} stop={stop} step={step}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


class CurveGenerator:
    def __init__(self, population: PopulationModel):
        self.population = population

    def generate(self, figure: str, grid: Sequence[float],
                 percentiles: Sequence[float] = DEFAULT_PERCENTILES,
                 channels: Sequence = tuple(ColorChannel)) -> List[dict]:
        """One row per (x, percentile) [and channel for 1b]"""
        if figure not in FIGURES:
            raise DomainError(f"Unknown figure '{figure}'; choose from {FIGURES}")

        rows = []
        if figure == "1b":
            for channel in map(ColorChannel.parse, channels):
                for e in grid:
                    for q in percentiles:
                        rows.append({
                            "channel": channel.value,
                            "eccentricity_deg": float(e),
                            "percentile": float(q),
                            "threshold_ppd": threshold_quantile(self.population, channel, float(e), q),
                        })
        else:
            thresholds = {q: threshold_quantile(self.population, ColorChannel.ACHROMATIC, 0.0, q)
                          for q in percentiles}
            for x in grid:
                for q in percentiles:
                    if figure == "1c":
                        rows.append({"distance_heights": float(x), "percentile": float(q),
                                     "threshold_ppd": thresholds[q],
                                     "required_lines": required_lines(float(x), thresholds[q])})
                    else:
                        rows.append({"distance_m": float(x), "percentile": float(q),
                                     "threshold_ppd": thresholds[q],
                                     "required_ppi": required_ppi(float(x), thresholds[q])})

        logger.info(f"Generated {len(rows)} rows for figure {figure}")
        return rows
