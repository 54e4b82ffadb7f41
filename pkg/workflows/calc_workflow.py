"""
Display calculator - does a display at a given distance exceed the
resolution limit of a given share of the population?
"""
from typing import Optional

from configs.settings import MEASURED_ECCENTRICITY_MAX
from core.csf_model import ColorChannel
from core.population import PopulationModel, fraction_satisfied, threshold_quantile
from core.psychophysics import PlannerConfig, plan_movement
from core.units import DisplayGeometry, center_ppd, pixels_per_inch, ppd_to_snellen
from utils.logger import setup_logger

logger = setup_logger(__name__)


class DisplayCalculator:
    def __init__(self, population: PopulationModel):
        """
        Args:
            population: population table bound to a CSF parameter set
        """
        self.population = population

    def evaluate(self, geometry: DisplayGeometry, channel=ColorChannel.ACHROMATIC,
                 eccentricity: float = 0.0, percentile: float = 0.5) -> dict:
        """Centre ppd, the population threshold at `percentile` and the verdict"""
        channel = ColorChannel.parse(channel)
        if eccentricity > MEASURED_ECCENTRICITY_MAX:
            logger.warning(f"Eccentricity {eccentricity:g} deg is beyond the measured range; extrapolating")

        display_ppd = center_ppd(geometry)
        threshold = threshold_quantile(self.population, channel, eccentricity, percentile)
        fraction = fraction_satisfied(self.population, channel, eccentricity, display_ppd)
        verdict = "exceeds" if display_ppd >= threshold else "falls short"

        logger.info(f"{display_ppd:.1f} ppd vs {threshold:.1f} ppd threshold: {verdict}")
        return {
            "channel": channel.value,
            "eccentricity_deg": float(eccentricity),
            "percentile": float(percentile),
            "distance_m": geometry.viewing_distance_m,
            "display_ppd": display_ppd,
            "display_ppi": pixels_per_inch(geometry),
            "snellen_equivalent": ppd_to_snellen(display_ppd),
            "threshold_ppd": threshold,
            "verdict": verdict,
            "fraction_satisfied": fraction,
        }

    @staticmethod
    def plan(geometry: DisplayGeometry, target_ppd: float,
             rail_min_m: Optional[float] = None, rail_max_m: Optional[float] = None) -> list:
        """Per-factor display positions reaching `target_ppd`; the selected one is marked"""
        kwargs = {k: v for k, v in (("rail_min_m", rail_min_m), ("rail_max_m", rail_max_m)) if v is not None}
        config = PlannerConfig(geometry, geometry.viewing_distance_m, **kwargs)
        plan = plan_movement(config, target_ppd)
        rows = []
        for option in plan.options:
            rows.append({
                "factor": option.factor,
                "distance_m": option.distance_m,
                "movement_m": abs(option.movement_m),
                "direction": option.direction,
                "feasible": option.feasible,
                "selected": option.factor == plan.factor,
            })
        logger.info(f"Selected x{plan.factor}: move {abs(plan.movement_m):.3f} m to {plan.distance_m:.3f} m")
        return rows
