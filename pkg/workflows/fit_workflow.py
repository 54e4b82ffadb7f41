"""
Fit - thresholds (or raw trials) from CSV to model parameters
"""
from typing import List, Optional, Sequence

from core.csf_model import ColorChannel, ModelParamSet
from core.fitting import (
    FitResult, apply_outlier_rule, fit_model, fit_observer_thresholds, read_records, refit_model,
)
from core.records import TrialRecord
from utils.logger import setup_logger

logger = setup_logger(__name__)


class ModelFitter:
    def __init__(self, model: ModelParamSet):
        """
        Args:
            model: reference parameters, used as starting values and for
                   each channel's stimulus sensitivity
        """
        self.model = model

    def run(self, input_path, channels: Optional[Sequence] = None,
            sensitivity: Optional[float] = None, reject_outliers: bool = True) -> dict:
        """
        Returns:
            dict with per-channel FitResults (as dicts), excluded records and the refit model
        """
        records = read_records(input_path)
        if records and isinstance(records[0], TrialRecord):
            logger.info("Input holds trial data; fitting per-observer psychometric functions first")
            records = fit_observer_thresholds(records)

        if reject_outliers:
            records = apply_outlier_rule(records)

        present = sorted({r.channel for r in records}, key=list(ColorChannel).index)
        wanted = [ColorChannel.parse(c) for c in channels] if channels else present

        results: List[FitResult] = []
        for channel in wanted:
            s = sensitivity if sensitivity is not None else self.model[channel].stimulus_sensitivity
            results.append(fit_model(records, channel, s, initial=self.model[channel]))

        refit = refit_model(self.model, results, provenance=f"fit:{input_path}")
        excluded = [r.to_row() for r in records if r.excluded]
        return {
            "input": str(input_path),
            "results": [r.to_dict() for r in results],
            "excluded": excluded,
            "model": refit,
        }
