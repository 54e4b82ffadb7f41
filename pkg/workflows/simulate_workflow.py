"""
Simulate - repeated QUEST sessions against a synthetic observer
"""
from typing import List

import numpy as np
import pandas as pd

from core.csf_model import ColorChannel
from core.psychophysics import PsychometricFunction, QuestState, SessionResult, run_session
from utils.logger import setup_logger

logger = setup_logger(__name__)


class SessionSimulator:
    def __init__(self, observer: PsychometricFunction, quest: QuestState, repeats: int,
                 channel=ColorChannel.ACHROMATIC, eccentricity: float = 0.0):
        self.observer = observer
        self.quest = quest
        self.repeats = repeats
        self.channel = ColorChannel.parse(channel)
        self.eccentricity = float(eccentricity)

    def run(self, sessions: int, seed: int) -> List[SessionResult]:
        """Independent sessions; session i draws from the i-th child of `seed`"""
        children = np.random.SeedSequence(seed).spawn(sessions)
        results = []
        for i, child in enumerate(children):
            result = run_session(self.observer, self.quest, self.repeats, np.random.default_rng(child),
                                 self.channel, self.eccentricity)
            result.seed = i
            results.append(result)
        logger.info(
            f"Simulated {sessions} {self.channel.value} sessions at {self.eccentricity:g} deg (seed {seed})"
        )
        return results

    def summarize(self, results: List[SessionResult]) -> dict:
        df = pd.DataFrame([r.summary() for r in results])
        truth = self.observer.threshold_ppd
        estimates = df["estimate_ppd"]
        within_10 = float(((estimates - truth).abs() <= 0.1 * truth).mean())
        return {
            "channel": self.channel.value,
            "eccentricity_deg": self.eccentricity,
            "true_threshold_ppd": truth,
            "slope": self.observer.slope_beta,
            "sessions": int(len(df)),
            "mean_ppd": float(estimates.mean()),
            "median_ppd": float(estimates.median()),
            "sd_ppd": float(estimates.std(ddof=1)) if len(df) > 1 else 0.0,
            "bias": float(estimates.mean() / truth - 1.0),
            "within_10_percent": within_10,
            "min_updates": int(df["updates"].min()),
            "max_updates": int(df["updates"].max()),
        }

    @staticmethod
    def trial_rows(results: List[SessionResult]) -> List[dict]:
        rows = []
        for r in results:
            for t in r.trials:
                row = t.to_row()
                rows.append({
                    "session": r.seed,
                    "observer_id": row["observer_id"],
                    "channel": row["channel"],
                    "eccentricity_deg": row["eccentricity"],
                    "value": row["stimulus_ppd"],
                    "correct": int(row["correct"]),
                })
        return rows
