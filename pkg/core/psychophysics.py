"""
Psychophysics - simulated 2IFC measurement of resolution thresholds

Weibull observer over f(rho), QUEST staircase with the 0.07 SD / 30-50 trial
stopping rule, 3-repeat majority sessions and the moving-display planner.
"""
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

from configs.settings import (
    GUESS_RATE, LAPSE_RATE, PPD_PER_CPD, QUEST_GRID_MAX_CPD, QUEST_GRID_MIN_CPD,
    QUEST_GRID_POINTS, QUEST_MAX_TRIALS, QUEST_MIN_TRIALS, QUEST_PRIOR_CPD,
    QUEST_PRIOR_SD, QUEST_STOP_SD, RAIL_MAX_M, RAIL_MIN_M, REPEATS_PER_TRIAL,
    SUBSAMPLING_FACTORS, WEIBULL_SLOPE,
)
from core.csf_model import ColorChannel
from core.exceptions import DomainError, TargetOutOfRangeError
from core.population import f, f_inv
from core.records import TrialRecord
from core.units import DisplayGeometry, center_ppd, distance_for_ppd
from utils.logger import setup_logger

logger = setup_logger(__name__)


# ============================================================================
# PSYCHOMETRIC FUNCTION
# ============================================================================

@dataclass(frozen=True)
class PsychometricFunction:
    """Weibull in f-space; probability of a correct 2IFC response falls with frequency"""
    threshold_t: float
    slope_beta: float = WEIBULL_SLOPE
    guess_gamma: float = GUESS_RATE
    lapse_lambda: float = LAPSE_RATE

    def __post_init__(self):
        if not self.slope_beta > 0:
            raise DomainError(f"slope must be positive, got {self.slope_beta}")
        if not (0.0 <= self.guess_gamma < 1.0 - self.lapse_lambda <= 1.0):
            raise DomainError(
                f"need 0 <= guess < 1 - lapse <= 1, got guess={self.guess_gamma}, lapse={self.lapse_lambda}"
            )

    @classmethod
    def from_threshold_ppd(cls, threshold_ppd: float, **kwargs) -> "PsychometricFunction":
        return cls(float(f(threshold_ppd / PPD_PER_CPD)), **kwargs)

    @property
    def threshold_ppd(self) -> float:
        return PPD_PER_CPD * float(f_inv(self.threshold_t))

    def at_level(self, x, threshold=None):
        """P(correct) at transformed frequency x; `threshold` may be an array of T values"""
        t = self.threshold_t if threshold is None else threshold
        with np.errstate(over="ignore"):
            u = np.power(10.0, self.slope_beta * (np.asarray(t) - np.asarray(x)))
        return self.guess_gamma + (1.0 - self.guess_gamma - self.lapse_lambda) * (1.0 - np.exp(-u))


def psychometric_p(pf: PsychometricFunction, rho):
    """Probability of a correct response to a grating of `rho` cpd"""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0):
        raise DomainError("rho must be positive")
    p = pf.at_level(f(rho_arr))
    return float(p) if np.ndim(p) == 0 else p


def psychometric_inverse(pf: PsychometricFunction, p: float) -> float:
    """Frequency (cpd) at which the probability of a correct response equals `p`"""
    span = 1.0 - pf.guess_gamma - pf.lapse_lambda
    if not (pf.guess_gamma < p < 1.0 - pf.lapse_lambda):
        raise DomainError(f"p must lie strictly between {pf.guess_gamma} and {1.0 - pf.lapse_lambda}")
    u = -math.log(1.0 - (p - pf.guess_gamma) / span)
    x = pf.threshold_t - math.log10(u) / pf.slope_beta
    if x <= 0:
        return 0.0
    return float(f_inv(x))


def majority_probability(p, repeats: int = REPEATS_PER_TRIAL):
    """Probability that the majority of `repeats` independent responses is correct"""
    if repeats < 1 or repeats % 2 == 0:
        raise DomainError(f"repeats must be a positive odd number, got {repeats}")
    if repeats == 1:
        return p
    return binom.sf(repeats // 2, repeats, p)


# ============================================================================
# QUEST
# ============================================================================

@dataclass(frozen=True, eq=False)
class QuestState:
    """
    Posterior over the threshold T (f-space) on a uniform grid

    The posterior is kept as normalised log-probabilities so that long runs of
    updates cannot underflow.
    """
    grid: np.ndarray
    log_posterior: np.ndarray
    trials: int = 0
    stop_sd: float = QUEST_STOP_SD
    min_trials: int = QUEST_MIN_TRIALS
    max_trials: int = QUEST_MAX_TRIALS
    slope_beta: float = WEIBULL_SLOPE
    guess_gamma: float = GUESS_RATE
    lapse_lambda: float = LAPSE_RATE
    repeats: int = 1

    @classmethod
    def create(cls, prior_cpd: float = QUEST_PRIOR_CPD, prior_sd: float = QUEST_PRIOR_SD,
               grid_points: int = QUEST_GRID_POINTS, min_cpd: float = QUEST_GRID_MIN_CPD,
               max_cpd: float = QUEST_GRID_MAX_CPD, **kwargs) -> "QuestState":
        """Gaussian prior (in f-space) centred on `prior_cpd`"""
        grid = np.linspace(float(f(min_cpd)), float(f(max_cpd)), grid_points)
        log_prior = -0.5 * ((grid - float(f(prior_cpd))) / prior_sd) ** 2
        log_prior = log_prior - logsumexp(log_prior)
        return cls(grid=grid, log_posterior=log_prior, **kwargs)

    @property
    def posterior(self) -> np.ndarray:
        return np.exp(self.log_posterior - logsumexp(self.log_posterior))

    @property
    def mean(self) -> float:
        return float(np.dot(self.posterior, self.grid))

    @property
    def sd(self) -> float:
        p = self.posterior
        m = float(np.dot(p, self.grid))
        return float(math.sqrt(max(np.dot(p, (self.grid - m) ** 2), 0.0)))

    @property
    def grid_step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def model(self, threshold_t: float = 0.0) -> PsychometricFunction:
        return PsychometricFunction(threshold_t, self.slope_beta, self.guess_gamma, self.lapse_lambda)


def quest_update(q: QuestState, stimulus_ppd: float, correct: bool) -> QuestState:
    """Bayesian update of the threshold posterior after one (aggregated) response"""
    x = float(f(stimulus_ppd / PPD_PER_CPD))
    lo, hi = float(q.grid[0]), float(q.grid[-1])
    if x < lo or x > hi:
        clamped = min(max(x, lo), hi)
        logger.warning(
            f"Stimulus {stimulus_ppd:.4g} ppd lies outside the QUEST grid; "
            f"clamping to {PPD_PER_CPD * float(f_inv(clamped)):.4g} ppd"
        )
        x = clamped

    p = majority_probability(q.model().at_level(x, threshold=q.grid), q.repeats)
    with np.errstate(divide="ignore"):
        log_likelihood = np.log(p) if correct else np.log1p(-p)

    log_posterior = q.log_posterior + log_likelihood
    log_posterior = log_posterior - logsumexp(log_posterior)
    return replace(q, log_posterior=log_posterior, trials=q.trials + 1)


def quest_next(q: QuestState) -> float:
    """Next stimulus (ppd): the posterior mean threshold"""
    return PPD_PER_CPD * float(f_inv(q.mean))


def quest_should_stop(q: QuestState) -> bool:
    if q.trials >= q.max_trials:
        return True
    return q.trials >= q.min_trials and q.sd <= q.stop_sd


@dataclass
class SessionResult:
    trials: List[TrialRecord]
    threshold_ppd: float
    posterior_sd: float
    updates: int
    seed: Optional[int] = None

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "estimate_ppd": self.threshold_ppd,
            "posterior_sd": self.posterior_sd,
            "updates": self.updates,
            "presentations": len(self.trials),
        }


def run_session(observer: PsychometricFunction, config: QuestState,
                repeats: int = REPEATS_PER_TRIAL, seed=None,
                channel=ColorChannel.ACHROMATIC, eccentricity: float = 0.0,
                observer_id: str = "sim") -> SessionResult:
    """
    Simulate one QUEST session against a Weibull observer

    Each QUEST trial shows the same stimulus `repeats` times; the majority
    response feeds a single update. Deterministic for a given seed.

    Args:
        observer: simulated observer
        config: initial QUEST state (prior and stopping rule)
        repeats: presentations per QUEST trial (odd)
        seed: seed or numpy Generator

    Returns:
        SessionResult with every presentation and the final estimate
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = replace(config, repeats=repeats)
    records = []

    while not quest_should_stop(q):
        stimulus_ppd = quest_next(q)
        p = psychometric_p(observer, stimulus_ppd / PPD_PER_CPD)
        responses = rng.random(repeats) < p
        for response in responses:
            records.append(TrialRecord(stimulus_ppd, bool(response), channel, eccentricity, observer_id))
        majority = int(responses.sum()) * 2 > repeats
        q = quest_update(q, stimulus_ppd, majority)

    estimate = quest_next(q)
    logger.debug(f"Session finished after {q.trials} updates: {estimate:.2f} ppd (sd {q.sd:.4f})")
    return SessionResult(records, estimate, q.sd, q.trials,
                         seed if not isinstance(seed, np.random.Generator) else None)


# ============================================================================
# MOVING DISPLAY PLANNER
# ============================================================================

@dataclass(frozen=True)
class PlannerConfig:
    display: DisplayGeometry
    current_distance_m: float
    rail_min_m: float = RAIL_MIN_M
    rail_max_m: float = RAIL_MAX_M
    allowed_factors: Tuple[int, ...] = SUBSAMPLING_FACTORS

    def __post_init__(self):
        if not self.rail_min_m < self.rail_max_m:
            raise DomainError("rail_min_m must be smaller than rail_max_m")
        if not self.allowed_factors or any(int(k) != k or k < 1 for k in self.allowed_factors):
            raise DomainError(f"subsampling factors must be integers >= 1, got {self.allowed_factors}")


@dataclass(frozen=True)
class MovementOption:
    factor: int
    distance_m: float
    movement_m: float
    feasible: bool

    @property
    def direction(self) -> str:
        if abs(self.movement_m) < 1e-12:
            return "none"
        return "toward observer" if self.movement_m < 0 else "away from observer"


@dataclass(frozen=True)
class MovementPlan:
    factor: int
    distance_m: float
    movement_m: float
    options: Tuple[MovementOption, ...] = field(default_factory=tuple)

    def option(self, factor: int) -> MovementOption:
        for opt in self.options:
            if opt.factor == factor:
                return opt
        raise KeyError(factor)


def plan_movement(p: PlannerConfig, target_ppd: float) -> MovementPlan:
    """
    Choose the subsampling factor and display distance that reach `target_ppd`
    with the least display movement

    Raises:
        TargetOutOfRangeError: if no factor reaches the target on the rail
    """
    if not target_ppd > 0:
        raise DomainError(f"target ppd must be positive, got {target_ppd}")

    options = []
    for k in sorted(int(k) for k in p.allowed_factors):
        d = distance_for_ppd(p.display, k * target_ppd)
        feasible = p.rail_min_m <= d <= p.rail_max_m
        options.append(MovementOption(k, d, d - p.current_distance_m, feasible))

    feasible = [o for o in options if o.feasible]
    if not feasible:
        required = {o.factor: o.distance_m for o in options}
        listing = ", ".join(f"x{k}: {d:.3f} m" for k, d in required.items())
        raise TargetOutOfRangeError(
            f"{target_ppd:.2f} ppd is not reachable within "
            f"[{p.rail_min_m}, {p.rail_max_m}] m ({listing})",
            required_distances=required,
        )

    best = min(feasible, key=lambda o: (abs(o.movement_m), o.factor))
    check = center_ppd(p.display.at_distance(best.distance_m)) / best.factor
    logger.debug(f"Planned x{best.factor} at {best.distance_m:.3f} m ({check:.3f} ppd)")
    return MovementPlan(best.factor, best.distance_m, best.movement_m, tuple(options))
