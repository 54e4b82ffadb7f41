"""
Fitting - outlier rejection, psychometric MLE and nonlinear regression of
the resolution-limit model

All fitting happens in the transformed frequency space f(rho) = rho ** (1/3).
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize, minimize_scalar

from configs.settings import (
    FIT_MAX_ITERATIONS, FIT_TOLERANCE, GUESS_RATE, LAPSE_RATE, MAD_CONSISTENCY,
    MAD_Z_THRESHOLD, MEAN_AD_CONSISTENCY, MLE_GRID_POINTS, MLE_MIN_LEVELS,
    MLE_MIN_TRIALS, PPD_PER_CPD, WEIBULL_SLOPE,
)
from core.csf_model import ChannelParams, ColorChannel, ModelParamSet
from core.exceptions import (
    ConvergenceError, DomainError, ThresholdOutsideRangeError,
    UnidentifiableParametersError,
)
from core.population import f, f_inv
from core.psychophysics import PsychometricFunction
from core.records import ThresholdRecord, TrialRecord
from utils.logger import setup_logger

logger = setup_logger(__name__)

PARAM_NAMES = ("log_s0", "k_rho", "k_ecc")


# ============================================================================
# OUTLIER RULE
# ============================================================================

def modified_z_scores(values: Sequence[float]) -> np.ndarray:
    """
    Modified Z-scores about the median

    Uses 0.6745 * |v - median| / MAD; when the MAD is zero the mean absolute
    deviation about the median (scaled by 1.2533) takes its place.
    """
    v = np.asarray(values, dtype=float)
    deviation = np.abs(v - np.median(v))
    mad = float(np.median(deviation))
    if mad > 0:
        return MAD_CONSISTENCY * deviation / mad

    mean_ad = float(np.mean(deviation))
    if mean_ad == 0:
        return np.zeros_like(v)
    return deviation / (MEAN_AD_CONSISTENCY * mean_ad)


def mad_outliers(values: Sequence[float], threshold: float = MAD_Z_THRESHOLD) -> List[bool]:
    """Flag values whose modified Z-score exceeds `threshold` (groups of 3 or more)"""
    if len(values) < 3:
        logger.warning(f"Outlier rule needs at least 3 values, got {len(values)}; nothing flagged")
        return [False] * len(values)
    return [bool(z > threshold) for z in modified_z_scores(values)]


def apply_outlier_rule(records: Sequence[ThresholdRecord],
                       threshold: float = MAD_Z_THRESHOLD) -> List[ThresholdRecord]:
    """
    Mark outliers within each (channel, eccentricity) group as excluded

    Records already excluded keep their reason and do not take part in the
    group statistics. Order is preserved.
    """
    result = list(records)
    groups: Dict[tuple, List[int]] = {}
    for i, r in enumerate(result):
        if not r.excluded:
            groups.setdefault((r.channel, r.eccentricity), []).append(i)

    flagged = 0
    for (channel, ecc), idx in groups.items():
        values = [result[i].threshold_ppd for i in idx]
        flags = mad_outliers(values, threshold)
        if not any(flags):
            continue
        scores = modified_z_scores(values)
        for i, flag, z in zip(idx, flags, scores):
            if flag:
                result[i] = result[i].exclude(f"modified z-score {z:.2f} > {threshold}")
                flagged += 1

    logger.info(f"Outlier rule flagged {flagged} of {len(result)} records")
    return result


# ============================================================================
# PSYCHOMETRIC MLE
# ============================================================================

@dataclass(frozen=True)
class PsychometricFit:
    threshold_ppd: float
    slope: float
    threshold_t: float
    log_likelihood: float
    n_trials: int
    n_levels: int


def _aggregate_trials(trials: Sequence[TrialRecord]):
    frame = pd.DataFrame({
        "x": [float(f(t.stimulus_ppd / PPD_PER_CPD)) for t in trials],
        "correct": [int(t.correct) for t in trials],
    })
    grouped = frame.groupby("x")["correct"].agg(["sum", "count"]).reset_index()
    return (grouped["x"].to_numpy(float), grouped["sum"].to_numpy(float),
            grouped["count"].to_numpy(float))


def _log_likelihood(threshold_t, slope, x, k, n, guess, lapse) -> float:
    pf = PsychometricFunction(threshold_t, slope, guess, lapse)
    p = np.clip(pf.at_level(x), 1e-300, 1.0 - 1e-16)
    return float(np.sum(k * np.log(p) + (n - k) * np.log1p(-p)))


def _score(threshold_t, slope, x, k, n, guess, lapse) -> float:
    """d log L / dT for a fixed slope"""
    span = 1.0 - guess - lapse
    with np.errstate(over="ignore"):
        u = np.power(10.0, slope * (threshold_t - x))
    e = np.exp(-u)
    p = guess + span * (1.0 - e)
    dp = span * e * u * slope * math.log(10.0)
    dp = np.where(np.isfinite(dp), dp, 0.0)
    return float(np.sum((k / p - (n - k) / (1.0 - p)) * dp))


def psychometric_log_likelihood(trials: Sequence[TrialRecord], threshold_t: float,
                                slope: float = WEIBULL_SLOPE, guess: float = GUESS_RATE,
                                lapse: float = LAPSE_RATE) -> float:
    """Bernoulli log-likelihood of `trials` under a Weibull with threshold T (f-space)"""
    x, k, n = _aggregate_trials(trials)
    return _log_likelihood(threshold_t, slope, x, k, n, guess, lapse)


def psychometric_score(trials: Sequence[TrialRecord], threshold_t: float,
                       slope: float = WEIBULL_SLOPE, guess: float = GUESS_RATE,
                       lapse: float = LAPSE_RATE) -> float:
    """Analytic derivative of the log-likelihood with respect to T"""
    x, k, n = _aggregate_trials(trials)
    return _score(threshold_t, slope, x, k, n, guess, lapse)


def fit_psychometric(trials: Sequence[TrialRecord], slope: float = WEIBULL_SLOPE,
                     fit_slope: bool = False, guess: float = GUESS_RATE,
                     lapse: float = LAPSE_RATE,
                     max_iterations: int = FIT_MAX_ITERATIONS) -> PsychometricFit:
    """
    Maximum-likelihood threshold (and optionally slope) of a 2IFC data set

    Args:
        trials: binary responses; duplicated records count as extra weight
        slope: Weibull slope (starting value when fit_slope is set)
        fit_slope: also estimate the slope
        guess, lapse: fixed asymptotes

    Returns:
        PsychometricFit with the threshold in ppd

    Raises:
        DomainError: fewer than 10 trials or 3 distinct levels
        ThresholdOutsideRangeError: responses do not bracket a threshold
        ConvergenceError: optimiser failed; carries the best estimate so far
    """
    if len(trials) < MLE_MIN_TRIALS:
        raise DomainError(f"Need at least {MLE_MIN_TRIALS} trials, got {len(trials)}")
    x, k, n = _aggregate_trials(trials)
    if x.size < MLE_MIN_LEVELS:
        raise DomainError(f"Need at least {MLE_MIN_LEVELS} distinct stimulus levels, got {x.size}")
    if k.sum() == n.sum() or k.sum() == 0:
        raise ThresholdOutsideRangeError(
            "All responses are identical; the threshold lies outside the sampled range"
        )

    total = float(n.sum())

    def mean_nll(t):
        return -_log_likelihood(t, slope, x, k, n, guess, lapse) / total

    # Coarse grid, then bounded Brent in the winning cell
    lo = max(float(x.min()) - 0.5, 1e-6)
    hi = float(x.max()) + 0.5
    grid = np.linspace(lo, hi, MLE_GRID_POINTS)
    values = np.array([mean_nll(t) for t in grid])
    best = int(np.argmin(values))
    if best in (0, grid.size - 1):
        raise ThresholdOutsideRangeError(
            f"Likelihood is maximal at the edge of the search range "
            f"({PPD_PER_CPD * float(f_inv(grid[best])):.2f} ppd)"
        )

    res = minimize_scalar(mean_nll, bounds=(grid[best - 1], grid[best + 1]),
                          method="bounded", options={"xatol": 1e-12, "maxiter": max_iterations})
    if not res.success:
        best_t = float(res.x)
        raise ConvergenceError(
            f"Psychometric MLE did not converge: {res.message}",
            best_so_far=PPD_PER_CPD * float(f_inv(best_t)),
        )
    threshold_t = _polish_threshold(float(res.x), slope, x, k, n, guess, lapse)

    if fit_slope:
        threshold_t, slope = _fit_with_slope(threshold_t, slope, x, k, n, guess, lapse, max_iterations)

    log_l = _log_likelihood(threshold_t, slope, x, k, n, guess, lapse)
    return PsychometricFit(
        threshold_ppd=PPD_PER_CPD * float(f_inv(threshold_t)),
        slope=float(slope),
        threshold_t=threshold_t,
        log_likelihood=log_l,
        n_trials=int(total),
        n_levels=int(x.size),
    )


def _polish_threshold(t0, slope, x, k, n, guess, lapse) -> float:
    """Root of the score function near t0; falls back to t0 when no sign change is found"""
    score = lambda t: _score(t, slope, x, k, n, guess, lapse)
    s0 = score(t0)
    if s0 == 0.0:
        return t0
    for width in (1e-6, 1e-5, 1e-4, 1e-3):
        a, b = t0 - width, t0 + width
        if a > 0 and score(a) * score(b) < 0:
            return float(brentq(score, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return t0


def _fit_with_slope(t0, slope0, x, k, n, guess, lapse, max_iterations):
    total = float(n.sum())

    def objective(theta):
        t, log_beta = theta
        return -_log_likelihood(t, math.exp(log_beta), x, k, n, guess, lapse) / total

    res = minimize(objective, x0=[t0, math.log(slope0)], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": max_iterations * 20})
    if not res.success:
        raise ConvergenceError(
            f"Psychometric slope fit did not converge: {res.message}",
            best_so_far={"threshold_ppd": PPD_PER_CPD * float(f_inv(res.x[0])),
                         "slope": math.exp(res.x[1])},
        )
    return float(res.x[0]), math.exp(float(res.x[1]))


def fit_observer_thresholds(trials: Sequence[TrialRecord], **kwargs) -> List[ThresholdRecord]:
    """
    One psychometric fit per (observer, channel, eccentricity) cell

    Cells that cannot be fitted are logged and skipped.
    """
    frame = pd.DataFrame([t.to_row() for t in trials])
    records = []
    for (observer, channel, ecc), _ in frame.groupby(["observer_id", "channel", "eccentricity"], sort=True):
        cell = [t for t in trials
                if t.observer_id == observer and t.channel.value == channel and t.eccentricity == ecc]
        try:
            result = fit_psychometric(cell, **kwargs)
        except (DomainError, ThresholdOutsideRangeError, ConvergenceError) as e:
            logger.warning(f"Skipping {observer}/{channel}/{ecc:g} deg: {e}")
            continue
        records.append(ThresholdRecord(str(observer), ColorChannel.parse(channel), float(ecc),
                                       result.threshold_ppd))
    logger.info(f"Fitted {len(records)} thresholds from {len(trials)} trials")
    return records


# ============================================================================
# MODEL REGRESSION
# ============================================================================

@dataclass
class FitResult:
    channel: ColorChannel
    params: ChannelParams
    standard_errors: Dict[str, float]
    residuals: np.ndarray
    converged: bool
    iterations: int
    fixed: Dict[str, bool] = field(default_factory=dict)
    trace: List[float] = field(default_factory=list)
    provenance: str = "fit"

    @property
    def sum_of_squares(self) -> float:
        return float(np.sum(self.residuals ** 2))

    def to_dict(self) -> dict:
        return {
            "channel": self.channel.value,
            "estimates": {name: getattr(self.params, name) for name in PARAM_NAMES},
            "standard_errors": dict(self.standard_errors),
            "fixed": dict(self.fixed),
            "stimulus_sensitivity": self.params.stimulus_sensitivity,
            "residuals": [float(r) for r in self.residuals],
            "sum_of_squares": self.sum_of_squares,
            "converged": self.converged,
            "iterations": self.iterations,
            "provenance": self.provenance,
        }


class _ModelResiduals:
    """Residuals f(rho_pred) - f(rho_obs) and their Jacobian for the active records"""

    def __init__(self, records: Sequence[ThresholdRecord], default_sensitivity: float):
        self.ecc = np.array([r.eccentricity for r in records], dtype=float)
        self.log_s = np.log10([
            r.stimulus_sensitivity if r.stimulus_sensitivity is not None else default_sensitivity
            for r in records
        ])
        self.observed = f(np.array([r.threshold_ppd for r in records]) / PPD_PER_CPD)

    def predicted_cpd(self, theta) -> np.ndarray:
        log_s0, k_rho, k_ecc = theta
        return (self.log_s - log_s0) / (k_rho * (1.0 + k_ecc * self.ecc))

    def valid(self, theta) -> bool:
        return theta[1] < 0 and theta[2] > 0 and bool(np.all(self.predicted_cpd(theta) > 0))

    def residuals(self, theta) -> np.ndarray:
        return f(self.predicted_cpd(theta)) - self.observed

    def jacobian(self, theta) -> np.ndarray:
        log_s0, k_rho, k_ecc = theta
        rho = self.predicted_cpd(theta)
        c = 1.0 + k_ecc * self.ecc
        dfdrho = np.power(rho, -2.0 / 3.0) / 3.0
        return np.column_stack([
            -dfdrho / (k_rho * c),
            -dfdrho * rho / k_rho,
            -dfdrho * rho * self.ecc / c,
        ])


def fit_model(records: Sequence[ThresholdRecord], channel, stimulus_sensitivity: float,
              initial: Optional[ChannelParams] = None,
              max_iterations: int = FIT_MAX_ITERATIONS,
              tolerance: float = FIT_TOLERANCE) -> FitResult:
    """
    Least-squares fit of (log_s0, k_rho, k_ecc) to threshold records

    Damped Gauss-Newton (Levenberg-Marquardt) with an analytic Jacobian,
    started from `initial` (the shipped reference parameters by default).
    log_s0 is only estimated when the records carry at least two distinct
    stimulus sensitivities; otherwise it stays at its initial value.

    Raises:
        UnidentifiableParametersError: fewer than 2 eccentricities or rank-deficient Jacobian
        ConvergenceError: no convergence within `max_iterations`
    """
    channel = ColorChannel.parse(channel)
    active = [r for r in records if not r.excluded and r.channel == channel]
    if len({r.eccentricity for r in active}) < 2:
        raise UnidentifiableParametersError(
            f"Records for {channel.value} span fewer than 2 eccentricities; k_ecc is unconstrained"
        )
    if initial is None:
        from configs.data_config import load_reference_model
        initial = load_reference_model()[channel]

    problem = _ModelResiduals(active, stimulus_sensitivity)
    sensitivities = {round(float(v), 12) for v in problem.log_s}
    free = np.array([len(sensitivities) >= 2, True, True])
    fixed = {name: not flag for name, flag in zip(PARAM_NAMES, free)}
    if not free[0]:
        logger.debug("Single stimulus sensitivity: holding log_s0 at its initial value")

    theta = np.array([initial.log_s0, initial.k_rho, initial.k_ecc], dtype=float)
    if not problem.valid(theta):
        raise DomainError("Initial parameters predict non-positive thresholds for these records")

    jac = problem.jacobian(theta)[:, free]
    if np.linalg.matrix_rank(jac) < int(free.sum()):
        raise UnidentifiableParametersError(
            f"Jacobian has rank {np.linalg.matrix_rank(jac)} < {int(free.sum())} free parameters"
        )

    r = problem.residuals(theta)
    cost = float(r @ r)
    trace = [cost]
    damping = 1e-3
    converged = False
    iterations = 0

    while iterations < max_iterations:
        iterations += 1
        jac = problem.jacobian(theta)[:, free]
        jtj = jac.T @ jac
        grad = jac.T @ r
        if cost == 0.0 or np.max(np.abs(grad)) < 1e-15:
            converged = True
            break

        accepted = False
        while damping < 1e10:
            step = np.linalg.solve(jtj + damping * np.diag(np.diag(jtj)), -grad)
            candidate = theta.copy()
            candidate[free] += step
            if problem.valid(candidate):
                r_new = problem.residuals(candidate)
                cost_new = float(r_new @ r_new)
                if cost_new <= cost:
                    accepted = True
                    break
            damping *= 10.0

        if not accepted:
            # No downhill step at any damping. After accepted steps this is a
            # minimum within numerical precision; on the first step it is a failure.
            converged = len(trace) > 1
            if not converged:
                logger.warning(f"No downhill step from the initial parameters for {channel.value}")
            break

        improvement = cost - cost_new
        small_step = np.linalg.norm(step) <= tolerance * (np.linalg.norm(theta[free]) + tolerance)
        theta, r, cost = candidate, r_new, cost_new
        trace.append(cost)
        damping = max(damping / 10.0, 1e-12)
        if small_step or improvement <= tolerance * max(cost, 1e-300) or cost < 1e-28:
            converged = True
            break

    params = ChannelParams(float(theta[0]), float(theta[1]), float(theta[2]),
                           stimulus_sensitivity, initial.cone_contrast)
    if not converged:
        raise ConvergenceError(
            f"Model fit for {channel.value} did not converge ({iterations} of {max_iterations} iterations)",
            best_so_far=params, trace=trace,
        )

    standard_errors = _standard_errors(problem.jacobian(theta), free, r)
    params = ChannelParams(params.log_s0, params.k_rho, params.k_ecc, stimulus_sensitivity,
                           initial.cone_contrast, standard_errors)
    logger.info(
        f"Fitted {channel.value}: log_s0={theta[0]:.4f} k_rho={theta[1]:.5f} "
        f"k_ecc={theta[2]:.4f} (SS={cost:.3g}, {iterations} iterations)"
    )
    return FitResult(channel, params, standard_errors, r, True, iterations, fixed, trace)


def _standard_errors(jacobian, free, residuals) -> Dict[str, float]:
    """Asymptotic standard errors sqrt(diag(s^2 (J^T J)^-1)); fixed parameters get 0"""
    n, p = residuals.size, int(free.sum())
    errors = {name: 0.0 for name in PARAM_NAMES}
    if n <= p:
        logger.warning(f"{n} records for {p} free parameters; standard errors are undefined")
        for name, flag in zip(PARAM_NAMES, free):
            if flag:
                errors[name] = math.nan
        return errors

    j = jacobian[:, free]
    s2 = float(residuals @ residuals) / (n - p)
    covariance = s2 * np.linalg.pinv(j.T @ j)
    for name, value in zip([n_ for n_, flag in zip(PARAM_NAMES, free) if flag], np.diag(covariance)):
        errors[name] = float(math.sqrt(max(value, 0.0)))
    return errors


def refit_model(model: ModelParamSet, results: Sequence[FitResult],
                provenance: str = "fit") -> ModelParamSet:
    """Replace the fitted channels of `model` by the fit results"""
    for result in results:
        model = model.with_channel(result.channel, result.params, provenance)
    return model


# ============================================================================
# CSV INGEST
# ============================================================================

THRESHOLD_COLUMNS = ("observer_id", "channel", "eccentricity_deg", "value")


def read_records(path):
    """
    Load threshold or trial records from CSV

    Columns: observer_id, channel, eccentricity_deg, value and optionally
    `correct` (trial data) or `stimulus_sensitivity`. Trial data are
    returned as TrialRecords, otherwise ThresholdRecords.
    """
    frame = pd.read_csv(path)
    missing = [c for c in THRESHOLD_COLUMNS if c not in frame.columns]
    if missing:
        raise DomainError(f"{path}: missing columns {missing}")

    if "correct" in frame.columns:
        records = [
            TrialRecord(float(row.value), _parse_bool(row.correct), ColorChannel.parse(row.channel),
                        float(row.eccentricity_deg), str(row.observer_id))
            for row in frame.itertuples(index=False)
        ]
    else:
        has_s = "stimulus_sensitivity" in frame.columns
        records = [
            ThresholdRecord(str(row.observer_id), ColorChannel.parse(row.channel),
                            float(row.eccentricity_deg), float(row.value),
                            stimulus_sensitivity=(float(row.stimulus_sensitivity)
                                                  if has_s and pd.notna(row.stimulus_sensitivity) else None))
            for row in frame.itertuples(index=False)
        ]
    logger.info(f"Read {len(records)} records from {path}")
    return records


def _parse_bool(value) -> bool:
    if isinstance(value, str):
        key = value.strip().lower()
        if key in ("1", "true", "yes", "y", "correct"):
            return True
        if key in ("0", "false", "no", "n", "incorrect"):
            return False
        raise DomainError(f"Cannot interpret '{value}' as a response")
    return bool(int(value))
