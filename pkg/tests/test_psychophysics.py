import math

import numpy as np
import pytest

from core.exceptions import DomainError, TargetOutOfRangeError
from core.population import f
from core.psychophysics import (
    PlannerConfig, PsychometricFunction, QuestState, majority_probability, plan_movement,
    psychometric_inverse, psychometric_p, quest_next, quest_should_stop, quest_update, run_session,
)
from core.units import center_ppd


# --- psychometric function ---

def test_psychometric_asymptotes():
    pf = PsychometricFunction.from_threshold_ppd(60.0)
    assert psychometric_p(pf, 1e-9) == pytest.approx(0.98, abs=1e-6)
    assert psychometric_p(pf, 1e6) == pytest.approx(0.5, abs=1e-6)


def test_psychometric_value_at_threshold():
    pf = PsychometricFunction.from_threshold_ppd(60.0)
    expected = 0.5 + 0.48 * (1.0 - math.exp(-1.0))
    assert psychometric_p(pf, 30.0) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.8034, abs=1e-4)


def test_psychometric_decreasing():
    pf = PsychometricFunction.from_threshold_ppd(40.0)
    p = psychometric_p(pf, np.linspace(1.0, 60.0, 200))
    assert np.all(np.diff(p) <= 0)


def test_psychometric_translation_invariance():
    pf = PsychometricFunction(3.0)
    shifted = PsychometricFunction(3.25)
    x = np.linspace(1.0, 5.0, 50)
    assert np.array_equal(shifted.at_level(x), pf.at_level(x - 0.25))


def test_psychometric_inverse():
    pf = PsychometricFunction.from_threshold_ppd(55.0)
    for rho in (22.0, 27.5, 33.0, 40.0):
        assert psychometric_inverse(pf, psychometric_p(pf, rho)) == pytest.approx(rho, rel=1e-9)
    with pytest.raises(DomainError):
        psychometric_inverse(pf, 0.99)


def test_psychometric_rejects_bad_parameters():
    with pytest.raises(DomainError):
        PsychometricFunction(3.0, slope_beta=0.0)
    with pytest.raises(DomainError):
        PsychometricFunction(3.0, guess_gamma=0.6, lapse_lambda=0.5)
    with pytest.raises(DomainError):
        psychometric_p(PsychometricFunction(3.0), 0.0)


def test_majority_probability():
    assert majority_probability(0.8) == pytest.approx(0.896)
    assert majority_probability(0.5) == pytest.approx(0.5)
    assert majority_probability(0.8, repeats=1) == 0.8
    with pytest.raises(DomainError):
        majority_probability(0.8, repeats=2)


# --- QUEST ---

def test_fresh_quest_starts_near_prior():
    q = QuestState.create()
    assert q.grid.size == 400
    assert q.grid[0] == pytest.approx(f(0.5))
    assert q.grid[-1] == pytest.approx(f(80.0))
    assert q.posterior.sum() == pytest.approx(1.0, abs=1e-12)
    assert quest_next(q) == pytest.approx(60.0, abs=1.0)


def test_symmetric_posterior_gives_grid_centre():
    q = QuestState.create(prior_sd=1e6)
    centre = 0.5 * (q.grid[0] + q.grid[-1])
    assert q.mean == pytest.approx(centre, rel=1e-9)


def test_correct_response_shifts_posterior_up():
    q = QuestState.create(prior_sd=1e6)
    updated = quest_update(q, 40.0, True)
    assert updated.mean > q.mean
    assert updated.trials == 1
    assert quest_update(q, 40.0, False).mean < q.mean


def test_repeated_level_converges_to_that_level():
    # Four correct in five matches the 80% point, which is the threshold level
    q = QuestState.create()
    for i in range(200):
        q = quest_update(q, 50.0, i % 5 != 4)
    assert abs(q.mean - f(25.0)) < 0.05
    assert quest_next(q) == pytest.approx(50.0, rel=0.05)


def test_posterior_stays_normalised():
    rng = np.random.default_rng(4)
    q = QuestState.create()
    for _ in range(10_000):
        q = quest_update(q, float(rng.uniform(2.0, 150.0)), bool(rng.random() < 0.7))
    assert q.posterior.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(q.posterior >= 0)


def test_out_of_grid_stimulus_is_clamped(caplog):
    q = quest_update(QuestState.create(), 500.0, False)
    assert q.trials == 1
    assert any("clamping" in r.getMessage() for r in caplog.records)


@pytest.mark.parametrize("trials,sd,stop", [(50, 0.2, True), (30, 0.05, True), (29, 0.01, False), (35, 0.1, False)])
def test_stopping_rule(trials, sd, stop):
    grid = np.linspace(-1.0, 1.0, 2001)
    log_post = -0.5 * (grid / sd) ** 2
    q = QuestState(grid=grid, log_posterior=log_post, trials=trials)
    assert q.sd == pytest.approx(sd, rel=0.01)
    assert quest_should_stop(q) is stop


def test_quest_tracks_simulated_observer():
    rng = np.random.default_rng(9)
    pf = PsychometricFunction.from_threshold_ppd(60.0)
    q = QuestState.create(repeats=1)
    for _ in range(300):
        stimulus = quest_next(q)
        q = quest_update(q, stimulus, bool(rng.random() < psychometric_p(pf, stimulus / 2.0)))
    assert quest_next(q) == pytest.approx(60.0, abs=5.0)


# --- sessions ---

def test_session_is_reproducible():
    pf = PsychometricFunction.from_threshold_ppd(60.0)
    a = run_session(pf, QuestState.create(), seed=123)
    b = run_session(pf, QuestState.create(), seed=123)
    assert a.threshold_ppd == b.threshold_ppd
    assert [t.correct for t in a.trials] == [t.correct for t in b.trials]
    assert len(a.trials) == 3 * a.updates


def test_session_accuracy_over_many_seeds():
    pf = PsychometricFunction.from_threshold_ppd(60.0)
    seeds = np.random.SeedSequence(2024).spawn(1000)
    results = [run_session(pf, QuestState.create(), seed=np.random.default_rng(s)) for s in seeds]
    estimates = np.array([r.threshold_ppd for r in results])
    lengths = np.array([r.updates for r in results])

    assert np.median(estimates) == pytest.approx(60.0, rel=0.03)
    assert abs(estimates.mean() - 60.0) < 0.02 * 60.0
    assert lengths.min() >= 30 and lengths.max() <= 50
    assert np.mean(np.abs(estimates / 60.0 - 1.0) <= 0.10) >= 0.90


@pytest.mark.parametrize("truth", [20.0, 100.0])
def test_session_bias_across_range(truth):
    pf = PsychometricFunction.from_threshold_ppd(truth)
    seeds = np.random.SeedSequence(int(truth)).spawn(300)
    estimates = [run_session(pf, QuestState.create(), seed=np.random.default_rng(s)).threshold_ppd
                 for s in seeds]
    assert abs(np.mean(estimates) / truth - 1.0) < 0.03


def test_step_observer_is_found_within_grid_steps():
    config = QuestState.create(slope_beta=1000.0, lapse_lambda=0.0, stop_sd=0.0, max_trials=200)
    observer = PsychometricFunction.from_threshold_ppd(45.0, slope_beta=1000.0, lapse_lambda=0.0)
    result = run_session(observer, config, seed=5)
    assert abs(f(result.threshold_ppd / 2.0) - f(22.5)) <= 2 * config.grid_step


# --- planner ---

def test_planner_picks_least_movement(eizo):
    plan = plan_movement(PlannerConfig(eizo, 1.40), 50.0)
    assert plan.factor == 3
    assert plan.movement_m == pytest.approx(-0.062, abs=0.01)
    assert plan.options[2].direction == "toward observer"
    assert center_ppd(eizo.at_distance(plan.distance_m)) / plan.factor == pytest.approx(50.0, rel=1e-6)
    assert 1.1 <= plan.distance_m <= 2.7


def test_planner_reports_infeasible_factor_two(eizo):
    plan = plan_movement(PlannerConfig(eizo, 1.40), 50.0)
    two = plan.option(2)
    assert two.distance_m == pytest.approx(0.89, abs=0.01)
    assert two.movement_m == pytest.approx(-0.51, abs=0.01)
    assert not two.feasible


def test_planner_no_movement_when_already_there(eizo):
    target = center_ppd(eizo.at_distance(1.5))
    plan = plan_movement(PlannerConfig(eizo, 1.5), target)
    assert plan.factor == 1
    assert plan.movement_m == pytest.approx(0.0, abs=1e-9)


def test_planner_out_of_range(eizo):
    with pytest.raises(TargetOutOfRangeError) as info:
        plan_movement(PlannerConfig(eizo, 1.40), 500.0)
    assert set(info.value.required_distances) == {1, 2, 3, 4}


def test_planner_config_validation(eizo):
    with pytest.raises(DomainError):
        PlannerConfig(eizo, 1.4, rail_min_m=3.0, rail_max_m=2.0)
    with pytest.raises(DomainError):
        PlannerConfig(eizo, 1.4, allowed_factors=(0, 2))
