import math

import numpy as np
import pytest

from core.csf_model import (
    ChannelParams, ColorChannel, ModelParamSet, resolution_ratio, sensitivity,
    threshold_resolution, threshold_resolution_at_contrast,
)
from core.exceptions import DomainError, UnboundedThresholdError


@pytest.mark.parametrize("channel,expected", [
    (ColorChannel.ACHROMATIC, 95.47),
    (ColorChannel.RED_GREEN, 87.33),
    (ColorChannel.YELLOW_VIOLET, 53.24),
])
def test_foveal_thresholds(model, channel, expected):
    assert threshold_resolution(model[channel], 0.0) == pytest.approx(expected, abs=0.05)


def test_achromatic_threshold_at_20_degrees(model):
    assert threshold_resolution(model["achromatic"], 20.0) == pytest.approx(22.72, abs=0.05)


def test_achromatic_full_contrast_limit(model):
    assert threshold_resolution_at_contrast(model["achromatic"], 0.0, 1.0) == pytest.approx(97.18, abs=0.05)


@pytest.mark.parametrize("channel", list(ColorChannel))
def test_eccentricity_ratio_is_linear_in_k_ecc(model, channel):
    p = model[channel]
    ratio = threshold_resolution(p, 0.0) / threshold_resolution(p, 10.0)
    assert ratio == pytest.approx(1.0 + 10.0 * p.k_ecc, rel=1e-12)


@pytest.mark.parametrize("channel", list(ColorChannel))
def test_threshold_decreases_with_eccentricity(model, channel):
    values = [threshold_resolution(model[channel], e) for e in np.linspace(0, 40, 41)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_sensitivity_at_threshold_equals_stimulus(model):
    for channel in ColorChannel:
        p = model[channel]
        for e in (0.0, 5.0, 17.5):
            rho = threshold_resolution(p, e) / 2.0
            assert 10.0 ** sensitivity(p, e, rho) == pytest.approx(p.stimulus_sensitivity, rel=1e-9)


def test_sensitivity_broadcasts(model):
    out = sensitivity(model["rg"], np.array([[0.0], [10.0]]), np.array([1.0, 2.0, 3.0]))
    assert out.shape == (2, 3)
    assert sensitivity(model["rg"], 0.0, 0.0) == pytest.approx(2.179)


def test_colour_thresholds_fall_faster_than_achromatic(model):
    assert resolution_ratio(model, "rg", 10.0) == pytest.approx(2.33, abs=0.02)
    assert resolution_ratio(model, "rg", 10.0) > resolution_ratio(model, "rg", 0.0)
    assert resolution_ratio(model, "achromatic", 7.0) == pytest.approx(1.0)


def test_negative_inputs_rejected(model):
    with pytest.raises(DomainError):
        sensitivity(model["ach"], -1.0, 2.0)
    with pytest.raises(DomainError):
        sensitivity(model["ach"], 1.0, -2.0)
    with pytest.raises(DomainError):
        threshold_resolution_at_contrast(model["ach"], 0.0, 0.0)
    with pytest.raises(DomainError):
        threshold_resolution_at_contrast(model["ach"], 0.0, 1.5)


def test_stimulus_above_baseline_is_unbounded():
    p = ChannelParams(log_s0=1.0, k_rho=-0.05, k_ecc=0.1, stimulus_sensitivity=20.0)
    with pytest.raises(UnboundedThresholdError):
        threshold_resolution(p, 0.0)


@pytest.mark.parametrize("kwargs", [
    dict(log_s0=2.0, k_rho=0.01, k_ecc=0.1, stimulus_sensitivity=1.0),
    dict(log_s0=2.0, k_rho=-0.01, k_ecc=0.0, stimulus_sensitivity=1.0),
    dict(log_s0=-1.0, k_rho=-0.01, k_ecc=0.1, stimulus_sensitivity=1.0),
    dict(log_s0=2.0, k_rho=-0.01, k_ecc=0.1, stimulus_sensitivity=0.0),
])
def test_invalid_params_rejected(kwargs):
    with pytest.raises(DomainError):
        ChannelParams(**kwargs)


def test_unknown_channel():
    with pytest.raises(DomainError):
        ColorChannel.parse("blue")


def test_model_save_load(model, tmp_path):
    path = tmp_path / "model.json"
    model.save(path, source="test")
    loaded = ModelParamSet.load(path)
    assert loaded == model
    assert loaded.provenance == model.provenance


def test_missing_channel_rejected(model):
    with pytest.raises(DomainError):
        ModelParamSet({ColorChannel.ACHROMATIC: model["ach"]})


def test_all_pass_has_infinite_limit():
    p = ModelParamSet.all_pass()["achromatic"]
    assert math.isinf(threshold_resolution_at_contrast(p, 10.0, 1.0))


def test_scaled_sensitivity_raises_thresholds(model):
    boosted = model.scaled_sensitivity(0.2)
    for channel in ColorChannel:
        assert threshold_resolution(boosted[channel], 5.0) > threshold_resolution(model[channel], 5.0)
