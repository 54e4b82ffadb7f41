import time

import numpy as np
import pytest

from configs.app_config import get_display_preset
from core.csf_model import ModelParamSet
from core.exceptions import DomainError
from core.file_manager import FileManager
from core.foveate import (
    EccentricityMap, FoveationOptions, ViewingConfig, dump_pyramid, eccentricity_map,
    foveate_image, threshold_bands,
)
from core.color_space import calibration_gains, srgb_to_dkl
from core.laplacian_pyramid import build_pyramid
from core.units import DisplayGeometry
from utils.scene import natural_scene


def code_diff(a, b):
    return np.abs(a.astype(np.int32) - b.astype(np.int32)).max(axis=-1)


# --- geometry ---

def test_eccentricity_small_angle_oracle():
    view = ViewingConfig((1, 1001), (0.0, 0.0), ppd=100.0)
    ecc = eccentricity_map(view)
    assert ecc.degrees[0, 0] == 0.0
    assert ecc.degrees[0, 1000] == pytest.approx(10.0, rel=0.005)


def test_eccentricity_zero_at_gaze_and_symmetric():
    view = ViewingConfig.centred((101, 101), ppd=30.0)
    deg = eccentricity_map(view).degrees
    assert deg[50, 50] == pytest.approx(0.0, abs=1e-12)
    assert deg[50, 0] == pytest.approx(deg[50, 100])
    assert deg[0, 50] == pytest.approx(deg[100, 50])


def test_eccentricity_with_display_geometry():
    display = DisplayGeometry.from_preset(get_display_preset("eizo_cs2740"), 0.6)
    view = ViewingConfig.centred((216, 384), display=display)
    assert view.image_ppd == pytest.approx(display.viewing_distance_m / display.pixel_pitch_m
                                           * np.tan(np.radians(1.0)), rel=0.01)
    assert eccentricity_map(view).degrees.max() > 0


def test_wide_field_warns(caplog):
    eccentricity_map(ViewingConfig.centred((64, 2000), ppd=20.0))
    assert any("extrapolated" in r.getMessage() for r in caplog.records)


def test_ring_quantisation():
    ecc = EccentricityMap(np.array([[0.0, 0.49, 0.5, 1.7]]))
    rings = ecc.quantized(0.5)
    assert rings.degrees.tolist() == [[0.0, 0.0, 0.5, 1.5]]
    assert rings.ring_index().tolist() == [[0, 0, 1, 3]]
    with pytest.raises(DomainError):
        ecc.quantized(0.0)


def test_viewing_config_validation():
    with pytest.raises(DomainError):
        ViewingConfig((10, 10), (12.0, 3.0), ppd=60.0)
    with pytest.raises(DomainError):
        ViewingConfig((10, 10), (5.0, 5.0))
    with pytest.raises(DomainError):
        ViewingConfig((10, 10), (5.0, 5.0), ppd=-1.0)


# --- thresholding ---

def test_colour_channels_lose_more_at_same_eccentricity(model, pipeline, scene):
    dkl = srgb_to_dkl(scene, pipeline=pipeline)
    pyr = build_pyramid(dkl.planes, 4, image_ppd=60.0).with_luminance(dkl.luminance)
    ecc = EccentricityMap(np.full(scene.shape[:2], 10.0))
    result = threshold_bands(pyr, ecc, model, luminance_floor=0.01 * dkl.adaptation_luminance)
    ach = result.zeroed_fraction("achromatic")
    assert result.zeroed_fraction("red_green") > ach
    assert result.zeroed_fraction("yellow_violet") > ach


def test_more_eccentric_removes_more(model, pipeline, scene):
    dkl = srgb_to_dkl(scene, pipeline=pipeline)
    pyr = build_pyramid(dkl.planes, 4, image_ppd=60.0).with_luminance(dkl.luminance)
    near = threshold_bands(pyr, EccentricityMap(np.full(scene.shape[:2], 2.0)), model)
    far = threshold_bands(pyr, EccentricityMap(np.full(scene.shape[:2], 15.0)), model)
    for channel in ("achromatic", "red_green", "yellow_violet"):
        assert far.zeroed_fraction(channel) >= near.zeroed_fraction(channel)


def test_soft_threshold_keeps_more(model, pipeline, scene):
    dkl = srgb_to_dkl(scene, pipeline=pipeline)
    pyr = build_pyramid(dkl.planes, 3, image_ppd=60.0).with_luminance(dkl.luminance)
    ecc = EccentricityMap(np.full(scene.shape[:2], 5.0))
    hard = threshold_bands(pyr, ecc, model)
    soft = threshold_bands(pyr, ecc, model, soft=True)
    hard_energy = sum(float(np.sum(b ** 2)) for b in hard.pyramid.bands)
    soft_energy = sum(float(np.sum(b ** 2)) for b in soft.pyramid.bands)
    assert soft_energy >= hard_energy


def test_mismatched_eccentricity_map(model, pipeline, scene):
    dkl = srgb_to_dkl(scene, pipeline=pipeline)
    pyr = build_pyramid(dkl.planes, 2, image_ppd=60.0).with_luminance(dkl.luminance)
    with pytest.raises(DomainError):
        threshold_bands(pyr, EccentricityMap(np.zeros((10, 10))), model)


# --- full pipeline ---

def test_all_pass_model_is_identity(model, pipeline, scene):
    view = ViewingConfig.centred(scene.shape, ppd=60.0)
    result = foveate_image(scene, view, ModelParamSet.all_pass(model), pipeline=pipeline)
    assert result.image.dtype == np.uint8
    assert code_diff(result.image, scene).max() <= 1
    assert all(v == 0.0 for v in result.stats.zeroed_fraction.values())


def test_sixteen_bit_all_pass_identity(pipeline):
    img = natural_scene(64, 96, dtype=np.uint16)
    view = ViewingConfig.centred(img.shape, ppd=60.0)
    result = foveate_image(img, view, ModelParamSet.all_pass(), pipeline=pipeline)
    assert result.image.dtype == np.uint16
    assert code_diff(result.image, img).max() <= 1


def test_fovea_changes_less_than_periphery(model, pipeline, scene):
    view = ViewingConfig.centred(scene.shape, ppd=20.0)
    result = foveate_image(scene, view, model, pipeline=pipeline)
    diff = code_diff(result.image, scene)
    deg = eccentricity_map(view).degrees
    fovea, periphery = diff[deg < 0.5], diff[deg > 4.0]
    assert fovea.mean() <= 1.5
    assert fovea.max() <= 8
    assert fovea.mean() < periphery.mean()


def test_grey_image_stays_grey(model, pipeline, scene):
    grey = np.repeat(np.round(scene.mean(axis=-1)).astype(np.uint8)[:, :, None], 3, axis=2)
    view = ViewingConfig.centred(grey.shape, ppd=20.0)
    out = foveate_image(grey, view, model, pipeline=pipeline).image.astype(np.int32)
    assert np.abs(out[..., 0] - out[..., 1]).max() <= 1
    assert np.abs(out[..., 2] - out[..., 1]).max() <= 1
    assert code_diff(out, grey).max() > 0


def test_ring_degradation_grows_with_eccentricity(model, pipeline, scene):
    width = 2.0
    view = ViewingConfig.centred(scene.shape, ppd=20.0)
    options = FoveationOptions.from_config(ring_width_deg=width)
    result = foveate_image(scene, view, model, options, pipeline)
    diff = np.abs(result.image.astype(np.int32) - scene.astype(np.int32)).mean(axis=-1)

    ecc = eccentricity_map(view)
    rings = ecc.ring_index(width)
    deg = ecc.degrees
    border = min(deg[0].min(), deg[-1].min(), deg[:, 0].min(), deg[:, -1].min())
    # Rings cut by the image edge are partial
    complete = int(border // width)
    assert complete >= 3

    per_ring = [float(diff[rings == i].mean()) for i in range(complete)]
    assert all(b >= a for a, b in zip(per_ring, per_ring[1:]))


def test_raising_sensitivity_never_removes_more(model, pipeline, scene):
    dkl = srgb_to_dkl(scene, pipeline=pipeline)
    pyr = build_pyramid(dkl.planes, 4, image_ppd=60.0).with_luminance(dkl.luminance)
    ecc = eccentricity_map(ViewingConfig.centred(scene.shape, ppd=60.0))
    gains = calibration_gains(model, pipeline)
    floor = 0.01 * dkl.adaptation_luminance
    base = threshold_bands(pyr, ecc, model, gains, floor)
    for delta in (0.05, 0.3, 1.0):
        raised = threshold_bands(pyr, ecc, model.scaled_sensitivity(delta), gains, floor)
        for before, after in zip(base.suppressed, raised.suppressed):
            assert not np.any(after & ~before)
        assert raised.zeroed_fraction("achromatic") <= base.zeroed_fraction("achromatic")


def test_large_image_within_a_minute(model, pipeline):
    img = natural_scene(1280, 2048)
    view = ViewingConfig.centred(img.shape, ppd=60.0)
    start = time.perf_counter()
    result = foveate_image(img, view, model, pipeline=pipeline)
    assert time.perf_counter() - start < 60.0
    assert result.image.shape == (1280, 2048, 3)


def test_stats_report(model, pipeline, scene):
    view = ViewingConfig.centred(scene.shape, ppd=60.0)
    options = FoveationOptions.from_config(max_levels=4)
    result = foveate_image(scene, view, model, options, pipeline)
    stats = result.stats.to_dict()
    assert stats["levels"] == 4
    assert stats["band_frequencies_cpd"] == pytest.approx([12.0, 6.0, 3.0, 1.5])
    assert set(stats["zeroed_fraction"]) == {"achromatic", "red_green", "yellow_violet"}
    assert 0.0 <= stats["out_of_gamut_fraction"] <= 1.0
    assert stats["contrast_gains"]["achromatic"] == pytest.approx(1.0, abs=0.01)


def test_options_from_config_ignores_none():
    options = FoveationOptions.from_config(soft_threshold=None, ring_width_deg=2.0)
    assert options.soft_threshold is False
    assert options.ring_width_deg == 2.0
    assert options.levels_for((256, 256)) == 5
    assert options.levels_for((12, 12)) == 1


def test_image_must_match_view(model, scene):
    view = ViewingConfig.centred((10, 10), ppd=60.0)
    with pytest.raises(DomainError):
        foveate_image(scene, view, model)


def test_dump_pyramid_writes_band_images(model, pipeline, tmp_path):
    img = natural_scene(64, 64)
    view = ViewingConfig.centred(img.shape, ppd=60.0)
    result = foveate_image(img, view, model, FoveationOptions(max_levels=2), pipeline)
    written = dump_pyramid(result, tmp_path / "bands")
    assert len(written) == 6
    band = FileManager.load_png(tmp_path / "bands" / "red_green_band0.png")
    assert band.shape == (64, 64, 3)


def test_png_round_trip(tmp_path, scene):
    path = tmp_path / "scene.png"
    FileManager.save_png(scene, path)
    assert np.array_equal(FileManager.load_png(path), scene)
    wide = natural_scene(32, 32, dtype=np.uint16)
    FileManager.save_png(wide, tmp_path / "wide.png")
    assert np.array_equal(FileManager.load_png(tmp_path / "wide.png"), wide)
