"""
Foveate - remove image contrast that is invisible at each retinal location

    encoded RGB -> DKL planes -> Laplacian bands -> per-pixel threshold at
    the pixel's eccentricity -> collapse -> RGB (gamut clipped) -> encoded RGB
"""
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from configs.app_config import load_config
from configs.settings import GAMUT_WARNING_FRACTION, MEASURED_ECCENTRICITY_MAX, OUTPUT_SCHEMA_VERSION
from core.color_space import (
    CODE_MAX, ColorPipeline, calibration_gains, dkl_to_linear_rgb, encode_srgb, srgb_to_dkl,
)
from core.csf_model import ColorChannel, ModelParamSet, sensitivity, threshold_resolution_at_contrast
from core.exceptions import DomainError
from core.file_manager import FileManager
from core.laplacian_pyramid import ImagePyramid, build_pyramid, collapse, max_levels
from core.units import DisplayGeometry, center_ppd
from utils.logger import setup_logger

logger = setup_logger(__name__)

GAMUT_TOLERANCE = 1e-6


# ============================================================================
# VIEWING GEOMETRY
# ============================================================================

@dataclass(frozen=True)
class ViewingConfig:
    """
    Image shown 1:1 at the centre of a flat display, eye on the display normal

    Either `display` or `ppd` must be given. With `ppd` alone a square-pixel
    display at 1 m reaching that ppd at its centre is assumed.
    """
    image_shape: Tuple[int, int]
    gaze_px: Tuple[float, float]
    display: Optional[DisplayGeometry] = None
    ppd: Optional[float] = None

    def __post_init__(self):
        h, w = int(self.image_shape[0]), int(self.image_shape[1])
        object.__setattr__(self, "image_shape", (h, w))
        x, y = float(self.gaze_px[0]), float(self.gaze_px[1])
        object.__setattr__(self, "gaze_px", (x, y))
        if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
            raise DomainError(f"Gaze {self.gaze_px} lies outside the {w}x{h} image")
        if self.display is None and self.ppd is None:
            raise DomainError("ViewingConfig needs a display geometry or a ppd value")
        if self.ppd is not None and not self.ppd > 0:
            raise DomainError(f"ppd must be positive, got {self.ppd}")

    @classmethod
    def centred(cls, image_shape, display: Optional[DisplayGeometry] = None,
                ppd: Optional[float] = None) -> "ViewingConfig":
        h, w = image_shape[:2]
        return cls((h, w), ((w - 1) / 2.0, (h - 1) / 2.0), display, ppd)

    @property
    def image_ppd(self) -> float:
        return self.ppd if self.ppd is not None else center_ppd(self.display)

    @property
    def geometry(self) -> Tuple[float, float, float]:
        """(horizontal pitch, vertical pitch, viewing distance) in metres"""
        if self.display is not None:
            d = self.display
            return d.pixel_pitch_m, d.vertical_pixel_pitch_m, d.viewing_distance_m
        pitch = 2.0 * math.tan(math.radians(0.5 / self.ppd))
        return pitch, pitch, 1.0


@dataclass(frozen=True, eq=False)
class EccentricityMap:
    degrees: np.ndarray
    ring_width_deg: Optional[float] = None

    def quantized(self, ring_width_deg: float) -> "EccentricityMap":
        """Every pixel takes the inner edge of its ring"""
        if not ring_width_deg > 0:
            raise DomainError(f"ring width must be positive, got {ring_width_deg}")
        rings = np.floor(self.degrees / ring_width_deg)
        return EccentricityMap(rings * ring_width_deg, ring_width_deg)

    def ring_index(self, ring_width_deg: Optional[float] = None) -> np.ndarray:
        width = ring_width_deg or self.ring_width_deg
        if width is None:
            raise DomainError("No ring width given")
        return np.floor(self.degrees / width + 1e-9).astype(int)

    def at_level(self, k: int) -> np.ndarray:
        step = 2 ** k
        return self.degrees[::step, ::step]


def eccentricity_map(view: ViewingConfig, ring_width_deg: Optional[float] = None) -> EccentricityMap:
    """Angle (deg) between the gaze ray and the ray through each pixel centre"""
    h, w = view.image_shape
    pitch_x, pitch_y, distance = view.geometry

    # Positions on the screen plane, origin at the image (and display) centre
    xs = (np.arange(w) - (w - 1) / 2.0) * pitch_x
    ys = (np.arange(h) - (h - 1) / 2.0) * pitch_y
    px, py = np.meshgrid(xs, ys)
    gx = (view.gaze_px[0] - (w - 1) / 2.0) * pitch_x
    gy = (view.gaze_px[1] - (h - 1) / 2.0) * pitch_y

    # Rays from the eye at (0, 0, -distance)
    ray = np.stack([px, py, np.full_like(px, distance)], axis=-1)
    gaze = np.array([gx, gy, distance])
    cross = np.linalg.norm(np.cross(ray, gaze), axis=-1)
    dot = ray @ gaze
    degrees = np.degrees(np.arctan2(cross, dot))

    ecc = EccentricityMap(degrees)
    if degrees.max() > MEASURED_ECCENTRICITY_MAX:
        logger.warning(
            f"Eccentricity reaches {degrees.max():.1f} deg; the model is extrapolated "
            f"beyond {MEASURED_ECCENTRICITY_MAX:g} deg"
        )
    return ecc.quantized(ring_width_deg) if ring_width_deg else ecc


# ============================================================================
# BAND THRESHOLDING
# ============================================================================

@dataclass(frozen=True, eq=False)
class ThresholdedPyramid:
    pyramid: ImagePyramid
    suppressed: List[np.ndarray]

    def band_fractions(self, channel) -> List[float]:
        index = list(ColorChannel).index(ColorChannel.parse(channel))
        return [float(mask[index].mean()) for mask in self.suppressed]

    def zeroed_fraction(self, channel) -> float:
        index = list(ColorChannel).index(ColorChannel.parse(channel))
        total = sum(mask[index].size for mask in self.suppressed)
        return float(sum(mask[index].sum() for mask in self.suppressed)) / total


def threshold_bands(pyr: ImagePyramid, ecc: EccentricityMap, model: ModelParamSet,
                    gains: Optional[Dict[ColorChannel, float]] = None,
                    luminance_floor: float = 0.0, soft: bool = False) -> ThresholdedPyramid:
    """
    Zero band coefficients whose contrast is below the model threshold

    Contrast is |coefficient| * gain / max(local luminance, floor). A
    coefficient is removed when contrast < 1/S(e, rho_k) or when rho_k lies
    beyond the channel's cutoff at full contrast. In soft mode coefficients
    below threshold are scaled by contrast * S instead of zeroed.

    Args:
        pyr: (3, H, W) pyramid of DKL planes carrying luminance levels
        ecc: eccentricity map at the finest level
        model: per-channel CSF parameters
        gains: plane-contrast to cone-contrast factors
        luminance_floor: lower bound of the local luminance
    """
    if ecc.degrees.shape != pyr.bands[0].shape[-2:]:
        raise DomainError(
            f"Eccentricity map {ecc.degrees.shape} does not match the image {pyr.bands[0].shape[-2:]}"
        )
    gains = gains or {c: 1.0 for c in ColorChannel}
    frequencies = pyr.band_frequencies

    new_bands, suppressed = [], []
    for k, band in enumerate(pyr.bands):
        e_k = ecc.at_level(k)
        local = np.maximum(pyr.lowpass_luminance(k), luminance_floor)
        out = band.copy()
        mask = np.zeros(band.shape, dtype=bool)

        for i, channel in enumerate(ColorChannel):
            params = model[channel]
            contrast = np.abs(band[i]) * gains[channel] / local
            inv_s = np.power(10.0, -np.asarray(sensitivity(params, e_k, frequencies[k])))
            beyond = frequencies[k] > np.asarray(threshold_resolution_at_contrast(params, e_k, 1.0)) / 2.0
            below = (contrast < inv_s) | beyond

            if soft:
                weight = np.where(below, np.clip(contrast / np.maximum(inv_s, 1e-300), 0.0, 1.0), 1.0)
                weight = np.where(beyond, 0.0, weight)
                out[i] = band[i] * weight
            else:
                out[i] = np.where(below, 0.0, band[i])
            mask[i] = below

        new_bands.append(out)
        suppressed.append(mask)
        logger.debug(
            f"Band {k} ({frequencies[k]:.2f} cpd): suppressed "
            + ", ".join(f"{c.value} {mask[i].mean():.1%}" for i, c in enumerate(ColorChannel))
        )

    return ThresholdedPyramid(pyr.with_bands(new_bands), suppressed)


# ============================================================================
# PIPELINE
# ============================================================================

@dataclass(frozen=True)
class FoveationOptions:
    luminance_floor_fraction: float = 0.01
    soft_threshold: bool = False
    band_frequency: str = "peak"
    max_levels: int = 8
    min_residual_px: int = 8
    ring_width_deg: Optional[float] = None

    @classmethod
    def from_config(cls, config: Optional[dict] = None, **overrides) -> "FoveationOptions":
        section = dict((config or load_config()).get("foveation", {}))
        section.update({k: v for k, v in overrides.items() if v is not None})
        known = {k: section[k] for k in cls.__dataclass_fields__ if k in section}
        return cls(**known)

    def levels_for(self, shape) -> int:
        levels = int(math.floor(math.log2(min(shape[-2:]) / self.min_residual_px)))
        return max(1, min(levels, self.max_levels, max_levels(shape)))


@dataclass
class FoveationStats:
    image_ppd: float
    levels: int
    band_frequencies: List[float]
    zeroed_fraction: Dict[str, float]
    band_zeroed_fraction: Dict[str, List[float]]
    out_of_gamut_fraction: float
    contrast_gains: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": OUTPUT_SCHEMA_VERSION,
            "image_ppd": self.image_ppd,
            "levels": self.levels,
            "band_frequencies_cpd": self.band_frequencies,
            "zeroed_fraction": self.zeroed_fraction,
            "band_zeroed_fraction": self.band_zeroed_fraction,
            "out_of_gamut_fraction": self.out_of_gamut_fraction,
            "contrast_gains": self.contrast_gains,
        }


@dataclass(frozen=True, eq=False)
class FoveationResult:
    image: np.ndarray
    stats: FoveationStats
    original: ImagePyramid
    thresholded: ThresholdedPyramid


def foveate_image(img: np.ndarray, view: ViewingConfig, model: ModelParamSet,
                  options: Optional[FoveationOptions] = None,
                  pipeline: Optional[ColorPipeline] = None) -> FoveationResult:
    """
    Filter an encoded RGB image for a viewer fixating `view.gaze_px`

    Args:
        img: (H, W, 3) uint8 or uint16 image
        view: viewing geometry and gaze
        model: CSF parameter set (ModelParamSet.all_pass() leaves the image intact)

    Returns:
        FoveationResult with the re-encoded image (same dtype) and statistics
    """
    options = options or FoveationOptions.from_config()
    pipeline = pipeline or ColorPipeline.from_config()
    if tuple(img.shape[:2]) != tuple(view.image_shape):
        raise DomainError(f"Image {img.shape[:2]} does not match the viewing config {view.image_shape}")

    dkl = srgb_to_dkl(img, pipeline=pipeline)
    levels = options.levels_for(dkl.planes.shape)
    pyr = build_pyramid(dkl.planes, levels, view.image_ppd, options.band_frequency)
    pyr = pyr.with_luminance(dkl.luminance)

    ecc = eccentricity_map(view, options.ring_width_deg)
    gains = calibration_gains(model, pipeline)
    floor = options.luminance_floor_fraction * dkl.adaptation_luminance
    thresholded = threshold_bands(pyr, ecc, model, gains, floor, options.soft_threshold)

    linear = dkl_to_linear_rgb(collapse(thresholded.pyramid), dkl.adaptation_lms, pipeline)
    outside = np.any((linear < -GAMUT_TOLERANCE) | (linear > 1.0 + GAMUT_TOLERANCE), axis=-1)
    gamut_fraction = float(outside.mean())
    if gamut_fraction > GAMUT_WARNING_FRACTION:
        logger.warning(f"{gamut_fraction:.1%} of pixels fall outside the display gamut and were clipped")

    out_dtype = dkl.source_dtype if dkl.source_dtype in CODE_MAX else np.uint8
    encoded = encode_srgb(linear, out_dtype)

    stats = FoveationStats(
        image_ppd=float(view.image_ppd),
        levels=levels,
        band_frequencies=[float(f) for f in pyr.band_frequencies],
        zeroed_fraction={c.value: thresholded.zeroed_fraction(c) for c in ColorChannel},
        band_zeroed_fraction={c.value: thresholded.band_fractions(c) for c in ColorChannel},
        out_of_gamut_fraction=gamut_fraction,
        contrast_gains={c.value: float(g) for c, g in gains.items()},
    )
    logger.info(
        "Foveated image: zeroed "
        + ", ".join(f"{k} {v:.1%}" for k, v in stats.zeroed_fraction.items())
    )
    return FoveationResult(encoded, stats, pyr, thresholded)


def dump_pyramid(result: FoveationResult, directory) -> List[str]:
    """
    Write one PNG per channel and band: coefficients as grey around mid-level,
    removed coefficients in red
    """
    FileManager.make_folder(directory)
    written = []
    for k, (band, mask) in enumerate(zip(result.original.bands, result.thresholded.suppressed)):
        for i, channel in enumerate(ColorChannel):
            coef = band[i]
            peak = float(np.max(np.abs(coef))) or 1.0
            grey = np.clip(0.5 + 0.5 * coef / peak, 0.0, 1.0)
            rgb = np.repeat(np.round(grey * 255.0).astype(np.uint8)[:, :, None], 3, axis=2)
            rgb[mask[i] & (coef != 0)] = (255, 0, 0)
            path = os.path.join(str(directory), f"{channel.value}_band{k}.png")
            FileManager.save_png(rgb, path)
            written.append(path)
    logger.info(f"Wrote {len(written)} band images to {directory}")
    return written
