"""
Color Space - encoded RGB to DKL opponent planes and back

    encoded sRGB -> linear RGB -> XYZ -> LMS -> DKL (relative to an adaptation point)

DKL axes, for cone differences from the adaptation point (L_a, M_a, S_a):

    achromatic     dL + dM
    red-green      dL - (L_a / M_a) dM
    yellow-violet  dS - (S_a / (L_a + M_a)) (dL + dM)

so any colour with the chromaticity of the adaptation point has zero
chromatic components. The RGB -> XYZ -> LMS matrices come from the
`color_pipeline` section of configs/config.yaml.
"""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from configs.app_config import load_config
from core.csf_model import ColorChannel, ModelParamSet
from core.exceptions import ColorSpaceError
from utils.logger import setup_logger

logger = setup_logger(__name__)

CODE_MAX = {np.dtype(np.uint8): 255.0, np.dtype(np.uint16): 65535.0}


# ============================================================================
# TRANSFER FUNCTION
# ============================================================================

def decode_srgb(encoded: np.ndarray) -> np.ndarray:
    """8/16-bit sRGB code values (or floats in [0, 1]) to linear light in [0, 1]"""
    encoded = np.asarray(encoded)
    if encoded.dtype in CODE_MAX:
        v = encoded.astype(np.float64) / CODE_MAX[encoded.dtype]
    elif np.issubdtype(encoded.dtype, np.floating):
        v = encoded.astype(np.float64)
    else:
        raise ColorSpaceError(f"Unsupported image dtype {encoded.dtype}; expected 8- or 16-bit")
    return np.where(v <= 0.04045, v / 12.92, np.power((np.maximum(v, 0.0) + 0.055) / 1.055, 2.4))


def encode_srgb(linear: np.ndarray, dtype=np.uint8) -> np.ndarray:
    """Linear light to sRGB code values; input is clipped to [0, 1]"""
    dtype = np.dtype(dtype)
    if dtype not in CODE_MAX:
        raise ColorSpaceError(f"Unsupported output dtype {dtype}; expected uint8 or uint16")
    v = np.clip(linear, 0.0, 1.0)
    v = np.where(v <= 0.0031308, v * 12.92, 1.055 * np.power(v, 1.0 / 2.4) - 0.055)
    return np.round(v * CODE_MAX[dtype]).astype(dtype)


# ============================================================================
# MATRIX CHAIN
# ============================================================================

class ColorPipeline:
    """Linear RGB <-> LMS through the configured XYZ matrices"""

    def __init__(self, rgb_to_xyz: Sequence, xyz_to_lms: Sequence):
        self.rgb_to_xyz = np.asarray(rgb_to_xyz, dtype=float)
        self.xyz_to_lms = np.asarray(xyz_to_lms, dtype=float)
        if self.rgb_to_xyz.shape != (3, 3) or self.xyz_to_lms.shape != (3, 3):
            raise ColorSpaceError("Colour pipeline matrices must be 3x3")
        self.rgb_to_lms = self.xyz_to_lms @ self.rgb_to_xyz
        self.lms_to_rgb = np.linalg.inv(self.rgb_to_lms)

    @classmethod
    def from_config(cls, config: Optional[dict] = None) -> "ColorPipeline":
        section = (config or load_config())["color_pipeline"]
        transfer = section.get("transfer_function", "srgb")
        if transfer != "srgb":
            raise ColorSpaceError(f"Unsupported transfer function '{transfer}'; only srgb is implemented")
        return cls(section["rgb_to_xyz"], section["xyz_to_lms"])

    def linear_rgb_to_lms(self, rgb: np.ndarray) -> np.ndarray:
        return np.asarray(rgb, dtype=float) @ self.rgb_to_lms.T

    def lms_to_linear_rgb(self, lms: np.ndarray) -> np.ndarray:
        return np.asarray(lms, dtype=float) @ self.lms_to_rgb.T

    def xyY_to_lms(self, x: float, y: float, luminance: float) -> np.ndarray:
        """Cone excitations of a colour given by its CIE 1931 chromaticity and luminance"""
        if y <= 0:
            raise ColorSpaceError(f"Chromaticity y must be positive, got {y}")
        xyz = np.array([x * luminance / y, luminance, (1.0 - x - y) * luminance / y])
        return self.xyz_to_lms @ xyz


def dkl_matrix(adaptation_lms: np.ndarray) -> np.ndarray:
    """LMS differences -> DKL for one adaptation point"""
    l_a, m_a, s_a = (float(v) for v in adaptation_lms)
    if not (m_a > 0 and l_a + m_a > 0):
        raise ColorSpaceError(f"Adaptation point {tuple(adaptation_lms)} has no positive L+M and M")
    rg = l_a / m_a
    yv = s_a / (l_a + m_a)
    return np.array([
        [1.0, 1.0, 0.0],
        [1.0, -rg, 0.0],
        [-yv, -yv, 1.0],
    ])


def lms_to_dkl(lms: np.ndarray, adaptation_lms: np.ndarray) -> np.ndarray:
    """Opponent coordinates of `lms` (..., 3) relative to the adaptation point"""
    adaptation_lms = np.asarray(adaptation_lms, dtype=float)
    return (np.asarray(lms, dtype=float) - adaptation_lms) @ dkl_matrix(adaptation_lms).T


@dataclass(frozen=True, eq=False)
class DklImage:
    """
    Three opponent planes, shape (3, H, W), in ColorChannel order

    Values are differences from `adaptation_lms`; the achromatic plane is in
    the same units as the adaptation luminance (L+M).
    """
    planes: np.ndarray
    adaptation_lms: np.ndarray
    source_dtype: np.dtype = np.dtype(np.uint8)

    def plane(self, channel) -> np.ndarray:
        return self.planes[list(ColorChannel).index(ColorChannel.parse(channel))]

    @property
    def achromatic(self) -> np.ndarray:
        return self.planes[0]

    @property
    def red_green(self) -> np.ndarray:
        return self.planes[1]

    @property
    def yellow_violet(self) -> np.ndarray:
        return self.planes[2]

    @property
    def adaptation_luminance(self) -> float:
        return float(self.adaptation_lms[0] + self.adaptation_lms[1])

    @property
    def luminance(self) -> np.ndarray:
        """Absolute L+M per pixel"""
        return self.achromatic + self.adaptation_luminance


def srgb_to_dkl(img: np.ndarray, adaptation: Optional[Sequence[float]] = None,
                pipeline: Optional[ColorPipeline] = None) -> DklImage:
    """
    Encoded RGB image (H, W, 3) to DKL planes

    Args:
        img: 8- or 16-bit encoded image (floats in [0, 1] are taken as code values)
        adaptation: linear RGB adaptation point; None uses the image mean
        pipeline: matrix chain (configured default when omitted)

    Raises:
        ColorSpaceError: wrong shape or dtype, or zero-luminance adaptation point
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ColorSpaceError(f"Expected an (H, W, 3) image, got shape {img.shape}")
    pipeline = pipeline or ColorPipeline.from_config()

    lms = pipeline.linear_rgb_to_lms(decode_srgb(img))
    if adaptation is None:
        adaptation_lms = lms.reshape(-1, 3).mean(axis=0)
    else:
        adaptation_lms = pipeline.linear_rgb_to_lms(np.asarray(adaptation, dtype=float))

    if not adaptation_lms[0] + adaptation_lms[1] > 0:
        raise ColorSpaceError("Adaptation point has zero luminance")

    planes = np.moveaxis(lms_to_dkl(lms, adaptation_lms), -1, 0)
    dtype = img.dtype if img.dtype in CODE_MAX else np.dtype(np.uint8)
    return DklImage(np.ascontiguousarray(planes), adaptation_lms, dtype)


def dkl_to_linear_rgb(planes: np.ndarray, adaptation_lms: np.ndarray,
                      pipeline: Optional[ColorPipeline] = None) -> np.ndarray:
    """DKL planes (3, H, W) back to linear RGB (H, W, 3); no clipping"""
    pipeline = pipeline or ColorPipeline.from_config()
    adaptation_lms = np.asarray(adaptation_lms, dtype=float)
    to_lms = np.linalg.inv(dkl_matrix(adaptation_lms))
    lms = np.moveaxis(planes, 0, -1) @ to_lms.T + adaptation_lms
    return pipeline.lms_to_linear_rgb(lms)


# ============================================================================
# CONTRAST CALIBRATION
# ============================================================================

def pair_contrast(first_lms: np.ndarray, second_lms: np.ndarray, channel) -> float:
    """Half the plane difference of a stimulus pair over its mean luminance"""
    index = list(ColorChannel).index(ColorChannel.parse(channel))
    mean = 0.5 * (first_lms + second_lms)
    delta = lms_to_dkl(first_lms, mean)[index] - lms_to_dkl(second_lms, mean)[index]
    return 0.5 * abs(float(delta)) / float(mean[0] + mean[1])


def calibration_gains(model: ModelParamSet,
                      pipeline: Optional[ColorPipeline] = None) -> Dict[ColorChannel, float]:
    """
    Per-channel factors that turn plane contrast into cone contrast

    Each channel's stimulus pair must measure the cone contrast listed for
    that channel. Channels without a pair or listed contrast get 1.0.
    """
    pipeline = pipeline or ColorPipeline.from_config()
    gains = {}
    for channel in ColorChannel:
        pair = model.stimulus_colours.get(channel)
        target = model[channel].cone_contrast
        if not pair or len(pair) != 2 or target is None:
            gains[channel] = 1.0
            continue
        lms = [pipeline.xyY_to_lms(c["x"], c["y"], c["luminance"]) for c in pair]
        measured = pair_contrast(lms[0], lms[1], channel)
        if measured <= 0:
            raise ColorSpaceError(f"Stimulus pair for {channel.value} has no {channel.value} contrast")
        gains[channel] = float(target) / measured
        logger.debug(f"{channel.value} contrast gain {gains[channel]:.4f}")
    return gains
