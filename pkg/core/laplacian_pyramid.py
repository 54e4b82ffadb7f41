"""
Laplacian Pyramid - Burt-Adelson decomposition with the 5-tap binomial kernel

Arrays may carry leading plane axes; filtering acts on the last two axes.
"""
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.ndimage import convolve1d

from configs.settings import PPD_PER_CPD
from core.exceptions import PyramidSizeError
from utils.logger import setup_logger

logger = setup_logger(__name__)

KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
BAND_FREQUENCY_MODES = ("peak", "nyquist")

# Band k responds most strongly near this fraction of its level's Nyquist frequency
BAND_PEAK_FRACTION = 0.4


def _blur(img: np.ndarray, kernel: np.ndarray = KERNEL) -> np.ndarray:
    # "reflect" repeats the edge sample (symmetric half-sample extension)
    out = convolve1d(img, kernel, axis=-2, mode="reflect")
    return convolve1d(out, kernel, axis=-1, mode="reflect")


def reduce(img: np.ndarray) -> np.ndarray:
    """Blur and drop every other row and column; sizes halve rounding up"""
    return _blur(img)[..., ::2, ::2]


def expand(img: np.ndarray, shape) -> np.ndarray:
    """
    Zero-stuff to `shape` (last two axes) and interpolate with twice the kernel

    Output is divided by the interpolated sample mask, which is exactly 1 away
    from the borders and keeps constants constant up to the edges.
    """
    up = np.zeros(img.shape[:-2] + tuple(shape[-2:]), dtype=np.float64)
    up[..., ::2, ::2] = img
    mask = np.zeros(tuple(shape[-2:]), dtype=np.float64)
    mask[::2, ::2] = 1.0
    return _blur(up, 2.0 * KERNEL) / _blur(mask, 2.0 * KERNEL)


def max_levels(shape) -> int:
    return int(math.floor(math.log2(min(shape[-2:]))))


@dataclass(frozen=True, eq=False)
class ImagePyramid:
    """
    Laplacian bands (finest first), residual low-pass and the Gaussian levels

    `luminance` optionally holds Gaussian levels of the absolute luminance
    used to normalise band coefficients into contrast.
    """
    bands: List[np.ndarray]
    residual: np.ndarray
    gaussian: List[np.ndarray]
    image_ppd: Optional[float] = None
    band_frequency: str = "peak"
    luminance: Optional[List[np.ndarray]] = field(default=None)

    @property
    def levels(self) -> int:
        return len(self.bands)

    @property
    def band_frequencies(self) -> List[float]:
        """Nominal frequency (cpd) of each band"""
        if self.image_ppd is None:
            raise PyramidSizeError("Pyramid was built without image_ppd; band frequencies are unknown")
        freqs = []
        for k in range(self.levels):
            nyquist = self.image_ppd / PPD_PER_CPD / 2 ** k
            freqs.append(BAND_PEAK_FRACTION * nyquist if self.band_frequency == "peak" else nyquist)
        return freqs

    def with_luminance(self, luminance: np.ndarray) -> "ImagePyramid":
        levels = [np.asarray(luminance, dtype=np.float64)]
        for _ in range(self.levels):
            levels.append(reduce(levels[-1]))
        return replace(self, luminance=levels)

    def lowpass_luminance(self, k: int) -> np.ndarray:
        """Local mean luminance at the resolution of band k"""
        if self.luminance is None:
            raise PyramidSizeError("Pyramid carries no luminance levels")
        return expand(self.luminance[k + 1], self.bands[k].shape)

    def with_bands(self, bands: List[np.ndarray]) -> "ImagePyramid":
        return replace(self, bands=list(bands))


def build_pyramid(plane: np.ndarray, levels: int, image_ppd: Optional[float] = None,
                  band_frequency: str = "peak") -> ImagePyramid:
    """
    Laplacian stack of `plane` with `levels` bands plus the residual

    Args:
        plane: (H, W) or (P, H, W) float array
        levels: number of band-pass levels
        image_ppd: ppd of the finest level, for band frequencies
        band_frequency: "peak" or "nyquist"

    Raises:
        PyramidSizeError: image smaller than the kernel or too many levels
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim < 2:
        raise PyramidSizeError(f"Expected a 2-D plane, got shape {plane.shape}")
    if min(plane.shape[-2:]) < KERNEL.size:
        raise PyramidSizeError(f"Image {plane.shape[-2:]} is smaller than the {KERNEL.size}-tap kernel")
    if not 1 <= levels <= max_levels(plane.shape):
        raise PyramidSizeError(
            f"levels must lie in [1, {max_levels(plane.shape)}] for an image of {plane.shape[-2:]}, got {levels}"
        )
    if band_frequency not in BAND_FREQUENCY_MODES:
        raise PyramidSizeError(f"Unknown band frequency mode '{band_frequency}'")

    gaussian = [plane]
    for _ in range(levels):
        gaussian.append(reduce(gaussian[-1]))

    bands = [gaussian[k] - expand(gaussian[k + 1], gaussian[k].shape) for k in range(levels)]
    logger.debug(f"Built {levels}-level pyramid for {plane.shape}")
    return ImagePyramid(bands, gaussian[-1], gaussian, image_ppd, band_frequency)


def collapse(pyr: ImagePyramid) -> np.ndarray:
    """Inverse of build_pyramid: add the bands back from coarsest to finest"""
    img = pyr.residual
    for band in reversed(pyr.bands):
        img = band + expand(img, band.shape)
    return img
