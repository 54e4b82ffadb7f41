"""
Synthetic test scene with natural-image statistics

Luminance and both chromatic directions carry 1/f noise (random phases,
seeded); a few soft-edged coloured discs add edges. Colours stay well inside
the sRGB gamut.
"""
import numpy as np

from core.color_space import encode_srgb


def _pink_noise(shape, rng, exponent: float = 1.0) -> np.ndarray:
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    radius = np.sqrt(fx ** 2 + fy ** 2)
    radius[0, 0] = 1.0
    spectrum = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / radius ** exponent
    spectrum[0, 0] = 0.0
    field = np.real(np.fft.ifft2(spectrum))
    return field / (np.max(np.abs(field)) or 1.0)


def natural_scene(height: int = 256, width: int = 256, seed: int = 2024,
                  dtype=np.uint8) -> np.ndarray:
    """Deterministic (H, W, 3) encoded RGB image"""
    rng = np.random.default_rng(seed)
    luminance = 0.18 + 0.12 * _pink_noise((height, width), rng)
    red_green = 0.04 * _pink_noise((height, width), rng)
    yellow_violet = 0.05 * _pink_noise((height, width), rng)

    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(6):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        radius = rng.uniform(0.05, 0.15) * min(height, width)
        disc = 1.0 / (1.0 + np.exp((np.hypot(yy - cy, xx - cx) - radius) / 1.5))
        luminance += rng.uniform(-0.06, 0.06) * disc
        red_green += rng.uniform(-0.03, 0.03) * disc
        yellow_violet += rng.uniform(-0.03, 0.03) * disc

    # Opponent offsets to linear RGB (approximate, gamut-safe)
    r = luminance + red_green - 0.5 * yellow_violet
    g = luminance - red_green - 0.5 * yellow_violet
    b = luminance + yellow_violet
    linear = np.clip(np.stack([r, g, b], axis=-1), 0.01, 0.99)
    return encode_srgb(linear, dtype)
