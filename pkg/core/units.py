"""
Units - conversions between acuity representations and display geometry

Angles cross the API in visual degrees; trigonometry is done in radians.
"""
import math
from dataclasses import dataclass
from enum import Enum

from core.exceptions import DomainError
from utils.logger import setup_logger

logger = setup_logger(__name__)

ARCMIN_PER_DEGREE = 60.0
METERS_PER_INCH = 0.0254
ASPECT_TOLERANCE = 0.02


class AcuityKind(str, Enum):
    SNELLEN = "snellen"
    LOGMAR = "logmar"
    PPD = "ppd"


@dataclass(frozen=True)
class Angle:
    """An angle in visual degrees"""
    degrees: float

    def __post_init__(self):
        if not math.isfinite(self.degrees):
            raise DomainError(f"Angle must be finite, got {self.degrees}")

    @classmethod
    def from_radians(cls, radians: float) -> "Angle":
        return cls(math.degrees(radians))

    @property
    def radians(self) -> float:
        return math.radians(self.degrees)


@dataclass(frozen=True)
class AcuityValue:
    """A visual acuity expressed as a Snellen ratio, a logMAR value or ppd"""
    kind: AcuityKind
    value: float

    def __post_init__(self):
        object.__setattr__(self, "kind", AcuityKind(self.kind))
        if not math.isfinite(self.value):
            raise DomainError(f"{self.kind.value} value must be finite, got {self.value}")
        if self.kind in (AcuityKind.SNELLEN, AcuityKind.PPD) and self.value <= 0:
            raise DomainError(f"{self.kind.value} value must be positive, got {self.value}")

    def convert(self, kind) -> "AcuityValue":
        """Return the same acuity expressed in another representation"""
        kind = AcuityKind(kind)
        if kind == self.kind:
            return self

        snellen = {
            AcuityKind.SNELLEN: lambda v: v,
            AcuityKind.LOGMAR: logmar_to_snellen,
            AcuityKind.PPD: ppd_to_snellen,
        }[self.kind](self.value)

        value = {
            AcuityKind.SNELLEN: lambda s: s,
            AcuityKind.LOGMAR: snellen_to_logmar,
            AcuityKind.PPD: snellen_to_ppd,
        }[kind](snellen)
        return AcuityValue(kind, value)


@dataclass(frozen=True)
class DisplayGeometry:
    """Physical display and viewer configuration"""
    width_m: float
    height_m: float
    h_pixels: int
    v_pixels: int
    viewing_distance_m: float

    def __post_init__(self):
        for name in ("width_m", "height_m", "h_pixels", "v_pixels", "viewing_distance_m"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"DisplayGeometry.{name} must be positive and finite, got {value}")

        physical = self.width_m / self.height_m
        digital = self.h_pixels / self.v_pixels
        if abs(physical / digital - 1.0) > ASPECT_TOLERANCE:
            logger.warning(
                f"Display aspect ratio {physical:.4f} differs from pixel aspect "
                f"{digital:.4f} by more than {ASPECT_TOLERANCE:.0%} (non-square pixels?)"
            )

    @property
    def pixel_pitch_m(self) -> float:
        return self.width_m / self.h_pixels

    @property
    def vertical_pixel_pitch_m(self) -> float:
        return self.height_m / self.v_pixels

    def at_distance(self, viewing_distance_m: float) -> "DisplayGeometry":
        return DisplayGeometry(self.width_m, self.height_m, self.h_pixels,
                               self.v_pixels, viewing_distance_m)

    @classmethod
    def from_preset(cls, preset: dict, viewing_distance_m: float) -> "DisplayGeometry":
        return cls(
            width_m=float(preset["width_m"]),
            height_m=float(preset["height_m"]),
            h_pixels=int(preset["h_pixels"]),
            v_pixels=int(preset["v_pixels"]),
            viewing_distance_m=viewing_distance_m,
        )


def _require_positive(value, name):
    if not (value > 0):
        raise DomainError(f"{name} must be positive, got {value}")


def _require_finite(value, name):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")


def snellen_to_logmar(s: float) -> float:
    _require_positive(s, "Snellen fraction")
    return math.log10(1.0 / s)


def _over_pow10(numerator: float, m: float) -> float:
    """numerator / 10**m, with out-of-range logMAR values reported as DomainError"""
    _require_finite(m, "logMAR")
    try:
        value = numerator / math.pow(10.0, m)
    except (OverflowError, ZeroDivisionError):
        value = math.nan
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"logMAR {m} is outside the representable range")
    return value


def logmar_to_snellen(m: float) -> float:
    return _over_pow10(1.0, m)


def snellen_to_ppd(s: float) -> float:
    """20/20 (a 1 arcmin resolving angle) is one pixel per arcminute: 60 ppd"""
    _require_positive(s, "Snellen fraction")
    return ARCMIN_PER_DEGREE * s


def ppd_to_snellen(ppd: float) -> float:
    _require_positive(ppd, "ppd")
    return ppd / ARCMIN_PER_DEGREE


def logmar_to_ppd(m: float) -> float:
    return _over_pow10(ARCMIN_PER_DEGREE, m)


def ppd_to_logmar(ppd: float) -> float:
    _require_positive(ppd, "ppd")
    return math.log10(ARCMIN_PER_DEGREE / ppd)


def center_ppd(g: DisplayGeometry) -> float:
    """
    Pixels per visual degree at the centre of the screen

    Args:
        g: Display geometry (width, horizontal pixel count, viewing distance)

    Returns:
        ppd for the central pixel
    """
    half_pixel = Angle.from_radians(math.atan(0.5 * g.width_m / (g.h_pixels * g.viewing_distance_m)))
    return math.pi / (360.0 * half_pixel.radians)


def center_ppd_vertical(g: DisplayGeometry) -> float:
    """Centre ppd measured along the display height"""
    half_pixel = math.atan(0.5 * g.height_m / (g.v_pixels * g.viewing_distance_m))
    return math.pi / (360.0 * half_pixel)


def required_lines(distance_in_heights: float, threshold: float) -> float:
    """
    Vertical pixel count at which a display viewed from `distance_in_heights`
    display heights reaches `threshold` ppd at its centre (un-rounded)
    """
    _require_positive(distance_in_heights, "distance_in_heights")
    _require_positive(threshold, "threshold ppd")
    half_pixel = Angle(0.5 / threshold)
    return 0.5 / (distance_in_heights * math.tan(half_pixel.radians))


def required_ppi(distance_m: float, threshold: float) -> float:
    """Pixel density at which one pixel subtends 1/threshold degrees at `distance_m`"""
    _require_positive(distance_m, "distance_m")
    _require_positive(threshold, "threshold ppd")
    pixel = Angle(1.0 / threshold)
    return METERS_PER_INCH / (distance_m * math.tan(pixel.radians))


def pixels_per_inch(g: DisplayGeometry) -> float:
    return METERS_PER_INCH / g.pixel_pitch_m


def distance_for_ppd(g: DisplayGeometry, ppd: float) -> float:
    """Viewing distance at which the display centre reaches `ppd`"""
    _require_positive(ppd, "ppd")
    half_pixel = Angle(0.5 / ppd)
    return 0.5 * g.pixel_pitch_m / math.tan(half_pixel.radians)
