"""Canonical data model for image services and their non-functional attributes.

An image service is one uploaded version of a crowdsourced image, reduced to
its metadata. The model keeps the capture-action (functional) attributes for
completeness, but every analysis in this package operates on the
non-functional groups: spatial, temporal, contextual, camera and environment.

All types are immutable after construction and safe to share across threads.
Timestamps are stored as timezone-aware UTC datetimes at seconds precision;
GPS coordinates as decimal degrees; apertures as f-numbers; exposure times in
seconds; shutter speed as an APEX value retained alongside the authoritative
exposure_time.
"""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field, fields

__all__ = [
    "CaptureAction",
    "CaptureMode",
    "WhiteBalance",
    "FunctionalAttrs",
    "SpatialAttrs",
    "TemporalAttrs",
    "ContextualAttrs",
    "CameraAttrs",
    "EnvironmentAttrs",
    "ImageServiceRecord",
    "ValidationViolation",
    "validate",
    "record_field",
    "MAX_TZ_OFFSET_MINUTES",
]

MAX_TZ_OFFSET_MINUTES = 14 * 60


class CaptureAction(enum.Enum):
    SHUTTER_PRESS = "shutter_press"
    TIMED = "timed"
    PANORAMIC = "panoramic"


class CaptureMode(enum.Enum):
    PHOTO = "photo"
    VIDEO = "video"


class WhiteBalance(enum.Enum):
    AUTO = "auto"
    DAYLIGHT = "daylight"
    CLOUDY = "cloudy"
    TUNGSTEN = "tungsten"
    FLUORESCENT = "fluorescent"
    FLASH = "flash"


@dataclass(frozen=True)
class FunctionalAttrs:
    """Capture-action attributes. Stored for completeness, never analyzed."""

    capture_action: CaptureAction | None = None
    mode_switch: CaptureMode | None = None
    capture_delay: float | None = None  # seconds, >= 0


@dataclass(frozen=True)
class SpatialAttrs:
    latitude: float | None = None  # decimal degrees, [-90, 90]
    longitude: float | None = None  # decimal degrees, [-180, 180]
    city: str | None = None
    state: str | None = None
    country: str | None = None


@dataclass(frozen=True)
class TemporalAttrs:
    datetime_original: dt.datetime | None = None
    datetime_digitized: dt.datetime | None = None
    datetime_modified: dt.datetime | None = None
    timezone_offset: int | None = None  # signed minutes from UTC
    gps_timestamp: dt.datetime | None = None


@dataclass(frozen=True)
class ContextualAttrs:
    title: str | None = None
    caption: str | None = None
    headline: str | None = None


@dataclass(frozen=True)
class CameraAttrs:
    make: str | None = None
    model: str | None = None
    focal_length: float | None = None  # mm, > 0
    aperture: float | None = None  # f-number, > 0
    exposure_time: float | None = None  # seconds, > 0 (authoritative)
    shutter_speed: float | None = None  # APEX Tv, retained for cross-checks
    iso: int | None = None  # > 0
    exposure_value: float | None = None  # as recorded in the metadata
    white_balance: WhiteBalance | None = None
    resolution: tuple[int, int] | None = None  # (width, height) pixels


@dataclass(frozen=True)
class EnvironmentAttrs:
    temperature: float | None = None  # deg C
    humidity: float | None = None  # percent, [0, 100]
    pressure: float | None = None  # hPa, > 0
    weather: str | None = None  # free label, e.g. "sunny"
    water_depth: float | None = None  # meters, >= 0


@dataclass(frozen=True)
class ValidationViolation:
    record_id: str
    field_path: str
    message: str


@dataclass(frozen=True)
class ImageServiceRecord:
    """One version of an image service: id, upload time and attribute groups.

    Unknown metadata encountered during parsing is preserved verbatim in
    ``extras`` so that no evidence is destroyed.
    """

    id: str
    upload_time: dt.datetime
    functional: FunctionalAttrs | None = None
    spatial: SpatialAttrs | None = None
    temporal: TemporalAttrs | None = None
    contextual: ContextualAttrs | None = None
    camera: CameraAttrs | None = None
    environment: EnvironmentAttrs | None = None
    extras: dict[str, str] = field(default_factory=dict)


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def validate(record: ImageServiceRecord) -> list[ValidationViolation]:
    """Check every type invariant; return one violation per broken invariant.

    Total function: never raises, an empty list means the record is valid.
    """
    out: list[ValidationViolation] = []
    rid = record.id if isinstance(record.id, str) else ""

    def bad(path: str, message: str) -> None:
        out.append(ValidationViolation(rid, path, message))

    if not record.id:
        bad("id", "id must be a non-empty string")
    if record.upload_time is None:
        bad("upload_time", "upload_time is required")

    f = record.functional
    if f is not None and f.capture_delay is not None:
        if not _finite(f.capture_delay) or f.capture_delay < 0:
            bad("functional.capture_delay", "capture_delay must be >= 0")

    s = record.spatial
    if s is not None:
        if s.latitude is not None and not (
            _finite(s.latitude) and -90.0 <= s.latitude <= 90.0
        ):
            bad("spatial.latitude", "latitude must be within [-90, 90]")
        if s.longitude is not None and not (
            _finite(s.longitude) and -180.0 <= s.longitude <= 180.0
        ):
            bad("spatial.longitude", "longitude must be within [-180, 180]")

    t = record.temporal
    if t is not None and t.timezone_offset is not None:
        if abs(t.timezone_offset) > MAX_TZ_OFFSET_MINUTES:
            bad(
                "temporal.timezone_offset",
                f"timezone_offset must be within +-{MAX_TZ_OFFSET_MINUTES} minutes",
            )

    c = record.camera
    if c is not None:
        for name, value in (
            ("focal_length", c.focal_length),
            ("aperture", c.aperture),
            ("exposure_time", c.exposure_time),
        ):
            if value is not None and not (_finite(value) and value > 0):
                bad(f"camera.{name}", f"{name} must be > 0")
        if c.iso is not None and not (isinstance(c.iso, int) and c.iso > 0):
            bad("camera.iso", "iso must be a positive integer")
        if c.resolution is not None:
            w, h = c.resolution
            if not (isinstance(w, int) and isinstance(h, int) and w > 0 and h > 0):
                bad("camera.resolution", "resolution must be positive integers")

    e = record.environment
    if e is not None:
        if e.humidity is not None and not (
            _finite(e.humidity) and 0.0 <= e.humidity <= 100.0
        ):
            bad("environment.humidity", "humidity must be within [0, 100]")
        if e.pressure is not None and not (_finite(e.pressure) and e.pressure > 0):
            bad("environment.pressure", "pressure must be > 0")
        if e.water_depth is not None and not (
            _finite(e.water_depth) and e.water_depth >= 0
        ):
            bad("environment.water_depth", "water_depth must be >= 0")

    return out


_GROUP_FIELDS = {f.name for f in fields(ImageServiceRecord)} - {"id", "upload_time", "extras"}


def record_field(record: ImageServiceRecord, path: str):
    """Resolve a dotted field path such as ``camera.aperture`` against a record.

    Returns None when the group or the field is absent. ``camera.resolution``
    additionally supports ``.width`` and ``.height`` leaves.
    """
    parts = path.split(".")
    if not parts or parts[0] not in _GROUP_FIELDS:
        raise KeyError(f"unknown attribute group in path {path!r}")
    group = getattr(record, parts[0])
    if group is None or len(parts) == 1:
        return group
    if parts[1] == "resolution" and len(parts) == 3:
        res = group.resolution
        if res is None:
            return None
        if parts[2] == "width":
            return res[0]
        if parts[2] == "height":
            return res[1]
        raise KeyError(f"unknown resolution leaf in path {path!r}")
    if not hasattr(group, parts[1]) or len(parts) > 2:
        raise KeyError(f"unknown field in path {path!r}")
    return getattr(group, parts[1])
