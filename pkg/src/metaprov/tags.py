"""Canonicalization of raw EXIF/IPTC tag maps onto the record model.

External extractors hand us flat ``tag name -> string value`` maps. This
module owns the bundled mapping table from that vocabulary onto the
canonical attribute groups. Unlike the strict sidecar parser, tag
canonicalization is lenient: an unparseable or invariant-breaking value
yields a ValidationViolation and the field is left absent, while the rest
of the record is still returned. Unmapped tags land in extras untouched.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
from typing import Any, Callable, Mapping

from .model import (
    CameraAttrs,
    ContextualAttrs,
    EnvironmentAttrs,
    ImageServiceRecord,
    SpatialAttrs,
    TemporalAttrs,
    ValidationViolation,
    WhiteBalance,
    validate,
)
from .sidecar import _parse_datetime, dms_to_degrees, parse_rational

__all__ = ["canonicalize_tags", "SIMPLE_TAG_MAP"]

_UTC = dt.timezone.utc


def _float(value: str) -> float:
    return parse_rational(str(value))


def _int(value: str) -> int:
    f = _float(value)
    if not float(f).is_integer():
        raise ValueError(f"expected integer, got {value!r}")
    return int(f)


def _text(value: Any) -> str:
    return str(value)


def _apex_to_fnumber(value: str) -> float:
    return 2.0 ** (_float(value) / 2.0)


def _white_balance(value: str) -> WhiteBalance:
    text = str(value).strip().lower()
    if text in ("0", "auto"):
        return WhiteBalance.AUTO
    for member in WhiteBalance:
        if member.value == text:
            return member
    raise ValueError(f"unsupported white balance {value!r}")


# EXIF LightSource codes that name one of our white-balance presets.
_LIGHT_SOURCE = {
    "1": WhiteBalance.DAYLIGHT,
    "2": WhiteBalance.FLUORESCENT,
    "3": WhiteBalance.TUNGSTEN,
    "4": WhiteBalance.FLASH,
    "10": WhiteBalance.CLOUDY,
    "daylight": WhiteBalance.DAYLIGHT,
    "fluorescent": WhiteBalance.FLUORESCENT,
    "tungsten": WhiteBalance.TUNGSTEN,
    "flash": WhiteBalance.FLASH,
    "cloudy": WhiteBalance.CLOUDY,
    "cloudy weather": WhiteBalance.CLOUDY,
}


def _light_source(value: str) -> WhiteBalance:
    key = str(value).strip().lower()
    if key in _LIGHT_SOURCE:
        return _LIGHT_SOURCE[key]
    raise ValueError(f"light source {value!r} has no white-balance mapping")


# Ordered (tag, group, field, coercer). Earlier aliases win; a losing alias
# is preserved in extras instead of overwriting the canonical field.
SIMPLE_TAG_MAP: list[tuple[str, str, str, Callable[[str], Any]]] = [
    ("Make", "camera", "make", _text),
    ("Model", "camera", "model", _text),
    ("FNumber", "camera", "aperture", _float),
    ("ApertureValue", "camera", "aperture", _apex_to_fnumber),
    ("ExposureTime", "camera", "exposure_time", _float),
    ("ShutterSpeedValue", "camera", "shutter_speed", _float),
    ("FocalLength", "camera", "focal_length", _float),
    ("ISOSpeedRatings", "camera", "iso", _int),
    ("ISO", "camera", "iso", _int),
    ("PhotographicSensitivity", "camera", "iso", _int),
    ("ExposureValue", "camera", "exposure_value", _float),
    ("WhiteBalance", "camera", "white_balance", _white_balance),
    ("LightSource", "camera", "white_balance", _light_source),
    ("DateTimeOriginal", "temporal", "datetime_original", None),
    ("DateTimeDigitized", "temporal", "datetime_digitized", None),
    ("CreateDate", "temporal", "datetime_digitized", None),
    ("DateTime", "temporal", "datetime_modified", None),
    ("ModifyDate", "temporal", "datetime_modified", None),
    ("City", "spatial", "city", _text),
    ("Province-State", "spatial", "state", _text),
    ("State", "spatial", "state", _text),
    ("Country-PrimaryLocationName", "spatial", "country", _text),
    ("Country", "spatial", "country", _text),
    ("ObjectName", "contextual", "title", _text),
    ("Title", "contextual", "title", _text),
    ("Caption-Abstract", "contextual", "caption", _text),
    ("Caption", "contextual", "caption", _text),
    ("ImageDescription", "contextual", "caption", _text),
    ("Headline", "contextual", "headline", _text),
    ("AmbientTemperature", "environment", "temperature", _float),
    ("Temperature", "environment", "temperature", _float),
    ("Humidity", "environment", "humidity", _float),
    ("Pressure", "environment", "pressure", _float),
    ("Weather", "environment", "weather", _text),
    ("WaterDepth", "environment", "water_depth", _float),
    ("GPSWaterDepth", "environment", "water_depth", _float),
]

# Tags consumed by the composite handlers below (GPS, offsets, resolution).
_COMPOSITE_TAGS = {
    "GPSLatitude",
    "GPSLatitudeRef",
    "GPSLongitude",
    "GPSLongitudeRef",
    "GPSDateStamp",
    "GPSTimeStamp",
    "OffsetTimeOriginal",
    "OffsetTime",
    "TimeZoneOffset",
    "ExifImageWidth",
    "ExifImageHeight",
    "PixelXDimension",
    "PixelYDimension",
    "ImageWidth",
    "ImageHeight",
    "UploadTime",
}

_DATETIME_FIELDS = ("datetime_original", "datetime_digitized", "datetime_modified")


def _parse_offset_tag(raw: Mapping[str, str]) -> tuple[int | None, str | None]:
    """Offset minutes from OffsetTimeOriginal/OffsetTime (+HH:MM) or
    TimeZoneOffset (hours)."""
    for tag in ("OffsetTimeOriginal", "OffsetTime"):
        if tag in raw:
            text = str(raw[tag]).strip()
            sign = -1 if text.startswith("-") else 1
            hh, _, mm = text.lstrip("+-").partition(":")
            return sign * (int(hh) * 60 + int(mm or "0")), tag
    if "TimeZoneOffset" in raw:
        hours = str(raw["TimeZoneOffset"]).split()[0]
        return int(float(hours) * 60), "TimeZoneOffset"
    return None, None


def _parse_gps_timestamp(raw: Mapping[str, str]) -> dt.datetime | None:
    if "GPSDateStamp" not in raw or "GPSTimeStamp" not in raw:
        return None
    date = str(raw["GPSDateStamp"]).strip().replace(":", "-")
    time_text = str(raw["GPSTimeStamp"]).strip()
    if "/" in time_text or " " in time_text:
        parts = [parse_rational(p) for p in time_text.replace(",", " ").split()]
        while len(parts) < 3:
            parts.append(0.0)
        h, m, s = (int(parts[0]), int(parts[1]), int(parts[2]))
        time_iso = f"{h:02d}:{m:02d}:{s:02d}"
    else:
        time_iso = time_text
    return _parse_datetime(f"{date}T{time_iso}", 0)


def _parse_resolution_tags(raw: Mapping[str, str]) -> tuple[int, int] | None:
    for w_tag, h_tag in (
        ("ExifImageWidth", "ExifImageHeight"),
        ("PixelXDimension", "PixelYDimension"),
        ("ImageWidth", "ImageHeight"),
    ):
        if w_tag in raw and h_tag in raw:
            return (_int(raw[w_tag]), _int(raw[h_tag]))
    return None


def _clear_field(record: ImageServiceRecord, path: str) -> ImageServiceRecord:
    group_name, _, field_name = path.partition(".")
    group = getattr(record, group_name, None)
    if group is None or not field_name:
        return record
    group = dataclasses.replace(group, **{field_name.split(".")[0]: None})
    return dataclasses.replace(record, **{group_name: group})


def canonicalize_tags(
    raw: Mapping[str, str],
    record_id: str = "record",
    upload_time: dt.datetime | None = None,
) -> tuple[ImageServiceRecord, list[ValidationViolation]]:
    """Map a raw extracted tag map onto a canonical record.

    Tag maps carry no upload time of their own; pass ``upload_time`` when the
    posting time is known, or provide an ``UploadTime`` tag. Otherwise the
    capture timestamp is used, falling back to the Unix epoch.

    Returns the record plus the violations for mapped tags whose values could
    not be used; those fields are absent from the record. Deterministic:
    equal inputs produce equal outputs regardless of map iteration order.
    """
    groups: dict[str, dict[str, Any]] = {
        "spatial": {},
        "temporal": {},
        "contextual": {},
        "camera": {},
        "environment": {},
    }
    extras: dict[str, str] = {}
    violations: list[ValidationViolation] = []

    def violation(path: str, message: str) -> None:
        violations.append(ValidationViolation(record_id, path, message))

    offset_minutes, _offset_tag = (None, None)
    try:
        offset_minutes, _offset_tag = _parse_offset_tag(raw)
    except (ValueError, TypeError) as exc:
        violation("temporal.timezone_offset", str(exc))
    if offset_minutes is not None:
        groups["temporal"]["timezone_offset"] = offset_minutes

    consumed: set[str] = set()
    for tag, group, field_name, coercer in SIMPLE_TAG_MAP:
        if tag not in raw:
            continue
        consumed.add(tag)
        if field_name in groups[group]:
            extras[tag] = str(raw[tag])  # a higher-priority alias already won
            continue
        try:
            if coercer is None:  # datetime fields need the offset context
                value = _parse_datetime(raw[tag], offset_minutes)
            else:
                value = coercer(raw[tag])
            groups[group][field_name] = value
        except (ValueError, TypeError, ArithmeticError) as exc:
            violation(f"{group}.{field_name}", str(exc))

    if "GPSLatitude" in raw:
        try:
            groups["spatial"]["latitude"] = dms_to_degrees(
                str(raw["GPSLatitude"]), raw.get("GPSLatitudeRef")
            )
        except (ValueError, TypeError) as exc:
            violation("spatial.latitude", str(exc))
    if "GPSLongitude" in raw:
        try:
            groups["spatial"]["longitude"] = dms_to_degrees(
                str(raw["GPSLongitude"]), raw.get("GPSLongitudeRef")
            )
        except (ValueError, TypeError) as exc:
            violation("spatial.longitude", str(exc))
    try:
        gps_ts = _parse_gps_timestamp(raw)
        if gps_ts is not None:
            groups["temporal"]["gps_timestamp"] = gps_ts
    except (ValueError, TypeError) as exc:
        violation("temporal.gps_timestamp", str(exc))
    try:
        resolution = _parse_resolution_tags(raw)
        if resolution is not None:
            groups["camera"]["resolution"] = resolution
    except (ValueError, TypeError) as exc:
        violation("camera.resolution", str(exc))

    for tag in sorted(raw):
        if tag not in consumed and tag not in _COMPOSITE_TAGS:
            extras[tag] = str(raw[tag])

    if upload_time is None and "UploadTime" in raw:
        try:
            upload_time = _parse_datetime(raw["UploadTime"], 0)
        except (ValueError, TypeError) as exc:
            violation("upload_time", str(exc))
    if upload_time is None:
        upload_time = (
            groups["temporal"].get("datetime_original")
            or groups["temporal"].get("datetime_modified")
            or dt.datetime(1970, 1, 1, tzinfo=_UTC)
        )
    upload_time = upload_time.astimezone(_UTC).replace(microsecond=0)

    record = ImageServiceRecord(
        id=record_id,
        upload_time=upload_time,
        spatial=SpatialAttrs(**groups["spatial"]) if groups["spatial"] else None,
        temporal=TemporalAttrs(**groups["temporal"]) if groups["temporal"] else None,
        contextual=ContextualAttrs(**groups["contextual"]) if groups["contextual"] else None,
        camera=CameraAttrs(**groups["camera"]) if groups["camera"] else None,
        environment=EnvironmentAttrs(**groups["environment"]) if groups["environment"] else None,
        extras=extras,
    )

    # Enforce invariants leniently: drop offending fields, keep the record.
    for v in validate(record):
        record = _clear_field(record, v.field_path)
        violations.append(v)
    return record, violations
