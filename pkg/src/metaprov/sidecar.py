"""Sidecar metadata format: the JSON interchange contract for every module.

A record document is one JSON object with top-level keys ``id``,
``upload_time`` and optional group objects (``spatial``, ``temporal``,
``contextual``, ``camera``, ``environment``, ``functional``) plus ``extras``.
A corpus document holds an array of records under ``versions`` and an
optional ``ground_truth_tree`` parent map (root maps to null).

Parsing canonicalizes values: timestamps to UTC at seconds precision, GPS
rationals to decimal degrees, rationals like ``1/60`` to floats. Unknown
fields are preserved in the record's extras map, never rejected.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from pathlib import Path
from typing import Any

from .errors import RecordValidationError, SidecarSyntaxError
from .model import (
    CameraAttrs,
    CaptureAction,
    CaptureMode,
    ContextualAttrs,
    EnvironmentAttrs,
    FunctionalAttrs,
    ImageServiceRecord,
    SpatialAttrs,
    TemporalAttrs,
    ValidationViolation,
    WhiteBalance,
    validate,
)

__all__ = [
    "parse_record",
    "serialize_record",
    "record_to_dict",
    "record_from_obj",
    "parse_corpus",
    "load_corpus",
    "dump_corpus",
]

_UTC = dt.timezone.utc


# ---------------------------------------------------------------------------
# value coercion helpers


def parse_rational(text: str) -> float:
    """Evaluate ``"1/60"`` or a plain numeric string to a float."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        d = float(den)
        if d == 0:
            raise ValueError(f"zero denominator in rational {text!r}")
        return float(num) / d
    return float(text)


def dms_to_degrees(text: str, ref: str | None = None) -> float:
    """Convert an EXIF degrees/minutes/seconds rational triple to degrees.

    Accepts ``"40/1 42/1 46/1"`` with an optional hemisphere letter either
    as a trailing token or via ``ref``. S and W yield negative degrees.
    """
    tokens = text.replace(",", " ").split()
    if tokens and tokens[-1].upper() in ("N", "S", "E", "W"):
        ref = tokens[-1]
        tokens = tokens[:-1]
    if not 1 <= len(tokens) <= 3:
        raise ValueError(f"expected 1-3 DMS components, got {text!r}")
    parts = [parse_rational(t) for t in tokens]
    while len(parts) < 3:
        parts.append(0.0)
    deg = parts[0] + parts[1] / 60.0 + parts[2] / 3600.0
    if ref is not None and ref.upper() in ("S", "W"):
        deg = -deg
    return deg


def _parse_datetime(value: Any, offset_minutes: int | None) -> dt.datetime:
    """Parse ISO-8601 or EXIF ``YYYY:MM:DD HH:MM:SS`` into UTC seconds.

    Naive stamps are interpreted as local wall time at ``offset_minutes``
    when known, otherwise assumed already UTC.
    """
    if isinstance(value, dt.datetime):
        parsed = value
    elif isinstance(value, str):
        text = value.strip()
        if len(text) >= 19 and text[4] == ":" and text[7] == ":":
            # EXIF style date separator
            text = text[:10].replace(":", "-") + "T" + text[11:]
        text = text.replace("Z", "+00:00")
        parsed = dt.datetime.fromisoformat(text)
    else:
        raise ValueError(f"cannot parse timestamp from {value!r}")
    if parsed.tzinfo is None:
        tz = dt.timezone(dt.timedelta(minutes=offset_minutes or 0))
        parsed = parsed.replace(tzinfo=tz)
    return parsed.astimezone(_UTC).replace(microsecond=0)


def _parse_tz_offset(value: Any) -> int:
    """Parse a timezone offset given as signed minutes or ``+HH:MM``."""
    if isinstance(value, bool):
        raise ValueError("timezone_offset must be minutes or +-HH:MM")
    if isinstance(value, (int, float)):
        return int(value)
    text = str(value).strip()
    if ":" in text:
        sign = -1 if text.startswith("-") else 1
        text = text.lstrip("+-")
        hours, minutes = text.split(":", 1)
        return sign * (int(hours) * 60 + int(minutes))
    return int(text)


def _parse_coordinate(value: Any, ref: str | None) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        deg = float(value)
        if ref is not None and ref.upper() in ("S", "W"):
            deg = -abs(deg)
        return deg
    text = str(value).strip()
    if "/" in text or " " in text:
        return dms_to_degrees(text, ref)
    deg = float(text)
    if ref is not None and ref.upper() in ("S", "W"):
        deg = -abs(deg)
    return deg


def _parse_float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError(f"expected number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    return parse_rational(str(value))


def _parse_int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError(f"expected integer, got {value!r}")
    if isinstance(value, int):
        return value
    f = float(str(value).strip())
    if not f.is_integer():
        raise ValueError(f"expected integer, got {value!r}")
    return int(f)


def _parse_str(value: Any) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected string, got {value!r}")
    return value


# ---------------------------------------------------------------------------
# record assembly

_ENUM_FIELDS = {
    "white_balance": WhiteBalance,
    "capture_action": CaptureAction,
    "mode_switch": CaptureMode,
}


class _GroupBuilder:
    """Accumulates coerced fields, violations and extras for one group."""

    def __init__(self, record_id: str, group: str, extras: dict[str, str]):
        self.record_id = record_id
        self.group = group
        self.extras = extras
        self.values: dict[str, Any] = {}
        self.violations: list[ValidationViolation] = []

    def put(self, name: str, raw: Any, coerce) -> None:
        try:
            self.values[name] = coerce(raw)
        except (ValueError, TypeError, ArithmeticError) as exc:
            self.violations.append(
                ValidationViolation(self.record_id, f"{self.group}.{name}", str(exc))
            )

    def unknown(self, name: str, raw: Any) -> None:
        self.extras[f"{self.group}.{name}"] = raw if isinstance(raw, str) else json.dumps(raw)


def _parse_enum(enum_cls):
    def coerce(value: Any):
        text = _parse_str(value).strip().lower()
        for member in enum_cls:
            if member.value == text:
                return member
        allowed = ", ".join(m.value for m in enum_cls)
        raise ValueError(f"expected one of ({allowed}), got {value!r}")

    return coerce


def _parse_resolution(value: Any) -> tuple[int, int]:
    if isinstance(value, str):
        parts = value.lower().replace("x", " ").split()
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ValueError(f"expected [width, height], got {value!r}")
    if len(parts) != 2:
        raise ValueError(f"expected [width, height], got {value!r}")
    return (_parse_int(parts[0]), _parse_int(parts[1]))


def _build_spatial(b: _GroupBuilder, obj: dict[str, Any]) -> SpatialAttrs:
    lat_ref = obj.get("latitude_ref")
    lon_ref = obj.get("longitude_ref")
    for key, raw in obj.items():
        if key in ("latitude_ref", "longitude_ref"):
            continue
        if key == "latitude":
            b.put(key, raw, lambda v: _parse_coordinate(v, lat_ref))
        elif key == "longitude":
            b.put(key, raw, lambda v: _parse_coordinate(v, lon_ref))
        elif key in ("city", "state", "country"):
            b.put(key, raw, _parse_str)
        else:
            b.unknown(key, raw)
    return SpatialAttrs(**b.values)


def _build_temporal(b: _GroupBuilder, obj: dict[str, Any]) -> TemporalAttrs:
    offset: int | None = None
    if "timezone_offset" in obj:
        b.put("timezone_offset", obj["timezone_offset"], _parse_tz_offset)
        offset = b.values.get("timezone_offset")
    for key, raw in obj.items():
        if key == "timezone_offset":
            continue
        if key in ("datetime_original", "datetime_digitized", "datetime_modified"):
            b.put(key, raw, lambda v: _parse_datetime(v, offset))
        elif key == "gps_timestamp":
            # GPS time is UTC by definition; never shift by the local offset.
            b.put(key, raw, lambda v: _parse_datetime(v, 0))
        else:
            b.unknown(key, raw)
    return TemporalAttrs(**b.values)


def _build_contextual(b: _GroupBuilder, obj: dict[str, Any]) -> ContextualAttrs:
    for key, raw in obj.items():
        if key in ("title", "caption", "headline"):
            b.put(key, raw, _parse_str)
        else:
            b.unknown(key, raw)
    return ContextualAttrs(**b.values)


def _build_camera(b: _GroupBuilder, obj: dict[str, Any]) -> CameraAttrs:
    for key, raw in obj.items():
        if key in ("make", "model"):
            b.put(key, raw, _parse_str)
        elif key in ("focal_length", "aperture", "exposure_time", "shutter_speed", "exposure_value"):
            b.put(key, raw, _parse_float)
        elif key == "iso":
            b.put(key, raw, _parse_int)
        elif key == "white_balance":
            b.put(key, raw, _parse_enum(WhiteBalance))
        elif key == "resolution":
            b.put(key, raw, _parse_resolution)
        else:
            b.unknown(key, raw)
    return CameraAttrs(**b.values)


def _build_environment(b: _GroupBuilder, obj: dict[str, Any]) -> EnvironmentAttrs:
    for key, raw in obj.items():
        if key in ("temperature", "humidity", "pressure", "water_depth"):
            b.put(key, raw, _parse_float)
        elif key == "weather":
            b.put(key, raw, _parse_str)
        else:
            b.unknown(key, raw)
    return EnvironmentAttrs(**b.values)


def _build_functional(b: _GroupBuilder, obj: dict[str, Any]) -> FunctionalAttrs:
    for key, raw in obj.items():
        if key == "capture_action":
            b.put(key, raw, _parse_enum(CaptureAction))
        elif key == "mode_switch":
            b.put(key, raw, _parse_enum(CaptureMode))
        elif key == "capture_delay":
            b.put(key, raw, _parse_float)
        else:
            b.unknown(key, raw)
    return FunctionalAttrs(**b.values)


_GROUP_BUILDERS = {
    "spatial": _build_spatial,
    "temporal": _build_temporal,
    "contextual": _build_contextual,
    "camera": _build_camera,
    "environment": _build_environment,
    "functional": _build_functional,
}


def record_from_obj(obj: dict[str, Any]) -> ImageServiceRecord:
    """Build a canonical record from a decoded sidecar object.

    Raises RecordValidationError when required fields are missing, a known
    field cannot be coerced, or an invariant is violated.
    """
    if not isinstance(obj, dict):
        raise RecordValidationError(
            [ValidationViolation("", "", f"record must be an object, got {type(obj).__name__}")]
        )
    violations: list[ValidationViolation] = []
    record_id = obj.get("id")
    if not isinstance(record_id, str) or not record_id:
        violations.append(ValidationViolation("", "id", "id must be a non-empty string"))
        record_id = ""

    upload_time: dt.datetime | None = None
    if "upload_time" not in obj:
        violations.append(ValidationViolation(record_id, "upload_time", "upload_time is required"))
    else:
        try:
            upload_time = _parse_datetime(obj["upload_time"], 0)
        except (ValueError, TypeError) as exc:
            violations.append(ValidationViolation(record_id, "upload_time", str(exc)))

    extras: dict[str, str] = {}
    if "extras" in obj:
        raw_extras = obj["extras"]
        if isinstance(raw_extras, dict):
            extras.update({str(k): str(v) for k, v in raw_extras.items()})
        else:
            violations.append(
                ValidationViolation(record_id, "extras", "extras must be an object of strings")
            )

    groups: dict[str, Any] = {}
    for key, raw in obj.items():
        if key in ("id", "upload_time", "extras"):
            continue
        builder_fn = _GROUP_BUILDERS.get(key)
        if builder_fn is None:
            extras[key] = raw if isinstance(raw, str) else json.dumps(raw)
            continue
        if not isinstance(raw, dict):
            violations.append(
                ValidationViolation(record_id, key, f"group {key!r} must be an object")
            )
            continue
        builder = _GroupBuilder(record_id, key, extras)
        groups[key] = builder_fn(builder, raw)
        violations.extend(builder.violations)

    record = ImageServiceRecord(
        id=record_id,
        upload_time=upload_time or dt.datetime(1970, 1, 1, tzinfo=_UTC),
        extras=extras,
        **groups,
    )
    violations.extend(validate(record))
    if violations:
        raise RecordValidationError(violations)
    return record


def _decode_json(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise SidecarSyntaxError(exc.msg, exc.pos) from exc


def parse_record(data: bytes | str) -> ImageServiceRecord:
    """Parse one sidecar record document."""
    return record_from_obj(_decode_json(data))


def _format_datetime(value: dt.datetime) -> str:
    return value.astimezone(_UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


def record_to_dict(record: ImageServiceRecord) -> dict[str, Any]:
    """Serialize a record to a JSON-compatible dict, omitting absent fields."""
    out: dict[str, Any] = {
        "id": record.id,
        "upload_time": _format_datetime(record.upload_time),
    }
    for group_name in ("functional", "spatial", "temporal", "contextual", "camera", "environment"):
        group = getattr(record, group_name)
        if group is None:
            continue
        obj: dict[str, Any] = {}
        for f in group.__dataclass_fields__:
            value = getattr(group, f)
            if value is None:
                continue
            if isinstance(value, dt.datetime):
                value = _format_datetime(value)
            elif isinstance(value, (CaptureAction, CaptureMode, WhiteBalance)):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, float) and not math.isfinite(value):
                raise ValueError(f"cannot serialize non-finite {group_name}.{f}")
            obj[f] = value
        out[group_name] = obj
    if record.extras:
        out["extras"] = dict(sorted(record.extras.items()))
    return out


def serialize_record(record: ImageServiceRecord) -> str:
    return json.dumps(record_to_dict(record), indent=2)


# ---------------------------------------------------------------------------
# corpus documents


def parse_corpus(data: bytes | str) -> tuple[list[ImageServiceRecord], dict[str, str | None] | None]:
    """Parse a corpus document: records plus the optional ground-truth tree."""
    obj = _decode_json(data)
    if not isinstance(obj, dict) or "versions" not in obj:
        raise RecordValidationError(
            [ValidationViolation("", "versions", "corpus document requires a 'versions' array")]
        )
    raw_versions = obj["versions"]
    if not isinstance(raw_versions, list):
        raise RecordValidationError(
            [ValidationViolation("", "versions", "'versions' must be an array")]
        )
    records = [record_from_obj(item) for item in raw_versions]

    seen: set[str] = set()
    for record in records:
        if record.id in seen:
            raise RecordValidationError(
                [ValidationViolation(record.id, "id", f"duplicate id {record.id!r} in corpus")]
            )
        seen.add(record.id)

    truth: dict[str, str | None] | None = None
    if obj.get("ground_truth_tree") is not None:
        raw_truth = obj["ground_truth_tree"]
        if not isinstance(raw_truth, dict):
            raise RecordValidationError(
                [ValidationViolation("", "ground_truth_tree", "must be a child->parent object")]
            )
        truth = {}
        for child, parent in raw_truth.items():
            if child not in seen or (parent is not None and parent not in seen):
                raise RecordValidationError(
                    [
                        ValidationViolation(
                            str(child), "ground_truth_tree", "edge references an unknown version id"
                        )
                    ]
                )
            truth[child] = parent
    return records, truth


def load_corpus(path: str | Path) -> tuple[list[ImageServiceRecord], dict[str, str | None] | None]:
    return parse_corpus(Path(path).read_bytes())


def dump_corpus(
    records: list[ImageServiceRecord],
    ground_truth: dict[str, str | None] | None = None,
) -> str:
    doc: dict[str, Any] = {"versions": [record_to_dict(r) for r in records]}
    if ground_truth is not None:
        doc["ground_truth_tree"] = {k: ground_truth[k] for k in sorted(ground_truth)}
    return json.dumps(doc, indent=2)
