"""Internal-consistency rules over a single record's attribute groups.

Nine rule groups cross-check related metadata: timestamp ordering, camera
capability ranges, exposure-value recomputation, the exposure triangle,
time-of-day plausibility, GPS/timezone agreement, and three environment
checks backed by a pluggable provider (weather vs. white balance, weather
observations, bathymetry). Each group yields one finding; a report
aggregates them into a mean inconsistency score.

Every check is a pure function of (record, reference data, tolerances), so
reports for distinct records can be computed in parallel.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol

from .errors import EnvironmentProviderError
from .model import (
    CameraAttrs,
    EnvironmentAttrs,
    ImageServiceRecord,
    SpatialAttrs,
    TemporalAttrs,
)

__all__ = [
    "RuleGroup",
    "GroupStatus",
    "GroupFinding",
    "InconsistencyReport",
    "Tolerances",
    "CapabilityEntry",
    "CapabilityTable",
    "EnvironmentFixture",
    "EnvironmentProvider",
    "FixtureEnvironmentProvider",
    "NullEnvironmentProvider",
    "compute_exposure_value",
    "check_timestamp_order",
    "check_capabilities",
    "check_exposure_value",
    "check_exposure_triangle",
    "check_time_of_day",
    "check_gps_timezone",
    "check_environment",
    "evaluate_all",
    "default_capability_table",
    "default_environment_provider",
]


class RuleGroup(enum.Enum):
    G1_TIMESTAMPS = "G1_timestamps"
    G2_CAPABILITIES = "G2_capabilities"
    G3_EXPOSURE_VALUE = "G3_exposure_value"
    G4_EXPOSURE_TRIANGLE = "G4_exposure_triangle"
    G5_TIME_OF_DAY = "G5_time_of_day"
    G6_GPS_TIMEZONE = "G6_gps_timezone"
    G7_WEATHER_SETTINGS = "G7_weather_settings"
    G8_ENVIRONMENT = "G8_environment"
    G9_WATER_DEPTH = "G9_water_depth"


class GroupStatus(enum.Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    SKIPPED = "skipped_missing_inputs"


@dataclass(frozen=True)
class GroupFinding:
    group: RuleGroup
    status: GroupStatus
    score: float | None  # in [0, 1]; None iff skipped
    detail: str

    @staticmethod
    def skipped(group: RuleGroup, detail: str) -> "GroupFinding":
        return GroupFinding(group, GroupStatus.SKIPPED, None, detail)

    @staticmethod
    def scored(group: RuleGroup, inconsistent: bool, score: float, detail: str) -> "GroupFinding":
        status = GroupStatus.INCONSISTENT if inconsistent else GroupStatus.CONSISTENT
        return GroupFinding(group, status, min(1.0, max(0.0, score)), detail)


@dataclass(frozen=True)
class InconsistencyReport:
    record_id: str
    findings: tuple[GroupFinding, ...]  # exactly one per RuleGroup, in order
    aggregate: float | None  # mean score over non-skipped groups

    def finding(self, group: RuleGroup) -> GroupFinding:
        return self.findings[list(RuleGroup).index(group)]


@dataclass(frozen=True)
class Tolerances:
    """All rule thresholds in one place. Defaults are deliberately loose
    approximations that work offline; every one of them is configurable."""

    ev_tolerance: float = 0.5  # EV slack for the recomputation check
    triangle_band: tuple[float, float] = (-2.0, 20.0)  # plausible EV100 scenes
    exceedance_scale_ev: float = 5.0  # EV outside the band scoring 1.0
    ev_day: float = 10.0  # EV100 at/above which the scene reads as daylight
    ev_night: float = 4.0  # EV100 at/below which the scene reads as night
    day_start_hour: int = 6
    day_end_hour: int = 18
    timezone_slack_minutes: float = 120.0  # longitude/15 nautical approximation
    gps_clock_slack_seconds: float = 300.0
    temperature_slack_c: float = 10.0

    def check_bounds(self) -> list[str]:
        problems = []
        if self.ev_tolerance <= 0:
            problems.append("ev_tolerance must be > 0")
        if self.triangle_band[0] >= self.triangle_band[1]:
            problems.append("triangle_band must be an increasing pair")
        if self.exceedance_scale_ev <= 0:
            problems.append("exceedance_scale_ev must be > 0")
        if not 0 <= self.day_start_hour < self.day_end_hour <= 24:
            problems.append("day window must satisfy 0 <= start < end <= 24")
        if self.ev_night >= self.ev_day:
            problems.append("ev_night must be below ev_day")
        if self.timezone_slack_minutes <= 0 or self.gps_clock_slack_seconds <= 0:
            problems.append("slack values must be > 0")
        if self.temperature_slack_c <= 0:
            problems.append("temperature_slack_c must be > 0")
        return problems


# ---------------------------------------------------------------------------
# G1: timestamp ordering


def check_timestamp_order(t: TemporalAttrs | None) -> GroupFinding:
    """Original <= digitized <= modified over whichever stamps are present."""
    group = RuleGroup.G1_TIMESTAMPS
    if t is None:
        return GroupFinding.skipped(group, "no temporal attributes")
    chain = [
        ("datetime_original", t.datetime_original),
        ("datetime_digitized", t.datetime_digitized),
        ("datetime_modified", t.datetime_modified),
    ]
    present = [(name, value) for name, value in chain if value is not None]
    if len(present) < 2:
        return GroupFinding.skipped(group, "fewer than two timestamps present")
    for (name_a, a), (name_b, b) in zip(present, present[1:]):
        if a > b:
            return GroupFinding.scored(
                group, True, 1.0, f"{name_a} ({a.isoformat()}) is after {name_b} ({b.isoformat()})"
            )
    return GroupFinding.scored(group, False, 0.0, "timestamps are ordered")


# ---------------------------------------------------------------------------
# G2: camera capability ranges


@dataclass(frozen=True)
class CapabilityEntry:
    make: str
    model: str
    focal_length_range: tuple[float, float]  # mm
    aperture_range: tuple[float, float]  # f-numbers
    iso_range: tuple[int, int]
    max_resolution: tuple[int, int]  # pixels


class CapabilityTable:
    """Editable reference table of camera capability ranges."""

    def __init__(self, entries: list[CapabilityEntry]):
        self._by_key = {(e.make.lower(), e.model.lower()): e for e in entries}

    def __len__(self) -> int:
        return len(self._by_key)

    def lookup(self, make: str | None, model: str | None) -> CapabilityEntry | None:
        if make is None or model is None:
            return None
        return self._by_key.get((make.strip().lower(), model.strip().lower()))

    @classmethod
    def from_file(cls, path: str | Path) -> "CapabilityTable":
        return cls._from_obj(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def _from_obj(cls, obj: dict) -> "CapabilityTable":
        entries = []
        for item in obj["cameras"]:
            entries.append(
                CapabilityEntry(
                    make=item["make"],
                    model=item["model"],
                    focal_length_range=tuple(item["focal_length_range"]),
                    aperture_range=tuple(item["aperture_range"]),
                    iso_range=tuple(item["iso_range"]),
                    max_resolution=tuple(item["max_resolution"]),
                )
            )
        return cls(entries)


def default_capability_table() -> CapabilityTable:
    data = resources.files("metaprov.data").joinpath("camera_capabilities.json")
    return CapabilityTable._from_obj(json.loads(data.read_text(encoding="utf-8")))


def check_capabilities(c: CameraAttrs | None, db: CapabilityTable) -> GroupFinding:
    """Do the recorded settings fall inside what this camera can do at all?"""
    group = RuleGroup.G2_CAPABILITIES
    if c is None or c.make is None or c.model is None:
        return GroupFinding.skipped(group, "camera make/model absent")
    entry = db.lookup(c.make, c.model)
    if entry is None:
        return GroupFinding.skipped(group, f"{c.make} {c.model} not in capability table")

    failures: list[str] = []
    checked = 0
    ranged = [
        ("focal_length", c.focal_length, entry.focal_length_range, "mm"),
        ("aperture", c.aperture, entry.aperture_range, ""),
        ("iso", c.iso, entry.iso_range, ""),
    ]
    for name, value, (lo, hi), unit in ranged:
        if value is None:
            continue
        checked += 1
        if not lo <= value <= hi:
            failures.append(f"{name} {value}{unit} outside [{lo}, {hi}]")
    if c.resolution is not None:
        checked += 1
        w, h = c.resolution
        mw, mh = entry.max_resolution
        if w > mw or h > mh:
            failures.append(f"resolution {w}x{h} exceeds sensor maximum {mw}x{mh}")
    if checked == 0:
        return GroupFinding.skipped(group, "no checkable camera settings present")
    if failures:
        return GroupFinding.scored(group, True, len(failures) / checked, "; ".join(failures))
    return GroupFinding.scored(
        group, False, 0.0, f"{checked} settings within {entry.make} {entry.model} capabilities"
    )


# ---------------------------------------------------------------------------
# G3/G4/G5: exposure arithmetic


def compute_exposure_value(aperture: float, exposure_time: float) -> float:
    """Photographic exposure value EV = log2(N^2 / t) at ISO 100."""
    if aperture <= 0 or exposure_time <= 0:
        raise ValueError("aperture and exposure_time must be > 0")
    return math.log2(aperture * aperture / exposure_time)


def _ev100(c: CameraAttrs) -> float:
    """ISO-adjusted scene exposure: EV at the recorded ISO mapped to ISO 100."""
    return compute_exposure_value(c.aperture, c.exposure_time) - math.log2(c.iso / 100.0)


def check_exposure_value(c: CameraAttrs | None, tol_ev: float = 0.5) -> GroupFinding:
    """Recompute EV from aperture and exposure time; compare to the record."""
    group = RuleGroup.G3_EXPOSURE_VALUE
    if tol_ev <= 0:
        raise ValueError("tol_ev must be > 0")
    if c is None or c.exposure_value is None or c.aperture is None or c.exposure_time is None:
        return GroupFinding.skipped(group, "exposure value, aperture or exposure time absent")
    computed = compute_exposure_value(c.aperture, c.exposure_time)
    diff = abs(c.exposure_value - computed)
    detail = f"recorded EV {c.exposure_value:.2f} vs computed {computed:.2f} (tol {tol_ev})"
    if c.shutter_speed is not None:
        # APEX Tv should agree with the authoritative exposure time.
        apex_gap = abs(c.shutter_speed - math.log2(1.0 / c.exposure_time))
        if apex_gap > tol_ev:
            detail += f"; advisory: shutter APEX desynced from exposure time by {apex_gap:.2f} EV"
    return GroupFinding.scored(group, diff > tol_ev, min(1.0, diff / (2 * tol_ev)), detail)


def check_exposure_triangle(c: CameraAttrs | None, tol: Tolerances = Tolerances()) -> GroupFinding:
    """Shutter/aperture/ISO must combine into a plausible scene brightness."""
    group = RuleGroup.G4_EXPOSURE_TRIANGLE
    if c is None or c.aperture is None or c.exposure_time is None or c.iso is None:
        return GroupFinding.skipped(group, "aperture, exposure time or ISO absent")
    ev100 = _ev100(c)
    lo, hi = tol.triangle_band
    exceedance = max(0.0, lo - ev100, ev100 - hi)
    detail = f"EV100 {ev100:.2f}, plausible band [{lo}, {hi}]"
    return GroupFinding.scored(
        group, exceedance > 0, min(1.0, exceedance / tol.exceedance_scale_ev), detail
    )


def check_time_of_day(
    c: CameraAttrs | None,
    t: TemporalAttrs | None,
    tol: Tolerances = Tolerances(),
) -> GroupFinding:
    """Does the light intake agree with the local clock? Advisory by nature:
    indoor scenes and deliberate exposures can legitimately disagree."""
    group = RuleGroup.G5_TIME_OF_DAY
    if (
        c is None
        or t is None
        or c.aperture is None
        or c.exposure_time is None
        or c.iso is None
        or t.datetime_original is None
        or t.timezone_offset is None
    ):
        return GroupFinding.skipped(group, "exposure settings or local capture time absent")
    ev100 = _ev100(c)
    if tol.ev_night < ev100 < tol.ev_day:
        return GroupFinding.skipped(group, f"EV100 {ev100:.2f} in the indeterminate band")
    exposure_is_day = ev100 >= tol.ev_day
    local = t.datetime_original + dt.timedelta(minutes=t.timezone_offset)
    clock_is_day = tol.day_start_hour <= local.hour < tol.day_end_hour
    disagree = exposure_is_day != clock_is_day
    detail = (
        f"advisory: exposure reads {'day' if exposure_is_day else 'night'} "
        f"(EV100 {ev100:.2f}), local clock {local.strftime('%H:%M')} reads "
        f"{'day' if clock_is_day else 'night'}"
    )
    return GroupFinding.scored(group, disagree, 1.0 if disagree else 0.0, detail)


# ---------------------------------------------------------------------------
# G6: GPS vs timezone vs clock


def check_gps_timezone(
    s: SpatialAttrs | None,
    t: TemporalAttrs | None,
    tol: Tolerances = Tolerances(),
) -> GroupFinding:
    """Longitude implies a timezone (nautical approximation); GPS time and
    the capture clock must name the same instant."""
    group = RuleGroup.G6_GPS_TIMEZONE
    sub_scores: list[float] = []
    failures: list[str] = []
    details: list[str] = []

    if s is not None and s.longitude is not None and t is not None and t.timezone_offset is not None:
        expected = round(s.longitude / 15.0) * 60
        diff = abs(t.timezone_offset - expected)
        sub_scores.append(min(1.0, diff / (2 * tol.timezone_slack_minutes)))
        details.append(
            f"offset {t.timezone_offset:+d} min vs longitude-implied {expected:+d} min"
        )
        if diff > tol.timezone_slack_minutes:
            failures.append("timezone offset does not match GPS longitude")

    if t is not None and t.datetime_original is not None and t.gps_timestamp is not None:
        # Both stamps are canonical UTC, so the local offset cancels out.
        gap = abs((t.datetime_original - t.gps_timestamp).total_seconds())
        sub_scores.append(min(1.0, gap / (2 * tol.gps_clock_slack_seconds)))
        details.append(f"capture clock vs GPS time gap {gap:.0f} s")
        if gap > tol.gps_clock_slack_seconds:
            failures.append("capture clock disagrees with GPS time")

    if not sub_scores:
        return GroupFinding.skipped(group, "no GPS/timezone sub-check has its inputs")
    detail = "; ".join(failures + details) if failures else "; ".join(details)
    return GroupFinding.scored(group, bool(failures), max(sub_scores), detail)


# ---------------------------------------------------------------------------
# G7/G8/G9: environment provider checks


@dataclass(frozen=True)
class EnvironmentFixture:
    weather: str | None = None
    temperature: float | None = None  # deg C
    water_depth_max: float | None = None  # meters of water at this cell


class EnvironmentProvider(Protocol):
    """Offline stand-in for weather/bathymetry services, keyed by integer
    degree cell and UTC date."""

    name: str

    def lookup(self, latitude: float, longitude: float, date: dt.date) -> EnvironmentFixture | None: ...

    def white_balance_weather(self) -> dict[str, list[str]]: ...


class FixtureEnvironmentProvider:
    """Environment data from a fixture file in the sidecar format.

    Keys: ``cells`` is a list of objects with ``lat_cell``/``lon_cell``
    (floor of degrees), ``date`` (ISO) and any of ``weather``,
    ``temperature``, ``water_depth_max``; ``white_balance_weather`` maps a
    white-balance preset to the weather labels it is compatible with.
    """

    name = "fixtures"

    def __init__(self, cells: dict, wb_weather: dict[str, list[str]]):
        self._cells = cells
        self._wb_weather = wb_weather

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureEnvironmentProvider":
        return cls._from_obj(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def _from_obj(cls, obj: dict) -> "FixtureEnvironmentProvider":
        cells = {}
        for item in obj.get("cells", []):
            key = (int(item["lat_cell"]), int(item["lon_cell"]), str(item["date"]))
            cells[key] = EnvironmentFixture(
                weather=item.get("weather"),
                temperature=item.get("temperature"),
                water_depth_max=item.get("water_depth_max"),
            )
        wb = {k: list(v) for k, v in obj.get("white_balance_weather", {}).items()}
        return cls(cells, wb)

    def lookup(self, latitude: float, longitude: float, date: dt.date) -> EnvironmentFixture | None:
        key = (math.floor(latitude), math.floor(longitude), date.isoformat())
        return self._cells.get(key)

    def white_balance_weather(self) -> dict[str, list[str]]:
        return self._wb_weather


class NullEnvironmentProvider:
    """Provider with no data; every environment check skips."""

    name = "null"

    def lookup(self, latitude: float, longitude: float, date: dt.date) -> EnvironmentFixture | None:
        return None

    def white_balance_weather(self) -> dict[str, list[str]]:
        return {}


def default_environment_provider() -> FixtureEnvironmentProvider:
    data = resources.files("metaprov.data").joinpath("environment_fixtures.json")
    return FixtureEnvironmentProvider._from_obj(json.loads(data.read_text(encoding="utf-8")))


def _skip_env(detail: str) -> tuple[GroupFinding, GroupFinding, GroupFinding]:
    return (
        GroupFinding.skipped(RuleGroup.G7_WEATHER_SETTINGS, detail),
        GroupFinding.skipped(RuleGroup.G8_ENVIRONMENT, detail),
        GroupFinding.skipped(RuleGroup.G9_WATER_DEPTH, detail),
    )


def check_environment(
    record: ImageServiceRecord,
    env: EnvironmentProvider,
    tol: Tolerances = Tolerances(),
) -> tuple[GroupFinding, GroupFinding, GroupFinding]:
    """Compare recorded conditions against the provider's ground data.

    Covers three groups at once because they share the provider lookup:
    white balance vs weather (G7), recorded weather observations (G8) and
    water depth vs bathymetry (G9).
    """
    s = record.spatial
    t = record.temporal
    if s is None or s.latitude is None or s.longitude is None:
        return _skip_env("no GPS coordinates for environment lookup")
    stamp = (t.datetime_original or t.gps_timestamp) if t is not None else None
    if stamp is None:
        return _skip_env("no capture date for environment lookup")
    try:
        fixture = env.lookup(s.latitude, s.longitude, stamp.date())
    except EnvironmentProviderError as exc:
        return _skip_env(f"environment provider failed: {exc}")
    if fixture is None:
        return _skip_env(
            f"no environment data for cell ({math.floor(s.latitude)}, "
            f"{math.floor(s.longitude)}) on {stamp.date().isoformat()}"
        )

    e = record.environment or EnvironmentAttrs()
    wb = record.camera.white_balance if record.camera is not None else None

    # G7: white balance preset vs provider weather.
    if wb is None:
        g7 = GroupFinding.skipped(RuleGroup.G7_WEATHER_SETTINGS, "white balance absent")
    elif fixture.weather is None:
        g7 = GroupFinding.skipped(RuleGroup.G7_WEATHER_SETTINGS, "provider has no weather label")
    else:
        mapping = env.white_balance_weather()
        compatible = mapping.get(wb.value)
        if compatible is None:
            g7 = GroupFinding.scored(
                RuleGroup.G7_WEATHER_SETTINGS,
                False,
                0.0,
                f"advisory: no weather mapping for white balance {wb.value!r}",
            )
        else:
            ok = fixture.weather.strip().lower() in [w.lower() for w in compatible]
            g7 = GroupFinding.scored(
                RuleGroup.G7_WEATHER_SETTINGS,
                not ok,
                0.0 if ok else 1.0,
                f"white balance {wb.value!r} vs provider weather {fixture.weather!r}",
            )

    # G8: recorded weather observations vs provider values.
    performed = 0
    failed: list[str] = []
    if e.weather is not None and fixture.weather is not None:
        performed += 1
        if e.weather.strip().lower() != fixture.weather.strip().lower():
            failed.append(f"weather {e.weather!r} != provider {fixture.weather!r}")
    if e.temperature is not None and fixture.temperature is not None:
        performed += 1
        gap = abs(e.temperature - fixture.temperature)
        if gap > tol.temperature_slack_c:
            failed.append(f"temperature off by {gap:.1f} C")
    if performed == 0:
        g8 = GroupFinding.skipped(RuleGroup.G8_ENVIRONMENT, "no comparable weather observations")
    elif failed:
        g8 = GroupFinding.scored(RuleGroup.G8_ENVIRONMENT, True, len(failed) / performed, "; ".join(failed))
    else:
        g8 = GroupFinding.scored(
            RuleGroup.G8_ENVIRONMENT, False, 0.0, f"{performed} observations match provider"
        )

    # G9: claimed water depth vs bathymetry.
    if e.water_depth is None:
        g9 = GroupFinding.skipped(RuleGroup.G9_WATER_DEPTH, "water depth absent")
    elif fixture.water_depth_max is None:
        g9 = GroupFinding.skipped(RuleGroup.G9_WATER_DEPTH, "provider has no bathymetry for cell")
    else:
        too_deep = e.water_depth > fixture.water_depth_max
        g9 = GroupFinding.scored(
            RuleGroup.G9_WATER_DEPTH,
            too_deep,
            1.0 if too_deep else 0.0,
            f"claimed depth {e.water_depth:.1f} m vs bathymetry {fixture.water_depth_max:.1f} m",
        )
    return g7, g8, g9


# ---------------------------------------------------------------------------
# full report


def evaluate_all(
    record: ImageServiceRecord,
    db: CapabilityTable | None = None,
    env: EnvironmentProvider | None = None,
    tol: Tolerances = Tolerances(),
) -> InconsistencyReport:
    """Run every rule group against one record. Pure and deterministic."""
    db = db if db is not None else default_capability_table()
    env = env if env is not None else NullEnvironmentProvider()
    g7, g8, g9 = check_environment(record, env, tol)
    findings = (
        check_timestamp_order(record.temporal),
        check_capabilities(record.camera, db),
        check_exposure_value(record.camera, tol.ev_tolerance),
        check_exposure_triangle(record.camera, tol),
        check_time_of_day(record.camera, record.temporal, tol),
        check_gps_timezone(record.spatial, record.temporal, tol),
        g7,
        g8,
        g9,
    )
    scores = [f.score for f in findings if f.score is not None]
    aggregate = sum(scores) / len(scores) if scores else None
    return InconsistencyReport(record_id=record.id, findings=findings, aggregate=aggregate)


def report_to_dict(report: InconsistencyReport) -> dict:
    """Document form of a report for the CLI and for output files."""
    return {
        "record_id": report.record_id,
        "aggregate": report.aggregate,
        "findings": [
            {
                "group": f.group.value,
                "status": f.status.value,
                "score": f.score,
                "detail": f.detail,
            }
            for f in report.findings
        ],
    }
