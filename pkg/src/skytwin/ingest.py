"""Aircraft state extraction sources.

Three interchangeable sources produce the same :class:`ExtractResult` shape:

* :class:`LiveSource` polls a REST endpoint serving positional state vectors
  (OpenSky-compatible ``/states/all`` layout),
* :class:`ReplaySource` replays a recorded newline-delimited JSON trace,
  including deliberately recorded failures,
* :class:`SyntheticSource` generates a deterministic fleet, for benchmarks
  and tests.

Every failure mode is encoded in the result, never raised, so the pipeline
tick can always decide between using fresh data and falling back to the store.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np
import requests

from skytwin import projection

DEFAULT_BASE_URL = "https://opensky-network.org/api"
TOKEN_ENV_VAR = "SKYTWIN_API_TOKEN"

# UK airspace, the default observation window
DEFAULT_BBOX_LAT = (49.9, 60.9)
DEFAULT_BBOX_LON = (-8.6, 1.8)


class StateParseError(ValueError):
    """A positional state row could not be mapped to an AircraftState."""


class FailureReason(str, Enum):
    TIMEOUT = "timeout"
    HTTP_ERROR = "http_error"
    PARSE_ERROR = "parse_error"
    SOURCE_EXHAUSTED = "source_exhausted"


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self) -> None:
        if not self.lat_min < self.lat_max:
            raise ValueError(f"lat_min {self.lat_min} must be < lat_max {self.lat_max}")
        if not self.lon_min < self.lon_max:
            raise ValueError(f"lon_min {self.lon_min} must be < lon_max {self.lon_max}")

    @classmethod
    def uk_default(cls) -> "BoundingBox":
        return cls(DEFAULT_BBOX_LAT[0], DEFAULT_BBOX_LAT[1], DEFAULT_BBOX_LON[0], DEFAULT_BBOX_LON[1])


@dataclass(frozen=True)
class AircraftState:
    """One aircraft's measured state vector.

    Optional fields stay ``None`` when the transponder did not report them;
    downstream stages decide how to handle the gaps.
    """

    icao24: str
    last_contact: float
    callsign: str | None = None
    origin_country: str = ""
    time_position: float | None = None
    longitude: float | None = None
    latitude: float | None = None
    baro_altitude: float | None = None
    on_ground: bool = False
    velocity: float | None = None
    true_track: float | None = None
    vertical_rate: float | None = None
    geo_altitude: float | None = None
    spi: bool = False
    category: int = 0

    def __post_init__(self) -> None:
        if not self.icao24:
            raise ValueError("icao24 must be non-empty")
        if self.longitude is not None and not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} out of range")
        if self.latitude is not None and not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} out of range")
        if self.time_position is not None and self.last_contact < self.time_position:
            raise ValueError("last_contact must be >= time_position")

    def to_dict(self) -> dict:
        """Named-field form used by replay traces; absent optionals are omitted."""
        out: dict = {"icao24": self.icao24, "last_contact": self.last_contact}
        for key in (
            "callsign",
            "origin_country",
            "time_position",
            "longitude",
            "latitude",
            "baro_altitude",
            "on_ground",
            "velocity",
            "true_track",
            "vertical_rate",
            "geo_altitude",
            "spi",
            "category",
        ):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "AircraftState":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in raw.items() if k in known})


@dataclass(frozen=True)
class ExtractResult:
    """Outcome of one extract attempt.

    Exactly one of three shapes: Ok (at least one state), Empty (well-formed
    response, nothing flying), or Failed (reason encoded, optional HTTP code).
    """

    fetched_at: float
    states: tuple[AircraftState, ...] = ()
    failure: FailureReason | None = None
    failure_code: int | None = None
    failure_detail: str | None = None

    def __post_init__(self) -> None:
        if self.failure is not None and self.states:
            raise ValueError("a failed extract cannot carry states")
        seen = set()
        for s in self.states:
            if s.icao24 in seen:
                raise ValueError(f"duplicate icao24 {s.icao24!r} in extract")
            seen.add(s.icao24)

    @property
    def is_ok(self) -> bool:
        return self.failure is None and len(self.states) > 0

    @property
    def is_empty(self) -> bool:
        return self.failure is None and len(self.states) == 0

    @property
    def is_failed(self) -> bool:
        return self.failure is not None

    @classmethod
    def of_states(cls, fetched_at: float, states: Iterable[AircraftState]) -> "ExtractResult":
        """Ok when non-empty, Empty otherwise."""
        return cls(fetched_at=fetched_at, states=tuple(states))

    @classmethod
    def failed(
        cls,
        fetched_at: float,
        reason: FailureReason,
        *,
        code: int | None = None,
        detail: str | None = None,
    ) -> "ExtractResult":
        return cls(fetched_at=fetched_at, failure=reason, failure_code=code, failure_detail=detail)


class ExtractSource(Protocol):
    def fetch(self, bbox: BoundingBox, now: float) -> ExtractResult: ...


def fetch_states(source: ExtractSource, bbox: BoundingBox, now: float) -> ExtractResult:
    """Run one extract against any source; all failures stay in the result."""
    try:
        return source.fetch(bbox, now)
    except Exception as exc:  # defensive: sources should not raise
        return ExtractResult.failed(now, FailureReason.PARSE_ERROR, detail=repr(exc))


# --- positional wire format (live REST layout) -------------------------------

# index layout of one row of the live response's "states" array
_ROW_LEN_MIN = 17
_ROW_LEN = 18


def parse_state_row(raw: list) -> AircraftState:
    """Map one positional state row to named fields.

    Nulls stay absent, icao24 is lowercased and trimmed, callsigns lose their
    padding. Rows shorter than 17 entries or without an icao24 are rejected.
    """
    if not isinstance(raw, (list, tuple)) or len(raw) < _ROW_LEN_MIN:
        raise StateParseError(f"state row too short: {raw!r}")
    icao24 = (raw[0] or "").strip().lower()
    if not icao24:
        raise StateParseError("state row missing icao24")
    callsign = raw[1].rstrip() if raw[1] else None
    if callsign == "":
        callsign = None

    def _f(i: int) -> float | None:
        return None if raw[i] is None else float(raw[i])

    try:
        return AircraftState(
            icao24=icao24,
            callsign=callsign,
            origin_country=raw[2] or "",
            time_position=_f(3),
            last_contact=float(raw[4]),
            longitude=_f(5),
            latitude=_f(6),
            baro_altitude=_f(7),
            on_ground=bool(raw[8]),
            velocity=_f(9),
            true_track=_f(10),
            vertical_rate=_f(11),
            geo_altitude=_f(13),
            spi=bool(raw[15]),
            category=int(raw[17]) if len(raw) > 17 and raw[17] is not None else 0,
        )
    except (TypeError, ValueError) as exc:
        raise StateParseError(f"bad state row {raw!r}: {exc}") from exc


def state_to_row(state: AircraftState) -> list:
    """Inverse of :func:`parse_state_row` (sensors/squawk/position_source slots null)."""
    return [
        state.icao24,
        state.callsign,
        state.origin_country,
        state.time_position,
        state.last_contact,
        state.longitude,
        state.latitude,
        state.baro_altitude,
        state.on_ground,
        state.velocity,
        state.true_track,
        state.vertical_rate,
        None,
        state.geo_altitude,
        None,
        state.spi,
        None,
        state.category,
    ]


# --- live REST source ---------------------------------------------------------


class LiveSource:
    """Polls ``{base}/states/all`` with bounding-box query parameters.

    Honors a minimum interval between real requests: a call that arrives
    sooner returns the previous result unchanged instead of hitting the
    network again.
    """

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        *,
        timeout_s: float = 10.0,
        min_interval_s: float = 10.0,
        token_env: str = TOKEN_ENV_VAR,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.min_interval_s = min_interval_s
        self.token_env = token_env
        self._session = session or requests.Session()
        self._last_request_at: float | None = None
        self._last_result: ExtractResult | None = None

    def fetch(self, bbox: BoundingBox, now: float) -> ExtractResult:
        if (
            self._last_result is not None
            and self._last_request_at is not None
            and now - self._last_request_at < self.min_interval_s
        ):
            return self._last_result
        result = self._request(bbox, now)
        self._last_request_at = now
        self._last_result = result
        return result

    def _request(self, bbox: BoundingBox, now: float) -> ExtractResult:
        params = {
            "lamin": bbox.lat_min,
            "lomin": bbox.lon_min,
            "lamax": bbox.lat_max,
            "lomax": bbox.lon_max,
        }
        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self._session.get(
                f"{self.base_url}/states/all",
                params=params,
                headers=headers,
                timeout=self.timeout_s,
            )
        except requests.Timeout:
            return ExtractResult.failed(now, FailureReason.TIMEOUT, detail="request timed out")
        except requests.RequestException as exc:
            return ExtractResult.failed(now, FailureReason.HTTP_ERROR, detail=repr(exc))
        if resp.status_code != 200:
            return ExtractResult.failed(
                now, FailureReason.HTTP_ERROR, code=resp.status_code, detail=resp.reason
            )
        try:
            body = resp.json()
            rows = body.get("states") if isinstance(body, dict) else None
        except ValueError as exc:
            return ExtractResult.failed(now, FailureReason.PARSE_ERROR, detail=repr(exc))
        if rows is None:
            rows = []
        states = []
        seen = set()
        for row in rows:
            try:
                state = parse_state_row(row)
            except StateParseError:
                continue  # one bad row does not poison a whole extract
            if state.icao24 in seen:
                continue
            seen.add(state.icao24)
            states.append(state)
        return ExtractResult.of_states(now, states)


# --- replay source --------------------------------------------------------------

_FAIL_KINDS = {"timeout", "http", "empty"}


@dataclass(frozen=True)
class ReplayRecord:
    t: float
    states: tuple[AircraftState, ...] = ()
    fail: str | None = None
    code: int | None = None

    def __post_init__(self) -> None:
        if self.fail is not None and self.fail not in _FAIL_KINDS:
            raise ValueError(f"unknown fail kind {self.fail!r}")


class ReplayTrace:
    """A recorded sequence of extract outcomes, one JSON object per line."""

    def __init__(self, records: Iterable[ReplayRecord]) -> None:
        self.records = list(records)

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def load(cls, path: str | Path) -> "ReplayTrace":
        records = []
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
                records.append(cls._record_from_dict(raw, where=f"{path}:{line_no}"))
        return cls(records)

    @staticmethod
    def _record_from_dict(raw: dict, where: str = "<record>") -> ReplayRecord:
        if "t" not in raw:
            raise ValueError(f"{where}: record missing 't'")
        if "fail" in raw and raw["fail"] is not None:
            return ReplayRecord(t=float(raw["t"]), fail=raw["fail"], code=raw.get("code"))
        states = tuple(AircraftState.from_dict(s) for s in raw.get("states", []))
        return ReplayRecord(t=float(raw["t"]), states=states)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                if rec.fail is not None:
                    obj: dict = {"t": rec.t, "fail": rec.fail}
                    if rec.code is not None:
                        obj["code"] = rec.code
                else:
                    obj = {"t": rec.t, "states": [s.to_dict() for s in rec.states]}
                fh.write(json.dumps(obj) + "\n")


class ReplaySource:
    """Replays a trace record-by-record; exhaustion is a failure, not an exception."""

    def __init__(self, trace: ReplayTrace) -> None:
        self.trace = trace
        self.cursor = 0

    @classmethod
    def from_path(cls, path: str | Path) -> "ReplaySource":
        return cls(ReplayTrace.load(path))

    def fetch(self, bbox: BoundingBox, now: float) -> ExtractResult:
        if self.cursor >= len(self.trace.records):
            return ExtractResult.failed(now, FailureReason.SOURCE_EXHAUSTED)
        rec = self.trace.records[self.cursor]
        self.cursor += 1
        if rec.fail == "timeout":
            return ExtractResult.failed(rec.t, FailureReason.TIMEOUT, detail="recorded")
        if rec.fail == "http":
            return ExtractResult.failed(
                rec.t, FailureReason.HTTP_ERROR, code=rec.code or 503, detail="recorded"
            )
        if rec.fail == "empty":
            return ExtractResult(fetched_at=rec.t)
        return ExtractResult.of_states(rec.t, rec.states)


# --- synthetic fleet -------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticAircraft:
    icao24: str
    latitude: float
    longitude: float
    altitude_m: float
    velocity: float
    true_track: float
    vertical_rate: float = 0.0


@dataclass(frozen=True)
class SyntheticFleetConfig:
    aircraft: tuple[SyntheticAircraft, ...]
    seed: int = 0
    jitter_max_s: float = 0.0
    accel_noise_std: float = 0.0

    def __post_init__(self) -> None:
        if self.jitter_max_s < 0:
            raise ValueError("jitter_max_s must be >= 0")
        if self.accel_noise_std < 0:
            raise ValueError("accel_noise_std must be >= 0")

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticFleetConfig":
        aircraft = tuple(SyntheticAircraft(**a) for a in raw["aircraft"])
        return cls(
            aircraft=aircraft,
            seed=int(raw.get("seed", 0)),
            jitter_max_s=float(raw.get("jitter_max_s", 0.0)),
            accel_noise_std=float(raw.get("accel_noise_std", 0.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticFleetConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class _AircraftTrack:
    """Mutable per-aircraft kinematic state inside the synthetic source."""

    __slots__ = ("spec", "reported_at", "lat", "lon", "alt", "velocity", "track", "rng")

    def __init__(self, spec: SyntheticAircraft, rng: np.random.Generator) -> None:
        self.spec = spec
        self.reported_at: float | None = None
        self.lat = spec.latitude
        self.lon = spec.longitude
        self.alt = spec.altitude_m
        self.velocity = spec.velocity
        self.track = spec.true_track
        self.rng = rng


class SyntheticSource:
    """Deterministic moving fleet sharing the projector's kinematics.

    Aircraft advance from their previous report with exactly the displacement
    and coordinate conversion the projection stage uses, so with zero noise a
    dead-reckoned old report reproduces the new one bit for bit. Per-aircraft
    report timestamps lag the tick by a seeded jitter to mimic unsynchronized
    transponder measurements; optional acceleration noise perturbs the velocity
    vector between reports.

    Results depend on the sequence of tick times queried (the fleet steps at
    each new tick); repeating the last tick time returns the cached result.
    """

    def __init__(self, config: SyntheticFleetConfig) -> None:
        self.config = config
        self._tracks = [
            _AircraftTrack(spec, np.random.default_rng([config.seed, i]))
            for i, spec in enumerate(config.aircraft)
        ]
        self._last_tick: float | None = None
        self._last_result: ExtractResult | None = None

    def fetch(self, bbox: BoundingBox, now: float) -> ExtractResult:
        # the fleet defines its own geography; the bbox is not applied
        return self.tick(now)

    def tick(self, tick_time: float) -> ExtractResult:
        if self._last_tick is not None:
            if tick_time == self._last_tick:
                assert self._last_result is not None
                return self._last_result
            if tick_time < self._last_tick:
                raise ValueError(
                    f"synthetic fleet cannot move backwards: {tick_time} < {self._last_tick}"
                )
        states = tuple(
            self._advance(i, track, tick_time) for i, track in enumerate(self._tracks)
        )
        result = ExtractResult.of_states(tick_time, states)
        self._last_tick = tick_time
        self._last_result = result
        return result

    def _advance(self, index: int, track: _AircraftTrack, tick_time: float) -> AircraftState:
        jitter = self._jitter(index, tick_time)
        if track.reported_at is None:
            track.reported_at = tick_time - jitter
        else:
            reported_at = max(track.reported_at, tick_time - jitter)
            dt = reported_at - track.reported_at
            if dt > 0:
                if self.config.accel_noise_std > 0:
                    self._perturb(track, dt)
                d_north, d_east, d_up = projection.displacement(
                    track.velocity, track.track, track.spec.vertical_rate, dt
                )
                track.lat, track.lon, track.alt = projection.apply_enu(
                    track.lat, track.lon, track.alt, d_north, d_east, d_up
                )
            track.reported_at = reported_at
        return AircraftState(
            icao24=track.spec.icao24,
            callsign=f"SYN{index:04d}",
            origin_country="synthetic",
            time_position=track.reported_at,
            last_contact=tick_time,
            longitude=track.lon,
            latitude=track.lat,
            baro_altitude=track.alt,
            on_ground=False,
            velocity=track.velocity,
            true_track=track.track,
            vertical_rate=track.spec.vertical_rate,
            geo_altitude=track.alt,
            spi=False,
            category=0,
        )

    def _jitter(self, index: int, tick_time: float) -> float:
        if self.config.jitter_max_s <= 0:
            return 0.0
        rng = np.random.default_rng(
            [self.config.seed, index, int(round(tick_time * 1e6)) & 0x7FFFFFFFFFFFFFFF]
        )
        return float(rng.uniform(0.0, self.config.jitter_max_s))

    def _perturb(self, track: _AircraftTrack, dt: float) -> None:
        # acceleration noise on the velocity vector: along-track and cross-track
        a_along, a_cross = track.rng.normal(0.0, self.config.accel_noise_std, 2)
        rad = math.radians(track.track)
        vn = track.velocity * math.cos(rad) + (a_along * math.cos(rad) - a_cross * math.sin(rad)) * dt
        ve = track.velocity * math.sin(rad) + (a_along * math.sin(rad) + a_cross * math.cos(rad)) * dt
        track.velocity = math.hypot(vn, ve)
        track.track = math.degrees(math.atan2(ve, vn)) % 360.0


def synth_tick(source: SyntheticSource, tick_time: float) -> ExtractResult:
    return source.tick(tick_time)


# --- canned fleet ----------------------------------------------------------------

# rough positions of busy UK terminal areas; blob centers for generated fleets
_UK_BLOBS = (
    (51.47, -0.45),
    (53.35, -2.28),
    (55.95, -3.36),
    (52.45, -1.74),
    (54.65, -6.22),
)


def uk_demo_fleet(
    n: int,
    seed: int = 0,
    *,
    accel_noise_std: float = 0.0,
    jitter_max_s: float = 0.0,
    blob_spread_deg: float = 0.35,
    n_blobs: int | None = None,
) -> SyntheticFleetConfig:
    """A reproducible fleet clustered around UK terminal areas."""
    if n < 1:
        raise ValueError("fleet needs at least one aircraft")
    rng = np.random.default_rng([seed, 0xF1EE7])
    blobs = _UK_BLOBS[: (n_blobs or len(_UK_BLOBS))]
    aircraft = []
    for i in range(n):
        blat, blon = blobs[i % len(blobs)]
        lat = blat + rng.normal(0.0, blob_spread_deg)
        lon = blon + rng.normal(0.0, blob_spread_deg * 1.4)
        alt = 8000.0 + (i % len(blobs)) * 600.0 + rng.uniform(-400.0, 400.0)
        aircraft.append(
            SyntheticAircraft(
                icao24=f"{i:06x}",
                latitude=float(np.clip(lat, 49.0, 61.0)),
                longitude=float(np.clip(lon, -9.5, 2.5)),
                altitude_m=float(alt),
                velocity=float(rng.uniform(180.0, 260.0)),
                true_track=float(rng.uniform(0.0, 360.0)),
                vertical_rate=float(np.clip(rng.normal(0.0, 1.5), -8.0, 8.0)),
            )
        )
    return SyntheticFleetConfig(
        aircraft=tuple(aircraft),
        seed=seed,
        jitter_max_s=jitter_max_s,
        accel_noise_std=accel_noise_std,
    )


__all__ = [
    "AircraftState",
    "BoundingBox",
    "ExtractResult",
    "ExtractSource",
    "FailureReason",
    "LiveSource",
    "ReplayRecord",
    "ReplaySource",
    "ReplayTrace",
    "StateParseError",
    "SyntheticAircraft",
    "SyntheticFleetConfig",
    "SyntheticSource",
    "fetch_states",
    "parse_state_row",
    "state_to_row",
    "synth_tick",
    "uk_demo_fleet",
]
