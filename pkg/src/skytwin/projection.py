"""Dead-reckoning projection of aircraft states to a common target time.

Each aircraft reports its position with its own measurement timestamp, so a
snapshot taken at time T has to correct every position forward to T before the
states are comparable. The correction is linear kinematics from the reported
ground speed, track and vertical rate, applied on a locally-flat (equirectangular)
Earth of mean radius 6 371 000 m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from skytwin.ingest import AircraftState

EARTH_RADIUS_M = 6_371_000.0

# degrees of latitude per meter travelled north
_DEG_PER_METER = 180.0 / (math.pi * EARTH_RADIUS_M)

# poleward of this the equirectangular longitude conversion blows up
_LAT_LIMIT_DEG = 89.5


class Provenance(str, Enum):
    """Whether a projected record reflects a fresh measurement or an extrapolation."""

    MEASURED = "measured"
    PROJECTED = "projected"


class SkipReason(str, Enum):
    NO_POSITION = "no_position"
    TOO_STALE = "too_stale"


@dataclass(frozen=True)
class ProjectedState:
    """An aircraft state corrected to ``target_time``."""

    base: AircraftState
    target_time: float
    delta_t: float
    latitude: float
    longitude: float
    altitude: float
    provenance: Provenance
    stale: bool

    @property
    def icao24(self) -> str:
        return self.base.icao24


def displacement(
    velocity: float, true_track: float, vertical_rate: float, delta_t: float
) -> tuple[float, float, float]:
    """Kinematic displacement over ``delta_t`` seconds, in meters.

    Returns (d_north, d_east, d_up). The track is measured in degrees clockwise
    from true north, so the cosine term is the north component and the sine
    term the east component. Exactly linear in ``delta_t``.
    """
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t}")
    if velocity < 0:
        raise ValueError(f"velocity must be >= 0, got {velocity}")
    track_rad = math.radians(true_track)
    d_north = velocity * math.cos(track_rad) * delta_t
    d_east = velocity * math.sin(track_rad) * delta_t
    d_up = vertical_rate * delta_t
    return d_north, d_east, d_up


def apply_enu(
    lat: float,
    lon: float,
    alt: float,
    d_north: float,
    d_east: float,
    d_up: float,
) -> tuple[float, float, float]:
    """Apply a local east-north-up displacement (meters) to geodetic coordinates.

    Equirectangular model: one degree of latitude is pi*R/180 meters everywhere
    and one degree of longitude shrinks with cos(lat). Longitude wraps into
    [-180, 180); altitude clamps at ground level (0 m).
    """
    if abs(lat) >= _LAT_LIMIT_DEG:
        raise ValueError(f"latitude {lat} too close to the pole for local ENU")
    new_lat = lat + d_north * _DEG_PER_METER
    new_lon = lon + d_east * _DEG_PER_METER / math.cos(math.radians(lat))
    if new_lon < -180.0 or new_lon >= 180.0:
        new_lon = (new_lon + 180.0) % 360.0 - 180.0
    new_alt = max(0.0, alt + d_up)
    return new_lat, new_lon, new_alt


def base_altitude(state: AircraftState) -> float:
    """Best available altitude: geometric, else barometric, else ground level."""
    if state.geo_altitude is not None:
        return state.geo_altitude
    if state.baro_altitude is not None:
        return state.baro_altitude
    return 0.0


def project_state(
    state: AircraftState,
    target_time: float,
    t_max: float,
    *,
    measured_epsilon: float = 0.5,
    fresh: bool = True,
    exclude_stale: bool = False,
) -> ProjectedState | SkipReason:
    """Correct one aircraft state to ``target_time``.

    Missing position skips the aircraft. Missing velocity or track holds the
    horizontal position (altitude is still projected from the vertical rate).
    ``delta_t`` is clamped at 0 so minor clock skew never projects backwards.
    A state older than ``t_max`` is flagged stale; it is only rejected when the
    caller asks for ``exclude_stale``.

    ``fresh`` is whether this state came straight from a successful extract,
    a precondition for the record counting as measured.
    """
    if state.longitude is None or state.latitude is None:
        return SkipReason.NO_POSITION
    observed_at = state.time_position if state.time_position is not None else state.last_contact
    delta_t = max(0.0, target_time - observed_at)
    stale = delta_t > t_max
    if exclude_stale and stale:
        return SkipReason.TOO_STALE

    alt = base_altitude(state)
    if state.velocity is None or state.true_track is None:
        d_up = state.vertical_rate * delta_t if state.vertical_rate is not None else 0.0
        lat, lon, alt = apply_enu(state.latitude, state.longitude, alt, 0.0, 0.0, d_up)
    else:
        vr = state.vertical_rate if state.vertical_rate is not None else 0.0
        d_north, d_east, d_up = displacement(state.velocity, state.true_track, vr, delta_t)
        lat, lon, alt = apply_enu(state.latitude, state.longitude, alt, d_north, d_east, d_up)

    provenance = (
        Provenance.MEASURED if fresh and delta_t <= measured_epsilon else Provenance.PROJECTED
    )
    return ProjectedState(
        base=state,
        target_time=target_time,
        delta_t=delta_t,
        latitude=lat,
        longitude=lon,
        altitude=alt,
        provenance=provenance,
        stale=stale,
    )
