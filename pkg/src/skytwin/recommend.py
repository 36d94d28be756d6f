"""Core network recommendation per aircraft cluster.

The selection rule is deliberately small and swappable: pick the registered
core network whose ground anchor is nearest to the cluster centroid, with a
relative hysteresis margin so a cluster does not flap between two networks
that are almost equally good.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class CoreNetwork:
    id: str
    name: str
    anchor_lat: float
    anchor_lon: float


@dataclass(frozen=True)
class CoreNetworkRegistry:
    entries: tuple[CoreNetwork, ...]
    hysteresis: float = 0.05

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("registry needs at least one core network")
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("core network ids must be unique")
        if not 0.0 <= self.hysteresis < 1.0:
            raise ValueError(f"hysteresis {self.hysteresis} must be in [0, 1)")

    def ids(self) -> set[str]:
        return {e.id for e in self.entries}

    @classmethod
    def from_entries(cls, entries: Iterable[dict], hysteresis: float = 0.05) -> "CoreNetworkRegistry":
        return cls(
            entries=tuple(
                CoreNetwork(
                    id=e["id"],
                    name=e.get("name", e["id"]),
                    anchor_lat=float(e["anchor_lat"]),
                    anchor_lon=float(e["anchor_lon"]),
                )
                for e in entries
            ),
            hysteresis=hysteresis,
        )

    @classmethod
    def load(cls, path: str | Path, hysteresis: float = 0.05) -> "CoreNetworkRegistry":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_entries(json.load(fh), hysteresis=hysteresis)


# demo anchors near major UK ground infrastructure; configuration, not ground truth
DEFAULT_REGISTRY = CoreNetworkRegistry(
    entries=(
        CoreNetwork("uk-south", "UK South core", 51.47, -0.45),
        CoreNetwork("uk-mid", "UK Midlands core", 53.35, -2.28),
        CoreNetwork("uk-north", "UK North core", 55.95, -3.36),
    )
)


@dataclass(frozen=True)
class Recommendation:
    cluster_identity: int
    network_id: str
    centroid_geo: tuple[float, float, float]
    distance_m: float
    tick_time: float
    switched: bool


def great_circle(p1: tuple[float, float], p2: tuple[float, float]) -> float:
    """Haversine distance in meters between two (lat, lon) points."""
    lat1, lon1 = math.radians(p1[0]), math.radians(p1[1])
    lat2, lon2 = math.radians(p2[0]), math.radians(p2[1])
    a = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def recommend(
    centroid_geo: tuple[float, float, float],
    registry: CoreNetworkRegistry,
    previous: Recommendation | None = None,
    *,
    cluster_identity: int = 0,
    tick_time: float = 0.0,
) -> Recommendation:
    """Nearest-anchor selection with relative hysteresis.

    The incumbent network keeps the cluster unless the best candidate is
    closer by more than the hysteresis fraction: switch only when
    d_candidate < (1 - h) * d_incumbent. Distance ties break on the
    lexicographically smallest network id.
    """
    point = (centroid_geo[0], centroid_geo[1])
    ranked = sorted(
        ((great_circle(point, (e.anchor_lat, e.anchor_lon)), e.id) for e in registry.entries)
    )
    cand_dist, cand_id = ranked[0]

    if previous is not None and previous.network_id in registry.ids():
        if previous.network_id == cand_id:
            return Recommendation(
                cluster_identity, cand_id, centroid_geo, cand_dist, tick_time, switched=False
            )
        incumbent = next(e for e in registry.entries if e.id == previous.network_id)
        inc_dist = great_circle(point, (incumbent.anchor_lat, incumbent.anchor_lon))
        if cand_dist < (1.0 - registry.hysteresis) * inc_dist:
            return Recommendation(
                cluster_identity, cand_id, centroid_geo, cand_dist, tick_time, switched=True
            )
        return Recommendation(
            cluster_identity, previous.network_id, centroid_geo, inc_dist, tick_time, switched=False
        )

    return Recommendation(
        cluster_identity, cand_id, centroid_geo, cand_dist, tick_time, switched=False
    )
