"""Cell map loading, validation and spatial queries.

A map is a bounded plane (A4 landscape by default) carrying named polygonal
organelle zones over a single background zone (the cytosol).  Maps are
immutable after load and safe to share between threads.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from importlib import resources
from pathlib import Path

from .geometry import (
    Vec2,
    is_simple_polygon,
    point_in_polygon,
    polygon_centroid,
    signed_area,
    polygons_interiors_overlap,
)

DEFAULT_MAP_RESOURCE = "cell_a4.map.json"
MAP_SCHEMA_VERSION = 1


class MapFormatError(ValueError):
    """The document is not a well-formed map file."""


class MapValidationError(ValueError):
    """The document parsed but violates a map invariant."""


class ZoneKind(str, Enum):
    ORGANELLE = "organelle"
    BACKGROUND = "background"


@dataclass(frozen=True)
class Zone:
    id: str
    name: str
    kind: ZoneKind
    polygon: tuple[Vec2, ...]
    color: tuple[int, int, int]
    info_text: str

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y) of the polygon."""
        xs = [v.x_mm for v in self.polygon]
        ys = [v.y_mm for v in self.polygon]
        return (min(xs), min(ys), max(xs), max(ys))


@dataclass(frozen=True)
class ZoneMap:
    width_mm: float
    height_mm: float
    zones: tuple[Zone, ...]
    background_zone_id: str

    def zone(self, zone_id: str) -> Zone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise KeyError(f"unknown zone id: {zone_id!r}")

    @property
    def organelles(self) -> tuple[Zone, ...]:
        return tuple(z for z in self.zones if z.kind is ZoneKind.ORGANELLE)

    def contains(self, p: Vec2) -> bool:
        return 0.0 <= p.x_mm <= self.width_mm and 0.0 <= p.y_mm <= self.height_mm

    def clamped(self, p: Vec2) -> Vec2:
        x = min(max(p.x_mm, 0.0), self.width_mm)
        y = min(max(p.y_mm, 0.0), self.height_mm)
        return Vec2(x, y)


def load_map(document: bytes | str) -> ZoneMap:
    """Parse and validate a map document (UTF-8 JSON)."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MapFormatError(f"map file is not UTF-8: {exc}") from None
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MapFormatError(f"malformed map JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise MapFormatError("map document must be a JSON object")
    if raw.get("version") != MAP_SCHEMA_VERSION:
        raise MapFormatError(f"unsupported map version: {raw.get('version')!r}")

    try:
        width = float(raw["width_mm"])
        height = float(raw["height_mm"])
        zones_raw = raw["zones"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MapFormatError(f"missing or invalid map field: {exc}") from None
    if not isinstance(zones_raw, list):
        raise MapFormatError("zones must be a list")
    if width <= 0 or height <= 0:
        raise MapValidationError("map dimensions must be positive")

    zones = []
    for entry in zones_raw:
        zones.append(_parse_zone(entry))
    return _validated(width, height, tuple(zones))


def load_map_file(path: str | Path) -> ZoneMap:
    return load_map(Path(path).read_bytes())


def dump_map(zone_map: ZoneMap) -> str:
    """Serialize back to the map file schema; load_map round-trips it."""
    doc = {
        "version": MAP_SCHEMA_VERSION,
        "width_mm": zone_map.width_mm,
        "height_mm": zone_map.height_mm,
        "zones": [
            {
                "id": z.id,
                "name": z.name,
                "kind": z.kind.value,
                "polygon": [[v.x_mm, v.y_mm] for v in z.polygon],
                "color": list(z.color),
                "info_text": z.info_text,
            }
            for z in zone_map.zones
        ],
    }
    return json.dumps(doc, indent=2)


def default_map_bytes() -> bytes:
    return resources.files("tactix.data").joinpath(DEFAULT_MAP_RESOURCE).read_bytes()


def load_default_map() -> ZoneMap:
    return load_map(default_map_bytes())


def map_sha256(document: bytes) -> str:
    """Hex digest identifying a map file; both parties must agree on it."""
    return hashlib.sha256(document).hexdigest()


def locate(zone_map: ZoneMap, p: Vec2) -> str:
    """Zone id under point p: first organelle containing it, else background.

    Boundary points count as inside; ties between touching organelles go to
    the zone earliest in file order.  Out-of-bounds points are an error
    (callers clamp first).
    """
    if not zone_map.contains(p):
        raise ValueError(
            f"point ({p.x_mm}, {p.y_mm}) outside map bounds "
            f"{zone_map.width_mm}x{zone_map.height_mm}"
        )
    for z in zone_map.zones:
        if z.kind is not ZoneKind.ORGANELLE:
            continue
        bx0, by0, bx1, by1 = z.bbox
        # Cheap reject, padded by the boundary tolerance.
        if not (bx0 - 1e-9 <= p.x_mm <= bx1 + 1e-9 and by0 - 1e-9 <= p.y_mm <= by1 + 1e-9):
            continue
        if point_in_polygon(p, z.polygon):
            return z.id
    return zone_map.background_zone_id


def zone_centroid(zone_map: ZoneMap, zone_id: str) -> Vec2:
    """Area centroid of an organelle polygon."""
    z = zone_map.zone(zone_id)
    if z.kind is ZoneKind.BACKGROUND:
        raise ValueError(f"background zone {zone_id!r} has no centroid")
    return polygon_centroid(z.polygon)


def _parse_zone(entry: object) -> Zone:
    if not isinstance(entry, dict):
        raise MapFormatError("zone entry must be an object")
    try:
        zone_id = entry["id"]
        kind = ZoneKind(entry["kind"])
        polygon_raw = entry.get("polygon", [])
        color_raw = entry.get("color", [128, 128, 128])
    except (KeyError, ValueError) as exc:
        raise MapFormatError(f"bad zone entry: {exc}") from None
    if not isinstance(zone_id, str) or not zone_id:
        raise MapFormatError("zone id must be a non-empty string")
    try:
        polygon = tuple(Vec2(float(x), float(y)) for x, y in polygon_raw)
        color = tuple(int(c) for c in color_raw)
    except (TypeError, ValueError) as exc:
        raise MapFormatError(f"bad geometry or color in zone {zone_id!r}: {exc}") from None
    if len(color) != 3 or any(c < 0 or c > 255 for c in color):
        raise MapFormatError(f"zone {zone_id!r}: color must be three 0-255 values")
    return Zone(
        id=zone_id,
        name=str(entry.get("name", zone_id)),
        kind=kind,
        polygon=polygon,
        color=color,  # type: ignore[arg-type]
        info_text=str(entry.get("info_text", "")),
    )


def _validated(width: float, height: float, zones: tuple[Zone, ...]) -> ZoneMap:
    ids = [z.id for z in zones]
    if len(set(ids)) != len(ids):
        raise MapValidationError("duplicate zone ids")

    backgrounds = [z for z in zones if z.kind is ZoneKind.BACKGROUND]
    if not backgrounds:
        raise MapValidationError("no background zone")
    if len(backgrounds) > 1:
        raise MapValidationError("more than one background zone")
    if backgrounds[0].polygon:
        raise MapValidationError("background zone must not carry a polygon")

    organelles = [z for z in zones if z.kind is ZoneKind.ORGANELLE]
    for z in organelles:
        if len(z.polygon) < 3:
            raise MapValidationError(f"zone {z.id!r}: polygon needs at least 3 vertices")
        for v in z.polygon:
            if not (0.0 <= v.x_mm <= width and 0.0 <= v.y_mm <= height):
                raise MapValidationError(
                    f"zone {z.id!r}: vertex ({v.x_mm}, {v.y_mm}) out of bounds"
                )
        if not is_simple_polygon(z.polygon):
            raise MapValidationError(f"zone {z.id!r}: polygon is self-intersecting")
        if signed_area(z.polygon) <= 0.0:
            raise MapValidationError(f"zone {z.id!r}: polygon winding must be counter-clockwise")

    for i in range(len(organelles)):
        for j in range(i + 1, len(organelles)):
            if polygons_interiors_overlap(organelles[i].polygon, organelles[j].polygon):
                raise MapValidationError(
                    f"zones overlap: {organelles[i].id!r} and {organelles[j].id!r}"
                )

    return ZoneMap(
        width_mm=width,
        height_mm=height,
        zones=zones,
        background_zone_id=backgrounds[0].id,
    )
