"""Gripper layout and object/DSE engagement geometry.

All lengths are millimetres and all angles radians unless a field name says
otherwise (``theta_seal_deg``).

Contact model
-------------
The jammed membrane wraps a sphere of radius ``R`` conformally: a point at
meridian arc ``s`` from the membrane apex lands on the sphere at polar angle
``beta = s / R``.  The wrap is limited twice: it cannot pass the sphere's
equator, and it cannot reach more than ``wrap_depth`` below the sphere's
lowest point.  Together these give the contact extent

    s_c(R) = R * min(pi/2, arccos(1 - h/R))

and a DSE engages iff its arc position lies strictly inside ``s_c``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import NamedTuple, Sequence

from .errors import ConfigurationError, UnsupportedObjectError

# ties closer than this count as "not engaged"
ENGAGEMENT_MARGIN_MM = 1e-9

_DEFAULT_RING_ANGLES = (0.0, math.pi / 6, math.pi / 3, math.pi / 2)
_DEFAULT_RING_COUNTS = (1, 6, 6, 6)


@dataclass(frozen=True)
class GripperGeometry:
    membrane_diameter: float = 30.0
    membrane_thickness: float = 0.8
    cup_radius: float = 2.5
    cup_effective_diameter: float = 5.0
    capillary_inner_diameter: float = 0.3
    cup_profile_arc_length: float = 5.0
    ring_polar_angles: tuple = _DEFAULT_RING_ANGLES
    ring_counts: tuple = _DEFAULT_RING_COUNTS
    theta_seal_deg: float = 9.2
    wrap_depth: float = 6.5

    def __post_init__(self):
        object.__setattr__(self, "ring_polar_angles", tuple(float(a) for a in self.ring_polar_angles))
        object.__setattr__(self, "ring_counts", tuple(int(c) for c in self.ring_counts))
        self.validate()

    def validate(self) -> None:
        lengths = {
            "membrane_diameter": self.membrane_diameter,
            "membrane_thickness": self.membrane_thickness,
            "cup_radius": self.cup_radius,
            "cup_effective_diameter": self.cup_effective_diameter,
            "capillary_inner_diameter": self.capillary_inner_diameter,
            "cup_profile_arc_length": self.cup_profile_arc_length,
            "wrap_depth": self.wrap_depth,
        }
        for name, value in lengths.items():
            if not (value > 0 and math.isfinite(value)):
                raise ConfigurationError(f"{name} must be a positive finite length, got {value!r}")
        if self.capillary_inner_diameter >= 2 * self.cup_radius:
            raise ConfigurationError("capillary_inner_diameter must be smaller than the cup diameter")
        angles, counts = self.ring_polar_angles, self.ring_counts
        if len(angles) != len(counts) or not angles:
            raise ConfigurationError("ring_polar_angles and ring_counts must be non-empty and the same length")
        if angles[0] != 0.0 or counts[0] != 1:
            raise ConfigurationError("ring 0 must be the single central DSE at polar angle 0")
        if any(c < 0 for c in counts):
            raise ConfigurationError("ring_counts must be non-negative")
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise ConfigurationError("ring_polar_angles must be strictly increasing")
        if angles[-1] > math.pi / 2:
            raise ConfigurationError("ring_polar_angles must lie in [0, pi/2]")
        if not (0.0 <= self.theta_seal_deg < 90.0):
            raise ConfigurationError("theta_seal_deg must lie in [0, 90)")

    @property
    def membrane_radius(self) -> float:
        return self.membrane_diameter / 2

    @property
    def n_dse(self) -> int:
        return sum(self.ring_counts)

    @classmethod
    def from_dict(cls, data: dict) -> "GripperGeometry":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown geometry field(s): {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class DseLayout:
    dse_id: int
    ring_index: int
    axis_polar_angle: float
    axis_azimuth: float
    neighbors: frozenset = field(default_factory=frozenset)


class ObjectKind(enum.Enum):
    SPHERE = "sphere"
    FLAT = "flat"
    LIQUID = "liquid"


@dataclass(frozen=True)
class ObjectSpec:
    """Grasp target.  ``size`` is the sphere diameter or flat-top extent (mm)."""

    kind: ObjectKind
    size: float | None = None
    mass: float = 0.0
    density: float | None = None
    conductive: bool = True

    def __post_init__(self):
        if self.kind is ObjectKind.LIQUID:
            if self.density is None or not self.density > 0:
                raise ConfigurationError("liquid density must be > 0")
        else:
            if self.size is None or not self.size > 0:
                raise ConfigurationError(f"{self.kind.value} size must be > 0")
            if self.mass < 0:
                raise ConfigurationError("mass must be >= 0")

    @classmethod
    def sphere(cls, diameter: float, mass: float = 0.0) -> "ObjectSpec":
        return cls(ObjectKind.SPHERE, size=float(diameter), mass=float(mass))

    @classmethod
    def flat(cls, extent: float = 100.0, mass: float = 0.0) -> "ObjectSpec":
        return cls(ObjectKind.FLAT, size=float(extent), mass=float(mass))

    @classmethod
    def liquid(cls, density: float, conductive: bool = True) -> "ObjectSpec":
        return cls(ObjectKind.LIQUID, density=float(density), conductive=bool(conductive))

    @property
    def is_solid(self) -> bool:
        return self.kind is not ObjectKind.LIQUID

    @property
    def diameter(self) -> float:
        if self.kind is not ObjectKind.SPHERE:
            raise AttributeError("only spheres have a diameter")
        return self.size


class Regime(enum.Enum):
    CAPILLARY_ONLY = "CapillaryOnly"
    PARTIAL_CUP = "PartialCup"
    MULTI_DSE = "MultiDse"
    FLAT = "Flat"


class EngagedDse(NamedTuple):
    dse_id: int
    beta: float
    theta_c: float


@dataclass(frozen=True)
class ContactSolution:
    engaged: tuple
    regime: Regime
    membrane_contact_angle: float = 0.0

    @property
    def n_engaged(self) -> int:
        return len(self.engaged)

    @property
    def engaged_ids(self) -> list:
        return [e.dse_id for e in self.engaged]


def build_layout(geometry: GripperGeometry) -> list[DseLayout]:
    """Place every DSE on its ring and wire the adjacency graph.

    Ring 1 starts at azimuth 0; every later ring is offset by half its own
    spacing from the previous ring so each inner DSE sits between two outer
    ones.  Adjacency: centre to all of ring 1, consecutive DSEs within a ring,
    and each DSE to the two azimuthally nearest DSEs of the next ring.
    """
    geometry.validate()
    placed = []  # (ring_index, polar, azimuth)
    rings = []   # list of id lists per ring
    offset = 0.0
    first_outer = True
    for ring_index, (polar, count) in enumerate(zip(geometry.ring_polar_angles, geometry.ring_counts)):
        ids = []
        if ring_index > 0 and count > 0:
            spacing = 2 * math.pi / count
            if first_outer:
                offset = 0.0
                first_outer = False
            else:
                offset = (offset + spacing / 2) % (2 * math.pi)
        for j in range(count):
            azimuth = 0.0 if ring_index == 0 else (offset + j * 2 * math.pi / count) % (2 * math.pi)
            ids.append(len(placed))
            placed.append((ring_index, polar, azimuth))
        rings.append(ids)

    adjacency = {i: set() for i in range(len(placed))}

    def link(a, b):
        if a != b:
            adjacency[a].add(b)
            adjacency[b].add(a)

    nonempty = [ids for ids in rings if ids]
    for inner, outer in zip(nonempty, nonempty[1:]):
        for i in inner:
            if len(inner) == 1:
                nearest = outer
            else:
                az = placed[i][2]
                nearest = sorted(outer, key=lambda k: (round(_angular_distance(az, placed[k][2]), 12), k))[:2]
            for k in nearest:
                link(i, k)
    for ids in nonempty[1:]:
        if len(ids) > 1:
            for j, i in enumerate(ids):
                link(i, ids[(j + 1) % len(ids)])

    return [
        DseLayout(dse_id=i, ring_index=r, axis_polar_angle=p, axis_azimuth=a, neighbors=frozenset(adjacency[i]))
        for i, (r, p, a) in enumerate(placed)
    ]


def _angular_distance(a: float, b: float) -> float:
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def adjacency_map(layout: Sequence[DseLayout]) -> dict[int, frozenset]:
    return {d.dse_id: d.neighbors for d in layout}


def rotation_permutation(layout: Sequence[DseLayout], steps: int = 1) -> list[int]:
    """Map ``dse_id -> dse_id`` for the smallest rotational symmetry of the layout.

    The rotation angle is ``2*pi/g`` with ``g`` the gcd of the non-empty outer
    ring counts; applied ``steps`` times.
    """
    rings: dict[int, list[DseLayout]] = {}
    for d in layout:
        rings.setdefault(d.ring_index, []).append(d)
    outer = [len(v) for k, v in rings.items() if k > 0]
    if not outer:
        return [d.dse_id for d in layout]
    g = reduce(math.gcd, outer)
    perm = list(range(len(layout)))
    for ring_index, members in rings.items():
        if ring_index == 0:
            continue
        members = sorted(members, key=lambda d: d.dse_id)
        shift = steps * len(members) // g
        for j, d in enumerate(members):
            perm[d.dse_id] = members[(j + shift) % len(members)].dse_id
    return perm


def seal_threshold_diameter(geometry: GripperGeometry) -> float:
    """Largest object diameter sealed by the capillary tip alone (mm)."""
    return 2 * geometry.cup_radius * math.sin(math.radians(geometry.theta_seal_deg))


def contact_extent(radius: float, geometry: GripperGeometry) -> float:
    """Membrane arc length (mm, from the apex) in contact with a sphere."""
    ratio = 1 - geometry.wrap_depth / radius
    depth_limited = math.acos(ratio) if ratio > -1 else math.pi
    return radius * min(math.pi / 2, depth_limited)


def membrane_contact_angle(radius: float, geometry: GripperGeometry) -> float:
    """Polar half-angle of the membrane cap in contact with a sphere."""
    return min(math.pi / 2, contact_extent(radius, geometry) / geometry.membrane_radius)


def cup_contact_angle(radius: float, geometry: GripperGeometry) -> float:
    """Half central angle subtended on the object by one cup profile."""
    return min(math.pi / 2, geometry.cup_profile_arc_length / (2 * radius))


def solve_contact(obj: ObjectSpec, geometry: GripperGeometry, layout: Sequence[DseLayout] | None = None) -> ContactSolution:
    if not obj.is_solid:
        raise UnsupportedObjectError("liquids have no solid contact; use the liquid detector path")
    if layout is None:
        layout = build_layout(geometry)

    if obj.kind is ObjectKind.FLAT:
        engaged = tuple(EngagedDse(d.dse_id, 0.0, math.pi / 2) for d in layout)
        return ContactSolution(engaged, Regime.FLAT, membrane_contact_angle=math.pi / 2)

    d = obj.diameter
    radius = d / 2
    theta_c = cup_contact_angle(radius, geometry)
    if d < geometry.cup_effective_diameter:
        regime = Regime.CAPILLARY_ONLY if d < seal_threshold_diameter(geometry) else Regime.PARTIAL_CUP
        return ContactSolution((EngagedDse(0, 0.0, theta_c),), regime)

    extent = contact_extent(radius, geometry)
    engaged = []
    for dse in layout:
        s = geometry.membrane_radius * dse.axis_polar_angle
        if s == 0.0 or s < extent - ENGAGEMENT_MARGIN_MM:
            engaged.append(EngagedDse(dse.dse_id, s / radius, theta_c))
    return ContactSolution(tuple(engaged), Regime.MULTI_DSE,
                           membrane_contact_angle=membrane_contact_angle(radius, geometry))
