"""Analytical grasp-force model: capillary suction, cup suction, jamming
friction and multi-DSE superposition.

Inputs use mm / kPa; every force is returned in newtons.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from scipy import integrate

from .errors import ConfigurationError, DomainError, UngraspableObjectError, UnsupportedObjectError
from .geometry import (
    ContactSolution,
    GripperGeometry,
    ObjectKind,
    ObjectSpec,
    Regime,
    seal_threshold_diameter,
    solve_contact,
)

MM = 1e-3
KPA = 1e3
ATMOSPHERE_KPA = 101.325

FRICTION_AGREEMENT_RTOL = 1e-9


class Actuation(enum.Enum):
    SYNERGISTIC = "Synergistic"
    SUCTION_ONLY = "SuctionOnly"
    JAMMING_ONLY = "JammingOnly"


class ForceMode(enum.Enum):
    MODE1 = "Mode1"
    MODE2 = "Mode2"
    MODE3 = "Mode3"


@dataclass(frozen=True)
class MaterialParams:
    """Free model parameters.

    ``k_syn`` is an empirical gain on the friction term in synergistic
    actuation only; 1.0 keeps the model purely additive.
    """

    mu: float = 0.6
    sigma0: float = 10.0  # kPa
    P_c: float = 80.0  # kPa, vacuum magnitude
    k_syn: float = 1.0

    def __post_init__(self):
        if not self.mu >= 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if not self.sigma0 >= 0:
            raise ConfigurationError(f"sigma0 must be >= 0, got {self.sigma0}")
        if not 0 <= self.P_c <= ATMOSPHERE_KPA:
            raise ConfigurationError(f"P_c must lie in [0, {ATMOSPHERE_KPA}] kPa, got {self.P_c}")
        if not self.k_syn >= 0:
            raise ConfigurationError("k_syn must be >= 0")

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma0_kpa": self.sigma0, "P_c_kpa": self.P_c, "k_syn": self.k_syn}

    @classmethod
    def from_dict(cls, data: dict) -> "MaterialParams":
        aliases = {"sigma0_kpa": "sigma0", "P_c_kpa": "P_c"}
        kwargs = {}
        for key, value in data.items():
            name = aliases.get(key, key)
            if name not in cls.__dataclass_fields__:
                raise ConfigurationError(f"unknown parameter {key!r}")
            kwargs[name] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class ForceBreakdown:
    F_s: float
    F_f: float
    F_g: float
    mode: ForceMode
    per_dse_suction: tuple = ()

    def to_dict(self) -> dict:
        return {
            "F_s": self.F_s,
            "F_f": self.F_f,
            "F_g": self.F_g,
            "mode": self.mode.value,
            "per_dse_suction": [[i, f] for i, f in self.per_dse_suction],
        }


def capillary_force(params: MaterialParams, geometry: GripperGeometry) -> float:
    radius = geometry.capillary_inner_diameter / 2 * MM
    return params.P_c * KPA * math.pi * radius**2


def _check_theta(theta_c: float) -> None:
    if not (0 < theta_c <= math.pi / 2):
        raise DomainError(f"contact angle must lie in (0, pi/2], got {theta_c!r}")


def friction_closed_form(params: MaterialParams, R_obj: float, theta_c: float) -> float:
    _check_theta(theta_c)
    radius = R_obj * MM
    bracket = params.mu * (theta_c / 2 - math.sin(2 * theta_c) / 4) - math.sin(theta_c) ** 2 / 2
    return 2 * math.pi * params.sigma0 * KPA * radius**2 * bracket


def friction_force(params: MaterialParams, R_obj: float, theta_c: float) -> float:
    """Signed jamming friction over a spherical cap of half-angle ``theta_c``.

    Integrates ``sigma0 * 2*pi*R^2 * sin(t) * (mu*sin(t) - cos(t))`` over
    ``[0, theta_c]`` by adaptive quadrature and checks the result against
    the closed form.  Small caps give negative values; callers assembling a
    grasp force clamp at zero.
    """
    _check_theta(theta_c)
    radius = R_obj * MM
    scale = 2 * math.pi * params.sigma0 * KPA * radius**2
    mu = params.mu

    def integrand(t):
        return scale * math.sin(t) * (mu * math.sin(t) - math.cos(t))

    value, _ = integrate.quad(integrand, 0.0, theta_c, epsabs=1e-13 * scale * (1 + mu), epsrel=1e-12, limit=200)
    closed = friction_closed_form(params, R_obj, theta_c)
    floor = 1e-12 * scale * (1 + mu)
    if abs(value - closed) > FRICTION_AGREEMENT_RTOL * abs(closed) + floor:
        raise ArithmeticError(f"friction quadrature {value!r} disagrees with closed form {closed!r}")
    return value


def cup_suction_force(params: MaterialParams, R_contact: float, theta_c: float) -> float:
    _check_theta(theta_c)
    seal_radius = R_contact * MM * math.sin(theta_c)
    return params.P_c * KPA * math.pi * seal_radius**2


def multi_dse_suction(params: MaterialParams, contact: ContactSolution, R_obj: float | None,
                      geometry: GripperGeometry | None = None) -> tuple[float, list]:
    """Superpose the suction of every engaged DSE, each weighted by ``cos(beta)``.

    For spheres each cup seals a circle of radius ``R_obj*sin(theta_c*)``.  A
    flat top is the ``R_obj -> inf`` limit of that circle, ``L_A/2``.
    """
    if contact.regime not in (Regime.MULTI_DSE, Regime.FLAT):
        raise DomainError(f"multi-DSE suction needs a MultiDse/Flat contact, got {contact.regime.value}")
    if contact.n_engaged < 1:
        raise DomainError("no engaged DSEs")
    per_dse = []
    for dse_id, beta, theta_c in contact.engaged:
        if contact.regime is Regime.FLAT:
            if geometry is None:
                geometry = GripperGeometry()
            seal_radius = geometry.cup_profile_arc_length / 2 * MM
            area = math.pi * seal_radius**2
        else:
            _check_theta(theta_c)
            area = math.pi * (R_obj * MM * math.sin(theta_c)) ** 2
        per_dse.append((dse_id, params.P_c * KPA * area * math.cos(beta)))
    return math.fsum(f for _, f in per_dse), per_dse


def mode_for_object(obj: ObjectSpec, geometry: GripperGeometry) -> ForceMode:
    """Grasp mode implied by object size alone."""
    if not obj.is_solid:
        raise UnsupportedObjectError("liquids are not handled by the force model")
    if obj.kind is ObjectKind.FLAT:
        return ForceMode.MODE3
    d = obj.diameter
    if d <= geometry.capillary_inner_diameter:
        raise UngraspableObjectError(
            f"object diameter {d} mm is not larger than the capillary bore {geometry.capillary_inner_diameter} mm")
    if d < seal_threshold_diameter(geometry):
        return ForceMode.MODE1
    if d < geometry.cup_effective_diameter:
        return ForceMode.MODE2
    return ForceMode.MODE3


def _for_actuation(params: MaterialParams, actuation: Actuation) -> tuple[MaterialParams, float]:
    if actuation is Actuation.SUCTION_ONLY:
        return replace(params, sigma0=0.0), 1.0
    if actuation is Actuation.JAMMING_ONLY:
        return replace(params, P_c=0.0), 1.0
    return params, params.k_syn


def total_grasp_force(obj: ObjectSpec, params: MaterialParams, geometry: GripperGeometry | None = None,
                      contact: ContactSolution | None = None,
                      actuation: Actuation = Actuation.SYNERGISTIC) -> ForceBreakdown:
    geometry = geometry or GripperGeometry()
    mode = mode_for_object(obj, geometry)
    if contact is None:
        contact = solve_contact(obj, geometry)
    p, friction_gain = _for_actuation(params, actuation)

    if mode is ForceMode.MODE1:
        f_s = capillary_force(p, geometry)
        return ForceBreakdown(f_s, 0.0, f_s, mode, ((0, f_s),))

    if mode is ForceMode.MODE2:
        radius = obj.diameter / 2
        theta_c = contact.engaged[0].theta_c
        f_s = cup_suction_force(p, radius, theta_c)
        f_f = friction_gain * max(friction_force(p, radius, theta_c), 0.0)
        return ForceBreakdown(f_s, f_f, f_s + f_f, mode, ((0, f_s),))

    radius = None if obj.kind is ObjectKind.FLAT else obj.diameter / 2
    f_s, per_dse = multi_dse_suction(p, contact, radius, geometry)
    # shell friction acts over the membrane's own contact cap
    f_f = friction_gain * max(friction_force(p, geometry.membrane_radius, contact.membrane_contact_angle), 0.0)
    return ForceBreakdown(f_s, f_f, f_s + f_f, mode, tuple(per_dse))
