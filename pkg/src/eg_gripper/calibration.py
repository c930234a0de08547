"""Fit (mu, sigma0, P_c) to measured pull-off forces.

The grasp force is linear in ``P_c`` and ``sigma0`` once ``mu`` is fixed
(the friction clamp only depends on the sign of the ``mu`` bracket), so the
search profiles out the linear pair with a bounded least-squares solve and
runs a derivative-free 1-D search over ``mu``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize

from .errors import CalibrationError, InsufficientDataError, ScenarioLoadError
from .force_model import (
    ATMOSPHERE_KPA,
    Actuation,
    MaterialParams,
    friction_force,
    mode_for_object,
    total_grasp_force,
)
from .geometry import GripperGeometry, ObjectKind, ObjectSpec, solve_contact

BOUNDS = {"mu": (0.0, 2.0), "sigma0": (0.0, 100.0), "P_c": (0.0, ATMOSPHERE_KPA)}
FLAT_TOP_FORCE_N = 6.14

# synthetic-fill reference: P_c is solved so the flat top hits the measured anchor
REFERENCE_MU = 0.9
REFERENCE_SIGMA0_KPA = 1.0


@dataclass(frozen=True)
class Measurement:
    obj: ObjectSpec
    actuation: Actuation
    force: float

    @property
    def label(self) -> str:
        if self.obj.kind is ObjectKind.FLAT:
            return f"flat/{self.actuation.value}"
        return f"sphere d={self.obj.size:g}mm/{self.actuation.value}"


def _features(measurements: Sequence[Measurement], geometry: GripperGeometry, base: MaterialParams):
    """Per-measurement suction force per kPa and a friction-per-kPa callable in mu."""
    contacts = [solve_contact(m.obj, geometry) for m in measurements]
    unit_suction = MaterialParams(mu=0.0, sigma0=0.0, P_c=1.0, k_syn=base.k_syn)
    suction = np.array([
        total_grasp_force(m.obj, unit_suction, geometry, c, m.actuation).F_g
        for m, c in zip(measurements, contacts)
    ])

    def friction(mu: float) -> np.ndarray:
        unit = MaterialParams(mu=mu, sigma0=1.0, P_c=0.0, k_syn=base.k_syn)
        return np.array([
            total_grasp_force(m.obj, unit, geometry, c, m.actuation).F_g
            for m, c in zip(measurements, contacts)
        ])

    return suction, friction


def _solve_linear(suction, friction_col, target, free, base):
    """Bounded LS over the free members of (sigma0, P_c); returns (sigma0, P_c, ssr)."""
    sigma0, p_c = base.sigma0, base.P_c
    rhs = target.copy()
    cols, names = [], []
    if "sigma0" in free:
        cols.append(friction_col)
        names.append("sigma0")
    else:
        rhs = rhs - sigma0 * friction_col
    if "P_c" in free:
        cols.append(suction)
        names.append("P_c")
    else:
        rhs = rhs - p_c * suction
    if cols:
        a = np.column_stack(cols)
        lo = [BOUNDS[n][0] for n in names]
        hi = [BOUNDS[n][1] for n in names]
        sol = optimize.lsq_linear(a, rhs, bounds=(lo, hi), method="bvls", tol=1e-14)
        values = dict(zip(names, sol.x))
        sigma0 = float(values.get("sigma0", sigma0))
        p_c = float(values.get("P_c", p_c))
    pred = sigma0 * friction_col + p_c * suction
    return sigma0, p_c, float(np.sum((pred - target) ** 2))


def calibrate(measurements: Sequence[Measurement], geometry: GripperGeometry | None = None, *,
              base: MaterialParams | None = None, fixed: Iterable[str] = (),
              residual_cap: float = 0.5, mu_grid: int = 201) -> MaterialParams:
    """Least-squares fit of the free parameters within ``BOUNDS``.

    ``fixed`` names parameters taken from ``base`` instead of being fitted.
    ``residual_cap`` is the largest acceptable RMS residual (N); a worse fit
    raises :class:`CalibrationError` carrying the per-point residuals.
    """
    geometry = geometry or GripperGeometry()
    base = base or MaterialParams()
    measurements = list(measurements)
    fixed = set(fixed)
    unknown = fixed - set(BOUNDS)
    if unknown:
        raise ValueError(f"cannot fix unknown parameter(s) {sorted(unknown)}")
    free = [n for n in BOUNDS if n not in fixed]
    if not measurements:
        raise InsufficientDataError("no measurements to calibrate against")
    if len(free) == 3:
        modes = {mode_for_object(m.obj, geometry) for m in measurements}
        if len(measurements) < 3 or len(modes) < 2:
            raise InsufficientDataError("a full fit needs >= 3 measurements spanning >= 2 grasp modes")
    elif len(measurements) < len(free):
        raise InsufficientDataError(f"{len(free)} free parameter(s) need at least as many measurements")

    target = np.array([m.force for m in measurements], dtype=float)
    suction, friction = _features(measurements, geometry, base)

    def profile(mu):
        return _solve_linear(suction, friction(mu), target, free, base)

    if "mu" in free:
        lo, hi = BOUNDS["mu"]
        grid = np.linspace(lo, hi, mu_grid)
        ssr = [profile(float(mu))[2] for mu in grid]
        k = int(np.argmin(ssr))
        best_mu, best_ssr = float(grid[k]), ssr[k]
        a, b = float(grid[max(k - 1, 0)]), float(grid[min(k + 1, len(grid) - 1)])
        if b > a:
            res = optimize.minimize_scalar(lambda mu: profile(mu)[2], bounds=(a, b), method="bounded",
                                           options={"xatol": 1e-12})
            if res.fun < best_ssr:
                best_mu = float(res.x)
        mu = best_mu
    else:
        mu = base.mu
    sigma0, p_c, _ = profile(mu)
    fitted = replace(base, mu=mu, sigma0=sigma0, P_c=min(max(p_c, 0.0), ATMOSPHERE_KPA))

    rows = residuals(measurements, fitted, geometry)
    rms = math.sqrt(sum(r[3] ** 2 for r in rows) / len(rows))
    if rms > residual_cap:
        raise CalibrationError(f"calibration RMS residual {rms:.4g} N exceeds cap {residual_cap:g} N", rows)
    return fitted


def residuals(measurements: Sequence[Measurement], params: MaterialParams,
              geometry: GripperGeometry | None = None) -> list[tuple]:
    geometry = geometry or GripperGeometry()
    out = []
    for m in measurements:
        predicted = total_grasp_force(m.obj, params, geometry, actuation=m.actuation).F_g
        out.append((m.label, m.force, predicted, predicted - m.force))
    return out


def sum_squared_residuals(measurements, params, geometry=None) -> float:
    return math.fsum(r[3] ** 2 for r in residuals(measurements, params, geometry))


def invert_flat_pressure(force: float, mu: float, sigma0: float, geometry: GripperGeometry | None = None,
                         k_syn: float = 1.0) -> float:
    """P_c (kPa) that makes the synergistic flat-top force equal ``force``."""
    geometry = geometry or GripperGeometry()
    n = geometry.n_dse
    area = math.pi * (geometry.cup_profile_arc_length / 2 * 1e-3) ** 2
    jam = MaterialParams(mu=mu, sigma0=sigma0, P_c=0.0)
    f_f = k_syn * max(friction_force(jam, geometry.membrane_radius, math.pi / 2), 0.0)
    return (force - f_f) / (n * area * 1e3)


def anchor_measurements(geometry: GripperGeometry | None = None) -> list[Measurement]:
    """The 6.14 N flat-top anchor plus synthetic fill consistent with it."""
    geometry = geometry or GripperGeometry()
    p_c = invert_flat_pressure(FLAT_TOP_FORCE_N, REFERENCE_MU, REFERENCE_SIGMA0_KPA, geometry)
    reference = MaterialParams(mu=REFERENCE_MU, sigma0=REFERENCE_SIGMA0_KPA, P_c=p_c)
    fill = [
        (ObjectSpec.sphere(0.5), Actuation.SYNERGISTIC),
        (ObjectSpec.sphere(2.0), Actuation.SYNERGISTIC),
        (ObjectSpec.sphere(3.0), Actuation.JAMMING_ONLY),
        (ObjectSpec.sphere(4.0), Actuation.SYNERGISTIC),
        (ObjectSpec.sphere(15.0), Actuation.SUCTION_ONLY),
        (ObjectSpec.sphere(25.0), Actuation.SYNERGISTIC),
        (ObjectSpec.sphere(40.0), Actuation.SYNERGISTIC),
        # large spheres put the membrane cap between pi/3 and pi/2, which separates mu from sigma0
        (ObjectSpec.sphere(60.0), Actuation.JAMMING_ONLY),
        (ObjectSpec.sphere(70.0), Actuation.JAMMING_ONLY),
        (ObjectSpec.sphere(80.0), Actuation.SYNERGISTIC),
        (ObjectSpec.flat(), Actuation.SUCTION_ONLY),
        (ObjectSpec.flat(), Actuation.JAMMING_ONLY),
    ]
    out = [Measurement(ObjectSpec.flat(), Actuation.SYNERGISTIC, FLAT_TOP_FORCE_N)]
    for obj, act in fill:
        out.append(Measurement(obj, act, total_grasp_force(obj, reference, geometry, actuation=act).F_g))
    return out


_CSV_COLUMNS = ("object_kind", "d_mm", "actuation", "force_N")


def read_measurements(path) -> list[Measurement]:
    path = Path(path)
    out = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(_CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ScenarioLoadError(f"{path}: missing column(s)", [f"line 1: header lacks {sorted(missing)}"])
        for row in reader:
            line = reader.line_num
            try:
                kind = row["object_kind"].strip().lower()
                if kind == "sphere":
                    obj = ObjectSpec.sphere(float(row["d_mm"]))
                elif kind == "flat":
                    obj = ObjectSpec.flat()
                else:
                    raise ValueError(f"object_kind must be sphere or flat, got {kind!r}")
                actuation = Actuation(row["actuation"].strip())
                force = float(row["force_N"])
            except (ValueError, TypeError) as exc:
                raise ScenarioLoadError(f"{path}: bad measurement row", [f"line {line}: {exc}"]) from exc
            out.append(Measurement(obj, actuation, force))
    return out


def write_measurements(path, measurements: Sequence[Measurement]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for m in measurements:
            d = "" if m.obj.kind is ObjectKind.FLAT else repr(m.obj.size)
            writer.writerow([m.obj.kind.value, d, m.actuation.value, repr(m.force)])
