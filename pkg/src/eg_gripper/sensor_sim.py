"""Simulated tactile channels: per-DSE pressure drop and liquid-detector voltage."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, FitError

ENGAGEMENT_PRESSURE_ANCHORS = ((1.0, 1.42), (5.0, 2.78))
TAU_MAX_S = 100.0
MEMBRANE_TAU_S = 0.2


class SealKind(enum.Enum):
    NONE = "None"
    CAPILLARY = "CapillarySeal"
    CUP = "CupSeal"


@dataclass(frozen=True)
class PressureModel:
    delta_p_max: float  # kPa
    tau_cup: float  # s
    tau_cap: float = 0.2
    noise_sigma: float = 0.02  # kPa

    def __post_init__(self):
        if not self.delta_p_max > 0:
            raise ConfigurationError("delta_p_max must be > 0")
        if not 0 < self.tau_cap < self.tau_cup:
            raise ConfigurationError(f"need 0 < tau_cap < tau_cup, got {self.tau_cap}, {self.tau_cup}")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")

    def clean(self, t: float, seal: SealKind) -> float:
        if seal is SealKind.NONE:
            return 0.0
        tau = self.tau_cup if seal is SealKind.CUP else self.tau_cap
        return self.delta_p_max * -math.expm1(-t / tau)


def fit_pressure_model(anchor_points: Sequence[tuple[float, float]], *, tau_cap: float = 0.2,
                       noise_sigma: float = 0.02) -> PressureModel:
    """Fit ``dP(t) = dP_max * (1 - exp(-t/tau))`` through engagement anchors.

    Two anchors are matched exactly by a root-find on ``tau``; more anchors
    are fitted in the least-squares sense.
    """
    pts = sorted((float(t), float(p)) for t, p in anchor_points)
    if len(pts) < 2:
        raise FitError("need at least two anchor points")
    times = [t for t, _ in pts]
    if len(set(times)) != len(times) or times[0] <= 0:
        raise FitError("anchor times must be distinct and positive")
    if any(p <= 0 for _, p in pts):
        raise FitError("anchor pressure drops must be positive")

    if len(pts) == 2:
        (t1, p1), (t2, p2) = pts

        def mismatch(tau):
            return math.expm1(-t2 / tau) / math.expm1(-t1 / tau) - p2 / p1

        # the ratio climbs monotonically from 1 (tau -> 0) towards t2/t1 (tau -> inf)
        lo, hi = t1 * 1e-3, TAU_MAX_S
        if not (p2 / p1 > 1 and mismatch(lo) < 0 < mismatch(hi)):
            raise FitError(f"no time constant in (0, {TAU_MAX_S}] s passes through {pts}")
        tau = optimize.brentq(mismatch, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        dp_max = p1 / -math.expm1(-t1 / tau)
        resid = abs(dp_max * -math.expm1(-t2 / tau) - p2)
        if resid > 1e-9:
            raise FitError(f"anchor residual {resid:g} kPa after root-find")
    else:
        t = np.array(times)
        y = np.array([p for _, p in pts])

        def ssr(log_tau):
            basis = -np.expm1(-t / math.exp(log_tau))
            amp = basis @ y / (basis @ basis)
            return float(np.sum((amp * basis - y) ** 2))

        res = optimize.minimize_scalar(ssr, bounds=(math.log(1e-4), math.log(TAU_MAX_S)), method="bounded",
                                       options={"xatol": 1e-12})
        tau = math.exp(res.x)
        if tau > TAU_MAX_S * 0.999:
            raise FitError("least-squares time constant ran into the upper bound")
        basis = -np.expm1(-t / tau)
        dp_max = float(basis @ y / (basis @ basis))
    return PressureModel(delta_p_max=dp_max, tau_cup=tau, tau_cap=tau_cap, noise_sigma=noise_sigma)


@lru_cache(maxsize=None)
def reference_pressure_model() -> PressureModel:
    """Model through the measured engagement trace (1.42 kPa @ 1 s, 2.78 kPa @ 5 s)."""
    return fit_pressure_model(ENGAGEMENT_PRESSURE_ANCHORS)


def dse_pressure(t_since_contact: float, seal: SealKind, model: PressureModel | None = None,
                 rng_seed: int | None = None) -> float:
    """Pressure drop (kPa) of one DSE, with optional seeded Gaussian noise."""
    if t_since_contact < 0:
        raise ValueError("t_since_contact must be >= 0")
    model = model or reference_pressure_model()
    value = model.clean(t_since_contact, seal)
    if rng_seed is not None and model.noise_sigma > 0:
        value += np.random.default_rng(rng_seed).normal(0.0, model.noise_sigma)
    return max(value, 0.0)


@dataclass(frozen=True)
class LiquidDetector:
    foam_diameter: float = 9.0  # mm
    foam_height: float = 10.0  # mm
    foam_density: float = 30.0  # kg/m^3
    brass_thickness: float = 0.1  # mm
    brass_density: float = 8730.0  # kg/m^3
    electrode_gap: float = 2.0  # mm
    v_open: float = 5.0
    v_closed: float = 0.87
    tau_v: float = 1.3e-3  # s

    def __post_init__(self):
        for name in ("foam_diameter", "foam_height", "foam_density", "brass_thickness", "brass_density",
                     "electrode_gap", "tau_v"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0")
        if not self.v_closed < self.v_open:
            raise ConfigurationError("v_closed must be below v_open")

    @property
    def effective_density(self) -> float:
        """Float mass (foam + brass film) over the displaced foam volume, kg/m^3."""
        face = math.pi * (self.foam_diameter / 2) ** 2
        foam_volume = face * self.foam_height
        mass = foam_volume * self.foam_density + face * self.brass_thickness * self.brass_density
        return mass / foam_volume


def detector_closed(detector: LiquidDetector, liquid_density: float | None, conductive: bool = True) -> bool:
    """True when buoyancy lifts the float onto the electrodes and closes the circuit.

    Non-conductive liquids lift the float but never complete the sensing path.
    """
    if liquid_density is None or not conductive:
        return False
    return liquid_density > detector.effective_density


def detector_voltage(t_since_ingress: float, closed: bool, detector: LiquidDetector | None = None) -> float:
    if t_since_ingress < 0:
        raise ValueError("t_since_ingress must be >= 0")
    detector = detector or LiquidDetector()
    if not closed:
        return detector.v_open
    swing = detector.v_open - detector.v_closed
    return detector.v_closed + swing * math.exp(-t_since_ingress / detector.tau_v)


def membrane_pressure(t_since_jam: float | None, vacuum_kpa: float) -> float:
    if t_since_jam is None:
        return 0.0
    return vacuum_kpa * -math.expm1(-t_since_jam / MEMBRANE_TAU_S)


@dataclass(frozen=True)
class SensorFrame:
    t: float
    dse_pressure_drop: tuple
    membrane_pressure: float
    detector_voltage: float
    detector_id: int | None = None


class SensorStream:
    """Seeded frame generator for one scenario.  Single consumer."""

    def __init__(self, n_dse: int, seed: int, pressure_model: PressureModel | None = None,
                 detector: LiquidDetector | None = None, noise: bool = True, voltage_noise_sigma: float = 0.005):
        self.n_dse = n_dse
        self.model = pressure_model or reference_pressure_model()
        self.detector = detector or LiquidDetector()
        self.noise = noise
        self.voltage_noise_sigma = voltage_noise_sigma
        self.rng = np.random.default_rng(seed)

    def frame(self, t: float, seals: Sequence[tuple[SealKind, float | None]], membrane_kpa: float = 0.0,
              ingress: dict[int, float] | None = None) -> SensorFrame:
        """Build the frame at time ``t``.

        ``seals[i]`` is ``(kind, t_since_contact)`` for DSE ``i`` (time None
        before contact); ``ingress`` maps DSE id to time since a conducting
        liquid closed its detector.
        """
        clean = np.array([
            self.model.clean(dt, kind) if dt is not None else 0.0
            for kind, dt in seals
        ])
        if self.noise and self.model.noise_sigma > 0:
            clean = clean + self.rng.normal(0.0, self.model.noise_sigma, size=self.n_dse)
        drops = np.maximum(clean, 0.0)

        volts, detector_id = self.detector.v_open, None
        for dse_id, dt in sorted((ingress or {}).items()):
            v = detector_voltage(dt, True, self.detector)
            if v < volts:
                volts, detector_id = v, dse_id
        if self.noise and self.voltage_noise_sigma > 0:
            sigma = self.voltage_noise_sigma
            volts += float(np.clip(self.rng.normal(0.0, sigma), -3 * sigma, 3 * sigma))
        return SensorFrame(t, tuple(float(x) for x in drops), float(membrane_kpa), float(volts), detector_id)


def trace_header(n_dse: int) -> list[str]:
    return ["t_s", *[f"dp_{i:02d}" for i in range(n_dse)], "membrane_kpa", "volts"]


def write_trace(path, frames: Sequence[SensorFrame], n_dse: int) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_header(n_dse))
        for f in frames:
            writer.writerow([_fmt(f.t), *(_fmt(x) for x in f.dse_pressure_drop), _fmt(f.membrane_pressure),
                             _fmt(f.detector_voltage)])
    return path


def _fmt(x: float) -> str:
    return format(x, ".10g")
