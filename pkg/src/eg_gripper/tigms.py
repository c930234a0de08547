"""Tactile-inferred grasping mode selection.

Each DSE's pressure transient is classified (no seal / capillary seal / cup
seal) and the resulting pattern, together with the liquid detector voltage,
picks a grasp mode with fixed precedence: liquid, capillary-only, a small
connected cluster of cup seals, then anything larger or scattered.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, ContractError, InsufficientDataError
from .sensor_sim import SealKind

MIN_SAMPLES = 5
_TAU_RANGE = (1e-3, 100.0)


@dataclass(frozen=True)
class Thresholds:
    dp_engaged: float = 1.4  # kPa
    v_liquid: float = 1.1  # V
    t_decision: float = 1.0  # s after contact
    tau_split: float = 0.5  # s

    def __post_init__(self):
        for name in ("dp_engaged", "v_liquid", "t_decision", "tau_split"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0")
        if not self.v_liquid < 5.0:
            raise ConfigurationError("v_liquid must be below the 5 V open-circuit level")


class GraspMode(enum.Enum):
    MODE1 = "Mode1"
    MODE2 = "Mode2"
    MODE3 = "Mode3"
    LIQUID = "Liquid"
    NO_GRASP = "NoGrasp"


@dataclass(frozen=True)
class EngagementObservation:
    dse_id: int
    classification: SealKind
    dp_at_decision: float
    tau: float | None = None


def fit_transient(t: np.ndarray, dp: np.ndarray) -> tuple[float, float]:
    """Least-squares ``(amplitude, tau)`` for ``dp = A*(1 - exp(-t/tau))``."""

    def amp_ssr(log_tau):
        basis = -np.expm1(-t / math.exp(log_tau))
        denom = basis @ basis
        amp = max(float(basis @ dp / denom), 0.0) if denom > 0 else 0.0
        return amp, float(np.sum((amp * basis - dp) ** 2))

    lo, hi = (math.log(x) for x in _TAU_RANGE)
    grid = np.linspace(lo, hi, 61)
    ssr = [amp_ssr(g)[1] for g in grid]
    k = int(np.argmin(ssr))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda g: amp_ssr(g)[1], bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-10})
    log_tau = res.x if res.fun <= ssr[k] else grid[k]
    amp, _ = amp_ssr(log_tau)
    return amp, math.exp(log_tau)


def classify_dse(t: Sequence[float], dp: Sequence[float], th: Thresholds | None = None,
                 dse_id: int = 0) -> EngagementObservation:
    """Classify one DSE from its samples, ``t`` measured from contact.

    The pressure at the decision instant is read off the fitted transient
    rather than the last raw sample, which keeps sensor noise out of the
    threshold test.
    """
    th = th or Thresholds()
    t = np.asarray(t, dtype=float)
    dp = np.asarray(dp, dtype=float)
    if t.shape != dp.shape:
        raise ContractError("time and pressure samples differ in length")
    window = t <= th.t_decision + 1e-9
    t, dp = t[window], dp[window]
    if len(t) < MIN_SAMPLES or t[0] > 1e-9 or t[-1] < th.t_decision - 1e-9:
        raise InsufficientDataError(f"trace must cover [0, {th.t_decision}] s with >= {MIN_SAMPLES} samples")

    amp, tau = fit_transient(t, dp)
    dp_at = amp * -math.expm1(-th.t_decision / tau)
    if dp_at < th.dp_engaged:
        return EngagementObservation(dse_id, SealKind.NONE, dp_at, tau)
    kind = SealKind.CAPILLARY if tau <= th.tau_split else SealKind.CUP
    return EngagementObservation(dse_id, kind, dp_at, tau)


def is_connected(ids, adjacency: Mapping[int, frozenset]) -> bool:
    ids = set(ids)
    if not ids:
        return False
    start = next(iter(ids))
    seen = {start}
    queue = deque([start])
    while queue:
        for nb in adjacency[queue.popleft()]:
            if nb in ids and nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return seen == ids


def select_mode(obs: Sequence[EngagementObservation], V: float, adjacency: Mapping[int, frozenset],
                th: Thresholds | None = None, central_id: int = 0) -> GraspMode:
    th = th or Thresholds()
    if len(obs) != len(adjacency) or sorted(o.dse_id for o in obs) != sorted(adjacency):
        raise ContractError(f"expected one observation per DSE ({len(adjacency)}), got {len(obs)}")

    if V < th.v_liquid:
        return GraspMode.LIQUID
    cups = [o.dse_id for o in obs if o.classification is SealKind.CUP]
    central = next(o for o in obs if o.dse_id == central_id)
    if central.classification is SealKind.CAPILLARY and not cups:
        return GraspMode.MODE1
    if 1 <= len(cups) <= 3 and is_connected(cups, adjacency):
        return GraspMode.MODE2
    if len(cups) >= 2:
        # more than three, or a disconnected pair/triple spanning the membrane
        return GraspMode.MODE3
    return GraspMode.NO_GRASP
