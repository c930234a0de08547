"""Pump/valve control for the DSE circuits and the jamming membrane.

A Mealy machine: ``step(state, event)`` returns the next state and the
actuator commands needed to get there (only settings that changed).
"""
from __future__ import annotations

import csv
import enum
import queue
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Union

from .errors import ContractError, RejectedCommandError

SEEK_DUTY = 0.3
FULL_DUTY = 1.0
MEMBRANE = "membrane"


class Phase(enum.Enum):
    STANDBY = "Standby"
    SEEKING = "Seeking"
    ENGAGED = "Engaged"
    LIQUID_HELD = "LiquidHeld"
    INJECTING = "Injecting"
    OFF = "Off"


class Valve(enum.Enum):
    OPEN = "Open"
    CLOSED = "Closed"


class Jamming(enum.Enum):
    SLACK = "Slack"
    JAMMED = "Jammed"


# phase -> (pump duty, inlet valve, outlet valve)
PHASE_SETTINGS = {
    Phase.STANDBY: (0.0, Valve.CLOSED, Valve.CLOSED),
    Phase.SEEKING: (SEEK_DUTY, Valve.OPEN, Valve.CLOSED),
    Phase.ENGAGED: (FULL_DUTY, Valve.OPEN, Valve.CLOSED),
    Phase.LIQUID_HELD: (0.0, Valve.CLOSED, Valve.CLOSED),
    Phase.INJECTING: (FULL_DUTY, Valve.CLOSED, Valve.OPEN),
    Phase.OFF: (0.0, Valve.CLOSED, Valve.CLOSED),
}


@dataclass(frozen=True)
class DseCircuitState:
    phase: Phase
    pump_duty: float
    inlet_valve: Valve
    outlet_valve: Valve

    @classmethod
    def in_phase(cls, phase: Phase) -> "DseCircuitState":
        duty, inlet, outlet = PHASE_SETTINGS[phase]
        return cls(phase, duty, inlet, outlet)


@dataclass(frozen=True)
class MembraneCircuitState:
    jamming: Jamming = Jamming.SLACK
    valve: Valve = Valve.OPEN
    pump_on: bool = False

    @classmethod
    def slack(cls) -> "MembraneCircuitState":
        return cls(Jamming.SLACK, Valve.OPEN, False)

    @classmethod
    def jammed(cls) -> "MembraneCircuitState":
        return cls(Jamming.JAMMED, Valve.CLOSED, True)


@dataclass(frozen=True)
class PneumaticState:
    circuits: tuple
    membrane: MembraneCircuitState = MembraneCircuitState()

    @classmethod
    def initial(cls, n_dse: int = 19) -> "PneumaticState":
        return cls(tuple(DseCircuitState.in_phase(Phase.STANDBY) for _ in range(n_dse)),
                   MembraneCircuitState.slack())

    def phases(self) -> list[Phase]:
        return [c.phase for c in self.circuits]


# control events ---------------------------------------------------------

@dataclass(frozen=True)
class Start:
    pass


@dataclass(frozen=True)
class ContactDetected:
    ids: frozenset


@dataclass(frozen=True)
class DisengagedDetected:
    ids: frozenset


@dataclass(frozen=True)
class LiquidDetected:
    dse_id: int


@dataclass(frozen=True)
class InjectCommand:
    dse_id: int


@dataclass(frozen=True)
class ReleaseCommand:
    pass


@dataclass(frozen=True)
class Tick:
    dt: float = 0.0


@dataclass(frozen=True)
class ModeSelected:
    """Mode chosen by the tactile classifier; Mode2/Mode3 jam the membrane."""

    mode: str


ControlEvent = Union[Start, ContactDetected, DisengagedDetected, LiquidDetected, InjectCommand,
                     ReleaseCommand, Tick, ModeSelected]

JAMMING_MODES = frozenset({"Mode2", "Mode3"})


@dataclass(frozen=True)
class ActuatorCommand:
    target: object  # DSE id or MEMBRANE
    pump_duty: float
    inlet: str
    outlet: str


def _check_ids(ids: Iterable[int], n: int) -> frozenset:
    ids = frozenset(ids)
    bad = [i for i in ids if not isinstance(i, int) or not 0 <= i < n]
    if bad:
        raise ContractError(f"DSE ids out of range 0..{n - 1}: {sorted(map(str, bad))}")
    return ids


def _with_phases(state: PneumaticState, updates: dict[int, Phase]) -> PneumaticState:
    circuits = list(state.circuits)
    for i, phase in updates.items():
        circuits[i] = DseCircuitState.in_phase(phase)
    return replace(state, circuits=tuple(circuits))


def _transition(state: PneumaticState, event) -> PneumaticState:
    n = len(state.circuits)
    phases = state.phases()

    if isinstance(event, Tick):
        return state
    if isinstance(event, Start):
        return _with_phases(state, {i: Phase.SEEKING for i, p in enumerate(phases) if p is Phase.STANDBY})
    if isinstance(event, ContactDetected):
        ids = _check_ids(event.ids, n)
        updates = {}
        for i, p in enumerate(phases):
            if p is Phase.SEEKING:
                updates[i] = Phase.ENGAGED if i in ids else Phase.OFF
        return _with_phases(state, updates)
    if isinstance(event, DisengagedDetected):
        ids = _check_ids(event.ids, n)
        return _with_phases(state, {i: Phase.OFF for i in ids if phases[i] is Phase.ENGAGED})
    if isinstance(event, LiquidDetected):
        (i,) = _check_ids([event.dse_id], n)
        return _with_phases(state, {i: Phase.LIQUID_HELD})
    if isinstance(event, InjectCommand):
        (i,) = _check_ids([event.dse_id], n)
        if phases[i] is not Phase.LIQUID_HELD:
            raise RejectedCommandError(f"DSE {i} is {phases[i].value}; only LiquidHeld circuits can inject")
        return _with_phases(state, {i: Phase.INJECTING})
    if isinstance(event, ReleaseCommand):
        return PneumaticState.initial(n)
    if isinstance(event, ModeSelected):
        if event.mode in JAMMING_MODES and state.membrane.jamming is Jamming.SLACK:
            return replace(state, membrane=MembraneCircuitState.jammed())
        return state
    raise ContractError(f"unknown control event {event!r}")


def _settings(state: PneumaticState) -> dict:
    out = {i: (c.pump_duty, c.inlet_valve.value, c.outlet_valve.value) for i, c in enumerate(state.circuits)}
    m = state.membrane
    out[MEMBRANE] = (FULL_DUTY if m.pump_on else 0.0, m.valve.value, "")
    return out


def step(state: PneumaticState, event) -> tuple[PneumaticState, list[ActuatorCommand]]:
    new = _transition(state, event)
    before, after = _settings(state), _settings(new)
    commands = [ActuatorCommand(k, *after[k]) for k in after if after[k] != before[k]]
    return new, commands


def invariant_violations(state: PneumaticState) -> list[str]:
    problems = []
    for i, c in enumerate(state.circuits):
        duty, inlet, outlet = c.pump_duty, c.inlet_valve, c.outlet_valve
        ok = {
            Phase.SEEKING: duty == SEEK_DUTY,
            Phase.ENGAGED: duty == FULL_DUTY,
            Phase.LIQUID_HELD: duty == 0.0 and inlet is Valve.CLOSED,
            Phase.INJECTING: duty == FULL_DUTY and outlet is Valve.OPEN,
            Phase.STANDBY: duty == 0.0,
            Phase.OFF: duty == 0.0,
        }[c.phase]
        if not ok:
            problems.append(f"circuit {i}: {c}")
        if duty not in (0.0, SEEK_DUTY, FULL_DUTY):
            problems.append(f"circuit {i}: unquantized duty {duty}")
    m = state.membrane
    if m.jamming is Jamming.JAMMED and not (m.pump_on and m.valve is Valve.CLOSED):
        problems.append(f"membrane jammed without vacuum: {m}")
    return problems


class PneumaticController:
    """Owns the machine state; events may be queued from any thread but are applied in order."""

    def __init__(self, n_dse: int = 19):
        self.state = PneumaticState.initial(n_dse)
        self.log: list[tuple[float, ActuatorCommand]] = []
        self._queue: queue.SimpleQueue = queue.SimpleQueue()

    def submit(self, event) -> None:
        self._queue.put(event)

    def drain(self, t: float) -> list[ActuatorCommand]:
        issued = []
        while True:
            try:
                event = self._queue.get_nowait()
            except queue.Empty:
                return issued
            issued.extend(self.apply(t, event))

    def apply(self, t: float, event) -> list[ActuatorCommand]:
        self.state, commands = step(self.state, event)
        self.log.extend((t, c) for c in commands)
        return commands

    def write_log(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "target", "pump_duty", "inlet", "outlet"])
            for t, c in self.log:
                writer.writerow([format(t, ".10g"), c.target, format(c.pump_duty, "g"), c.inlet, c.outlet])
        return path
