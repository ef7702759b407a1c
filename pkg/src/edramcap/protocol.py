"""Five-phase measurement flow and standard-mode plate bias.

Phases (10 ns each) for the target cell at (row, col):

1. discharge: every WL, every SBL, LEC and PRG closed; IN and all IN_BL at 0 V
2. charge:    only the target WL; IN_BL at V_DD except the target column;
              LEC open; PRG closed with IN at V_DD
3. isolate:   PRG opens, every SBL except the target column opens
4. share:     LEC closes, C_m and C_REF share charge; V_GS is read here
5. convert:   signals held while the current ramp runs (see ``converter``)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from edramcap.errors import ScheduleError
from edramcap.netlist import CircuitState, Netlist, Signals, SourceConflict, apply_switches

PHASE_NS = 10.0
N_PHASES = 5
PHASE_NAMES = ("discharge", "charge", "isolate", "share", "convert")


class Drive(enum.Enum):
    GND = "0"
    VDD = "vdd"
    HIGH_Z = "z"

    def volts(self, v_dd: float) -> float | None:
        if self is Drive.GND:
            return 0.0
        if self is Drive.VDD:
            return v_dd
        return None


@dataclass(frozen=True)
class SignalVector:
    wl: tuple[bool, ...]
    s_bl: tuple[bool, ...]
    in_bl: tuple[Drive, ...]
    lec: bool
    prg: bool
    std: bool
    in_drive: Drive

    def __post_init__(self):
        if len(self.s_bl) != len(self.in_bl):
            raise ScheduleError("s_bl and in_bl must have one entry per column")
        if self.std and (self.lec or self.prg or any(self.s_bl)):
            raise ScheduleError("STD cannot be on together with LEC, PRG or any SBL")

    def to_signals(self, v_dd: float) -> Signals:
        controls = {f"WL{i}": on for i, on in enumerate(self.wl)}
        controls.update({f"SBL{j}": on for j, on in enumerate(self.s_bl)})
        controls.update(LEC=self.lec, PRG=self.prg, STD=self.std)
        drives = {f"INBL{j}": d.volts(v_dd) for j, d in enumerate(self.in_bl)}
        drives["IN"] = self.in_drive.volts(v_dd)
        return Signals(controls, drives)


@dataclass(frozen=True)
class PhaseSchedule:
    phases: tuple[SignalVector, ...]
    target: tuple[int, int]
    dims: tuple[int, int]
    durations: tuple[float, ...] = (PHASE_NS,) * N_PHASES

    def __post_init__(self):
        if len(self.phases) != N_PHASES or len(self.durations) != N_PHASES:
            raise ScheduleError(f"a schedule has exactly {N_PHASES} phases")
        if any(d != PHASE_NS for d in self.durations):
            raise ScheduleError("every phase lasts 10 ns")


@dataclass(frozen=True)
class MeasurementOutcome:
    v_gs: float
    elapsed: float
    trace: tuple[CircuitState, ...] | None = None
    conflicts: tuple[tuple[int, SourceConflict], ...] = ()
    final_state: CircuitState | None = None


def build_schedule(array_dims: tuple[int, int], target: tuple[int, int]) -> PhaseSchedule:
    rows, cols = array_dims
    r, c = target
    if rows < 1 or cols < 1:
        raise ScheduleError(f"array must be at least 1x1, got {rows}x{cols}")
    if not (0 <= r < rows and 0 <= c < cols):
        raise ScheduleError(f"target {target} outside a {rows}x{cols} array")

    all_on = (True,) * cols
    only_target_bl = tuple(j == c for j in range(cols))
    raise_others = tuple(Drive.GND if j == c else Drive.VDD for j in range(cols))

    p1 = SignalVector(
        wl=(True,) * rows, s_bl=all_on, in_bl=(Drive.GND,) * cols,
        lec=True, prg=True, std=False, in_drive=Drive.GND,
    )
    p2 = SignalVector(
        wl=tuple(i == r for i in range(rows)), s_bl=all_on, in_bl=raise_others,
        lec=False, prg=True, std=False, in_drive=Drive.VDD,
    )
    # PRG opening "at the end of the step" is the first reconfiguration of P3
    p3 = SignalVector(
        wl=p2.wl, s_bl=only_target_bl, in_bl=raise_others,
        lec=False, prg=False, std=False, in_drive=Drive.VDD,
    )
    p4 = SignalVector(
        wl=p2.wl, s_bl=only_target_bl, in_bl=raise_others,
        lec=True, prg=False, std=False, in_drive=Drive.VDD,
    )
    return PhaseSchedule((p1, p2, p3, p4, p4), (r, c), (rows, cols))


def run_measurement(
    netlist: Netlist,
    schedule: PhaseSchedule,
    state: CircuitState | None = None,
    *,
    trace: bool = False,
    strict: bool = False,
) -> MeasurementOutcome:
    """Run phases 1-4 and read V_GS at the REF gate.

    A shorted cell under test bridges the plate (driven to V_DD through PRG)
    and its grounded bit-line during phase 2, which has no ideal-switch
    equilibrium. With ``strict=False`` the bridged component is pinned to
    the lower rail and the event is reported in ``conflicts`` as
    ``(phase_index, SourceConflict)``; with ``strict=True`` the
    :class:`SourceConflictError` propagates.
    """
    m = netlist.macro
    if m is None:
        raise ScheduleError("run_measurement needs a macro-cell netlist")
    if (m.rows, m.cols) != schedule.dims:
        raise ScheduleError(f"schedule is for {schedule.dims}, netlist is {m.rows}x{m.cols}")
    if state is None:
        state = netlist.initial_state()
    policy = "raise" if strict else "lowest"

    states, conflicts = [], []
    t = state.time
    for k in range(4):
        state = apply_switches(netlist, schedule.phases[k], state, on_conflict=policy)
        t += schedule.durations[k]
        state = state.at_time(t)
        conflicts.extend((k, c) for c in state.conflicts)
        if trace:
            states.append(state)
    v_gs = state.voltage(netlist.node("ref_gate"))
    return MeasurementOutcome(
        v_gs=v_gs,
        elapsed=sum(schedule.durations[:4]),
        trace=tuple(states) if trace else None,
        conflicts=tuple(conflicts),
        final_state=state,
    )


def standard_mode_signals(rows: int, cols: int) -> SignalVector:
    return SignalVector(
        wl=(False,) * rows, s_bl=(False,) * cols, in_bl=(Drive.HIGH_Z,) * cols,
        lec=False, prg=False, std=True, in_drive=Drive.HIGH_Z,
    )


def set_standard_mode(netlist: Netlist, state: CircuitState | None = None) -> CircuitState:
    """Switch the structure off and bias the plate at V_DD/2 through STD."""
    m = netlist.macro
    if m is None:
        raise ScheduleError("set_standard_mode needs a macro-cell netlist")
    return apply_switches(netlist, standard_mode_signals(m.rows, m.cols), state)

