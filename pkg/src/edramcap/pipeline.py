"""Full single-cell measurement: charge-sharing flow followed by the ramp."""

from __future__ import annotations

import math
from dataclasses import dataclass

from edramcap.converter import CONVERT_NS, ConversionResult, ConverterParams, convert
from edramcap.errors import ConfigError
from edramcap.netlist import Netlist
from edramcap.protocol import MeasurementOutcome, build_schedule, run_measurement

CELL_TIME_NS = 50.0


@dataclass(frozen=True)
class CellMeasurement:
    row: int
    col: int
    v_gs: float
    conversion: ConversionResult
    outcome: MeasurementOutcome
    elapsed: float = CELL_TIME_NS

    @property
    def step(self) -> int:
        return self.conversion.step


def check_compatible(netlist: Netlist, params: ConverterParams) -> None:
    m = netlist.macro
    if m is None:
        raise ConfigError("measurements need a macro-cell netlist")
    if not math.isclose(m.v_dd, params.v_dd, rel_tol=0, abs_tol=1e-12):
        raise ConfigError(f"netlist V_DD {m.v_dd} V differs from converter V_DD {params.v_dd} V")
    if not math.isclose(m.c_ref, params.c_ref, rel_tol=0, abs_tol=1e-12):
        raise ConfigError(f"netlist C_REF {m.c_ref} fF differs from converter C_REF {params.c_ref} fF")


def measure_cell(
    netlist: Netlist,
    row: int,
    col: int,
    params: ConverterParams,
    *,
    trace: bool = False,
    strict: bool = False,
) -> CellMeasurement:
    check_compatible(netlist, params)
    m = netlist.macro
    schedule = build_schedule((m.rows, m.cols), (row, col))
    outcome = run_measurement(netlist, schedule, trace=trace, strict=strict)
    v_gs = min(max(outcome.v_gs, 0.0), params.v_dd)
    conversion = convert(v_gs, params, trace=trace)
    return CellMeasurement(row, col, v_gs, conversion, outcome, outcome.elapsed + CONVERT_NS)
