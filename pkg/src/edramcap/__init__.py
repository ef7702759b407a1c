"""Behavioral simulator of an eDRAM cell-capacitor measurement structure.

The structure hangs off the shared plate node of a DRAM macro-cell, charges
one cell, shares that charge with the gate capacitance of a reference
transistor and digitises the resulting gate voltage with a stepped current
ramp. See ``netlist``, ``protocol``, ``converter``, ``calibration`` and
``diagnosis``.
"""

from edramcap.calibration import Abacus, accuracy_report, build_abacus, estimate_capacitance
from edramcap.converter import ConversionResult, ConverterParams, convert, dsat_current, solve_vds
from edramcap.diagnosis import (
    AnalogBitmap,
    FaultKind,
    FaultSpec,
    Label,
    classify,
    inject_fault,
    scan_array,
    signature_histogram,
)
from edramcap.kernels import BACKEND
from edramcap.netlist import (
    CellMatrix,
    CircuitState,
    Netlist,
    ParasiticConfig,
    Signals,
    apply_switches,
    build_macro_cell,
    component_capacitance,
)
from edramcap.pipeline import measure_cell
from edramcap.protocol import build_schedule, run_measurement, set_standard_mode

__version__ = "0.1.0"
