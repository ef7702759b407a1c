"""Analog bitmaps: whole-array scans, fault injection and step classification."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from edramcap.calibration import Abacus, estimate_capacitance
from edramcap.converter import ConverterParams
from edramcap.errors import NetlistError
from edramcap.netlist import NOMINAL, OPEN, SHORT, CellMatrix, ParasiticConfig, build_macro_cell
from edramcap.pipeline import CELL_TIME_NS, CellMeasurement, measure_cell


class FaultKind(str, enum.Enum):
    SHORT = "short"
    OPEN = "open"
    VALUE_OVERRIDE = "value_override"


@dataclass(frozen=True)
class FaultSpec:
    cell: tuple[int, int]
    kind: FaultKind
    value: float | None = None  # fF, only for VALUE_OVERRIDE

    def __post_init__(self):
        object.__setattr__(self, "kind", FaultKind(self.kind))
        object.__setattr__(self, "cell", (int(self.cell[0]), int(self.cell[1])))
        if self.kind is FaultKind.VALUE_OVERRIDE:
            if self.value is None or not math.isfinite(self.value) or self.value < 0:
                raise NetlistError("value_override needs a finite capacitance >= 0 fF")
        elif self.value is not None:
            raise NetlistError(f"{self.kind.value} faults take no value")


def inject_fault(array: CellMatrix, fault: FaultSpec) -> CellMatrix:
    rows, cols = array.shape
    r, c = fault.cell
    if not (0 <= r < rows and 0 <= c < cols):
        raise NetlistError(f"fault cell {fault.cell} outside a {rows}x{cols} array")
    if fault.cell in array.faulted:
        raise NetlistError(f"cell {fault.cell} already carries a fault")
    values = array.values.copy()
    states = array.states.copy()
    if fault.kind is FaultKind.SHORT:
        states[r, c] = SHORT
    elif fault.kind is FaultKind.OPEN:
        states[r, c] = OPEN
    else:
        values[r, c] = fault.value
        states[r, c] = NOMINAL
    return CellMatrix(values, states, array.faulted | {fault.cell})


class Label(str, enum.Enum):
    IN_RANGE = "InRange"
    UNDER_RANGE_OR_SHORT_OR_OPEN = "UnderRangeOrShortOrOpen"
    OVER_RANGE = "OverRange"


@dataclass(frozen=True)
class Diagnosis:
    label: Label
    estimate: float | None = None
    interval: tuple[float, float] | None = None


def classify(step: int, abacus: Abacus) -> Diagnosis:
    """Step 0 cannot tell an under-range value from a short or an open, so it
    gets one ambiguous label; the top step means at or above full scale."""
    est = estimate_capacitance(abacus, step)
    if step == 0:
        return Diagnosis(Label.UNDER_RANGE_OR_SHORT_OR_OPEN, None, est.interval)
    if step == abacus.n_steps:
        return Diagnosis(Label.OVER_RANGE, None, est.interval)
    return Diagnosis(Label.IN_RANGE, est.point, est.interval)


@dataclass(frozen=True)
class CellRecord:
    row: int
    col: int
    step: int
    v_gs: float
    diagnosis: Diagnosis
    flip_time: float | None = None

    @property
    def estimate(self) -> float | None:
        return self.diagnosis.estimate


@dataclass(frozen=True)
class AnalogBitmap:
    dims: tuple[int, int]
    cells: tuple[tuple[CellRecord, ...], ...]
    total_sim_time: float
    signature_histogram: dict[int, int] = field(default_factory=dict)
    c_min: float = 10.0

    def records(self):
        for row in self.cells:
            yield from row

    def counts(self) -> dict[str, int]:
        tally = Counter(rec.diagnosis.label.value for rec in self.records())
        return {label.value: tally.get(label.value, 0) for label in Label}

    def estimates(self) -> np.ndarray:
        out = np.full(self.dims, np.nan)
        for rec in self.records():
            if rec.estimate is not None:
                out[rec.row, rec.col] = rec.estimate
        return out


def record_from(m: CellMeasurement, abacus: Abacus) -> CellRecord:
    return CellRecord(m.row, m.col, m.step, m.v_gs, classify(m.step, abacus), m.conversion.flip_time)


def scan_array(
    array: CellMatrix,
    params: ConverterParams,
    abacus: Abacus,
    parasitics: ParasiticConfig | None = None,
    *,
    strict: bool = False,
    measurements: list | None = None,
) -> AnalogBitmap:
    """Measure every cell (row-major) with a fresh five-phase flow.

    If ``measurements`` is a list, the raw :class:`CellMeasurement` objects are
    appended to it (the CLI uses this for trace export).
    """
    abacus.check(params, parasitics)
    rows, cols = array.shape
    net = build_macro_cell(rows, cols, array, parasitics, c_ref=params.c_ref, v_dd=params.v_dd)
    grid = []
    hist: Counter = Counter()
    elapsed = 0.0
    for r in range(rows):
        row = []
        for c in range(cols):
            m = measure_cell(net, r, c, params, trace=measurements is not None, strict=strict)
            if measurements is not None:
                measurements.append(m)
            rec = record_from(m, abacus)
            if rec.diagnosis.label is Label.IN_RANGE:
                hist[rec.step] += 1
            elapsed += m.elapsed
            row.append(rec)
        grid.append(tuple(row))
    return AnalogBitmap(
        dims=(rows, cols),
        cells=tuple(grid),
        total_sim_time=elapsed,
        signature_histogram=dict(sorted(hist.items())),
        c_min=abacus.sweep[0],
    )


UNDER_BUCKET = "under_range_or_short_or_open"
OVER_BUCKET = "over_range"


def signature_histogram(bitmap: AnalogBitmap, bin_width: float, origin: float | None = None) -> dict[str, int]:
    """Bucket in-range estimates into ``[origin + k*bin_width, origin + (k+1)*bin_width)``.

    Keys are ``"lo..hi"`` strings (fF, ``%g`` formatted). Ambiguous step-0 and
    over-range cells go to the dedicated overflow buckets.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    origin = bitmap.c_min if origin is None else origin
    buckets: Counter = Counter()
    under = over = 0
    for rec in bitmap.records():
        label = rec.diagnosis.label
        if label is Label.UNDER_RANGE_OR_SHORT_OR_OPEN:
            under += 1
        elif label is Label.OVER_RANGE:
            over += 1
        else:
            buckets[math.floor((rec.estimate - origin) / bin_width)] += 1
    out = {}
    for k in sorted(buckets):
        lo = origin + k * bin_width
        out[f"{lo:g}..{lo + bin_width:g}"] = buckets[k]
    out[UNDER_BUCKET] = under
    out[OVER_BUCKET] = over
    return out


__all__ = [
    "AnalogBitmap",
    "CELL_TIME_NS",
    "CellRecord",
    "Diagnosis",
    "FaultKind",
    "FaultSpec",
    "Label",
    "classify",
    "inject_fault",
    "record_from",
    "scan_array",
    "signature_histogram",
]
