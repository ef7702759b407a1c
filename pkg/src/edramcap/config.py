"""JSON run configuration shared by the CLI subcommands.

Every key carries its unit. Example::

    {
      "array": {"rows": 8, "cols": 8},
      "cells": {"source": "random", "distribution": "normal",
                "mean_fF": 30.0, "sigma_fF": 4.0, "seed": 7},
      "parasitics": {"plate_fF": 0.0, "bitline_fF": 0.0, "storage_fF": 0.0},
      "converter": {"c_ref_fF": 30.0, "v_dd_V": 1.8, "v_t_V": 0.45,
                    "k_uA_per_V2": 200.0, "delta_i_uA": null, "n_steps": 20,
                    "inverter_threshold_V": null, "full_scale_fF": 55.0},
      "calibration": {"c_min_fF": 10.0, "c_max_fF": 55.0,
                      "resolution_fF": 0.25, "refine": false},
      "faults": [{"row": 0, "col": 0, "kind": "short"},
                 {"row": 3, "col": 5, "kind": "value_override", "value_fF": 70.0}],
      "output": {"dir": "out"}
    }

All sections are optional; missing keys take the defaults above (uniform
30 fF cells on a 4x4 array when ``cells`` is absent).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from edramcap.converter import ConverterParams
from edramcap.diagnosis import FaultKind, FaultSpec, inject_fault
from edramcap.errors import ConfigError, EdramCapError
from edramcap.netlist import CellMatrix, ParasiticConfig

_CONVERTER_KEYS = {
    "c_ref_fF": "c_ref",
    "v_dd_V": "v_dd",
    "v_t_V": "v_t",
    "k_uA_per_V2": "k",
    "delta_i_uA": "delta_i",
    "n_steps": "n_steps",
    "inverter_threshold_V": "inverter_threshold",
    "full_scale_fF": "full_scale",
}
_CELL_SOURCES = ("uniform", "matrix", "random")
_DISTRIBUTIONS = ("normal", "uniform")


@dataclass
class RunConfig:
    rows: int = 4
    cols: int = 4
    cells: dict = field(default_factory=lambda: {"source": "uniform", "value_fF": 30.0})
    parasitics: ParasiticConfig = field(default_factory=ParasiticConfig)
    converter: ConverterParams = field(default_factory=ConverterParams)
    sweep: tuple[float, float, float] = (10.0, 55.0, 0.25)
    refine: bool = False
    faults: tuple[FaultSpec, ...] = ()
    out_dir: str = "out"
    base_dir: Path = field(default_factory=Path.cwd)

    def cell_matrix(self, seed: int | None = None) -> CellMatrix:
        """Cell values with the configured faults applied.

        ``seed`` overrides ``cells.seed`` for random sources.
        """
        src = self.cells.get("source", "uniform")
        if src == "uniform":
            values = np.full((self.rows, self.cols), float(self.cells.get("value_fF", 30.0)))
        elif src == "matrix":
            values = _read_matrix(self.base_dir / self.cells["path"])
            if values.shape != (self.rows, self.cols):
                raise ConfigError(f"matrix file is {values.shape}, array is {self.rows}x{self.cols}")
        else:
            s = self.cells.get("seed", 0) if seed is None else seed
            rng = np.random.default_rng(int(s))
            mean = float(self.cells.get("mean_fF", 30.0))
            sigma = float(self.cells.get("sigma_fF", 3.0))
            dist = self.cells.get("distribution", "normal")
            if dist == "normal":
                values = rng.normal(mean, sigma, (self.rows, self.cols))
            else:
                values = rng.uniform(mean - sigma * 3**0.5, mean + sigma * 3**0.5, (self.rows, self.cols))
            values = np.clip(values, 0.0, None)
        try:
            cells = CellMatrix.from_values(values)
            for f in self.faults:
                cells = inject_fault(cells, f)
        except EdramCapError as exc:
            raise ConfigError(str(exc)) from exc
        return cells


def _read_matrix(path: Path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read cell matrix {path}: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"cell matrix {path} must be a rectangular CSV of fF values")
    return np.array(rows)


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' must be an object")
    return sec


def parse_config(doc: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - {"array", "cells", "parasitics", "converter", "calibration", "faults", "output"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        arr = _section(doc, "array")
        rows, cols = int(arr.get("rows", 4)), int(arr.get("cols", 4))
        if rows < 1 or cols < 1:
            raise ConfigError(f"array must be at least 1x1, got {rows}x{cols}")

        cells = dict(doc.get("cells", {"source": "uniform", "value_fF": 30.0}))
        if cells.get("source", "uniform") not in _CELL_SOURCES:
            raise ConfigError(f"cells.source must be one of {_CELL_SOURCES}")
        if cells.get("source") == "matrix" and "path" not in cells:
            raise ConfigError("cells.source 'matrix' needs a 'path'")
        if cells.get("distribution", "normal") not in _DISTRIBUTIONS:
            raise ConfigError(f"cells.distribution must be one of {_DISTRIBUTIONS}")

        parasitics = ParasiticConfig.from_dict(_section(doc, "parasitics"))

        conv = _section(doc, "converter")
        bad = set(conv) - set(_CONVERTER_KEYS)
        if bad:
            raise ConfigError(f"unknown converter keys: {sorted(bad)}")
        kwargs = {_CONVERTER_KEYS[k]: v for k, v in conv.items() if v is not None}
        converter = ConverterParams(c_plate=parasitics.plate_fF, **kwargs)

        cal = _section(doc, "calibration")
        sweep = (
            float(cal.get("c_min_fF", 10.0)),
            float(cal.get("c_max_fF", 55.0)),
            float(cal.get("resolution_fF", 0.25)),
        )
        faults = []
        for f in doc.get("faults", []):
            kind = FaultKind(f["kind"])
            value = f.get("value_fF")
            faults.append(FaultSpec((int(f["row"]), int(f["col"])), kind, None if value is None else float(value)))
        out_dir = str(_section(doc, "output").get("dir", "out"))
    except ConfigError:
        raise
    except (EdramCapError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return RunConfig(
        rows=rows,
        cols=cols,
        cells=cells,
        parasitics=parasitics,
        converter=converter,
        sweep=sweep,
        refine=bool(cal.get("refine", False)),
        faults=tuple(faults),
        out_dir=out_dir,
        base_dir=base_dir or Path.cwd(),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, base_dir=path.parent)
