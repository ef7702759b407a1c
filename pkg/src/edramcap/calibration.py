"""Step <-> capacitance abacus built from simulated sweeps.

A sweep runs the whole measurement pipeline on a reference array for a
grid of C_m values and records the step each one produces. Consecutive grid
points sharing a step form a bin; the point estimate for a step is its bin
midpoint.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from edramcap.converter import ConverterParams
from edramcap.errors import CalibrationError, FingerprintMismatch
from edramcap.netlist import CellMatrix, ParasiticConfig, build_macro_cell
from edramcap.pipeline import measure_cell

NOMINAL_RANGE = (10.0, 55.0)
DEFAULT_SWEEP = (10.0, 55.0, 0.25)

IN_RANGE, UNDER_RANGE, OVER_RANGE = "in_range", "under_range", "over_range"


def fingerprint(params: ConverterParams, parasitics: ParasiticConfig | None = None) -> str:
    doc = {
        "converter": params.to_dict(),
        "parasitics": (parasitics or ParasiticConfig()).to_dict(),
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Bin:
    step: int
    lo: float
    hi: float

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, c: float) -> bool:
        return self.lo <= c < self.hi or (self.lo == self.hi == c)


@dataclass(frozen=True)
class Estimate:
    point: float | None
    interval: tuple[float, float]
    flag: str


@dataclass(frozen=True)
class Abacus:
    entries: tuple[tuple[float, int], ...]
    bins: tuple[Bin, ...]
    n_steps: int
    fingerprint: str
    sweep: tuple[float, float, float]

    def __post_init__(self):
        steps = [s for _, s in self.entries]
        cs = [c for c, _ in self.entries]
        if cs != sorted(cs) or any(b < a for a, b in zip(steps, steps[1:])):
            raise CalibrationError("abacus entries must be sorted with non-decreasing steps")

    def bin(self, step: int) -> Bin | None:
        for b in self.bins:
            if b.step == step:
                return b
        return None

    def check(self, params: ConverterParams, parasitics: ParasiticConfig | None = None) -> None:
        fp = fingerprint(params, parasitics)
        if fp != self.fingerprint:
            raise FingerprintMismatch(
                f"abacus fingerprint {self.fingerprint} does not match current settings {fp}"
            )

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "n_steps": self.n_steps,
            "sweep": {"c_min_fF": self.sweep[0], "c_max_fF": self.sweep[1], "resolution_fF": self.sweep[2]},
            "bins": [{"step": b.step, "lo_fF": b.lo, "hi_fF": b.hi} for b in self.bins],
            "entries": [[c, s] for c, s in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Abacus":
        try:
            sw = d["sweep"]
            return cls(
                entries=tuple((float(c), int(s)) for c, s in d["entries"]),
                bins=tuple(Bin(int(b["step"]), float(b["lo_fF"]), float(b["hi_fF"])) for b in d["bins"]),
                n_steps=int(d["n_steps"]),
                fingerprint=str(d["fingerprint"]),
                sweep=(float(sw["c_min_fF"]), float(sw["c_max_fF"]), float(sw["resolution_fF"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CalibrationError(f"malformed abacus document: {exc}") from exc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["c_m_fF", "step"])
        for c, s in self.entries:
            w.writerow([repr(c), s])
        return buf.getvalue()

    def dump(self, json_path, csv_path=None) -> None:
        Path(json_path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        if csv_path is not None:
            Path(csv_path).write_text(self.to_csv())

    @classmethod
    def load(cls, json_path) -> "Abacus":
        return cls.from_dict(json.loads(Path(json_path).read_text()))


def sweep_grid(c_min: float, c_max: float, resolution: float) -> np.ndarray:
    if not c_min < c_max:
        raise CalibrationError(f"sweep needs c_min < c_max, got {c_min} and {c_max}")
    if not resolution > 0:
        raise CalibrationError("sweep resolution must be positive")
    if c_min < 0:
        raise CalibrationError("sweep cannot start below 0 fF")
    n = int(math.floor((c_max - c_min) / resolution + 1e-9))
    return c_min + resolution * np.arange(n + 1)


class _Probe:
    """Runs the pipeline for the target cell of a fixed reference array."""

    def __init__(self, params, parasitics, dims, target, background):
        self.params = params
        self.parasitics = parasitics
        self.dims = dims
        self.target = target
        self.base = np.full(dims, float(background))

    def __call__(self, c_m: float) -> int:
        values = self.base.copy()
        values[self.target] = c_m
        net = build_macro_cell(
            *self.dims, CellMatrix.from_values(values), self.parasitics,
            c_ref=self.params.c_ref, v_dd=self.params.v_dd,
        )
        return measure_cell(net, *self.target, self.params).step


def build_abacus(
    params: ConverterParams,
    sweep: tuple[float, float, float] = DEFAULT_SWEEP,
    parasitics: ParasiticConfig | None = None,
    *,
    dims: tuple[int, int] = (1, 1),
    target: tuple[int, int] = (0, 0),
    background: float = 30.0,
    refine: bool = False,
    refine_tol: float = 1e-6,
) -> Abacus:
    """Sweep C_m over ``sweep = (c_min, c_max, resolution)`` in fF.

    Bin edges default to the midpoint between the last grid point of one
    step and the first of the next. With ``refine=True`` each edge is located
    by bisection on the pipeline to ``refine_tol`` fF instead.

    Raises
    ------
    CalibrationError
        If the step curve decreases anywhere along the sweep.
    """
    parasitics = parasitics or ParasiticConfig()
    probe = _Probe(params, parasitics, dims, target, background)
    grid = sweep_grid(*sweep)
    steps = [probe(float(c)) for c in grid]
    for k in range(1, len(steps)):
        if steps[k] < steps[k - 1]:
            raise CalibrationError(
                f"non-monotone abacus: step {steps[k - 1]} at {grid[k - 1]:g} fF "
                f"then step {steps[k]} at {grid[k]:g} fF"
            )

    # group runs of equal step
    starts = [0] + [k for k in range(1, len(steps)) if steps[k] != steps[k - 1]]
    edges = []
    for k in starts[1:]:
        lo_c, hi_c = float(grid[k - 1]), float(grid[k])
        if refine:
            s_lo = steps[k - 1]
            while hi_c - lo_c > refine_tol:
                mid = 0.5 * (lo_c + hi_c)
                if probe(mid) == s_lo:
                    lo_c = mid
                else:
                    hi_c = mid
            edges.append(hi_c)
        else:
            edges.append(0.5 * (lo_c + hi_c))
    lows = [float(grid[0])] + edges
    highs = edges + [float(grid[-1])]
    bins = tuple(Bin(steps[k], lo, hi) for k, lo, hi in zip(starts, lows, highs))
    return Abacus(
        entries=tuple((float(c), int(s)) for c, s in zip(grid, steps)),
        bins=bins,
        n_steps=params.n_steps,
        fingerprint=fingerprint(params, parasitics),
        sweep=tuple(float(x) for x in sweep),
    )


def estimate_capacitance(
    abacus: Abacus,
    step: int,
    params: ConverterParams | None = None,
    parasitics: ParasiticConfig | None = None,
) -> Estimate:
    """Capacitance image of a register value.

    Step 0 and step ``n_steps`` are open-ended (under-/over-range) and carry
    no point estimate. Passing ``params`` checks the abacus fingerprint.
    """
    if params is not None:
        abacus.check(params, parasitics)
    n = abacus.n_steps
    if not (isinstance(step, (int, np.integer)) and 0 <= step <= n):
        raise ValueError(f"step must be an integer in [0, {n}], got {step!r}")
    if step == 0:
        upper = abacus.bin(1).lo if abacus.bin(1) else (abacus.bin(0).hi if abacus.bin(0) else abacus.sweep[0])
        return Estimate(None, (0.0, upper), UNDER_RANGE)
    if step == n:
        b = abacus.bin(n - 1)
        lower = b.hi if b else (abacus.bin(n).lo if abacus.bin(n) else abacus.sweep[1])
        return Estimate(None, (lower, math.inf), OVER_RANGE)
    b = abacus.bin(step)
    if b is None:
        raise CalibrationError(f"step {step} is not covered by the abacus sweep")
    return Estimate(b.mid, (b.lo, b.hi), IN_RANGE)


@dataclass(frozen=True)
class StepError:
    step: int
    max_relative: float
    max_full_scale: float


@dataclass(frozen=True)
class AccuracyReport:
    per_step: tuple[StepError, ...]
    max_relative: float
    median_relative: float
    max_full_scale: float
    median_full_scale: float
    range_covered: tuple[float, float] | None
    n_points: int
    span: float

    def summary_lines(self) -> list[str]:
        lines = []
        if self.range_covered is None:
            lines.append("in-range coverage: none (no interior step in the sweep)")
            return lines
        lo, hi = self.range_covered
        lines.append(f"in-range coverage: {lo:.3f} .. {hi:.3f} fF ({self.n_points} sweep points)")
        lines.append(
            f"full-scale error (|est-true|/{self.span:g} fF): "
            f"max {100 * self.max_full_scale:.3f} %  median {100 * self.median_full_scale:.3f} %"
        )
        lines.append(
            f"relative-to-reading error (|est-true|/true): "
            f"max {100 * self.max_relative:.3f} %  median {100 * self.median_relative:.3f} %"
        )
        return lines

    def to_dict(self) -> dict:
        return {
            "span_fF": self.span,
            "range_covered_fF": list(self.range_covered) if self.range_covered else None,
            "n_points": self.n_points,
            "max_full_scale": self.max_full_scale,
            "median_full_scale": self.median_full_scale,
            "max_relative": self.max_relative,
            "median_relative": self.median_relative,
            "per_step": [
                {"step": e.step, "max_relative": e.max_relative, "max_full_scale": e.max_full_scale}
                for e in self.per_step
            ],
        }


def accuracy_report(abacus: Abacus, nominal_range: tuple[float, float] = NOMINAL_RANGE) -> AccuracyReport:
    """Bin-midpoint estimation error over the interior steps of the sweep,
    restricted to sweep points within ``nominal_range``.

    Two metrics: relative to the true value, and relative to the span of the
    nominal range (full-scale).
    """
    lo_r, hi_r = nominal_range
    span = hi_r - lo_r
    rel, fs, per = [], [], {}
    covered = []
    for c, s in abacus.entries:
        if not (lo_r <= c <= hi_r) or s in (0, abacus.n_steps):
            continue
        b = abacus.bin(s)
        err = abs(b.mid - c)
        r = err / c
        f = err / span
        rel.append(r)
        fs.append(f)
        pr, pf = per.get(s, (0.0, 0.0))
        per[s] = (max(pr, r), max(pf, f))
        covered.append(b)
    if not rel:
        return AccuracyReport((), 0.0, 0.0, 0.0, 0.0, None, 0, span)
    per_step = tuple(StepError(s, *per[s]) for s in sorted(per))
    rng = (max(lo_r, min(b.lo for b in covered)), min(hi_r, max(b.hi for b in covered)))
    return AccuracyReport(
        per_step=per_step,
        max_relative=float(max(rel)),
        median_relative=float(np.median(rel)),
        max_full_scale=float(max(fs)),
        median_full_scale=float(np.median(fs)),
        range_covered=rng,
        n_points=len(rel),
        span=span,
    )
