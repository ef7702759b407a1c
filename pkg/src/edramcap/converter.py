"""Phase 5: current-ramp conversion of the sensed gate voltage to a step count.

The programmable source pushes ``n * delta_i`` into the drain of REF for
n = 1..n_steps. REF is a long-channel square-law device. While it can sink
the injected current in triode the drain sits at the triode root; once the
current reaches its saturation capability the drain runs to V_DD. The
inverter trips when the drain reaches ``inverter_threshold`` and the shift
register then holds the number of completed sub-threshold steps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

CONVERT_NS = 10.0

# full-scale sizing keeps this relative margin so a cell at exactly the
# full-scale capacitance lands on the over-range side despite solver rounding
FULL_SCALE_MARGIN = 1e-9


@dataclass(frozen=True)
class ConverterParams:
    """REF device and ramp settings.

    Units: c_ref and full_scale in fF, voltages in V, k in uA/V^2, delta_i in
    uA. Leaving ``delta_i`` (or ``inverter_threshold``) as ``None`` sizes it
    automatically: the threshold becomes V_DD/2 and the current step is sized
    so that a ``full_scale`` capacitor (plus ``c_plate``) reaches the last
    step. Use ``dataclasses.replace(p, ..., delta_i=None)`` to resize after
    changing device parameters.
    """

    c_ref: float = 30.0
    v_dd: float = 1.8
    v_t: float = 0.45
    k: float = 200.0
    delta_i: float | None = None
    n_steps: int = 20
    inverter_threshold: float | None = None
    full_scale: float = 55.0
    c_plate: float = 0.0

    def __post_init__(self):
        if self.inverter_threshold is None:
            object.__setattr__(self, "inverter_threshold", self.v_dd / 2.0)
        for name in ("c_ref", "v_dd", "v_t", "k", "full_scale"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if not self.v_t < self.v_dd:
            raise ValueError("v_t must lie below v_dd")
        if not 0 < self.inverter_threshold < self.v_dd:
            raise ValueError("inverter_threshold must lie in (0, v_dd)")
        if self.c_plate < 0:
            raise ValueError("c_plate must be >= 0")
        if self.delta_i is None:
            object.__setattr__(self, "delta_i", self._full_scale_step())
        if not (math.isfinite(self.delta_i) and self.delta_i > 0):
            raise ValueError(f"delta_i must be positive, got {self.delta_i!r}")

    def _full_scale_step(self) -> float:
        c = self.full_scale + self.c_plate
        v_fs = self.v_dd * c / (c + self.c_ref)
        i_fs = dsat_current(v_fs, self)
        if i_fs <= 0:
            raise ValueError("full-scale capacitance does not turn REF on; cannot size the ramp")
        return i_fs * (1.0 - FULL_SCALE_MARGIN) / self.n_steps

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ConversionResult:
    step: int
    flipped: bool
    flip_time: float | None = None  # ns into phase 5, None when OUT never switches
    v_ds_trace: tuple[float, ...] | None = None


def dsat_current(v_gs: float, params: ConverterParams) -> float:
    """Saturation current of REF (uA)."""
    ov = v_gs - params.v_t
    if ov <= 0:
        return 0.0
    return 0.5 * params.k * ov * ov


def solve_vds(i: float, v_gs: float, params: ConverterParams) -> float:
    """Drain voltage of REF while sinking ``i`` uA from the ramp source."""
    if i < 0:
        raise ValueError("ramp current must be >= 0")
    ov = v_gs - params.v_t
    if ov <= 0:
        return params.v_dd
    i_sat = 0.5 * params.k * ov * ov
    if i >= i_sat:
        return params.v_dd
    return ov - math.sqrt(ov * ov - 2.0 * i / params.k)


def convert(v_gs: float, params: ConverterParams, *, trace: bool = False) -> ConversionResult:
    """Run the ramp and return the shift-register step value."""
    if not -1e-9 <= v_gs <= params.v_dd + 1e-9:
        raise ValueError(f"v_gs = {v_gs!r} V outside [0, v_dd]")
    n_steps = params.n_steps
    dt = CONVERT_NS / n_steps
    vds = [] if trace else None
    for n in range(1, n_steps + 1):
        v = solve_vds(n * params.delta_i, v_gs, params)
        if trace:
            vds.append(v)
        if v >= params.inverter_threshold:
            return ConversionResult(n - 1, True, n * dt, tuple(vds) if trace else None)
    return ConversionResult(n_steps, False, None, tuple(vds) if trace else None)

