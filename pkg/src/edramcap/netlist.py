"""Switched-capacitor network of the macro-cell and its measurement structure.

Node voltages are solved quasi-statically: after every switch reconfiguration
the closed switches partition the nodes into connected components, components
holding an active source are pinned to it, and the remaining (floating)
components settle so that each keeps the net charge it held before.

Units throughout: fF, V, fC (= fF * V), ns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from edramcap import kernels
from edramcap.errors import NetlistError, SourceConflictError

GROUND = 0

# two sources closer than this are considered the same rail
_SOURCE_TOL = 1e-12


@dataclass(frozen=True)
class CapacitorElement:
    name: str
    node_a: int
    node_b: int
    value: float


@dataclass(frozen=True)
class SwitchElement:
    """Ideal switch. ``control=None`` marks a permanent connection (hard wire)."""

    name: str
    node_a: int
    node_b: int
    control: str | None


@dataclass(frozen=True)
class SourceElement:
    """Ideal voltage source to ground. ``voltage``/``active`` are defaults that
    a :class:`Signals` drive entry may override."""

    name: str
    node: int
    voltage: float
    active: bool = True


@dataclass(frozen=True)
class Signals:
    """Switch control levels and source drives for one configuration.

    ``drives`` maps a source name to volts, or ``None`` for high impedance.
    Sources absent from ``drives`` keep the defaults stored on the element.
    """

    controls: Mapping[str, bool] = field(default_factory=dict)
    drives: Mapping[str, float | None] = field(default_factory=dict)


@dataclass(frozen=True)
class SourceConflict:
    node_names: tuple[str, ...]
    sources: tuple[tuple[str, float], ...]


@dataclass(frozen=True, eq=False)
class CircuitState:
    """Node voltages (indexed by node id) and capacitor charges (indexed by
    capacitor position) at one instant. Arrays are read-only."""

    voltages: np.ndarray
    charges: np.ndarray
    time: float = 0.0
    conflicts: tuple[SourceConflict, ...] = ()

    def __post_init__(self):
        for arr in (self.voltages, self.charges):
            arr.setflags(write=False)

    def voltage(self, node: int) -> float:
        return float(self.voltages[node])

    def at_time(self, time: float) -> "CircuitState":
        return CircuitState(self.voltages, self.charges, time, self.conflicts)


@dataclass(frozen=True)
class ParasiticConfig:
    """Optional parasitic capacitances to ground, all in fF.

    ``bitline_fF`` may be a scalar or one value per column; ``storage_fF`` a
    scalar or a rows x cols matrix.
    """

    plate_fF: float = 0.0
    bitline_fF: float | tuple[float, ...] = 0.0
    storage_fF: float | tuple[tuple[float, ...], ...] = 0.0

    def __post_init__(self):
        if not isinstance(self.bitline_fF, (int, float)):
            object.__setattr__(self, "bitline_fF", tuple(float(x) for x in self.bitline_fF))
        if not isinstance(self.storage_fF, (int, float)):
            object.__setattr__(
                self, "storage_fF", tuple(tuple(float(x) for x in row) for row in self.storage_fF)
            )
        vals = [self.plate_fF, *np.ravel(self.bitline_fF), *np.ravel(self.storage_fF)]
        if any(not np.isfinite(v) or v < 0 for v in vals):
            raise NetlistError("parasitic capacitances must be finite and >= 0")

    def bitline(self, cols: int) -> np.ndarray:
        out = np.broadcast_to(np.asarray(self.bitline_fF, dtype=float), (cols,))
        return np.array(out)

    def storage(self, rows: int, cols: int) -> np.ndarray:
        out = np.broadcast_to(np.asarray(self.storage_fF, dtype=float), (rows, cols))
        return np.array(out)

    def to_dict(self) -> dict:
        return {
            "plate_fF": float(self.plate_fF),
            "bitline_fF": self.bitline_fF if isinstance(self.bitline_fF, tuple) else float(self.bitline_fF),
            "storage_fF": self.storage_fF if isinstance(self.storage_fF, tuple) else float(self.storage_fF),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParasiticConfig":
        unknown = set(d) - {"plate_fF", "bitline_fF", "storage_fF"}
        if unknown:
            raise NetlistError(f"unknown parasitic keys: {sorted(unknown)}")
        return cls(
            plate_fF=float(d.get("plate_fF", 0.0)),
            bitline_fF=d.get("bitline_fF", 0.0),
            storage_fF=d.get("storage_fF", 0.0),
        )


NOMINAL, SHORT, OPEN = "nominal", "short", "open"


@dataclass(frozen=True)
class CellCapacitor:
    value: float
    fault: str = NOMINAL


@dataclass(frozen=True, eq=False)
class CellMatrix:
    """Cell capacitor values (fF) and fault states of a rows x cols array."""

    values: np.ndarray
    states: np.ndarray
    faulted: frozenset = frozenset()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.size == 0:
            raise NetlistError("cell matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise NetlistError("cell capacitances must be finite and >= 0")
        states = np.array(self.states, dtype=object)
        if states.shape != values.shape:
            raise NetlistError("cell states must match the value matrix shape")
        bad = set(states.ravel()) - {NOMINAL, SHORT, OPEN}
        if bad:
            raise NetlistError(f"unknown cell fault states: {sorted(bad)}")
        values.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "states", states)

    @classmethod
    def from_values(cls, values) -> "CellMatrix":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        return cls(values, np.full(values.shape, NOMINAL, dtype=object))

    @classmethod
    def uniform(cls, rows: int, cols: int, value: float) -> "CellMatrix":
        return cls.from_values(np.full((rows, cols), float(value)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def cell(self, row: int, col: int) -> CellCapacitor:
        return CellCapacitor(float(self.values[row, col]), self.states[row, col])

    def __eq__(self, other):
        if not isinstance(other, CellMatrix):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and np.array_equal(self.states, other.states)
            and self.faulted == other.faulted
        )


@dataclass(frozen=True)
class MacroCellInfo:
    rows: int
    cols: int
    v_dd: float
    c_ref: float


class Netlist:
    """Immutable capacitor/switch/source network.

    Node 0 is ground. ``nodes`` holds the node names, indexed by node id.
    """

    def __init__(
        self,
        nodes: Sequence[str],
        capacitors: Sequence[CapacitorElement],
        switches: Sequence[SwitchElement],
        sources: Sequence[SourceElement],
        macro: MacroCellInfo | None = None,
    ):
        self.nodes = tuple(nodes)
        self.capacitors = tuple(capacitors)
        self.switches = tuple(switches)
        self.sources = tuple(sources)
        self.macro = macro
        self._validate()
        self._index = {name: i for i, name in enumerate(self.nodes)}
        self.cap_a = np.array([c.node_a for c in self.capacitors], dtype=np.int64)
        self.cap_b = np.array([c.node_b for c in self.capacitors], dtype=np.int64)
        self.cap_c = np.array([c.value for c in self.capacitors], dtype=float)
        self.sw_a = np.array([s.node_a for s in self.switches], dtype=np.int64)
        self.sw_b = np.array([s.node_b for s in self.switches], dtype=np.int64)
        self.controls = tuple(sorted({s.control for s in self.switches if s.control is not None}))
        self._cap_index = {c.name: i for i, c in enumerate(self.capacitors)}
        for arr in (self.cap_a, self.cap_b, self.cap_c, self.sw_a, self.sw_b):
            arr.setflags(write=False)

    def _validate(self):
        if not self.nodes:
            raise NetlistError("netlist needs at least the ground node")
        if len(set(self.nodes)) != len(self.nodes):
            raise NetlistError("duplicate node names")
        n = len(self.nodes)
        names = [e.name for e in (*self.capacitors, *self.switches, *self.sources)]
        if len(set(names)) != len(names):
            raise NetlistError("duplicate element names")
        for c in self.capacitors:
            if not (0 <= c.node_a < n and 0 <= c.node_b < n):
                raise NetlistError(f"capacitor {c.name} references an unknown node")
            if not np.isfinite(c.value) or c.value < 0:
                raise NetlistError(f"capacitor {c.name} has invalid value {c.value!r} fF")
        for s in self.switches:
            if not (0 <= s.node_a < n and 0 <= s.node_b < n):
                raise NetlistError(f"switch {s.name} references an unknown node")
        for s in self.sources:
            if not 0 <= s.node < n:
                raise NetlistError(f"source {s.name} references an unknown node")

    def node(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < len(self.nodes):
                raise NetlistError(f"no node with id {name}")
            return int(name)
        try:
            return self._index[name]
        except KeyError:
            raise NetlistError(f"no node named {name!r}") from None

    def capacitor_index(self, name: str) -> int:
        return self._cap_index[name]

    def initial_state(self) -> CircuitState:
        return CircuitState(np.zeros(len(self.nodes)), np.zeros(len(self.capacitors)))

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        nm = self.nodes
        doc = {
            "nodes": list(nm),
            "capacitors": [
                {"name": c.name, "a": nm[c.node_a], "b": nm[c.node_b], "value_fF": c.value}
                for c in self.capacitors
            ],
            "switches": [
                {"name": s.name, "a": nm[s.node_a], "b": nm[s.node_b], "control": s.control}
                for s in self.switches
            ],
            "sources": [
                {"name": s.name, "node": nm[s.node], "voltage_V": s.voltage, "active": s.active}
                for s in self.sources
            ],
        }
        if self.macro is not None:
            m = self.macro
            doc["macro_cell"] = {"rows": m.rows, "cols": m.cols, "v_dd_V": m.v_dd, "c_ref_fF": m.c_ref}
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Netlist":
        try:
            nodes = list(doc["nodes"])
            index = {name: i for i, name in enumerate(nodes)}

            def ref(x):
                if isinstance(x, int):
                    return x
                if x not in index:
                    raise NetlistError(f"unknown node {x!r}")
                return index[x]

            caps = [
                CapacitorElement(c["name"], ref(c["a"]), ref(c["b"]), float(c["value_fF"]))
                for c in doc.get("capacitors", [])
            ]
            sws = [
                SwitchElement(s["name"], ref(s["a"]), ref(s["b"]), s.get("control"))
                for s in doc.get("switches", [])
            ]
            srcs = [
                SourceElement(s["name"], ref(s["node"]), float(s["voltage_V"]), bool(s.get("active", True)))
                for s in doc.get("sources", [])
            ]
            macro = None
            if "macro_cell" in doc:
                m = doc["macro_cell"]
                macro = MacroCellInfo(int(m["rows"]), int(m["cols"]), float(m["v_dd_V"]), float(m["c_ref_fF"]))
        except (KeyError, TypeError) as exc:
            raise NetlistError(f"malformed netlist document: {exc}") from exc
        return cls(nodes, caps, sws, srcs, macro)

    @classmethod
    def load(cls, path) -> "Netlist":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def build_macro_cell(
    rows: int,
    cols: int,
    cell_values,
    parasitics: ParasiticConfig | None = None,
    *,
    c_ref: float = 30.0,
    v_dd: float = 1.8,
) -> Netlist:
    """Build the macro-cell plus plate-attached measurement structure.

    Every cell capacitor sits between its storage node and the shared plate.
    The WL<i> access switch joins storage node (i, j) to bit-line j, SBL<j>
    joins bit-line j to the IN_BL<j> driver, PRG joins the IN driver to the
    plate, LEC joins the plate to the REF gate (loaded by C_REF) and STD
    joins the plate to the V_DD/2 bias.

    ``cell_values`` is a rows x cols array of fF or a :class:`CellMatrix`
    (which also carries short/open faults).
    """
    if rows < 1 or cols < 1:
        raise NetlistError(f"array must be at least 1x1, got {rows}x{cols}")
    cells = cell_values if isinstance(cell_values, CellMatrix) else CellMatrix.from_values(cell_values)
    if cells.shape != (rows, cols):
        raise NetlistError(f"cell matrix shape {cells.shape} does not match {rows}x{cols}")
    if c_ref < 0 or v_dd <= 0:
        raise NetlistError("c_ref must be >= 0 and v_dd > 0")
    par = parasitics or ParasiticConfig()
    bl_par = par.bitline(cols)
    sn_par = par.storage(rows, cols)

    nodes = ["gnd", "plate", "ref_gate", "in", "vbias"]
    nodes += [f"bl{j}" for j in range(cols)]
    nodes += [f"inbl{j}" for j in range(cols)]
    nodes += [f"sn{i}_{j}" for i in range(rows) for j in range(cols)]
    ix = {name: k for k, name in enumerate(nodes)}

    caps, sws = [], []
    for i in range(rows):
        for j in range(cols):
            cell = cells.cell(i, j)
            sn = ix[f"sn{i}_{j}"]
            if cell.fault == SHORT:
                sws.append(SwitchElement(f"FSHORT{i}_{j}", sn, ix["plate"], None))
            elif cell.fault == NOMINAL:
                caps.append(CapacitorElement(f"C{i}_{j}", sn, ix["plate"], cell.value))
            # OPEN: capacitor removed
    caps.append(CapacitorElement("CREF", ix["ref_gate"], GROUND, float(c_ref)))
    if par.plate_fF > 0:
        caps.append(CapacitorElement("CP_PLATE", ix["plate"], GROUND, float(par.plate_fF)))
    for j in range(cols):
        if bl_par[j] > 0:
            caps.append(CapacitorElement(f"CP_BL{j}", ix[f"bl{j}"], GROUND, float(bl_par[j])))
    for i in range(rows):
        for j in range(cols):
            if sn_par[i, j] > 0:
                caps.append(CapacitorElement(f"CP_SN{i}_{j}", ix[f"sn{i}_{j}"], GROUND, float(sn_par[i, j])))

    for i in range(rows):
        for j in range(cols):
            sws.append(SwitchElement(f"A{i}_{j}", ix[f"sn{i}_{j}"], ix[f"bl{j}"], f"WL{i}"))
    for j in range(cols):
        sws.append(SwitchElement(f"SBL{j}", ix[f"bl{j}"], ix[f"inbl{j}"], f"SBL{j}"))
    sws.append(SwitchElement("PRG", ix["in"], ix["plate"], "PRG"))
    sws.append(SwitchElement("LEC", ix["plate"], ix["ref_gate"], "LEC"))
    sws.append(SwitchElement("STD", ix["vbias"], ix["plate"], "STD"))

    srcs = [SourceElement(f"INBL{j}", ix[f"inbl{j}"], 0.0, False) for j in range(cols)]
    srcs.append(SourceElement("IN", ix["in"], 0.0, False))
    srcs.append(SourceElement("VBIAS", ix["vbias"], v_dd / 2.0, True))
    return Netlist(nodes, caps, sws, srcs, MacroCellInfo(rows, cols, float(v_dd), float(c_ref)))


# -- solver ------------------------------------------------------------------


@dataclass
class _Topology:
    labels: np.ndarray
    n_comp: int
    comp_v: np.ndarray  # pinned voltage, NaN for floating components
    conflicts: list


def _topology(netlist: Netlist, signals: Signals) -> _Topology:
    closed = np.zeros(len(netlist.switches), dtype=bool)
    for k, sw in enumerate(netlist.switches):
        if sw.control is None:
            closed[k] = True
            continue
        try:
            closed[k] = bool(signals.controls[sw.control])
        except KeyError:
            raise NetlistError(f"no level given for switch control {sw.control!r}") from None
    labels, n_comp = kernels.component_labels(
        len(netlist.nodes), netlist.sw_a[closed], netlist.sw_b[closed]
    )

    pins: dict[int, list[tuple[str, float]]] = {int(labels[GROUND]): [("gnd", 0.0)]}
    for src in netlist.sources:
        if src.name in signals.drives:
            v = signals.drives[src.name]
            active = v is not None
        else:
            v, active = src.voltage, src.active
        if active:
            pins.setdefault(int(labels[src.node]), []).append((src.name, float(v)))

    comp_v = np.full(n_comp, np.nan)
    conflicts = []
    for comp, drv in pins.items():
        volts = [v for _, v in drv]
        if max(volts) - min(volts) > _SOURCE_TOL:
            members = tuple(netlist.nodes[i] for i in np.flatnonzero(labels == comp))
            conflicts.append((comp, SourceConflict(members, tuple(drv))))
        comp_v[comp] = volts[0]
    return _Topology(labels, n_comp, comp_v, conflicts)


def _floating_clusters(n_float: int, edges: np.ndarray) -> tuple[np.ndarray, int]:
    return kernels.component_labels(n_float, edges[0], edges[1])


def apply_switches(
    netlist: Netlist,
    signals: Signals,
    state: CircuitState | None = None,
    *,
    on_conflict: str = "raise",
) -> CircuitState:
    """Settle the network after a switch/source reconfiguration.

    Parameters
    ----------
    netlist : Netlist
    signals : Signals or object with ``to_signals(v_dd)``
        Must give a level for every switch control.
    state : CircuitState, optional
        State before the reconfiguration; defaults to the all-zero state.
    on_conflict : {"raise", "lowest"}
        ``"raise"`` raises :class:`SourceConflictError` when a component holds
        sources at different voltages. ``"lowest"`` pins such a component to
        its lowest source voltage and records the event in
        ``CircuitState.conflicts``.

    Notes
    -----
    Floating components coupled by capacitors are solved together by a
    dense solve of their capacitance matrix. A cluster of floating
    components with no capacitive path to any driven node has an undefined
    common-mode potential; it is fixed by requiring the mean component
    voltage to stay at its previous value (minimum-norm voltage change).
    """
    if on_conflict not in ("raise", "lowest"):
        raise ValueError(f"on_conflict must be 'raise' or 'lowest', got {on_conflict!r}")
    signals = _as_signals(netlist, signals)
    if state is None:
        state = netlist.initial_state()
    topo = _topology(netlist, signals)
    if topo.conflicts:
        if on_conflict == "raise":
            raise SourceConflictError([c for _, c in topo.conflicts])
        for comp, c in topo.conflicts:
            topo.comp_v[comp] = min(v for _, v in c.sources)

    labels, comp_v = topo.labels, topo.comp_v
    floating = np.flatnonzero(np.isnan(comp_v))
    n_float = len(floating)
    if n_float:
        float_index = np.full(topo.n_comp, -1, dtype=np.int64)
        float_index[floating] = np.arange(n_float)
        q_comp = kernels.component_charge(labels, topo.n_comp, netlist.cap_a, netlist.cap_b, state.charges)
        M, drive, c_driven, edges = kernels.assemble(
            labels, float_index, np.nan_to_num(comp_v), netlist.cap_a, netlist.cap_b, netlist.cap_c, n_float
        )
        rhs = q_comp[floating] + drive
        # previous potential of each floating component: mean over its nodes
        counts = np.bincount(labels, minlength=topo.n_comp)
        v_prev = np.bincount(labels, weights=state.voltages, minlength=topo.n_comp)[floating] / counts[floating]

        clabels, n_clusters = _floating_clusters(n_float, edges)
        v_float = np.empty(n_float)
        sizes = np.bincount(clabels, minlength=n_clusters)
        single = sizes[clabels] == 1
        diag = np.diagonal(M)
        grounded = single & (c_driven > 0)
        v_float[grounded] = rhs[grounded] / diag[grounded]
        alone = single & ~grounded
        v_float[alone] = v_prev[alone]
        for cl in np.flatnonzero(sizes > 1):
            idx = np.flatnonzero(clabels == cl)
            sub = M[np.ix_(idx, idx)]
            if np.any(c_driven[idx] > 0):
                v_float[idx] = np.linalg.solve(sub, rhs[idx])
            else:
                m = len(idx)
                aug = np.zeros((m + 1, m + 1))
                aug[:m, :m] = sub
                aug[:m, m] = 1.0
                aug[m, :m] = 1.0
                b = np.append(rhs[idx], v_prev[idx].sum())
                v_float[idx] = np.linalg.solve(aug, b)[:m]
        comp_v = comp_v.copy()
        comp_v[floating] = v_float

    voltages = comp_v[labels]
    voltages[GROUND] = 0.0
    charges = netlist.cap_c * (voltages[netlist.cap_a] - voltages[netlist.cap_b])
    return CircuitState(voltages, charges, state.time, tuple(c for _, c in topo.conflicts))


def component_capacitance(netlist: Netlist, node: str | int, signals: Signals) -> float:
    """Effective capacitance (fF) from ``node``'s floating component to the
    driven nodes, reducing series paths through other floating components.

    A capacitor whose far terminal is an otherwise unconnected floating node
    contributes nothing.
    """
    signals = _as_signals(netlist, signals)
    node = netlist.node(node)
    topo = _topology(netlist, signals)
    if topo.conflicts:
        raise SourceConflictError([c for _, c in topo.conflicts])
    port = int(topo.labels[node])
    if not np.isnan(topo.comp_v[port]):
        raise NetlistError(f"node {netlist.nodes[node]!r} is in a driven component")
    floating = np.flatnonzero(np.isnan(topo.comp_v))
    float_index = np.full(topo.n_comp, -1, dtype=np.int64)
    float_index[floating] = np.arange(len(floating))
    M, _, _, edges = kernels.assemble(
        topo.labels,
        float_index,
        np.nan_to_num(topo.comp_v),
        netlist.cap_a,
        netlist.cap_b,
        netlist.cap_c,
        len(floating),
    )
    clabels, _ = _floating_clusters(len(floating), edges)
    p = float_index[port]
    members = np.flatnonzero(clabels == clabels[p])
    internal = members[members != p]
    c_pp = M[p, p]
    if internal.size == 0:
        return float(c_pp)
    m_pi = M[p, internal]
    m_ii = M[np.ix_(internal, internal)]
    return float(c_pp - m_pi @ np.linalg.solve(m_ii, m_pi))


def floating_charge_balance(
    netlist: Netlist, signals: Signals, before: CircuitState, after: CircuitState
) -> list[tuple[tuple[str, ...], float, float, float]]:
    """Per floating component of the configuration given by ``signals``:
    ``(node names, charge before, charge after, charge scale)`` in fC.

    The scale is the sum of C*(|V_a| + |V_b|) over the capacitors touching
    the component, before and after: the charge magnitude that rounding of
    the C*V products acts on, and the denominator for a relative check.
    A component whose net charge is near zero still gets a meaningful scale.
    """
    signals = _as_signals(netlist, signals)
    topo = _topology(netlist, signals)
    labels = topo.labels
    q_before = kernels.component_charge(labels, topo.n_comp, netlist.cap_a, netlist.cap_b, before.charges)
    q_after = kernels.component_charge(labels, topo.n_comp, netlist.cap_a, netlist.cap_b, after.charges)
    pinned = {comp for comp in range(topo.n_comp) if not np.isnan(topo.comp_v[comp])}
    pinned.update(comp for comp, _ in topo.conflicts)
    scale = np.zeros(topo.n_comp)
    for st in (before, after):
        mag = netlist.cap_c * (np.abs(st.voltages[netlist.cap_a]) + np.abs(st.voltages[netlist.cap_b]))
        np.add.at(scale, labels[netlist.cap_a], mag)
        np.add.at(scale, labels[netlist.cap_b], mag)
    out = []
    for comp in range(topo.n_comp):
        if comp in pinned:
            continue
        members = tuple(netlist.nodes[i] for i in np.flatnonzero(labels == comp))
        out.append((members, float(q_before[comp]), float(q_after[comp]), float(scale[comp])))
    return out


def _as_signals(netlist: Netlist, signals) -> Signals:
    if isinstance(signals, Signals):
        return signals
    if hasattr(signals, "to_signals"):
        if netlist.macro is None:
            raise NetlistError("symbolic signal vectors need a macro-cell netlist (for V_DD)")
        return signals.to_signals(netlist.macro.v_dd)
    if isinstance(signals, Mapping):
        return Signals(signals.get("controls", {}), signals.get("drives", {}))
    raise TypeError(f"cannot interpret {type(signals).__name__} as switch signals")
