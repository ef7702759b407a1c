"""Command-line front end: ``edramcap calibrate|measure|scan``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from edramcap.calibration import Abacus, accuracy_report, build_abacus
from edramcap.config import RunConfig, load_config
from edramcap.diagnosis import Label, record_from, scan_array, signature_histogram
from edramcap.errors import CalibrationError, ConfigError, ScheduleError, SourceConflictError
from edramcap.netlist import build_macro_cell
from edramcap.pipeline import measure_cell
from edramcap.protocol import PHASE_NAMES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_CALIBRATION = 4

BITMAP_HEADER = ["row", "col", "step", "cap_est_fF", "cap_lo_fF", "cap_hi_fF", "diagnosis"]


def _fmt(x: float) -> str:
    return repr(float(x))


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_abacus(args, cfg: RunConfig, out: Path) -> Abacus:
    path = Path(args.abacus) if args.abacus else out / "abacus.json"
    if not path.exists():
        raise CalibrationError(f"abacus {path} not found; run 'edramcap calibrate' first")
    abacus = Abacus.load(path)
    abacus.check(cfg.converter, cfg.parasitics)
    return abacus


def _trace_doc(netlist, m) -> dict:
    gate, plate = netlist.node("ref_gate"), netlist.node("plate")
    phases = []
    for k, st in enumerate(m.outcome.trace or ()):
        phases.append(
            {
                "phase": k + 1,
                "name": PHASE_NAMES[k],
                "time_ns": st.time,
                "v_plate_V": st.voltage(plate),
                "v_gate_V": st.voltage(gate),
                "voltages_V": {name: float(v) for name, v in zip(netlist.nodes, st.voltages)},
            }
        )
    return {
        "row": m.row,
        "col": m.col,
        "v_gs_V": m.v_gs,
        "step": m.step,
        "flip_time_ns": m.conversion.flip_time,
        "phases": phases,
        "ramp_v_ds_V": list(m.conversion.v_ds_trace or ()),
        "conflicts": [
            {"phase": k + 1, "nodes": list(c.node_names), "sources": [list(s) for s in c.sources]}
            for k, c in m.outcome.conflicts
        ],
    }


def cmd_calibrate(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    abacus = build_abacus(cfg.converter, cfg.sweep, cfg.parasitics, refine=cfg.refine)
    abacus.dump(out / "abacus.json", out / "abacus.csv")
    report = accuracy_report(abacus)
    (out / "accuracy.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"abacus: {len(abacus.bins)} bins over {cfg.sweep[0]:g}..{cfg.sweep[1]:g} fF "
          f"(fingerprint {abacus.fingerprint}) -> {out}")
    if len(abacus.bins) == 1:
        print(f"warning: sweep maps to a single step ({abacus.bins[0].step})", file=sys.stderr)
    for line in report.summary_lines():
        print(line)
    return EXIT_OK


def cmd_measure(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    if args.row is None or args.col is None:
        raise ConfigError("measure needs --row and --col")
    if not (0 <= args.row < cfg.rows and 0 <= args.col < cfg.cols):
        raise ConfigError(f"cell ({args.row}, {args.col}) outside a {cfg.rows}x{cfg.cols} array")
    cells = cfg.cell_matrix(args.seed)
    abacus = _load_abacus(args, cfg, out)
    p = cfg.converter
    net = build_macro_cell(cfg.rows, cfg.cols, cells, cfg.parasitics, c_ref=p.c_ref, v_dd=p.v_dd)
    m = measure_cell(net, args.row, args.col, p, trace=args.trace, strict=args.strict)
    rec = record_from(m, abacus)
    cell = cells.cell(args.row, args.col)
    d = rec.diagnosis
    print(f"cell ({m.row}, {m.col}): configured {cell.value:g} fF [{cell.fault}]")
    print(f"V_GS      {m.v_gs:.6f} V")
    print(f"step      {m.step} / {abacus.n_steps}")
    flip = "none" if m.conversion.flip_time is None else f"{m.conversion.flip_time:g} ns into phase 5"
    print(f"OUT flip  {flip}")
    if d.estimate is not None:
        print(f"estimate  {d.estimate:.3f} fF in [{d.interval[0]:.3f}, {d.interval[1]:.3f})")
    else:
        lo, hi = d.interval
        print(f"estimate  none (interval {lo:.3f} .. {hi:g} fF)")
    print(f"diagnosis {d.label.value}")
    print(f"sim time  {m.elapsed:g} ns")
    for k, c in m.outcome.conflicts:
        print(f"warning: phase {k + 1} shorts {', '.join(n for n, _ in c.sources)} "
              f"between rails; pinned to the lower rail", file=sys.stderr)
    if args.trace:
        path = out / f"trace_r{m.row}_c{m.col}.json"
        path.write_text(json.dumps(_trace_doc(net, m), indent=2) + "\n")
        print(f"trace -> {path}")
    return EXIT_OK


def write_bitmap_csv(bitmap, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BITMAP_HEADER)
        for rec in bitmap.records():
            d = rec.diagnosis
            if d.label is Label.IN_RANGE:
                est = [_fmt(d.estimate), _fmt(d.interval[0]), _fmt(d.interval[1])]
            else:
                est = ["", "", ""]
            w.writerow([rec.row, rec.col, rec.step, *est, d.label.value])


def write_matrix(bitmap, path: Path) -> None:
    est = bitmap.estimates()
    lines = [" ".join("nan" if math.isnan(x) else _fmt(x) for x in row) for row in est]
    path.write_text("\n".join(lines) + "\n")


def cmd_scan(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    cells = cfg.cell_matrix(args.seed)
    abacus = _load_abacus(args, cfg, out)
    raw = [] if args.trace else None
    bitmap = scan_array(cells, cfg.converter, abacus, cfg.parasitics, strict=args.strict, measurements=raw)
    write_bitmap_csv(bitmap, out / "bitmap.csv")
    write_matrix(bitmap, out / "bitmap_matrix.dat")
    summary = {
        "dims": list(bitmap.dims),
        "counts": bitmap.counts(),
        "total_sim_time_ns": bitmap.total_sim_time,
        "histogram": [
            {"step": s, "lo_fF": abacus.bin(s).lo, "hi_fF": abacus.bin(s).hi, "count": n}
            for s, n in bitmap.signature_histogram.items()
        ],
        "signatures": signature_histogram(bitmap, args.bin_width),
        "signature_bin_width_fF": args.bin_width,
        "abacus_fingerprint": abacus.fingerprint,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if raw is not None:
        net = build_macro_cell(cfg.rows, cfg.cols, cells, cfg.parasitics,
                               c_ref=cfg.converter.c_ref, v_dd=cfg.converter.v_dd)
        (out / "traces.json").write_text(json.dumps([_trace_doc(net, m) for m in raw]) + "\n")
    counts = bitmap.counts()
    print(f"scanned {bitmap.dims[0]}x{bitmap.dims[1]} cells in {bitmap.total_sim_time:g} ns simulated: "
          + ", ".join(f"{k} {v}" for k, v in counts.items()))
    print(f"bitmap -> {out / 'bitmap.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
    common.add_argument("--abacus", help="abacus JSON (default: <out>/abacus.json)")
    common.add_argument("--out", help="output directory (default: config output.dir)")
    common.add_argument("--seed", type=int, help="override cells.seed for random arrays")
    common.add_argument("--trace", action="store_true", help="dump per-phase state traces as JSON")
    common.add_argument("--strict", action="store_true",
                        help="treat rail-to-rail shorts during a phase as errors")

    ap = argparse.ArgumentParser(prog="edramcap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("calibrate", parents=[common], help="sweep C_m and write the abacus")
    m = sub.add_parser("measure", parents=[common], help="measure one cell")
    m.add_argument("--row", type=int, required=True)
    m.add_argument("--col", type=int, required=True)
    s = sub.add_parser("scan", parents=[common], help="scan the array into an analog bitmap")
    s.add_argument("--bin-width", type=float, default=2.5, help="signature bucket width in fF")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        handler = {"calibrate": cmd_calibrate, "measure": cmd_measure, "scan": cmd_scan}[args.command]
        return handler(args, cfg)
    except SourceConflictError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except (ConfigError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION


if __name__ == "__main__":
    sys.exit(main())
