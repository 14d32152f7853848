"""Command-line front end: ``facecache {run,sweep,crash,breakeven,compare}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace

from .analysis import (BreakEvenParams, DegenerateCosts, break_even_theta, dram_vs_flash_sweep,
                       params_from_profiles, sweep_csv, theta_for_exponent)
from .devices import DISK_PROFILES, FLASH_PROFILES
from .engine import EngineConfig
from .workload import WorkloadSpec, run, run_crash_experiment, to_csv, to_json

POLICY_ALIASES = {"lru2": "lc", "fifo": "face", "basic": "face"}
POLICY_CHOICES = ("none", "face", "basic", "fifo", "gr", "gsc", "lc", "lru2", "lru")

# label, policy, sync
COMPARE_ROWS = (
    ("LC", "lc", "writeback"),
    ("FaCE", "face", "writeback"),
    ("FaCE+GR", "gr", "writeback"),
    ("FaCE+GSC", "gsc", "writeback"),
    ("LRU-WT", "lru", "writethrough"),
)


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--flash-frames", type=int, default=2048)
    g.add_argument("--dram-frames", type=int, default=256)
    g.add_argument("--db-pages", type=int, default=32768)
    g.add_argument("--policy", choices=POLICY_CHOICES, default="gsc")
    g.add_argument("--sync", choices=("writeback", "writethrough"), default="writeback")
    g.add_argument("--admit", choices=("both", "dirty", "clean"), default="both")
    g.add_argument("--scan-depth", type=int, default=None,
                   help="batch size for gr/gsc (default 64)")
    g.add_argument("--profile", action="append", default=[],
                   choices=FLASH_PROFILES + DISK_PROFILES,
                   help="device profile; give once for the flash device and/or once for the disk")
    g.add_argument("--disk-scale", type=float, default=1.0, help="multiply disk IOPS and bandwidth")
    g.add_argument("--serial-clock", action="store_true",
                   help="charge flash and disk time to one serial clock instead of overlapping them")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ops", type=int, default=100_000)
    g.add_argument("--write-frac", type=float, default=0.2)
    g.add_argument("--skew", type=float, default=0.8)
    g.add_argument("--hot-region", type=float, default=1.0)
    g.add_argument("--ckpt-interval", type=int, default=0, help="ops between database checkpoints (0 = never)")
    g.add_argument("--seg-cap", type=int, default=64_000, help="metadata segment capacity in entries")
    g.add_argument("--out", choices=("csv", "json"), default="csv")
    g.add_argument("--workdir", default=None)
    g.add_argument("--checked", action="store_true", help="verify freshness and queue invariants on every op")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facecache", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    _add_common(p)

    p = sub.add_parser("sweep", help="flash-size by policy matrix")
    _add_common(p)
    p.add_argument("--flash-sizes", type=_int_list, default=None,
                   help="comma-separated flash sizes in frames (default: 4..20%% of the database)")
    p.add_argument("--policies", default="lc,face,gr,gsc")

    p = sub.add_parser("crash", help="crash injection and restart")
    _add_common(p)
    p.add_argument("--crash-points", type=int, default=3)
    p.add_argument("--full-scan", action="store_true")

    p = sub.add_parser("breakeven", help="break-even flash growth for a DRAM growth")
    p.add_argument("--delta", type=float, action="append", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--exponent", type=float, help="use c_disk/(c_disk-c_flash) directly")
    src.add_argument("--costs", type=float, nargs=2, metavar=("C_DISK", "C_FLASH"))
    p.add_argument("--profile", action="append", default=[], choices=FLASH_PROFILES + DISK_PROFILES)
    p.add_argument("--read-weight", type=float, default=1.0)
    p.add_argument("--dram-vs-flash", type=int, default=0, metavar="STEPS",
                   help="also run the more-DRAM vs more-flash sweep with this many steps")
    p.add_argument("--dram-unit", type=int, default=64)
    p.add_argument("--out", choices=("csv", "json"), default="csv")

    p = sub.add_parser("compare", help="head-to-head of the flash cache designs")
    _add_common(p)
    return parser


def _profiles(names: list[str]) -> tuple[str | None, str | None]:
    flash = [n for n in names if n in FLASH_PROFILES]
    disk = [n for n in names if n in DISK_PROFILES]
    if len(flash) > 1 or len(disk) > 1:
        raise UsageError("--profile names at most one flash and one disk device")
    return (flash[0] if flash else None), (disk[0] if disk else None)


def config_from_args(args) -> EngineConfig:
    policy = POLICY_ALIASES.get(args.policy, args.policy)
    if args.scan_depth is not None:
        if policy not in ("gr", "gsc"):
            raise UsageError(f"--scan-depth only applies to gr and gsc, not {args.policy}")
        if args.scan_depth < 1 or args.scan_depth > max(1, args.flash_frames):
            raise UsageError("--scan-depth must lie in [1, flash frames]")
    if args.flash_frames < 0 or args.dram_frames < 1 or args.db_pages < 1 or args.seg_cap < 1:
        raise UsageError("sizes must be positive")
    if args.admit != "both" and policy not in ("face", "gr", "gsc"):
        raise UsageError("--admit only applies to the FIFO flash caches")
    flash, disk = _profiles(args.profile)
    kw = dict(
        db_pages=args.db_pages, dram_frames=args.dram_frames, flash_frames=args.flash_frames,
        policy=policy, sync=args.sync, admit=args.admit, segment_capacity=args.seg_cap,
        disk_scale=args.disk_scale, overlap=not args.serial_clock,
    )
    if args.scan_depth is not None:
        kw["scan_depth"] = args.scan_depth
    if flash:
        kw["flash_profile"] = flash
    if disk:
        kw["disk_profile"] = disk
    try:
        return EngineConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e))


def spec_from_args(args) -> WorkloadSpec:
    try:
        return WorkloadSpec(
            op_count=args.ops, write_fraction=args.write_frac, skew=args.skew, hot_region=args.hot_region,
            seed=args.seed, db_pages=args.db_pages, checkpoint_interval_ops=args.ckpt_interval,
            metadata_segment_capacity=args.seg_cap,
        )
    except ValueError as e:
        raise UsageError(str(e))


def _emit(results, fmt: str, out) -> None:
    out.write(to_csv(results) if fmt == "csv" else to_json(results) + "\n")


def cmd_run(args, out) -> int:
    _emit([run(spec_from_args(args), config_from_args(args), workdir=args.workdir, checked=args.checked)],
          args.out, out)
    return 0


def cmd_sweep(args, out) -> int:
    spec = spec_from_args(args)
    base = config_from_args(args)
    sizes = args.flash_sizes or [round(spec.db_pages * f) for f in (0.04, 0.08, 0.12, 0.16, 0.20)]
    policies = [POLICY_ALIASES.get(p, p) for p in args.policies.split(",") if p]
    bad = [p for p in policies if p not in ("none", "face", "gr", "gsc", "lc", "lru")]
    if bad:
        raise UsageError(f"unknown policies {bad}")
    results = []
    for size in sizes:
        for policy in policies:
            cfg = replace(base, policy=policy, flash_frames=size)
            results.append(run(spec, cfg, workdir=args.workdir, checked=args.checked))
    _emit(results, args.out, out)
    return 0


def cmd_compare(args, out) -> int:
    spec = spec_from_args(args)
    base = config_from_args(args)
    results = []
    for label, policy, sync in COMPARE_ROWS:
        r = run(spec, replace(base, policy=policy, sync=sync), workdir=args.workdir, checked=args.checked)
        r.policy = label
        results.append(r)
    _emit(results, args.out, out)
    return 0


CRASH_FIELDS = ("crash_op", "inflight", "segments_read", "pages_scanned", "redo_pages", "redo_from_flash",
                "flash_fraction", "dirty_in_flash", "face_recovery_time", "hdd_recovery_time")


def cmd_crash(args, out) -> int:
    cfg = config_from_args(args)
    if cfg.policy not in ("face", "gr", "gsc"):
        raise UsageError("crash experiments need a FIFO flash cache policy (face, gr or gsc)")
    spec = spec_from_args(args)
    reports = run_crash_experiment(spec, cfg, args.crash_points, seed=args.seed, workdir=args.workdir,
                                   checked=args.checked)
    rows = []
    for r in reports:
        rows.append({
            "crash_op": r.crash_op, "inflight": r.inflight or "", "segments_read": r.recovery.segments_read,
            "pages_scanned": r.recovery.pages_scanned, "redo_pages": r.redo_pages,
            "redo_from_flash": r.redo_from_flash, "flash_fraction": r.flash_fraction,
            "dirty_in_flash": r.dirty_in_flash, "face_recovery_time": r.face_recovery_time,
            "hdd_recovery_time": r.hdd_recovery_time,
        })
    _write_rows(rows, CRASH_FIELDS, args.out, out)
    return 0


def _write_rows(rows, fields, fmt, out) -> None:
    if fmt == "json":
        out.write(json.dumps(rows, indent=2) + "\n")
        return
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    out.write(buf.getvalue())


def cmd_breakeven(args, out) -> int:
    flash, disk = _profiles(args.profile)
    rows = []
    for delta in args.delta:
        try:
            if args.exponent is not None:
                theta = theta_for_exponent(delta, args.exponent)
                exponent = args.exponent
            else:
                if args.costs:
                    p = BreakEvenParams(delta, args.costs[0], args.costs[1])
                else:
                    p = params_from_profiles(delta, flash or "mlc", disk or "disk1", args.read_weight)
                theta = break_even_theta(p)
                exponent = p.exponent
        except (DegenerateCosts, ValueError) as e:
            raise UsageError(str(e))
        rows.append({"delta": delta, "exponent": exponent, "theta": theta})
    _write_rows(rows, ("delta", "exponent", "theta"), args.out, out)
    if args.dram_vs_flash:
        spec = WorkloadSpec(op_count=30_000, write_fraction=0.3, skew=0.99, hot_region=0.25, db_pages=16384)
        base = EngineConfig(db_pages=16384, dram_frames=128, flash_profile=flash or "mlc",
                            disk_profile=disk or "raid8")
        out.write(sweep_csv(dram_vs_flash_sweep(spec, base, args.dram_vs_flash, args.dram_unit)))
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "crash": cmd_crash, "breakeven": cmd_breakeven,
            "compare": cmd_compare}


def main(argv=None, out=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = out or sys.stdout
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        parser.error(str(e))  # exits with status 2
    return 2
