"""Trace generation and the end-to-end simulation loop.

The workload is a serialized stream of page reads and writes whose page ids
follow a Zipf law over the database (a stand-in for an OLTP mix, so results
are only comparable to published numbers in direction, never in value).
"""

from __future__ import annotations

import csv
import io
import json
import random
import shutil
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .devices import Device
from .engine import Engine, EngineConfig
from .recovery import RecoveryStats, crash, restart

SCHEMA = 1
CSV_FIELDS = (
    "policy", "sync", "flash_frames", "dram_frames", "flash_hit_rate", "write_reduction",
    "flash_util", "disk_util", "flash_iops4k", "sim_tput", "seed", "schema",
)
CHUNK = 1 << 16


class TraceOp(NamedTuple):
    kind: str  # "R" or "W"
    page: int


@dataclass(frozen=True)
class WorkloadSpec:
    op_count: int = 100_000
    write_fraction: float = 0.2
    skew: float = 0.8
    hot_region: float = 1.0
    seed: int = 0
    db_pages: int = 32_768
    checkpoint_interval_ops: int = 0
    metadata_segment_capacity: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.write_fraction <= 1.0:
            raise ValueError("write_fraction must lie in [0, 1]")
        if not 0.0 < self.hot_region <= 1.0:
            raise ValueError("hot_region must lie in (0, 1]")
        if self.skew < 0 or self.db_pages < 1 or self.op_count < 0:
            raise ValueError("bad workload parameters")


def zipf_weights(n: int, skew: float) -> np.ndarray:
    w = np.arange(1, n + 1, dtype=np.float64) ** -skew
    return w / w.sum()


def page_ranking(spec: WorkloadSpec) -> np.ndarray:
    """Pages ordered from hottest to coldest (a seeded shuffle of the hot region)."""
    n_hot = max(1, round(spec.hot_region * spec.db_pages))
    perm = np.random.default_rng([spec.seed, 0xD0]).permutation(spec.db_pages)
    return perm[:n_hot]


def generate_trace(spec: WorkloadSpec, stream: int = 0) -> Iterator[TraceOp]:
    """Deterministic Zipf trace, produced lazily in chunks.

    ``stream`` selects an independent sequence with the same distribution
    (stream 1 is used for warm-up).
    """
    pages = page_ranking(spec)
    cdf = np.cumsum(zipf_weights(len(pages), spec.skew))
    cdf[-1] = 1.0
    rng = np.random.default_rng([spec.seed, 0x7A, stream])
    left = spec.op_count
    while left > 0:
        n = min(CHUNK, left)
        ranks = np.searchsorted(cdf, rng.random(n), side="right")
        is_write = rng.random(n) < spec.write_fraction
        for p, w in zip(pages[ranks].tolist(), is_write.tolist()):
            yield TraceOp("W" if w else "R", p)
        left -= n


def apply_op(engine: Engine, op: TraceOp) -> None:
    if op.kind == "W":
        engine.write(op.page)
    else:
        engine.read(op.page)


@dataclass
class RunResult:
    policy: str
    sync: str
    flash_frames: int
    dram_frames: int
    seed: int
    ops: int
    dram_hit_rate: float
    flash_hit_rate: float
    write_reduction: float
    flash_util: float
    disk_util: float
    flash_iops4k: float
    sim_time: float
    sim_tput: float
    counters: dict = field(default_factory=dict)
    devices: dict = field(default_factory=dict)
    warmup_ops: int = 0
    recovery: dict | None = None
    schema: int = SCHEMA

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}

    def as_dict(self) -> dict:
        return asdict(self)


def result_of(engine: Engine, spec: WorkloadSpec, ops: int, warmup_ops: int = 0) -> RunResult:
    s = engine.stats
    acc = engine.acc
    accesses = s.dram_hits + s.dram_misses
    cfg = engine.config
    wr = 0.0
    if s.dirty_evictions:
        wr = max(0.0, 1.0 - s.disk_writes / s.dirty_evictions)
    clock = acc.clock
    return RunResult(
        policy=cfg.policy if cfg.has_flash else "none",
        sync=cfg.sync,
        flash_frames=cfg.flash_frames if cfg.has_flash else 0,
        dram_frames=cfg.dram_frames,
        seed=spec.seed,
        ops=ops,
        dram_hit_rate=s.dram_hits / accesses if accesses else 0.0,
        flash_hit_rate=s.flash_hits / s.dram_misses if s.dram_misses else 0.0,
        write_reduction=wr,
        flash_util=acc.utilization(Device.FLASH),
        disk_util=acc.utilization(Device.DISK),
        flash_iops4k=acc.iops(Device.FLASH),
        sim_time=clock,
        sim_tput=ops / clock if clock > 0 else 0.0,
        counters=asdict(s),
        devices=acc.report().as_dict(),
        warmup_ops=warmup_ops,
    )


def _engine_config(spec: WorkloadSpec, config: EngineConfig) -> EngineConfig:
    changes = {"db_pages": spec.db_pages}
    if spec.metadata_segment_capacity is not None:
        changes["segment_capacity"] = spec.metadata_segment_capacity
    return replace(config, **changes)


def warm_up(engine: Engine, spec: WorkloadSpec, limit: int | None = None) -> int:
    """Drive a separate stream until the flash tier has taken ``flash_frames``
    pages (or the DRAM buffer is full when there is no flash tier).

    Returns the number of warm-up operations; counters are reset afterwards.
    """
    cfg = engine.config
    if limit is None:
        limit = max(spec.op_count, 10 * max(cfg.flash_frames, cfg.dram_frames))
    warm_spec = replace(spec, op_count=limit)
    interval = spec.checkpoint_interval_ops
    n = 0
    for op in generate_trace(warm_spec, stream=1):
        if cfg.has_flash:
            if engine.stats.flash_stores >= cfg.flash_frames:
                break
        elif len(engine.dram) >= cfg.dram_frames:
            break
        apply_op(engine, op)
        n += 1
        if interval and n % interval == 0:
            engine.db_checkpoint()
    engine.stats.reset()
    engine.acc.reset()
    return n


def run(spec: WorkloadSpec, config: EngineConfig, workdir=None, checked: bool = False,
        warmup: bool = True, keep_files: bool = False, inspect=None) -> RunResult:
    """Run one configuration end to end and return its measured statistics.

    ``inspect``, if given, is called with the engine before it is closed.
    """
    config = _engine_config(spec, config)
    tmp = None
    if workdir is None:
        tmp = tempfile.mkdtemp(prefix="facecache-")
        workdir = tmp
    engine = Engine(config, workdir, checked=checked)
    try:
        warm = warm_up(engine, spec) if warmup else 0
        interval = spec.checkpoint_interval_ops
        n = 0
        for op in generate_trace(spec):
            apply_op(engine, op)
            n += 1
            if interval and n % interval == 0:
                engine.db_checkpoint()
        if checked and engine.flash is not None:
            engine.flash.check_all()
        if inspect is not None:
            inspect(engine)
        return result_of(engine, spec, n, warm)
    finally:
        engine.close()
        if tmp is not None and not keep_files:
            shutil.rmtree(tmp, ignore_errors=True)


# -- output ----------------------------------------------------------------

def to_csv(results: list[RunResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.row().items()})
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        out = {}
        for k, v in row.items():
            if k in ("policy", "sync"):
                out[k] = v
            elif k in ("flash_frames", "dram_frames", "seed", "schema"):
                out[k] = int(v)
            else:
                out[k] = float(v)
        rows.append(out)
    return rows


def to_json(results: list[RunResult]) -> str:
    return json.dumps([r.row() for r in results], indent=2, sort_keys=False)


# -- crash experiments -----------------------------------------------------

@dataclass
class CrashReport:
    crash_op: int
    inflight: str | None
    recovery: RecoveryStats
    redo_pages: int
    redo_from_flash: int
    face_recovery_time: float
    hdd_recovery_time: float
    dirty_in_flash: int

    @property
    def flash_fraction(self) -> float:
        return self.redo_from_flash / self.redo_pages if self.redo_pages else 1.0


class VerificationFailure(AssertionError):
    pass


def served_lsn(engine: Engine, page_id: int) -> int:
    """LSN a read of ``page_id`` would return right now, without charging I/O."""
    frame = engine.dram.peek(page_id)
    if frame is not None:
        return frame.page.page_lsn
    flash = engine.flash
    if flash is not None:
        m = flash.valid_meta(page_id)
        if m is not None:
            page = flash.image.read_page(m.frame_index)
            if page.page_id != page_id or page.page_lsn != m.lsn:
                raise VerificationFailure(f"flash frame {m.frame_index} does not hold page {page_id}@{m.lsn}")
            return page.page_lsn
    return engine.disk.read(page_id).page_lsn


def verify_durable(engine: Engine, durable: dict) -> None:
    for pid, lsn in durable.items():
        got = served_lsn(engine, pid)
        if got != lsn:
            raise VerificationFailure(f"page {pid}: restart serves lsn {got}, durable lsn is {lsn}")


def redo_reads(engine: Engine, pages) -> tuple[int, float]:
    """Fetch every page named by the redo log; return (served from flash, I/O time)."""
    before = engine.acc.clock
    flash_hits = engine.stats.flash_hits
    for pid in sorted(pages):
        engine.read(pid)
    return engine.stats.flash_hits - flash_hits, engine.acc.clock - before


def crash_points(spec: WorkloadSpec, count: int, seed: int) -> list[int]:
    """Midpoint of the first full checkpoint interval plus seeded random points."""
    n = spec.op_count
    pts = set()
    interval = spec.checkpoint_interval_ops
    if interval and interval < n:
        pts.add(interval + interval // 2)
    rng = random.Random(seed)
    while len(pts) < min(count, n - 1):
        pts.add(rng.randrange(1, n))
    return sorted(pts)[:count]


def run_crash_experiment(spec: WorkloadSpec, config: EngineConfig, crash_points_: list[int] | int = 3,
                         seed: int = 0, workdir=None, checked: bool = True,
                         force_inflight: bool = False) -> list[CrashReport]:
    """Run the trace with crashes injected at the given op indices.

    At each crash the flash engine and a flash-less twin are killed and
    restarted; the restarted engine must serve every durable version, and the
    pages updated since the last checkpoint are read back as redo work.
    ``force_inflight`` delays each crash until a metadata flush is in flight.
    """
    config = _engine_config(spec, config)
    if isinstance(crash_points_, int):
        crash_points_ = crash_points(spec, crash_points_, seed)
    points = sorted(set(crash_points_))
    rng = random.Random(seed)
    tmp = None
    if workdir is None:
        tmp = tempfile.mkdtemp(prefix="facecache-crash-")
        workdir = tmp
    root = Path(workdir)
    face = Engine(config, root / "face", checked=checked)
    hdd = Engine(replace(config, policy="none", flash_frames=0), root / "hdd", checked=checked)
    reports = []
    try:
        for eng in (face, hdd):
            warm_up(eng, spec)
        interval = spec.checkpoint_interval_ops
        since_ckpt: set[int] = set()
        trace = generate_trace(spec)
        n = 0
        for point in points:
            while n < point or (force_inflight and face.meta is not None and face.meta.flushing is None
                                and n < spec.op_count):
                op = next(trace, None)
                if op is None:
                    break
                apply_op(face, op)
                apply_op(hdd, op)
                n += 1
                if op.kind == "W":
                    since_ckpt.add(op.page)
                if interval and n % interval == 0:
                    face.db_checkpoint()
                    hdd.db_checkpoint()
                    since_ckpt.clear()
            face, hdd, rep = _crash_both(face, hdd, since_ckpt, rng, checked, n)
            reports.append(rep)
        return reports
    finally:
        face.close()
        hdd.close()
        if tmp is not None:
            shutil.rmtree(tmp, ignore_errors=True)


def _crash_both(face: Engine, hdd: Engine, redo: set, rng: random.Random, checked: bool, at: int):
    img = crash(face, rng=rng)
    face, stats = restart(img, checked=checked)
    verify_durable(face, img.durable)
    dirty = 0
    from .recovery import recover_dirty_pages
    dirty = recover_dirty_pages(face)
    face.stats.reset()
    from_flash, redo_time = redo_reads(face, redo)

    himg = crash(hdd)
    hdd, _ = restart(himg, checked=checked)
    verify_durable(hdd, himg.durable)
    _, hdd_time = redo_reads(hdd, redo)
    rep = CrashReport(
        crash_op=at, inflight=img.inflight, recovery=stats, redo_pages=len(redo),
        redo_from_flash=from_flash, face_recovery_time=stats.sim_time + redo_time,
        hdd_recovery_time=hdd_time, dirty_in_flash=dirty,
    )
    return face, hdd, rep
