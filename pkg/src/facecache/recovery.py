"""Crash injection and restart of the flash-cache tier.

Restart reads the superblock, loads the persisted directory segments that
still describe live frames, and rebuilds the entries lost with the in-memory
segment(s) by parsing the page headers of the frames between the durable
horizon and the rear of the queue. Those are at most two segments' worth: the
current segment and one whose flush may have been cut short.
"""

from __future__ import annotations

import os
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from .devices import Device, Kind
from .engine import DiskImage, Engine, EngineConfig, FIFO_POLICIES, Shadow
from .flash import FlashCache, FlashFrameMeta, FlashImage, extents
from .metadata import CorruptSuperBlock, MetadataDirectory, MetadataEntry, read_superblock
from .page import read_header

INFLIGHT_OUTCOMES = ("persisted", "torn", "absent")


@dataclass
class CrashedImage:
    workdir: Path
    config: EngineConfig
    durable: dict = field(default_factory=dict)  # page -> newest lsn that reached flash or disk
    inflight: str | None = None  # how an in-flight segment flush was resolved


@dataclass
class RecoveryStats:
    segments_read: int = 0
    entries_loaded: int = 0
    pages_scanned: int = 0
    entries_rebuilt: int = 0
    sim_time: float = 0.0
    wall_time: float = 0.0
    full_scan: bool = False


def crash(engine: Engine, outcome: str | None = None, rng: random.Random | None = None) -> CrashedImage:
    """Kill the engine: memory state is dropped, files stay as they are.

    If a metadata segment flush is in flight, ``outcome`` (or a draw from
    ``rng``) decides whether it made it to media, was torn, or never started.
    """
    inflight = None
    if engine.meta is not None and engine.meta.flushing is not None:
        if outcome is None:
            outcome = (rng or random.Random(0)).choice(INFLIGHT_OUTCOMES)
        inflight = outcome
        engine.meta.crash(outcome)
    elif engine.meta is not None:
        engine.meta.crash("absent")
    image = CrashedImage(engine.workdir, engine.config, dict(engine.shadow.durable), inflight)
    engine.meta = None
    engine.close()
    return image


def _placeholder(e: int, capacity: int) -> MetadataEntry:
    # entries of frames already dequeued: never consulted again, kept only so
    # that a re-flushed segment has the right shape
    return MetadataEntry(0, e % capacity, False, 0)


def restart(image: CrashedImage, checked: bool = False, full_scan: bool = False) -> tuple[Engine, RecoveryStats]:
    """Reopen the files of a crashed (or cleanly shut down) engine."""
    cfg = image.config
    t0 = time.perf_counter()
    engine = Engine(cfg, image.workdir, checked=checked, _fresh=False)
    engine.disk = DiskImage(engine.workdir / "disk.img", cfg.db_pages, cfg.page_size, create=False)
    engine.shadow = Shadow(dict(image.durable), dict(image.durable))
    stats = RecoveryStats()
    if not cfg.has_flash:
        stats.wall_time = time.perf_counter() - t0
        return engine, stats
    if cfg.policy not in FIFO_POLICIES:
        raise ValueError(f"policy {cfg.policy!r} keeps no persistent flash metadata")

    before = engine.acc.clock
    meta_path = engine.workdir / "flash.meta"
    fd = os.open(meta_path, os.O_RDWR)
    try:
        try:
            sb = read_superblock(fd)
            if (sb.page_size, sb.capacity_frames, sb.segment_capacity) != (
                cfg.page_size, cfg.flash_frames, cfg.segment_capacity):
                raise CorruptSuperBlock("superblock does not match the configuration")
        except CorruptSuperBlock:
            if not full_scan:
                raise
            sb = None
    finally:
        os.close(fd)

    img = FlashImage(engine.workdir / "flash.img", cfg.flash_frames, cfg.page_size, create=False)
    if checked:
        img.write_log = []
    if sb is None:
        _full_scan_restore(engine, img, stats)
    else:
        _restore(engine, img, sb, stats)
    engine.flash.on_store = engine._stored
    stats.sim_time = engine.acc.clock - before
    stats.wall_time = time.perf_counter() - t0
    return engine, stats


def _restore(engine: Engine, img: FlashImage, sb, stats: RecoveryStats) -> None:
    cfg = engine.config
    cap = cfg.flash_frames
    seg_cap = cfg.segment_capacity
    acc = engine.acc
    meta = MetadataDirectory(engine.workdir / "flash.meta", cap, cfg.page_size, cfg.effective_scan_depth,
                             seg_cap, acc, cfg.flush_lag, create=False)
    meta.sb_seq = sb.seq
    E = sb.enqueued
    lo = E - sb.occupancy
    D = min(sb.durable_entries, E)

    live: dict[int, MetadataEntry] = {}
    fd = meta.fd
    for seq in range(lo // seg_cap, -(-D // seg_cap)):
        count = min(seg_cap, D - seq * seg_cap)
        segment = meta.read_segment(fd, seq, count)
        acc.add(Device.FLASH, Kind.SEQ_READ, meta.segment_bytes)
        stats.segments_read += 1
        for i, entry in enumerate(segment):
            e = seq * seg_cap + i
            if e >= lo:
                if entry.frame_index != e % cap:
                    raise CorruptSuperBlock(f"directory entry {e} points at frame {entry.frame_index}")
                live[e] = entry
                stats.entries_loaded += 1

    scan = list(range(max(D, lo), E))
    slots = [e % cap for e in scan]
    for run in extents(slots):
        acc.add(Device.FLASH, Kind.SEQ_READ, run * cfg.page_size)
    # page headers carry no dirty flag: under write-back assume dirty so no
    # flush is ever missed (a never-written version, lsn 0, is clean); under
    # write-through flash copies are always clean
    assume_dirty = cfg.sync == "writeback"
    for e, slot in zip(scan, slots):
        page_id, lsn = read_header(img.read(slot))
        live[e] = MetadataEntry(page_id, slot, assume_dirty and lsn > 0, lsn)
    stats.pages_scanned = len(scan)
    stats.entries_rebuilt = len(scan)

    flash = FlashCache(cfg.flash_config(), img, acc, meta, checked=engine.checked)
    newest: dict[int, int] = {}
    for e in range(lo, E):
        entry = live[e]
        slot = entry.frame_index
        flash.slots[slot] = FlashFrameMeta(entry.page_id, slot, entry.dirty, entry.lsn, valid=False)
        flash.versions.setdefault(entry.page_id, set()).add(slot)
        cur = newest.get(entry.page_id)
        if cur is None or flash.slots[cur].lsn <= entry.lsn:
            newest[entry.page_id] = slot
    for pid, slot in newest.items():
        flash.slots[slot].valid = True
        flash.valid[pid] = slot
    flash.front = lo % cap
    flash.rear = E % cap
    flash.occupancy = E - lo
    flash.enqueues = 0

    # rebuild the directory tail in memory; re-persist any full segment that
    # never became durable
    def entry_at(e):
        return live[e] if e >= lo else _placeholder(e, cap)

    first_open = (E // seg_cap) * seg_cap
    seg_start = (D // seg_cap) * seg_cap
    meta.appended = E
    meta.durable_entries = D
    while seg_start + seg_cap <= first_open:
        entries = [entry_at(e) for e in range(seg_start, seg_start + seg_cap)]
        meta._write_segment(seg_start // seg_cap, entries)
        acc.add(Device.FLASH, Kind.SEQ_WRITE, meta.segment_bytes)
        meta.durable_entries = seg_start + seg_cap
        seg_start += seg_cap
    meta.current = [entry_at(e) for e in range(first_open, E)]
    meta.set_pointers(flash.front, flash.rear, flash.occupancy)

    engine.meta = meta
    engine.flash = flash
    engine.lsn = max((m.lsn for m in live.values()), default=0)


def _full_scan_restore(engine: Engine, img: FlashImage, stats: RecoveryStats) -> None:
    """Fallback without a usable superblock: read every frame header and keep a
    flash copy only where it is at least as new as the disk copy."""
    cfg = engine.config
    cap = cfg.flash_frames
    acc = engine.acc
    stats.full_scan = True
    acc.add(Device.FLASH, Kind.SEQ_READ, cap * cfg.page_size)
    stats.pages_scanned = cap
    headers = [read_header(img.read(slot)) for slot in range(cap)]
    best: dict[int, int] = {}
    for slot, (pid, lsn) in enumerate(headers):
        if lsn == 0 or pid >= cfg.db_pages:
            continue
        if pid not in best or headers[best[pid]][1] < lsn:
            best[pid] = slot
    meta = MetadataDirectory(engine.workdir / "flash.meta", cap, cfg.page_size, cfg.effective_scan_depth,
                             cfg.segment_capacity, acc, cfg.flush_lag, create=True)
    flash = FlashCache(cfg.flash_config(), img, acc, meta, checked=engine.checked)
    for slot, (pid, lsn) in enumerate(headers):
        flash.slots[slot] = FlashFrameMeta(pid, slot, False, lsn, valid=False)
        flash.versions.setdefault(pid, set()).add(slot)
    for pid, slot in best.items():
        disk_lsn = engine.disk.read(pid).page_lsn
        acc.add(Device.DISK, Kind.RAND_READ, cfg.page_size)
        lsn = headers[slot][1]
        if lsn >= disk_lsn:
            m = flash.slots[slot]
            m.valid = True
            m.dirty = lsn > disk_lsn
            flash.valid[pid] = slot
    flash.front = flash.rear = 0
    flash.occupancy = cap
    meta.appended = 0
    meta.set_pointers(0, 0, cap)
    engine.meta = meta
    engine.flash = flash
    engine.lsn = max((lsn for _, lsn in headers), default=0)


def recover_dirty_pages(engine: Engine) -> int:
    """Count valid dirty flash frames, checking each is readable and not older
    than its disk copy. Nothing is flushed."""
    flash = engine.flash
    if not isinstance(flash, FlashCache):
        return 0
    n = 0
    for pid, slot in flash.valid.items():
        m = flash.slots[slot]
        if not m.dirty:
            continue
        page = flash.image.read_page(slot)
        if page.page_id != pid or page.page_lsn != m.lsn:
            raise AssertionError(f"flash frame {slot} does not hold page {pid}@{m.lsn}")
        if page.page_lsn < engine.disk.read(pid).page_lsn:
            raise AssertionError(f"flash copy of page {pid} is older than disk")
        n += 1
    return n

