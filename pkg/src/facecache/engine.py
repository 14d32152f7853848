"""The tiered page store: DRAM buffer over a flash cache over a disk image."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .baselines import LruKCache
from .devices import PROFILES, CostAccumulator, Device, Kind
from .dram import DramBuffer, DramFrame, Source
from .flash import Admit, Evicted, FlashCache, FlashConfig, FlashImage, Replacement, SyncPolicy
from .metadata import DEFAULT_SEGMENT_CAPACITY, MetadataDirectory
from .page import DEFAULT_PAGE_SIZE, PageImage, deserialize_page, make_body, serialize_page

POLICIES = ("none", "face", "gr", "gsc", "lc", "lru")
FIFO_POLICIES = ("face", "gr", "gsc")


class FreshnessViolation(AssertionError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    db_pages: int = 32_768
    dram_frames: int = 256
    flash_frames: int = 2_048
    policy: str = "gsc"
    sync: str = "writeback"
    admit: str = "both"
    scan_depth: int = 64
    page_size: int = DEFAULT_PAGE_SIZE
    segment_capacity: int = DEFAULT_SEGMENT_CAPACITY
    flush_lag: int | None = None
    flash_profile: str = "mlc"
    disk_profile: str = "raid8"
    disk_scale: float = 1.0
    overlap: bool = True
    lazy_threshold: float = 1.0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.sync not in ("writeback", "writethrough"):
            raise ValueError(f"unknown sync policy {self.sync!r}")
        if self.flash_frames < 0 or self.dram_frames < 1 or self.db_pages < 1:
            raise ValueError("bad tier sizes")

    @property
    def has_flash(self) -> bool:
        return self.policy != "none" and self.flash_frames > 0

    @property
    def effective_scan_depth(self) -> int:
        return max(1, min(self.scan_depth, self.flash_frames))

    def flash_config(self) -> FlashConfig:
        return FlashConfig(
            capacity_frames=self.flash_frames,
            replacement=Replacement(self.policy),
            sync_policy=SyncPolicy(self.sync),
            admit=Admit(self.admit),
            scan_depth=self.effective_scan_depth,
        )

    def accumulator(self) -> CostAccumulator:
        disk = PROFILES[self.disk_profile]
        if self.disk_scale != 1.0:
            disk = disk.scaled(self.disk_scale)
        return CostAccumulator(PROFILES[self.flash_profile], disk, self.page_size, self.overlap)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class Counters:
    reads: int = 0
    writes: int = 0
    dram_hits: int = 0
    dram_misses: int = 0
    flash_hits: int = 0
    disk_reads: int = 0
    evictions: int = 0
    dirty_evictions: int = 0
    pulled: int = 0
    disk_writes: int = 0
    flash_stores: int = 0

    def reset(self) -> None:
        for f in fields(self):
            setattr(self, f.name, 0)


class DiskImage:
    """``disk.img``: page ``i`` at byte offset ``i * page_size``."""

    def __init__(self, path, db_pages: int, page_size: int, create: bool = True):
        self.path = os.fspath(path)
        self.db_pages = db_pages
        self.page_size = page_size
        flags = os.O_RDWR | (os.O_CREAT | os.O_TRUNC if create else 0)
        self.fd = os.open(self.path, flags, 0o644)
        if create:
            os.ftruncate(self.fd, db_pages * page_size)

    def read(self, page_id: int) -> PageImage:
        buf = os.pread(self.fd, self.page_size, page_id * self.page_size)
        page = deserialize_page(buf, self.page_size)
        if page.page_lsn == 0:
            # never written: the sparse file reads back as zeros
            return PageImage.blank(page_id, self.page_size)
        return page

    def write(self, page: PageImage) -> None:
        os.pwrite(self.fd, serialize_page(page, self.page_size), page.page_id * self.page_size)

    def close(self) -> None:
        if self.fd >= 0:
            os.close(self.fd)
            self.fd = -1


@dataclass
class Shadow:
    """Independent record of the newest version of each page.

    ``latest`` tracks every write; ``durable`` tracks versions that reached
    flash or disk, i.e. what must survive a crash.
    """

    latest: dict = field(default_factory=dict)
    durable: dict = field(default_factory=dict)

    def persisted(self, page: PageImage) -> None:
        if page.page_lsn > self.durable.get(page.page_id, 0):
            self.durable[page.page_id] = page.page_lsn


class Engine:
    def __init__(self, config: EngineConfig, workdir, checked: bool = False,
                 acc: CostAccumulator | None = None, _fresh: bool = True):
        self.config = config
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.checked = checked
        self.acc = acc if acc is not None else config.accumulator()
        self.page_size = config.page_size
        self.dram = DramBuffer(config.dram_frames)
        self.stats = Counters()
        self.shadow = Shadow()
        self.lsn = 0
        self.meta: MetadataDirectory | None = None
        self.flash: FlashCache | LruKCache | None = None
        self.closed = False
        if _fresh:
            self.disk = DiskImage(self.workdir / "disk.img", config.db_pages, config.page_size)
            self._open_flash(create=True)

    # -- construction ----------------------------------------------------

    def _open_flash(self, create: bool) -> None:
        cfg = self.config
        if not cfg.has_flash:
            return
        image = FlashImage(self.workdir / "flash.img", cfg.flash_frames, cfg.page_size, create=create)
        if cfg.policy in FIFO_POLICIES:
            if create:
                self.meta = MetadataDirectory(
                    self.workdir / "flash.meta", cfg.flash_frames, cfg.page_size,
                    cfg.effective_scan_depth, cfg.segment_capacity, self.acc, cfg.flush_lag,
                )
            self.flash = FlashCache(cfg.flash_config(), image, self.acc, self.meta, checked=self.checked)
        else:
            k = 2 if cfg.policy == "lc" else 1
            self.flash = LruKCache(cfg.flash_frames, image, self.acc, k=k,
                                   sync=SyncPolicy(cfg.sync), lazy_threshold=cfg.lazy_threshold)
        self.flash.on_store = self._stored
        if self.checked:
            image.write_log = []

    def _stored(self, page: PageImage) -> None:
        self.stats.flash_stores += 1
        self.shadow.persisted(page)

    # -- page access -----------------------------------------------------

    def _fetch(self, page_id: int) -> DramFrame:
        frame = self.dram.lookup(page_id)
        if frame is not None:
            self.stats.dram_hits += 1
            return frame
        self.stats.dram_misses += 1
        hit = self.flash.lookup(page_id) if self.flash is not None else None
        if hit is not None:
            meta, page = hit
            self.stats.flash_hits += 1
            victim = self.dram.install(page, Source.FLASH, flash_dirty=meta.dirty)
        else:
            page = self.disk.read(page_id)
            self.acc.add(Device.DISK, Kind.RAND_READ, self.page_size)
            self.stats.disk_reads += 1
            victim = self.dram.install(page, Source.DISK)
        if victim is not None:
            self._evict(victim)
        return self.dram.peek(page_id)

    def read(self, page_id: int) -> PageImage:
        self.stats.reads += 1
        page = self._fetch(page_id).page
        self._after_op()
        if self.checked:
            self._check_fresh(page)
        return page

    def write(self, page_id: int) -> int:
        self.stats.writes += 1
        frame = self._fetch(page_id)
        self.lsn = max(self.lsn, frame.page.page_lsn) + 1
        self.dram.update(page_id, make_body(page_id, self.lsn, self.page_size), self.lsn)
        self.shadow.latest[page_id] = self.lsn
        self._after_op()
        return self.lsn

    def _check_fresh(self, page: PageImage) -> None:
        want = self.shadow.latest.get(page.page_id, 0)
        if page.page_lsn != want:
            raise FreshnessViolation(f"page {page.page_id}: read lsn {page.page_lsn}, latest is {want}")
        if page.body != make_body(page.page_id, page.page_lsn, self.page_size) and page.page_lsn:
            raise FreshnessViolation(f"page {page.page_id}: body does not match lsn {page.page_lsn}")

    def _after_op(self) -> None:
        if self.meta is not None:
            f = self.flash
            ptrs = (f.front, f.rear, f.occupancy)
            if ptrs != self.meta.pointers:
                self.meta.set_pointers(*ptrs)
        if self.checked and self.flash is not None:
            self.flash.check_touched()

    # -- eviction path ---------------------------------------------------

    def _count_eviction(self, frame: DramFrame) -> None:
        self.stats.evictions += 1
        if frame.dirty:
            self.stats.dirty_evictions += 1

    def _evict(self, frame: DramFrame) -> None:
        self._count_eviction(frame)
        if self.flash is None:
            if frame.dirty:
                self._disk_write(frame.page)
            return
        self._apply(self.flash.admit(frame, self.dram))

    def _apply(self, out: Evicted) -> None:
        for frame in out.pulled:
            self.stats.pulled += 1
            self._count_eviction(frame)
        for page in out.writes:
            self._disk_write(page)
        for page in out.flushed:
            self._disk_write(page)

    def _disk_write(self, page: PageImage) -> None:
        self.disk.write(page)
        self.acc.add(Device.DISK, Kind.RAND_WRITE, self.page_size)
        self.stats.disk_writes += 1
        self.shadow.persisted(page)
        frame = self.dram.peek(page.page_id)
        if frame is not None and frame.page.page_lsn == page.page_lsn:
            frame.dirty = False

    # -- checkpoints -----------------------------------------------------

    def db_checkpoint(self) -> int:
        """Persist every dirty DRAM page; return the number of pages handled.

        With a multi-version FIFO cache the pages are checked into flash and
        nothing is forced to disk. Without one they go to disk, and the LRU-K
        baselines also write back their own dirty pages.
        """
        frames = self.dram.dirty_frames()
        if self.flash is None:
            for frame in frames:
                self._disk_write(frame.page)
                frame.fdirty = False
        elif isinstance(self.flash, FlashCache):
            for frame in frames:
                self._apply(self.flash.admit(frame, None))
                frame.fdirty = False
        else:
            # older flash copies go first so disk never moves backwards
            for page in self.flash.clean():
                self._disk_write(page)
            for frame in frames:
                self._disk_write(frame.page)
        self._after_op()
        return len(frames)

    # -- lifecycle -------------------------------------------------------

    def shutdown(self) -> None:
        """Clean shutdown: checkpoint DRAM, persist all flash metadata."""
        self.db_checkpoint()
        if self.meta is not None:
            self.meta.set_pointers(self.flash.front, self.flash.rear, self.flash.occupancy)
            self.meta.shutdown()
        self.close()

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        self.disk.close()
        if self.flash is not None:
            self.flash.image.close()
        if self.meta is not None:
            self.meta.close()

    def files(self) -> dict:
        return {name: self.workdir / name for name in ("disk.img", "flash.img", "flash.meta")}
