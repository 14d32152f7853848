"""Multi-version FIFO flash cache.

Frames live in a circular queue over a flash image file. Pages enter only at
the rear, several versions of one page may coexist, and only the newest is
flagged valid. Replacement dequeues from the front, one frame at a time
(basic), a batch at a time (group replacement), or a batch with second chances
for referenced valid frames (group second chance).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

from .devices import CostAccumulator, Device, Kind
from .dram import DramBuffer, DramFrame
from .metadata import MetadataDirectory, MetadataEntry
from .page import PageImage, deserialize_page, serialize_page


class Replacement(Enum):
    BASIC = "face"
    GR = "gr"
    GSC = "gsc"


class SyncPolicy(Enum):
    WRITE_BACK = "writeback"
    WRITE_THROUGH = "writethrough"


class Admit(Enum):
    BOTH = "both"
    DIRTY_ONLY = "dirty"
    CLEAN_ONLY = "clean"


class EmptyQueue(IndexError):
    pass


class NonSequentialWrite(AssertionError):
    pass


@dataclass(frozen=True)
class FlashConfig:
    capacity_frames: int
    replacement: Replacement = Replacement.GSC
    sync_policy: SyncPolicy = SyncPolicy.WRITE_BACK
    admit: Admit = Admit.BOTH
    scan_depth: int = 64

    def __post_init__(self):
        if self.capacity_frames < 1:
            raise ValueError("flash cache needs at least one frame")
        if not 1 <= self.scan_depth <= self.capacity_frames:
            raise ValueError("scan_depth must lie in [1, capacity_frames]")


@dataclass
class FlashFrameMeta:
    page_id: int
    frame_index: int
    dirty: bool
    lsn: int
    valid: bool = True
    referenced: bool = False


@dataclass
class Evicted:
    """Outcome of one replacement call."""

    freed: int = 0
    flushed: list = field(default_factory=list)  # PageImages written to disk
    pulled: list = field(default_factory=list)  # DramFrames pulled for the rear batch
    writes: list = field(default_factory=list)  # PageImages written through to disk


class FlashImage:
    """The flash image file: slot ``i`` at byte offset ``i * page_size``."""

    def __init__(self, path, capacity_frames: int, page_size: int, create: bool = True):
        self.path = os.fspath(path)
        self.capacity_frames = capacity_frames
        self.page_size = page_size
        flags = os.O_RDWR | (os.O_CREAT | os.O_TRUNC if create else 0)
        self.fd = os.open(self.path, flags, 0o644)
        if create:
            os.ftruncate(self.fd, capacity_frames * page_size)
        self.write_log: list[int] | None = None

    def read(self, slot: int) -> bytes:
        return os.pread(self.fd, self.page_size, slot * self.page_size)

    def read_page(self, slot: int) -> PageImage:
        return deserialize_page(self.read(slot), self.page_size)

    def write(self, slot: int, page: PageImage) -> None:
        os.pwrite(self.fd, serialize_page(page, self.page_size), slot * self.page_size)
        if self.write_log is not None:
            self.write_log.append(slot)

    def close(self) -> None:
        if self.fd >= 0:
            os.close(self.fd)
            self.fd = -1


def extents(slots: list[int]) -> list[int]:
    """Lengths of the contiguous runs in a slot sequence (split at the wrap)."""
    runs = []
    prev = None
    for s in slots:
        if prev is not None and s == prev + 1:
            runs[-1] += 1
        else:
            runs.append(1)
        prev = s
    return runs


class FlashCache:
    def __init__(self, config: FlashConfig, image: FlashImage, acc: CostAccumulator,
                 meta: MetadataDirectory | None = None, checked: bool = False):
        self.config = config
        self.capacity = config.capacity_frames
        self.image = image
        self.page_size = image.page_size
        self.acc = acc
        self.meta = meta
        self.checked = checked
        self.slots: list[FlashFrameMeta | None] = [None] * self.capacity
        self.front = 0
        self.rear = 0
        self.occupancy = 0
        self.versions: dict[int, set[int]] = {}
        self.valid: dict[int, int] = {}
        self._batch: list[int] | None = None
        self.touched: set[int] = set()
        self.enqueues = 0
        self.non_rear_writes = 0
        self.on_store = None

    # -- queries ---------------------------------------------------------

    def __contains__(self, page_id: int) -> bool:
        return page_id in self.valid

    def valid_meta(self, page_id: int) -> FlashFrameMeta | None:
        slot = self.valid.get(page_id)
        return None if slot is None else self.slots[slot]

    def lookup(self, page_id: int) -> tuple[FlashFrameMeta, PageImage] | None:
        slot = self.valid.get(page_id)
        if slot is None:
            return None
        m = self.slots[slot]
        page = self.image.read_page(slot)
        self.acc.add(Device.FLASH, Kind.RAND_READ, self.page_size)
        m.referenced = True
        return m, page

    def live(self) -> list[FlashFrameMeta]:
        """Occupied slots from front to rear."""
        return [self.slots[(self.front + i) % self.capacity] for i in range(self.occupancy)]

    # -- invalidation ----------------------------------------------------

    def invalidate(self, page_id: int) -> None:
        slot = self.valid.pop(page_id, None)
        if slot is not None:
            self.slots[slot].valid = False
            self.touched.add(page_id)

    # -- enqueue / dequeue -----------------------------------------------

    def _enqueue(self, page: PageImage, dirty: bool) -> FlashFrameMeta:
        if self.occupancy >= self.capacity:
            raise OverflowError("flash queue full")
        slot = self.rear
        if self.checked and self.slots[slot] is not None:
            self.non_rear_writes += 1
            raise NonSequentialWrite(f"slot {slot} still occupied")
        self.image.write(slot, page)
        pid = page.page_id
        m = FlashFrameMeta(pid, slot, dirty, page.page_lsn)
        self.slots[slot] = m
        self.versions.setdefault(pid, set()).add(slot)
        self.valid[pid] = slot
        self.rear = (slot + 1) % self.capacity
        self.occupancy += 1
        self.enqueues += 1
        self.touched.add(pid)
        if self.meta is not None:
            self.meta.append(MetadataEntry(pid, slot, dirty, page.page_lsn))
        if self.on_store is not None:
            self.on_store(page)
        if self._batch is not None:
            self._batch.append(slot)
        else:
            self.acc.add(Device.FLASH, Kind.SEQ_WRITE, self.page_size)
        return m

    def _dequeue(self) -> FlashFrameMeta:
        if self.occupancy == 0:
            raise EmptyQueue("flash queue is empty")
        slot = self.front
        m = self.slots[slot]
        self.slots[slot] = None
        vs = self.versions[m.page_id]
        vs.discard(slot)
        if not vs:
            del self.versions[m.page_id]
        if m.valid:
            del self.valid[m.page_id]
        self.front = (slot + 1) % self.capacity
        self.occupancy -= 1
        self.touched.add(m.page_id)
        return m

    def _charge_batch(self, kind: Kind, slots: list[int]) -> None:
        for run in extents(slots):
            self.acc.add(Device.FLASH, kind, run * self.page_size)

    def begin_batch(self) -> None:
        self._batch = []

    def end_batch(self) -> None:
        slots, self._batch = self._batch, None
        if slots:
            self._charge_batch(Kind.SEQ_WRITE, slots)

    # -- replacement -----------------------------------------------------

    def evict_basic(self) -> Evicted:
        m = self._dequeue()
        out = Evicted(freed=1)
        if m.dirty and m.valid:
            out.flushed.append(self.image.read_page(m.frame_index))
            self.acc.add(Device.FLASH, Kind.SEQ_READ, self.page_size)
        return out

    def _dequeue_batch(self) -> list[tuple[FlashFrameMeta, PageImage | None]]:
        """Dequeue up to ``scan_depth`` front frames as one batch read.

        Images are kept only for frames that may be written again.
        """
        n = min(self.config.scan_depth, self.occupancy)
        if n == 0:
            raise EmptyQueue("flash queue is empty")
        slots = [(self.front + i) % self.capacity for i in range(n)]
        self._charge_batch(Kind.SEQ_READ, slots)
        batch = []
        for _ in range(n):
            m = self._dequeue()
            keep = m.valid and (m.dirty or m.referenced)
            batch.append((m, self.image.read_page(m.frame_index) if keep else None))
        return batch

    def evict_group_replacement(self) -> Evicted:
        batch = self._dequeue_batch()
        out = Evicted(freed=len(batch))
        for m, page in batch:
            if m.dirty and m.valid:
                out.flushed.append(page)
        return out

    def evict_group_second_chance(self, dram: DramBuffer | None = None, reserve: int = 1) -> Evicted:
        """Group second chance; ``reserve`` slots are left free for the caller's page."""
        batch = self._dequeue_batch()
        out = Evicted()
        all_referenced = all(m.referenced and m.valid for m, _ in batch)
        survivors = []
        for i, (m, page) in enumerate(batch):
            if m.referenced and m.valid and not (all_referenced and i == 0):
                survivors.append((m, page))
            elif m.dirty and m.valid:
                out.flushed.append(page)
        out.freed = len(batch) - len(survivors)
        self.begin_batch()
        for m, page in survivors:
            self._enqueue(page, m.dirty)
        if dram is not None:
            # the MRU frame is the page being fetched right now; never pull it
            room = min(out.freed - reserve, len(dram) - 1)
            if room > 0:
                out.pulled = dram.pull_tail(room)
                flushing = {p.page_id: p.page_lsn for p in out.flushed}
                for frame in out.pulled:
                    # this very version is on its way to disk with the batch
                    if flushing.get(frame.page_id) == frame.page.page_lsn:
                        frame.dirty = False
                    out.writes.extend(self._admit_one(frame))
        self.end_batch()
        return out

    def replace(self, dram: DramBuffer | None = None) -> Evicted:
        r = self.config.replacement
        if r is Replacement.GSC:
            return self.evict_group_second_chance(dram)
        if r is Replacement.GR:
            return self.evict_group_replacement()
        return self.evict_basic()

    # -- admission -------------------------------------------------------

    def wants(self, frame: DramFrame) -> bool:
        """The mvFIFO guard: enqueue iff fdirty or no valid copy is cached."""
        return frame.fdirty or frame.page_id not in self.valid

    def _admit_one(self, frame: DramFrame) -> list[PageImage]:
        """Admission of one frame into a queue known to have room.

        Returns pages that must be written to disk right away.
        """
        if not self.wants(frame):
            return []
        cfg = self.config
        if frame.dirty and cfg.admit is Admit.CLEAN_ONLY:
            self.invalidate(frame.page_id)
            return [frame.page]
        if not frame.dirty and cfg.admit is Admit.DIRTY_ONLY:
            return []
        self.invalidate(frame.page_id)
        if frame.dirty and cfg.sync_policy is SyncPolicy.WRITE_THROUGH:
            self._enqueue(frame.page, False)
            return [frame.page]
        self._enqueue(frame.page, frame.dirty)
        return []

    def admit(self, frame: DramFrame, dram: DramBuffer | None = None) -> Evicted:
        """Stage a frame evicted from DRAM; replacement runs first if the queue is full.

        The previous version is invalidated before replacement so a superseded
        dirty copy dequeued by that replacement is discarded, not flushed.
        """
        out = Evicted()
        if not self.wants(frame):
            return out
        cfg = self.config
        enqueue = not ((frame.dirty and cfg.admit is Admit.CLEAN_ONLY)
                       or (not frame.dirty and cfg.admit is Admit.DIRTY_ONLY))
        if enqueue:
            self.invalidate(frame.page_id)
            if self.occupancy + 1 > self.capacity:
                out = self.replace(dram)
        out.writes.extend(self._admit_one(frame))
        return out

    def admit_batch(self, frames: list[DramFrame], dram: DramBuffer | None = None) -> Evicted:
        """Admit several frames, e.g. at a database checkpoint."""
        total = Evicted()
        for frame in frames:
            r = self.admit(frame, dram)
            total.freed += r.freed
            total.flushed += r.flushed
            total.pulled += r.pulled
            total.writes += r.writes
        return total

    # -- integrity -------------------------------------------------------

    def check_page(self, page_id: int) -> None:
        slots = self.versions.get(page_id, ())
        valid = [s for s in slots if self.slots[s].valid]
        if len(valid) > 1:
            raise AssertionError(f"page {page_id} has {len(valid)} valid flash copies")
        if valid:
            if self.valid.get(page_id) != valid[0]:
                raise AssertionError(f"page {page_id}: valid index out of sync")
            top = max(self.slots[s].lsn for s in slots)
            if self.slots[valid[0]].lsn != top:
                raise AssertionError(f"page {page_id}: valid copy is not the newest version")
        elif page_id in self.valid:
            raise AssertionError(f"page {page_id}: dangling valid index")

    def check_touched(self) -> None:
        for pid in self.touched:
            self.check_page(pid)
        self.touched.clear()

    def check_all(self) -> None:
        n = 0
        for i in range(self.occupancy):
            m = self.slots[(self.front + i) % self.capacity]
            if m is None:
                raise AssertionError("hole inside the live queue")
            n += 1
        if n != sum(s is not None for s in self.slots):
            raise AssertionError("occupied slot outside the live queue")
        if (self.front + self.occupancy) % self.capacity != self.rear:
            raise AssertionError("front/rear/occupancy disagree")
        for pid in self.versions:
            self.check_page(pid)
