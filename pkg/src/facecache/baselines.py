"""Baseline flash caches managed by LRU-K with in-place page overwrite.

``LruKCache(k=2, sync=WRITE_BACK)`` is the lazy-cleaning (LC) scheme: pages
are cached on exit from DRAM, dirty pages are written back only when they are
replaced. ``k=1`` with ``WRITE_THROUGH`` gives a write-through LRU cache. Each
cached page has exactly one slot, so every page replacement or overwrite is a
random flash write.
"""

from __future__ import annotations

import heapq

from .devices import CostAccumulator, Device, Kind
from .dram import DramBuffer, DramFrame
from .flash import Evicted, FlashFrameMeta, FlashImage, SyncPolicy
from .page import PageImage

NEVER = -1


class LruKCache:
    def __init__(self, capacity: int, image: FlashImage, acc: CostAccumulator, k: int = 2,
                 sync: SyncPolicy = SyncPolicy.WRITE_BACK, lazy_threshold: float = 1.0):
        if k not in (1, 2):
            raise ValueError("only LRU-1 and LRU-2 are supported")
        self.capacity = capacity
        self.image = image
        self.page_size = image.page_size
        self.acc = acc
        self.k = k
        self.sync = sync
        self.lazy_threshold = lazy_threshold
        self.slot_of: dict[int, int] = {}
        self.meta: dict[int, FlashFrameMeta] = {}
        self.free = list(range(capacity - 1, -1, -1))
        self.hist: dict[int, tuple[int, int]] = {}  # page -> (last, second-to-last) reference
        self.heap: list = []
        self.clock = 0
        self.n_dirty = 0
        self.on_store = None
        self.touched: set[int] = set()

    def __contains__(self, page_id: int) -> bool:
        return page_id in self.slot_of

    def __len__(self) -> int:
        return len(self.slot_of)

    @property
    def occupancy(self) -> int:
        return len(self.slot_of)

    def valid_meta(self, page_id: int) -> FlashFrameMeta | None:
        return self.meta.get(page_id)

    def _key(self, page_id: int):
        last, prev = self.hist[page_id]
        return (prev, last) if self.k == 2 else (last,)

    def _reference(self, page_id: int) -> None:
        self.clock += 1
        last, _ = self.hist.get(page_id, (NEVER, NEVER))
        self.hist[page_id] = (self.clock, last)
        heapq.heappush(self.heap, (*self._key(page_id), page_id))

    def victim(self) -> int:
        """Page with the largest backward K-distance; ties go to the older last reference."""
        while self.heap:
            item = self.heap[0]
            pid = item[-1]
            if pid in self.slot_of and self._key(pid) == item[:-1]:
                return pid
            heapq.heappop(self.heap)
        raise IndexError("cache is empty")

    def lookup(self, page_id: int) -> tuple[FlashFrameMeta, PageImage] | None:
        slot = self.slot_of.get(page_id)
        if slot is None:
            return None
        page = self.image.read_page(slot)
        self.acc.add(Device.FLASH, Kind.RAND_READ, self.page_size)
        self._reference(page_id)
        m = self.meta[page_id]
        m.referenced = True
        return m, page

    def wants(self, frame: DramFrame) -> bool:
        return frame.fdirty or frame.page_id not in self.slot_of

    def _store(self, slot: int, page: PageImage, dirty: bool) -> None:
        self.image.write(slot, page)
        self.acc.add(Device.FLASH, Kind.RAND_WRITE, self.page_size)
        old = self.meta.get(page.page_id)
        if old is not None and old.dirty:
            self.n_dirty -= 1
        self.meta[page.page_id] = FlashFrameMeta(page.page_id, slot, dirty, page.page_lsn)
        self.n_dirty += dirty
        self.touched.add(page.page_id)
        if self.on_store is not None:
            self.on_store(page)

    def _evict(self, page_id: int, out: Evicted) -> int:
        slot = self.slot_of.pop(page_id)
        m = self.meta.pop(page_id)
        del self.hist[page_id]
        if m.dirty:
            self.n_dirty -= 1
            out.flushed.append(self.image.read_page(slot))
            self.acc.add(Device.FLASH, Kind.RAND_READ, self.page_size)
        out.freed += 1
        self.touched.add(page_id)
        return slot

    def admit(self, frame: DramFrame, dram: DramBuffer | None = None) -> Evicted:
        out = Evicted()
        if not self.wants(frame):
            return out
        pid = frame.page_id
        dirty = frame.dirty
        if dirty and self.sync is SyncPolicy.WRITE_THROUGH:
            out.writes.append(frame.page)
            dirty = False
        slot = self.slot_of.get(pid)
        if slot is not None:
            dirty = dirty or self.meta[pid].dirty
        else:
            slot = self.free.pop() if self.free else self._evict(self.victim(), out)
            self.slot_of[pid] = slot
        self._store(slot, frame.page, dirty)
        self._reference(pid)
        if self.n_dirty > self.lazy_threshold * self.capacity:
            out.flushed.extend(self.clean(self.n_dirty - int(self.lazy_threshold * self.capacity)))
        return out

    def clean(self, n: int | None = None) -> list[PageImage]:
        """Write back up to ``n`` dirty pages (all if None), coldest first, keeping them cached."""
        dirty = sorted((self._key(pid), pid) for pid, m in self.meta.items() if m.dirty)
        if n is not None:
            dirty = dirty[:n]
        out = []
        for _, pid in dirty:
            m = self.meta[pid]
            out.append(self.image.read_page(m.frame_index))
            self.acc.add(Device.FLASH, Kind.RAND_READ, self.page_size)
            m.dirty = False
            self.n_dirty -= 1
        return out

    def check_page(self, page_id: int) -> None:
        if (page_id in self.slot_of) != (page_id in self.meta):
            raise AssertionError(f"page {page_id}: slot map and metadata disagree")

    def check_touched(self) -> None:
        for pid in self.touched:
            self.check_page(pid)
        self.touched.clear()

    def check_all(self) -> None:
        slots = list(self.slot_of.values())
        if len(slots) != len(set(slots)):
            raise AssertionError("two pages share a flash slot")
        if len(slots) + len(self.free) != self.capacity:
            raise AssertionError("slot accounting broken")
