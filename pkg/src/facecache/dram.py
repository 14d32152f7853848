"""LRU DRAM buffer pool with the dirty / fdirty flag pair.

``dirty`` means the buffered copy is newer than the disk copy, ``fdirty`` that
it is newer than the copy held in the flash cache.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum

from .page import PageImage


class Source(Enum):
    DISK = "disk"
    FLASH = "flash"


class DuplicateInstall(KeyError):
    pass


class NotResident(KeyError):
    pass


class LsnRegression(ValueError):
    pass


@dataclass
class DramFrame:
    page: PageImage
    dirty: bool = False
    fdirty: bool = False

    @property
    def page_id(self) -> int:
        return self.page.page_id


class DramBuffer:
    """Fixed-capacity buffer; ``frames`` is kept in LRU-to-MRU order."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("DRAM buffer needs at least one frame")
        self.capacity = capacity
        self.frames: OrderedDict[int, DramFrame] = OrderedDict()

    def __len__(self) -> int:
        return len(self.frames)

    def __contains__(self, page_id: int) -> bool:
        return page_id in self.frames

    def peek(self, page_id: int) -> DramFrame | None:
        """Return the frame without touching recency."""
        return self.frames.get(page_id)

    def lookup(self, page_id: int) -> DramFrame | None:
        frame = self.frames.get(page_id)
        if frame is not None:
            self.frames.move_to_end(page_id)
        return frame

    def install(self, page: PageImage, source: Source, flash_dirty: bool = False) -> DramFrame | None:
        """Install ``page`` at the MRU end; return the LRU victim if the pool was full.

        A page fetched from flash inherits ``dirty`` from the flash copy's
        metadata and starts with ``fdirty`` off.
        """
        if page.page_id in self.frames:
            raise DuplicateInstall(page.page_id)
        victim = None
        if len(self.frames) >= self.capacity:
            _, victim = self.frames.popitem(last=False)
        dirty = flash_dirty if source is Source.FLASH else False
        self.frames[page.page_id] = DramFrame(page, dirty=dirty, fdirty=False)
        return victim

    def update(self, page_id: int, body: bytes, lsn: int) -> None:
        frame = self.frames.get(page_id)
        if frame is None:
            raise NotResident(page_id)
        if lsn <= frame.page.page_lsn:
            raise LsnRegression(f"page {page_id}: lsn {lsn} <= {frame.page.page_lsn}")
        frame.page = PageImage(page_id, lsn, body)
        frame.dirty = frame.fdirty = True
        self.frames.move_to_end(page_id)

    def pull_tail(self, n: int) -> list[DramFrame]:
        """Remove up to ``n`` frames from the LRU end, returned LRU first."""
        if n < 0:
            raise ValueError("n must be non-negative")
        out = []
        while n > 0 and self.frames:
            out.append(self.frames.popitem(last=False)[1])
            n -= 1
        return out

    def lru_order(self) -> list[int]:
        """Page ids from least to most recently used."""
        return list(self.frames)

    def dirty_frames(self) -> list[DramFrame]:
        return [f for f in self.frames.values() if f.dirty]
