"""Fixed-size page images shared by every tier.

A page starts with a 16-byte little-endian header (page id, page LSN) so that
raw frames read back from the flash image can be identified without any other
metadata.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

DEFAULT_PAGE_SIZE = 4096
HEADER = struct.Struct("<QQ")
HEADER_SIZE = HEADER.size


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PageImage:
    page_id: int
    page_lsn: int
    body: bytes

    @classmethod
    def blank(cls, page_id: int, page_size: int = DEFAULT_PAGE_SIZE) -> PageImage:
        return cls(page_id, 0, bytes(page_size - HEADER_SIZE))


def serialize_page(page: PageImage, page_size: int = DEFAULT_PAGE_SIZE) -> bytes:
    body_size = page_size - HEADER_SIZE
    if len(page.body) != body_size:
        raise LengthMismatch(f"body must be {body_size} bytes, got {len(page.body)}")
    return HEADER.pack(page.page_id, page.page_lsn) + page.body


def deserialize_page(buf: bytes, page_size: int = DEFAULT_PAGE_SIZE) -> PageImage:
    if len(buf) != page_size:
        raise LengthMismatch(f"expected {page_size} bytes, got {len(buf)}")
    page_id, lsn = HEADER.unpack_from(buf)
    return PageImage(page_id, lsn, bytes(buf[HEADER_SIZE:]))


def read_header(buf: bytes) -> tuple[int, int]:
    """Return ``(page_id, page_lsn)`` from the first bytes of a raw frame."""
    return HEADER.unpack_from(buf)


def make_body(page_id: int, lsn: int, page_size: int = DEFAULT_PAGE_SIZE) -> bytes:
    """Deterministic synthetic page body for a given version."""
    stamp = struct.pack("<QQ", page_id ^ 0x5A5A5A5A5A5A5A5A, lsn)
    n = page_size - HEADER_SIZE
    return (stamp * (n // len(stamp) + 1))[:n]
