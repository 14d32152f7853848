import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from facecache.devices import CostAccumulator
from facecache.flash import FlashCache, FlashConfig, FlashImage, Replacement, SyncPolicy, Admit
from facecache.metadata import MetadataDirectory

SMALL_PAGE = 64


@pytest.fixture
def make_flash(tmp_path):
    """Factory for a stand-alone flash cache over a scratch image file."""
    made = []

    def factory(capacity=8, replacement="face", sync="writeback", admit="both", scan_depth=4,
                page_size=SMALL_PAGE, with_meta=False, segment_capacity=16):
        acc = CostAccumulator(page_size=page_size)
        image = FlashImage(tmp_path / f"flash{len(made)}.img", capacity, page_size)
        image.write_log = []
        meta = None
        if with_meta:
            meta = MetadataDirectory(tmp_path / f"flash{len(made)}.meta", capacity, page_size,
                                     scan_depth, segment_capacity, acc)
        cfg = FlashConfig(capacity, Replacement(replacement), SyncPolicy(sync), Admit(admit),
                          min(scan_depth, capacity))
        fc = FlashCache(cfg, image, acc, meta, checked=True)
        made.append(fc)
        return fc

    yield factory
    for fc in made:
        fc.image.close()
        if fc.meta is not None:
            fc.meta.close()
