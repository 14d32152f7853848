import io
import json

import pytest

from facecache.cli import main
from facecache.workload import read_csv

SMALL = ["--ops", "3000", "--db-pages", "2048", "--dram-frames", "32", "--flash-frames", "256"]


def call(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_run_csv_and_json():
    code, text = call("run", *SMALL)
    assert code == 0
    rows = read_csv(text)
    assert len(rows) == 1 and rows[0]["policy"] == "gsc"
    code, text = call("run", *SMALL, "--out", "json")
    assert json.loads(text)[0]["schema"] == 1


def test_run_twice_is_byte_identical():
    assert call("run", *SMALL, "--seed", "4")[1] == call("run", *SMALL, "--seed", "4")[1]


def test_zero_flash_is_hdd_only():
    code, text = call("run", *SMALL[:-2], "--flash-frames", "0")
    row = read_csv(text)[0]
    assert row["policy"] == "none" and row["flash_hit_rate"] == 0.0


def test_compare_rows():
    code, text = call("compare", *SMALL, "--profile", "mlc")
    labels = [r["policy"] for r in read_csv(text)]
    assert labels[:4] == ["LC", "FaCE", "FaCE+GR", "FaCE+GSC"]


def test_sweep_is_reparseable():
    code, text = call("sweep", *SMALL, "--flash-sizes", "128,256", "--policies", "lc,gsc")
    rows = read_csv(text)
    assert [(r["flash_frames"], r["policy"]) for r in rows] == [(128, "lc"), (128, "gsc"), (256, "lc"),
                                                                 (256, "gsc")]


def test_crash_subcommand():
    code, text = call("crash", *SMALL, "--seg-cap", "64", "--ckpt-interval", "1000", "--crash-points", "2")
    assert code == 0 and len(text.strip().splitlines()) == 3


def test_breakeven_subcommand():
    code, text = call("breakeven", "--delta", "1", "--exponent", "1.006")
    assert text.splitlines()[1].startswith("1.0,1.006,")
    code, text = call("breakeven", "--delta", "0.5", "--profile", "mlc", "--profile", "disk1")
    assert code == 0


def test_breakeven_dram_vs_flash_sweep():
    code, text = call("breakeven", "--delta", "1", "--dram-vs-flash", "1", "--dram-unit", "32")
    lines = text.splitlines()
    assert code == 0 and "k,dram_tpm,flash_tpm" in lines
    k, dram, flash = lines[-1].split(",")
    assert k == "1" and float(flash) > 0 and float(dram) > 0


@pytest.mark.parametrize("argv", [
    ["run", "--policy", "lru2", "--sync", "writeback", "--scan-depth", "8"],
    ["run", "--policy", "lc", "--scan-depth", "8"],
    ["run", "--scan-depth", "0"],
    ["run", "--profile", "mlc", "--profile", "slc"],
    ["run", "--write-frac", "2"],
    ["crash", "--policy", "lc"],
    ["breakeven", "--delta", "1", "--costs", "1", "2"],
    ["run", "--profile", "ssd"],
])
def test_invalid_combinations_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv, out=io.StringIO())
    assert exc.value.code == 2
