import math

import mpmath
import numpy as np
import pytest

from facecache.analysis import (BreakEvenParams, DegenerateCosts, break_even_theta, fit_alpha, hit_rate_model,
                                params_from_profiles, sweep_csv, theta_for_exponent, SweepRow)

mpmath.mp.dps = 50


def oracle(delta, c_disk, c_flash):
    d, cd, cf = mpmath.mpf(delta), mpmath.mpf(c_disk), mpmath.mpf(c_flash)
    return (1 + d) ** (cd / (cd - cf)) - 1


def grid():
    pts = []
    for delta in np.linspace(0.01, 2.0, 10):
        for ratio in np.linspace(0.001, 0.9, 10):
            pts.append((float(delta), 1.0, float(ratio)))
    return pts


def test_grid_against_high_precision():
    for delta, cd, cf in grid():
        got = break_even_theta(BreakEvenParams(delta, cd, cf))
        want = oracle(delta, cd, cf)
        assert abs(got - want) / want <= 1e-12


@pytest.mark.parametrize("exponent,delta", [(1.006, 1.0), (1.025, 0.5), (1.006, 0.25), (1.025, 2.0)])
def test_named_exponents(exponent, delta):
    want = (1 + mpmath.mpf(delta)) ** mpmath.mpf(exponent) - 1
    assert abs(theta_for_exponent(delta, exponent) - want) / want <= 1e-12
    # the same point through the cost form: c_disk/(c_disk - c_flash) = exponent
    cf = 1 - 1 / exponent
    got = break_even_theta(BreakEvenParams(delta, 1.0, cf))
    assert abs(got - oracle(delta, 1.0, cf)) / oracle(delta, 1.0, cf) <= 1e-12


def test_zero_delta():
    for _, cd, cf in grid():
        assert break_even_theta(BreakEvenParams(0.0, cd, cf)) == 0.0


def test_degenerate_costs():
    with pytest.raises(DegenerateCosts):
        BreakEvenParams(0.5, 1.0, 1.0)
    with pytest.raises(DegenerateCosts):
        BreakEvenParams(0.5, 1.0, 2.0)
    with pytest.raises(DegenerateCosts):
        BreakEvenParams(0.5, 1.0, 0.0)


def test_monotone_in_delta_and_flash_cost():
    deltas = np.linspace(0.0, 3.0, 40)
    costs = np.linspace(0.001, 0.95, 40)
    table = np.array([[break_even_theta(BreakEvenParams(d, 1.0, c)) for c in costs] for d in deltas])
    assert np.all(np.diff(table, axis=0) > 0)
    assert np.all(np.diff(table[1:], axis=1) > 0)


def test_tends_to_delta_for_free_flash():
    for delta in (0.1, 0.5, 1.0):
        assert break_even_theta(BreakEvenParams(delta, 1.0, 1e-12)) == pytest.approx(delta, rel=1e-9)


def test_hit_rate_model():
    assert hit_rate_model(0.3, 100, 100) == 0.0
    assert hit_rate_model(0.3, 100, 200) == pytest.approx(0.3 * math.log(2))
    with pytest.raises(ValueError):
        hit_rate_model(0.3, 100, 50)


def test_fit_alpha_recovers_model():
    sizes = [100, 200, 400, 800, 1600]
    hits = [0.2 + 0.07 * math.log(s) for s in sizes]
    alpha, c = fit_alpha(sizes, hits)
    assert alpha == pytest.approx(0.07) and c == pytest.approx(0.2)
    held_out = 0.2 + 0.07 * math.log(3200)
    assert alpha * math.log(3200) + c == pytest.approx(held_out)


def test_profile_costs():
    p = params_from_profiles(1.0, "mlc", "disk1")
    assert p.c_disk == pytest.approx(1 / 409) and p.c_flash == pytest.approx(1 / 28495)
    w = params_from_profiles(1.0, "mlc", "disk1", read_weight=0.0)
    assert w.c_disk == pytest.approx(1 / 343) and w.c_flash == pytest.approx(1 / 6314)
    assert w.exponent > p.exponent > 1


def test_sweep_csv_header():
    assert sweep_csv([]) == "k,dram_tpm,flash_tpm\n"
    assert sweep_csv([SweepRow(1, 2.0, 3.0)]).splitlines()[1] == "1,2.0,3.0"
