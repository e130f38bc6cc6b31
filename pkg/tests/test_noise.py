"""Closed-form oracles and properties for the ambient noise models.

Expected values below were computed by hand from the stated formulas and
frozen before the implementation was tested against them.
"""
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from uasnsim.noise import (NoiseSourceParams, ambient_spl, source_levels,
                           storm_noise, thermal_noise, total_spl,
                           turbulence_noise, vehicle_noise)

# ------------------------------------------------------------- vehicle noise


def test_vehicle_reference_point_is_exact():
    # all three log terms vanish at f=1, v=6.18, rho=1
    assert vehicle_noise(1.0, 6.18, 1.0) == 186.0


def test_vehicle_frequency_decade():
    assert vehicle_noise(10.0, 6.18, 1.0) == pytest.approx(166.0, abs=1e-9)


def test_vehicle_hand_value():
    got = vehicle_noise(100.0, 12.36, 2.0)
    assert got == pytest.approx(150.8164799306237, abs=1e-9)


@pytest.mark.parametrize("args", [(0.0, 6.18, 1.0), (1.0, -2.0, 1.0),
                                  (1.0, 6.18, 0.0)])
def test_vehicle_rejects_nonpositive(args):
    with pytest.raises(ValueError):
        vehicle_noise(*args)


# ------------------------------------------------------------- thermal noise


def test_thermal_golden():
    assert thermal_noise(290.0, 1.0, 1.0) == pytest.approx(
        -77.95662924371845, abs=1e-9)


def test_thermal_decade_additivity():
    base = thermal_noise(290.0, 1.0, 1.0)
    assert thermal_noise(290.0, 1.0, 10.0) - base == pytest.approx(10.0, abs=1e-9)
    assert thermal_noise(290.0, 100.0, 1.0) - base == pytest.approx(20.0, abs=1e-9)


def test_thermal_rejects_nonpositive():
    with pytest.raises(ValueError):
        thermal_noise(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        thermal_noise(290.0, 1.0, -1.0)


# ---------------------------------------------------------- turbulence noise


def test_turbulence_values():
    assert turbulence_noise(17.0, 1.0) == pytest.approx(17.0, abs=1e-12)
    assert turbulence_noise(17.0, 10.0) == pytest.approx(37.0, abs=1e-9)
    assert turbulence_noise(20.0, 0.5) == pytest.approx(13.979400086720375,
                                                        abs=1e-9)


def test_turbulence_rejects_nonpositive_speed():
    with pytest.raises(ValueError):
        turbulence_noise(17.0, 0.0)


# --------------------------------------------------------------- storm noise


def test_storm_wind_term_vanishes_at_reference_speed():
    assert storm_noise(400.0, 10.0) == pytest.approx(53.19382002601611,
                                                     abs=1e-9)


def test_storm_low_frequency_plateau():
    assert storm_noise(1.0, 10.0) == pytest.approx(55.0, abs=1e-4)


def test_storm_high_wind():
    # 55 - 6*lg 2 + (18 + 20/4)*lg 2, straight from the formula
    assert storm_noise(400.0, 20.0) == pytest.approx(60.11750992628768,
                                                     abs=1e-9)


def test_storm_rejects_nonpositive():
    with pytest.raises(ValueError):
        storm_noise(-1.0, 10.0)
    with pytest.raises(ValueError):
        storm_noise(400.0, 0.0)


# ----------------------------------------------------------------- total SPL


def test_total_spl_single_source_identity():
    assert total_spl([60.0]) == pytest.approx(60.0, abs=1e-12)


def test_total_spl_equal_source_doubling():
    assert total_spl([60.0, 60.0]) == pytest.approx(63.01029995663981,
                                                    abs=1e-9)


def test_total_spl_hand_value():
    assert total_spl([60.0, 40.0, 30.0]) == pytest.approx(60.04751155591001,
                                                          abs=1e-9)


def test_total_spl_rejects_empty():
    with pytest.raises(ValueError):
        total_spl([])


levels = st.lists(st.floats(min_value=-40.0, max_value=140.0), min_size=1,
                  max_size=8)


@given(levels)
def test_total_spl_bounds(ls):
    t = total_spl(ls)
    assert t >= max(ls) - 1e-9
    assert t <= max(ls) + 10.0 * math.log10(len(ls)) + 1e-9


@given(levels, st.randoms())
def test_total_spl_permutation_invariant(ls, rnd):
    shuffled = list(ls)
    rnd.shuffle(shuffled)
    assert total_spl(shuffled) == pytest.approx(total_spl(ls), abs=1e-9)


@given(levels, st.floats(min_value=-40.0, max_value=140.0))
def test_total_spl_monotone_in_sources(ls, extra):
    assert total_spl(ls + [extra]) >= total_spl(ls) - 1e-9


# ------------------------------------------------------------ ambient bundle


def test_ambient_spl_matches_component_sum():
    params = NoiseSourceParams()
    assert ambient_spl(params) == pytest.approx(
        total_spl(source_levels(params)), abs=1e-12)


def test_source_levels_has_four_components():
    assert len(source_levels(NoiseSourceParams())) == 4


def test_scaled_multiplies_fields():
    params = NoiseSourceParams()
    scaled = params.scaled(wind_speed=2.0, vehicle_density=3.0)
    assert scaled.wind_speed == pytest.approx(params.wind_speed * 2.0)
    assert scaled.vehicle_density == pytest.approx(params.vehicle_density * 3.0)
    # untouched fields carry over
    assert scaled.temperature_k == params.temperature_k
    # original is not mutated
    assert params.wind_speed != scaled.wind_speed


def test_ambient_spl_rises_with_wind():
    calm = ambient_spl(NoiseSourceParams().scaled(wind_speed=1.0))
    windy = ambient_spl(NoiseSourceParams().scaled(wind_speed=1.8))
    assert windy > calm
