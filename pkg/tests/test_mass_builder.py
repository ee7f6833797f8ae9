import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LOG2_LOG3, line
from fraclab.cube_tree import CubeTree, build_cube_tree
from fraclab.dim_est import SweepConfig, lower_reg_estimate, upper_reg_estimate
from fraclab.errors import CapacityError, InputError
from fraclab.mass_builder import (
    MassParams,
    build_mass,
    build_mass_doubling,
    check_rho_inequalities,
    choose_rho,
    max_child_count,
    measure_of_ball,
)


def star(n_children=3):
    """Root over children at 0, 0.05, 0.1, ...; all inside the lambda-ball of radius 1/8."""
    sp = line(*[0.05 * i for i in range(n_children)], floor=0.01)
    kids = list(range(n_children))
    return CubeTree(sp, 0.1, 1.0, [[0], kids], [[-1], [0] * n_children], [[kids], [[i] for i in kids]])


def test_choose_rho_closed_form():
    assert choose_rho(1.0, 0.5) == 1 / 512
    assert choose_rho(0.63, 0.4) <= 2 ** -7
    for s, t, c0 in [(0.63, 0.4, 1.0), (1.0, 0.5, 1.0), (2.0, 1.9, 0.3), (0.5, 0.01, 5.0)]:
        rho = choose_rho(s, t, c0)
        assert rho < 1 / 64
        assert all(check_rho_inequalities(rho, s, t, c0).values())
        assert math.log2(rho) == int(math.log2(rho))
        # largest such power of two
        assert not 2 * rho < min(1 / 64, math.sqrt(2) - 1.25, (c0 * 2 ** -s * 8 ** -s) ** (1 / (s - t)))


def test_params_validation():
    with pytest.raises(InputError):
        MassParams(t=0.5, s=0.5)
    with pytest.raises(InputError):
        MassParams(t=0.1, s=0.5, lam=0.2)
    with pytest.raises(InputError):
        choose_rho(0.3, 0.4)
    assert MassParams(t=0.4, s=0.6).K_for(2 ** -11) == 22


def test_three_children_plain():
    m = build_mass(star(3), MassParams(t=0.1, s=1.0, K=2))
    assert m.weights[1] == pytest.approx([4 / 9, 4 / 9, 1 / 9], abs=1e-15)
    assert measure_of_ball(m, 0, 0.06) == pytest.approx(8 / 9, abs=1e-15)
    assert measure_of_ball(m, 0, 10.0) == pytest.approx(1.0, abs=1e-15)


def test_exactly_K_children_is_uniform():
    m = build_mass(star(2), MassParams(t=0.1, s=1.0, K=2))
    assert m.weights[1] == pytest.approx([0.5, 0.5], abs=1e-15)
    d = build_mass_doubling(star(2), MassParams(t=0.1, s=1.0, K=2, M=2))
    assert d.weights[1] == pytest.approx([0.5, 0.5], abs=1e-15)


def test_three_children_doubling():
    m = build_mass_doubling(star(3), MassParams(t=0.1, s=1.0, K=2, M=4))
    assert m.eps == pytest.approx(1 / 12)
    assert m.weights[1] == pytest.approx([11 / 24, 11 / 24, 2 / 24], abs=1e-15)
    with pytest.raises(InputError):
        build_mass_doubling(star(3), MassParams(t=0.1, s=1.0, K=2, M=2))


def test_capacity_error_names_cube():
    with pytest.raises(CapacityError) as err:
        build_mass(star(3), MassParams(t=0.1, s=1.0, K=4))
    assert err.value.details["cube"] == [0, 0]
    assert err.value.details["needed"] == 4


def test_single_cube_ball_and_warning(cantor8):
    tree = build_cube_tree(cantor8, 2 ** -6, 1)
    m = build_mass(tree, MassParams(t=0.2, s=LOG2_LOG3))
    j = int(tree.labels(1)[5])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        val = measure_of_ball(m, 5, 1e-9)
    assert val == pytest.approx(m.weights[1][j])
    assert any("finest" in str(x.message) for x in w)


def test_cantor_measure(cantor14):
    rho = choose_rho(LOG2_LOG3, 0.4)
    tree = build_cube_tree(cantor14, rho, 2)
    m = build_mass(tree, MassParams(t=0.4, s=LOG2_LOG3))
    chk = m.check()
    assert chk["conservation"] and chk["positive"] and chk["decay_bound"]
    assert m.K == 22
    assert lower_reg_estimate(m).exponent >= 0.35
    d = build_mass_doubling(tree, MassParams(t=0.4, s=LOG2_LOG3))
    chk = d.check()
    assert chk["floor_bound"] and chk["decay_bound"]
    assert d.params.M is None and max_child_count(tree) >= 2


def test_upper_above_lower_on_shared_sweep(cantor8):
    tree = build_cube_tree(cantor8, 2 ** -6, 1)
    m = build_mass(tree, MassParams(t=0.2, s=LOG2_LOG3))
    cfg = SweepConfig(reduction="extreme")
    assert upper_reg_estimate(m, cfg).exponent >= lower_reg_estimate(m, cfg).exponent


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), t=st.floats(0.05, 0.3), doubling=st.booleans())
def test_conservation_and_bounds_random(seed, t, doubling):
    pts = np.random.default_rng(seed).random((600, 2))
    from fraclab.metric_space import FiniteMetricSpace

    sp = FiniteMetricSpace.from_points(pts, resolution_floor=1e-4)
    tree = build_cube_tree(sp, 0.05, 2)
    p = MassParams(t=t, s=2.0, K=1)
    try:
        m = (build_mass_doubling if doubling else build_mass)(tree, p)
    except CapacityError:
        return
    chk = m.check()
    assert chk["conservation"] and chk["positive"]
    for k in range(tree.depth):
        ratio = m.weights[k + 1] / m.weights[k][tree.parents[k + 1]]
        assert ratio.max() <= 1.0
        if doubling:
            assert ratio.min() >= m.eps * (1 - 1e-12)
