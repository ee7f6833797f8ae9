import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LOG2_LOG3, line
from fraclab.dim_est import (
    DimEstimate,
    LabeledMass,
    SweepConfig,
    WeightedSpace,
    assouad_estimate,
    count_sweep,
    estimate,
    l1_slope,
    lower_estimate,
    lower_reg_estimate,
    mass_sweep,
    reduce_sweep,
    scale_pairs,
    upper_reg_estimate,
)
from fraclab.errors import DegenerateInputError, InputError, ResolutionError
from fraclab.metric_space import FiniteMetricSpace


def test_l1_slope():
    x = np.arange(6.0)
    assert l1_slope(x, 2 * x + 1) == pytest.approx(2.0)
    y = 0.5 * x
    y[-1] += 10  # one outlier does not move the L1 line
    assert l1_slope(x, y) == pytest.approx(0.5)


def test_grid(grid1000):
    assert 0.9 <= assouad_estimate(grid1000).exponent <= 1.1
    assert lower_estimate(grid1000).exponent >= 0.9


def test_cantor(cantor8):
    a = assouad_estimate(cantor8)
    lo = lower_estimate(cantor8)
    assert abs(a.exponent - LOG2_LOG3) <= 0.05
    assert abs(lo.exponent - LOG2_LOG3) <= 0.07
    # frozen desk-scale values at seed 0
    assert a.exponent == pytest.approx(0.660964047501, abs=1e-9)
    assert lo.exponent == pytest.approx(0.580482023563, abs=1e-9)


def test_two_point_space():
    sp = line(0, 1, floor=1e-3)
    cfg = SweepConfig(ratio_grid=[(0.01, 0.5), (0.05, 0.9), (0.02, 0.4)])
    assert assouad_estimate(sp, cfg).exponent <= 0.25
    assert assouad_estimate(sp, SweepConfig(reduction="extreme", ratio_window=(16, 1e9))).exponent <= 0.25


def test_geometric_sequence():
    pts = np.concatenate([[0.0], 3.0 ** -np.arange(21)])
    sp = FiniteMetricSpace.from_points(pts[:, None], resolution_floor=3.0 ** -8)
    assert lower_estimate(sp).exponent <= 0.15


def test_witness_and_constant(cantor8):
    est = assouad_estimate(cantor8)
    x, r, R = est.witness
    sw = est.sweep
    p = np.flatnonzero((sw.r == r) & (sw.R == R))[0]
    a = np.flatnonzero(sw.centers == x)[0]
    assert est.constant == pytest.approx(math.exp(sw.values[a, p] - est.exponent * sw.log_ratio[p]))
    # every sampled count lies under the reported envelope
    assert np.all(sw.values - est.exponent * sw.log_ratio[None, :] <= math.log(est.constant) + 1e-12)


def test_extreme_is_literal_sup(cantor8):
    est = assouad_estimate(cantor8, SweepConfig(reduction="extreme"))
    sw = est.sweep
    assert est.exponent == pytest.approx((sw.values / sw.log_ratio[None, :]).max())


def test_resolution_error():
    sp = line(0, 1, floor=0.2)
    with pytest.raises(ResolutionError):
        assouad_estimate(sp)


def test_config_validation_and_json():
    with pytest.raises(InputError):
        SweepConfig(guard=0.5)
    with pytest.raises(InputError):
        SweepConfig(reduction="median")
    with pytest.raises(InputError):
        SweepConfig(ratio_window=(8, 4))
    cfg = SweepConfig(centers="all", ratio_window=(4, 64), seed=3)
    assert SweepConfig.from_json_dict(cfg.to_json_dict()) == cfg


def test_pairs_respect_guard(cantor8):
    r, R = scale_pairs(cantor8, SweepConfig())
    assert r.min() >= 10 * cantor8.resolution_floor * (1 - 1e-12)
    assert R.max() <= cantor8.diam and np.all(r < R)


def test_center_sampling_is_seeded():
    pts = np.random.default_rng(1).random((2500, 1))
    sp = FiniteMetricSpace.from_points(pts, resolution_floor=1e-3)
    a = count_sweep(sp, SweepConfig(seed=4), 1.0)
    b = count_sweep(sp, SweepConfig(seed=4), 1.0)
    assert len(a.centers) == 2000 and np.array_equal(a.centers, b.centers)
    assert not np.array_equal(a.centers, count_sweep(sp, SweepConfig(seed=5), 1.0).centers)


def test_uniform_measure(grid1000):
    mu = WeightedSpace(grid1000, np.ones(grid1000.n))
    assert upper_reg_estimate(mu).exponent == pytest.approx(1.0, abs=0.1)
    assert lower_reg_estimate(mu).exponent == pytest.approx(1.0, abs=0.1)


def test_concentrated_measure(grid1000):
    w = np.full(grid1000.n, 1e-12)
    w[500] = 1.0
    assert lower_reg_estimate(WeightedSpace(grid1000, w)).exponent <= 0.05


def test_zero_mass_ball(grid1000):
    w = np.zeros(grid1000.n)
    w[0] = 1.0
    with pytest.raises(DegenerateInputError, match="zero mass"):
        lower_reg_estimate(WeightedSpace(grid1000, w))


def test_measure_inputs(grid1000):
    w = np.ones(grid1000.n)
    a = upper_reg_estimate((grid1000, w)).exponent
    b = upper_reg_estimate(LabeledMass(grid1000, np.arange(grid1000.n), w)).exponent
    assert a == b
    with pytest.raises(InputError):
        upper_reg_estimate([1, 2, 3])
    with pytest.raises(InputError):
        WeightedSpace(grid1000, -w)


def test_mode_aliases(cantor8):
    assert estimate(cantor8, "assouad").exponent == assouad_estimate(cantor8).exponent
    mu = WeightedSpace(cantor8, np.ones(cantor8.n))
    assert estimate(mu, "uppereg").mode == "upper_reg"
    assert estimate(mu, "lowreg").mode == "lower_reg"
    with pytest.raises(InputError):
        estimate(cantor8, "hausdorff")


def test_csv_columns(cantor8):
    head = assouad_estimate(cantor8).sweep.to_csv().splitlines()[0]
    assert head == "x_index,r,R,count,log_ratio_exponent"
    mu = WeightedSpace(cantor8, np.ones(cantor8.n))
    head = lower_reg_estimate(mu).sweep.to_csv().splitlines()[0]
    assert head == "x_index,r,R,mu_r,mu_R,log_ratio_exponent"


def test_json_dict(cantor8):
    d = assouad_estimate(cantor8).to_json_dict()
    assert {"exponent", "constant", "witness", "mode", "reduction"} <= set(d)


# -- invariants ---------------------------------------------------------------

clouds = st.integers(0, 10_000).map(lambda s: np.random.default_rng(s).random((120, 2)))


@settings(max_examples=15, deadline=None)
@given(pts=clouds, c=st.sampled_from([0.01, 0.5, 3.0, 1000.0]))
def test_scale_invariance(pts, c):
    a = FiniteMetricSpace.from_points(pts, resolution_floor=1e-3)
    b = FiniteMetricSpace.from_points(pts * c, resolution_floor=1e-3 * c)
    for f in (assouad_estimate, lower_estimate):
        assert f(a).exponent == pytest.approx(f(b).exponent, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(pts=clouds, c=st.sampled_from([1e-6, 7.0, 1e5]))
def test_mass_scale_invariance(pts, c):
    sp = FiniteMetricSpace.from_points(pts, resolution_floor=1e-3)
    w = np.random.default_rng(0).random(sp.n) + 0.1
    for f in (upper_reg_estimate, lower_reg_estimate):
        assert f(WeightedSpace(sp, w)).exponent == pytest.approx(f(WeightedSpace(sp, c * w)).exponent, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(pts=clouds)
def test_ordering_on_shared_sweep(pts):
    sp = FiniteMetricSpace.from_points(pts, resolution_floor=1e-3)
    cfg = SweepConfig(reduction="extreme")
    sw = count_sweep(sp, cfg, 1.0)
    assert reduce_sweep(sw, "lower", "extreme").exponent <= reduce_sweep(sw, "assouad", "extreme").exponent
    mu = WeightedSpace(sp, np.ones(sp.n))
    msw = mass_sweep(mu, cfg)
    assert reduce_sweep(msw, "lower_reg", "extreme").exponent <= reduce_sweep(msw, "upper_reg", "extreme").exponent


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_monotone_refinement(seed):
    pts = np.random.default_rng(seed).random((400, 1))
    sp = FiniteMetricSpace.from_points(pts, resolution_floor=1e-3)
    small = SweepConfig(reduction="extreme", centers=50, seed=seed)
    big = SweepConfig(reduction="extreme", centers="all")
    assert assouad_estimate(sp, big).exponent >= assouad_estimate(sp, small).exponent
    assert lower_estimate(sp, big).exponent <= lower_estimate(sp, small).exponent


def test_dim_estimate_type(cantor8):
    assert isinstance(lower_estimate(cantor8), DimEstimate)
