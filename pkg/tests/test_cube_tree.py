import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import line
from fraclab.cube_tree import (
    CubeRef,
    CubeTree,
    build_cube_tree,
    cubes_meeting_ball,
    verify_tree,
)
from fraclab.errors import InputError, ResolutionError
from fraclab.metric_space import FiniteMetricSpace


def test_two_points():
    t = build_cube_tree(line(0, 1, floor=0.01), 0.1, 1)
    assert [m.tolist() for m in t.members[0]] == [[0, 1]]
    assert sorted(m.tolist() for m in t.members[1]) == [[0], [1]]


def test_depth_zero():
    sp = line(0, 0.2, 0.9)
    t = build_cube_tree(sp, 0.2, 0)
    assert t.depth == 0 and t.members[0][0].tolist() == [0, 1, 2]
    rep = verify_tree(t)
    assert rep["partition"] and rep["nesting"] and rep["cubes_checked"] == 1


def test_constants():
    t = build_cube_tree(line(0, 1, floor=0.01), 0.1, 1)
    assert t.c_const == pytest.approx(0.5 - 0.1 / 0.9, abs=1e-15)
    assert t.C_const == pytest.approx(1 / 0.9, abs=1e-15)


def test_bad_arguments():
    with pytest.raises(InputError):
        build_cube_tree(line(0, 1), 0.4, 1)
    with pytest.raises(InputError):
        build_cube_tree(line(0, 1), 0.0, 1)
    with pytest.raises(ResolutionError):
        build_cube_tree(line(0, 1, floor=0.05), 0.1, 2)


def test_cantor_cube_diameters(cantor8):
    # depth 3 is the deepest level above the 3^-8 resolution floor at rho = 0.1
    t = build_cube_tree(cantor8, 0.1, 3)
    rep = verify_tree(t)
    assert rep["partition"] and rep["nesting"] and rep["ball_sandwich"] and rep["chain"]
    for k in t.levels:
        for m in t.members[k]:
            x = cantor8.points[m, 0]
            assert x.max() - x.min() <= 2 * t.C_const * t.radius(k) + 1e-12
    with pytest.raises(ResolutionError):
        build_cube_tree(cantor8, 0.1, 4)


def test_uniform_grid_passes_everything():
    g = np.stack(np.meshgrid(np.linspace(0, 1, 30), np.linspace(0, 1, 30)), -1).reshape(-1, 2)
    t = build_cube_tree(FiniteMetricSpace.from_points(g), 0.2, 2)
    rep = verify_tree(t)
    assert all(rep[k] for k in ("partition", "nesting", "ball_sandwich", "chain"))
    assert rep["sandwich_violations"] == 0


def test_broken_tree_detected():
    sp = line(0, 1, 2, 3)
    t = CubeTree(sp, 0.1, 3.0, [[0], [0, 2]], [[-1], [0, 0]], [[[0, 1, 2, 3]], [[0, 1], [1, 2, 3]]])
    rep = verify_tree(t)
    assert not rep["partition"] or not rep["nesting"]


def test_json_roundtrip(cantor8):
    t = build_cube_tree(cantor8, 0.1, 2)
    back = CubeTree.from_json_dict(t.to_json_dict(), cantor8)
    assert back.depth == 2
    for k in t.levels:
        assert np.array_equal(back.centers[k], t.centers[k])
        assert all(np.array_equal(a, b) for a, b in zip(back.members[k], t.members[k]))


def test_cubes_meeting_ball(cantor8):
    t = build_cube_tree(cantor8, 0.1, 2)
    assert len(cubes_meeting_ball(t, 1, 0, 10.0)) == t.n_cubes(1)
    one = build_cube_tree(line(0, 1, floor=0.01), 0.1, 1)
    j = int(one.labels(1)[0])
    assert cubes_meeting_ball(one, 1, 0, 0.5) == [CubeRef(1, j)]
    # brute force against member lists
    r = 1 / 3 + 1e-3
    expect = [j for j, m in enumerate(t.members[2]) if np.any(np.abs(cantor8.points[m, 0]) <= r)]
    assert [c.index for c in cubes_meeting_ball(t, 2, 0, r)] == expect
    with pytest.raises(InputError):
        cubes_meeting_ball(t, 3, 0, 0.1)


def test_meeting_ball_monotone(cantor8):
    t = build_cube_tree(cantor8, 0.1, 2)
    prev = set()
    for r in np.geomspace(1e-3, 1.0, 12):
        cur = {c.index for c in cubes_meeting_ball(t, 2, 17, r)}
        assert prev <= cur
        prev = cur


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 300),
    seed=st.integers(0, 10_000),
    rho=st.sampled_from([0.05, 0.1, 0.2, 0.3]),
)
def test_random_clouds_satisfy_properties(n, seed, rho):
    pts = np.random.default_rng(seed).random((n, 2))
    sp = FiniteMetricSpace.from_points(pts, resolution_floor=1e-6)
    depth = 2 if rho > 0.1 else 1
    rep = verify_tree(build_cube_tree(sp, rho, depth))
    assert rep["partition"] and rep["nesting"] and rep["ball_sandwich"] and rep["chain"]
