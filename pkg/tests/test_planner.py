import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradexplore.boundariness import BoundarinessMap
from gradexplore.collision import traversable_mask
from gradexplore.geometry import Path, ViewPoint
from gradexplore.gridmap import L_MAX, L_MIN, LogOddsMap
from gradexplore.infogain import fov_mask
from gradexplore.planner import (
    GoalScoreParams, NoGoalError, PlanningError, RrtParams, densify, occupied_count, plan_rrt,
    sample_free_poses, score_goal_candidate, select_goal, shortcut, visible_mask,
)
from gradexplore.world import SensorSpec

RES = 0.3
SPEC = SensorSpec()


def open_odds(m=34, n=34, res=RES):
    vals = np.full((m, n), L_MIN)
    vals[0, :] = vals[-1, :] = vals[:, 0] = vals[:, -1] = L_MAX
    return LogOddsMap(m, n, res, values=vals)


def samples_free(odds, poses, step=0.02):
    res = odds.resolution
    for p, q in zip(poses[:-1], poses[1:]):
        L = math.hypot(*(q[:2] - p[:2]))
        for t in np.linspace(0, 1, max(int(L / step), 2)):
            x, y = p[:2] + t * (q[:2] - p[:2])
            if odds.values[int(x // res), int(y // res)] >= 0:
                return False
    return True


def test_zero_boundariness_scores_zero():
    odds = open_odds()
    assert score_goal_candidate((3, 3, 0), BoundarinessMap(np.zeros(odds.shape)), odds, (1, 1, 0), SPEC) == 0.0


def test_nearer_candidate_scores_higher():
    odds = open_odds()
    bd = BoundarinessMap(np.random.default_rng(0).random(odds.shape))
    xi = (5.0, 5.0, 0.3)
    near = score_goal_candidate(xi, bd, odds, (4.0, 5.0, 0.0), SPEC)
    far = score_goal_candidate(xi, bd, odds, (1.0, 1.0, 0.0), SPEC)
    assert near > far > 0


def test_wall_factor():
    params = GoalScoreParams(occlusion=False)
    bd = BoundarinessMap(np.ones((40, 40)))
    clear = open_odds(40, 40)
    walled = clear.copy()
    walled.values[20:22, 10:14] = L_MAX  # behind the candidate, inside its clutter box
    xi, start = (6.45, 3.6, math.pi), (6.45, 3.6, 0.0)
    n_occ = occupied_count(walled, xi[0], xi[1], params.box_half_width)
    assert n_occ == 8
    a = score_goal_candidate(xi, bd, clear, start, SPEC, params)
    b = score_goal_candidate(xi, bd, walled, start, SPEC, params)
    assert b == pytest.approx(a * math.exp(-params.lambda_obstacles * n_occ), rel=1e-12)


def test_occlusion_footprint_stops_at_walls():
    odds = open_odds(40, 40)
    odds.values[15, :] = L_MAX
    xi = (3.0, 6.0, 0.0)
    vis = visible_mask(xi, odds, SPEC)
    assert vis[15].any()            # the wall itself is seen
    assert not vis[16:].any()       # nothing behind it
    assert fov_mask(xi, SPEC, RES, odds.shape)[16:].any()


def test_single_sample_is_returned():
    odds = open_odds()
    bd = BoundarinessMap(np.zeros(odds.shape))
    g1, _ = select_goal(bd, odds, (1, 1, 0), SPEC, GoalScoreParams(samples=1), np.random.default_rng(4))
    first = np.random.default_rng(4)
    free = np.argwhere(odds.values < 0)
    pick = free[first.integers(0, len(free), size=1)][0]
    off = first.random((1, 2))[0]
    assert g1[0] == pytest.approx((pick[0] + off[0]) * RES)
    assert g1[1] == pytest.approx((pick[1] + off[1]) * RES)


def test_all_zero_scores_return_first_sample():
    odds = open_odds()
    bd = BoundarinessMap(np.zeros(odds.shape))
    a, s = select_goal(bd, odds, (1, 1, 0), SPEC, GoalScoreParams(samples=20), np.random.default_rng(9))
    first = sample_free_poses(odds, 20, np.random.default_rng(9))[0]
    assert s == 0.0 and a == ViewPoint(*first)


def test_near_candidates_rank_below_far_ones():
    odds = open_odds()
    bd = BoundarinessMap(np.zeros(odds.shape))
    bd.values[2:5, 2:5] = 1.0  # only the cells right next to the start are worth seeing
    start = (1.0, 1.0, 0.0)
    params = GoalScoreParams(samples=100, min_distance=2.0)
    cands = sample_free_poses(odds, 100, np.random.default_rng(3))
    g, s = select_goal(bd, odds, start, SPEC, params, np.random.default_rng(3))
    far = [c for c in cands if math.hypot(c[0] - 1.0, c[1] - 1.0) >= 2.0]
    assert math.hypot(g.x - 1.0, g.y - 1.0) >= 2.0
    assert s == max(score_goal_candidate(c, bd, odds, start, SPEC, params) for c in far)
    # with every candidate near, the best near one still wins
    g, _ = select_goal(bd, odds, start, SPEC, GoalScoreParams(samples=100, min_distance=50.0),
                       np.random.default_rng(3))
    assert g == select_goal(bd, odds, start, SPEC, GoalScoreParams(samples=100, min_distance=0.0),
                            np.random.default_rng(3))[0]


def test_no_free_cell():
    odds = LogOddsMap(5, 5, RES)
    with pytest.raises(NoGoalError):
        select_goal(BoundarinessMap(np.zeros((5, 5))), odds, (1, 1, 0), SPEC, GoalScoreParams(),
                    np.random.default_rng(0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 100))
def test_goal_invariant_to_boundariness_scale(seed, scale):
    rng = np.random.default_rng(seed)
    odds = open_odds(20, 20)
    odds.values[rng.integers(1, 19, 15), rng.integers(1, 19, 15)] = 0.0
    vals = rng.random(odds.shape)
    params = GoalScoreParams(samples=30)
    a, _ = select_goal(BoundarinessMap(vals), odds, (1, 1, 0), SPEC, params, np.random.default_rng(seed))
    b, _ = select_goal(BoundarinessMap(vals * scale), odds, (1, 1, 0), SPEC, params, np.random.default_rng(seed))
    assert a == b


def test_select_goal_deterministic():
    odds = open_odds()
    bd = BoundarinessMap(np.random.default_rng(1).random(odds.shape))
    runs = [select_goal(bd, odds, (1, 1, 0), SPEC, GoalScoreParams(samples=50), np.random.default_rng(3))
            for _ in range(2)]
    assert runs[0] == runs[1]


def test_rrt_degenerate_query():
    odds = open_odds()
    p = plan_rrt((2.0, 2.0, 0.4), (2.0, 2.0, 1.0), odds, RrtParams(), np.random.default_rng(0))
    assert len(p) == 1 and p.start == ViewPoint(2.0, 2.0, 0.4)


@pytest.mark.parametrize("seed", range(5))
def test_rrt_open_room_near_straight(seed):
    res = 10 / 36
    odds = open_odds(38, 38, res)
    start, goal = (0.6, 0.6, 0.0), (9.9, 9.9, 2.0)
    p = plan_rrt(start, goal, odds, RrtParams(), np.random.default_rng(seed))
    assert p.length() <= 1.2 * math.hypot(9.3, 9.3)
    assert samples_free(odds, p.poses)
    assert p.poses[-1, 2] == 2.0 and p.poses[0, 2] == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rrt_around_walls_is_free_and_wrap_continuous(seed):
    rng = np.random.default_rng(seed)
    odds = open_odds(30, 30)
    odds.values[10, 1:22] = L_MAX
    odds.values[20, 8:29] = L_MAX
    odds.values[rng.integers(1, 29, 20), rng.integers(1, 29, 20)] = 0.0
    free = np.argwhere(odds.values < 0)
    a, b = free[rng.choice(len(free), 2, replace=False)]
    start = ((a[0] + 0.5) * RES, (a[1] + 0.5) * RES, rng.uniform(-3, 3))
    goal = ((b[0] + 0.5) * RES, (b[1] + 0.5) * RES, rng.uniform(-3, 3))
    try:
        p = plan_rrt(start, goal, odds, RrtParams(max_iterations=1500), rng)
    except PlanningError:
        return
    assert samples_free(odds, p.poses)
    assert np.all(np.abs(np.diff(p.poses[:, 2])) <= math.pi + 1e-12)
    assert np.array_equal(p.poses[0, :2], start[:2]) and np.array_equal(p.poses[-1, :2], goal[:2])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_shortcut_never_lengthens_or_collides(seed):
    rng = np.random.default_rng(seed)
    odds = open_odds(20, 20)
    odds.values[8:12, 3:17] = L_MAX
    mask = traversable_mask(odds)
    # zig-zag around the block
    pts = np.array([[0.5, 0.5], [2.0, 0.6], [3.9, 0.7], [4.5, 2.0], [4.4, 4.0], [4.5, 5.4], [2.0, 5.5], [0.6, 5.6]])
    pts = pts + rng.uniform(-0.05, 0.05, pts.shape)
    pts[0], pts[-1] = (0.5, 0.5), (0.6, 5.6)
    before = Path(np.column_stack([pts, np.zeros(len(pts))]))
    assert samples_free(odds, before.poses)
    out = shortcut(pts, mask, RES, 50, rng)
    after = Path(np.column_stack([out, np.zeros(len(out))]))
    assert after.length() <= before.length() + 1e-12
    assert samples_free(odds, after.poses)


def test_rrt_errors():
    odds = open_odds()
    odds.values[5, 5] = 0.0
    with pytest.raises(PlanningError):
        plan_rrt((5.5 * RES, 5.5 * RES, 0), (2, 2, 0), odds, RrtParams(), np.random.default_rng(0))
    walled = open_odds()
    walled.values[15, :] = L_MAX
    with pytest.raises(PlanningError):
        plan_rrt((1, 1, 0), (8, 8, 0), walled, RrtParams(max_iterations=200), np.random.default_rng(0))


def test_densify_spacing_and_endpoints():
    p = Path([[0, 0, 0.3], [1.9, 0, 0.0], [1.9, 0.1, 1.0]])
    d = densify(p, 0.6)
    seg = np.hypot(*np.diff(d.poses[:, :2], axis=0).T)
    assert np.all(seg <= 0.6 + 1e-12)
    assert np.array_equal(d.poses[0], p.poses[0]) and np.array_equal(d.poses[-1], p.poses[-1])
    assert len(d) == 1 + 4 + 1


@pytest.mark.parametrize("kw", [dict(lambda_distance=1.0), dict(lambda_obstacles=0.0), dict(samples=0),
                                dict(min_distance=-0.1)])
def test_goal_param_invariants(kw):
    with pytest.raises(ValueError):
        GoalScoreParams(**kw)


@pytest.mark.parametrize("kw", [dict(steer_step=0.0), dict(goal_bias=1.5)])
def test_rrt_param_invariants(kw):
    with pytest.raises(ValueError):
        RrtParams(**kw)
