import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pegrl.switching import EndpointSet, SwitchRegion, dispatch, indicator, update_region


def eps(demo, fail=()):
    e = EndpointSet(demo=[np.asarray(p, dtype=np.float64) for p in demo])
    for f in fail:
        e.add_failure(f)
    return e


class TestUpdateRegion:
    def test_aabb_of_demo_points(self):
        region = update_region(eps([(0, 0, 0), (1, 1, 1)]), k=3.0)
        np.testing.assert_array_equal(region.lo, [0, 0, 0])
        np.testing.assert_array_equal(region.hi, [1, 1, 1])

    def test_empty_demo_rejected(self):
        with pytest.raises(ValueError):
            update_region(eps([]), k=3.0)

    def test_far_outlier_rejected(self):
        demo = [(0, 0), (1, 1), (0.5, 0.2), (0.2, 0.8), (0.9, 0.1)]
        base = update_region(eps(demo), k=3.0)
        # independent oracle: pooled median/MAD computed right here
        pooled = np.array(demo + [(1e6, 1e6)])
        med = np.median(pooled, axis=0)
        mad = np.median(np.abs(pooled - med), axis=0)
        assert np.any(np.abs(np.array([1e6, 1e6]) - med) > 3.0 * mad)
        injected = update_region(eps(demo, fail=[(1e6, 1e6)]), k=3.0)
        np.testing.assert_array_equal(injected.lo, base.lo)
        np.testing.assert_array_equal(injected.hi, base.hi)

    def test_boundary_failure_point_expands_region(self):
        demo = [(0.0, 0.0), (1.0, 1.0), (0.5, 0.5), (0.25, 0.75), (0.75, 0.25)]
        # compute the pooled MAD with a candidate point just inside the fence
        for probe in np.linspace(1.0, 3.0, 50):
            cand = (probe, 0.5)
            pooled = np.array(demo + [cand])
            med = np.median(pooled, axis=0)
            mad = np.median(np.abs(pooled - med), axis=0)
            inside = np.all(np.abs(np.array(cand) - med) <= 3.0 * mad)
            region = update_region(eps(demo, fail=[cand]), k=3.0)
            if inside:
                assert region.hi[0] == pytest.approx(probe)
            else:
                assert region.hi[0] == pytest.approx(1.0)

    def test_idempotent(self):
        e = eps([(0, 0), (2, 1)], fail=[(1.5, 0.5), (40, 40)])
        r1 = update_region(e, k=3.0)
        r2 = update_region(e, k=3.0)
        np.testing.assert_array_equal(r1.lo, r2.lo)
        np.testing.assert_array_equal(r1.hi, r2.hi)

    def test_monotone_growth_under_surviving_appends(self):
        # appends near the demo cluster keep the survivor set growing, so
        # the box must never shrink; survival tracked with an inline oracle
        e = eps([(0, 0), (1, 1), (0.4, 0.6), (0.6, 0.4)])
        rng = np.random.default_rng(0)
        region = update_region(e, k=3.0)

        def survivors():
            pooled = np.array([*e.demo, *e.fail])
            med = np.median(pooled, axis=0)
            mad = np.median(np.abs(pooled - med), axis=0)
            return {
                tuple(f) for f in e.fail if np.all(np.abs(f - med) <= 3.0 * mad)
            }

        prev_survivors = survivors()
        for _ in range(50):
            e.add_failure(rng.uniform(-0.5, 1.5, size=2))
            new = update_region(e, k=3.0)
            now_survivors = survivors()
            if now_survivors >= prev_survivors:
                assert np.all(new.lo <= region.lo) and np.all(new.hi >= region.hi)
            region, prev_survivors = new, now_survivors

    def test_demo_points_always_contained(self):
        e = eps([(0, 0), (1, 1), (0.5, 0.5)])
        rng = np.random.default_rng(1)
        for _ in range(30):
            e.add_failure(rng.uniform(-100, 100, size=2))
            region = update_region(e, k=3.0)
            assert all(region.contains(p) for p in e.demo)


class TestIndicator:
    def setup_method(self):
        self.region = SwitchRegion(lo=np.array([0.0, 0.0]), hi=np.array([1.0, 2.0]), mad_multiplier=3.0)

    def test_strictly_inside(self):
        assert indicator(self.region, (0.5, 1.0)) == 1

    def test_face_counts_as_inside(self):
        assert indicator(self.region, (1.0, 1.0)) == 1
        assert indicator(self.region, (0.0, 0.0)) == 1

    def test_outside_any_axis(self):
        assert indicator(self.region, (1.5, 1.0)) == 0
        assert indicator(self.region, (0.5, -0.1)) == 0


class TestDispatch:
    def setup_method(self):
        self.region = SwitchRegion(lo=np.array([0.0]), hi=np.array([1.0]), mad_multiplier=3.0)
        self.calls = []
        self.reach = lambda obs: self.calls.append("reach") or "reach_action"
        self.insert = lambda obs: self.calls.append("insert") or "insert_action"

    def test_outside_invokes_reach_only(self):
        action, stage = dispatch(self.region, (2.0,), self.reach, self.insert, obs=None)
        assert action == "reach_action" and stage == "reach"
        assert self.calls == ["reach"]

    def test_inside_invokes_insert_only(self):
        action, stage = dispatch(self.region, (0.5,), self.reach, self.insert, obs=None)
        assert action == "insert_action" and stage == "insert"
        assert self.calls == ["insert"]

    def test_crossing_trajectory_logs_one_switch_per_crossing(self):
        # scripted crossing: outside -> inside -> outside -> inside
        xs = [2.0, 1.8, 1.2, 0.9, 0.5, 0.2, 1.5, 1.9, 0.7, 0.4]
        stages = [dispatch(self.region, (x,), self.reach, self.insert, None)[1] for x in xs]
        switches = sum(1 for a, b in zip(stages, stages[1:]) if a != b)
        assert switches == 3
        expected = ["reach", "reach", "reach", "insert", "insert", "insert",
                    "reach", "reach", "insert", "insert"]
        assert stages == expected


@settings(max_examples=100, deadline=None)
@given(
    pts=st.lists(
        st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=1, max_size=20
    ),
    probe=st.tuples(st.floats(-60, 60), st.floats(-60, 60)),
)
def test_indicator_matches_box_arithmetic(pts, probe):
    region = update_region(eps(pts), k=3.0)
    p = np.asarray(probe)
    expected = int(np.all(p >= region.lo) and np.all(p <= region.hi))
    assert indicator(region, p) == expected
