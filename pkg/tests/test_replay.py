import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pegrl.replay import (
    BufferError,
    DualBuffer,
    GroupConfig,
    GroupKey,
    Transition,
    WindowError,
    build_group_config,
    delta_tactile,
    estimate_baseline,
    label_mc_returns,
)
from pegrl.sim import ContactWrench, step

from conftest import make_hover_state


def wrench_stream(arrays):
    return [ContactWrench.from_array(a) for a in arrays]


def make_transition(group=(0, 0), reward=0.0, done=0.0, intervened=False, tag=0.0):
    return Transition(
        actor_obs=np.array([tag, 0.0]),
        tactile_delta=np.zeros(3),
        action=np.zeros(3),
        reward=reward,
        done=done,
        next_actor_obs=np.array([tag, 1.0]),
        next_tactile_delta=np.zeros(3),
        group_key=GroupKey(tuple(group)),
        intervened=intervened,
    )


def simple_buffer(bins=(2, 2)):
    cfg = GroupConfig(
        axes=("fx", "my"),
        bins=bins,
        edges=[np.linspace(-1, 1, b + 1) for b in bins],
    )
    return DualBuffer(group_config=cfg)


class TestBaseline:
    def test_constant_stream(self):
        stream = wrench_stream([[1.0, -2.0, 3.0]] * 10)
        fb = estimate_baseline(stream, start_index=2, window=5)
        np.testing.assert_array_equal(fb.as_array(), [1.0, -2.0, 3.0])

    def test_window_of_one(self):
        stream = wrench_stream([[i, 0, 0] for i in range(5)])
        fb = estimate_baseline(stream, start_index=3, window=1)
        assert fb.wrench.fx == 3.0

    def test_noise_averages_down_clt(self):
        # Monte-Carlo check of the 3 sigma / sqrt(K) bound
        rng = np.random.default_rng(0)
        v = np.array([2.0, -1.0, 0.5])
        noise_std, K = 0.8, 50
        misses = 0
        for _ in range(200):
            stream = wrench_stream(v + rng.normal(0, noise_std, size=(K, 3)))
            fb = estimate_baseline(stream, 0, K)
            err = np.abs(fb.as_array() - v)
            misses += int(np.any(err > 3 * noise_std / np.sqrt(K)))
        assert misses / 200 < 0.05  # ~0.27% per component in theory

    def test_window_exceeding_stream_rejected(self):
        stream = wrench_stream([[0, 0, 0]] * 4)
        with pytest.raises(WindowError):
            estimate_baseline(stream, start_index=2, window=5)

    def test_delta_zero_when_equal(self):
        fb = estimate_baseline(wrench_stream([[1, 2, 3]]), 0, 1)
        d = delta_tactile(ContactWrench(1, 2, 3), fb)
        assert d.as_array().tolist() == [0.0, 0.0, 0.0]

    def test_delta_linearity(self):
        fb = estimate_baseline(wrench_stream([[0.5, -0.5, 1.0]]), 0, 1)
        f = ContactWrench(1.0, 2.0, 3.0)
        g = ContactWrench(0.1, -0.2, 0.3)
        lhs = delta_tactile(f + g, fb).as_array()
        rhs = delta_tactile(f, fb).as_array() + g.as_array()
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_injected_contact_invariant_across_baselines(self):
        # sim-backed oracle: record two still (contact-free) grasps with
        # different in-hand offsets, inject the same synthetic contact wrench
        # on top of each; deltas must match the injection exactly
        def still_baseline(offset):
            state = make_hover_state(
                clearance=0.25, hover_height=2.0, offset=offset, tactile_noise_std=0.0
            )
            stream = []
            for _ in range(10):
                state, res = step(state, (0.0, 0.0, 0.0))
                stream.append(res.raw_tactile)
            return estimate_baseline(stream, 0, 10), stream[-1]

        fb_a, still_a = still_baseline((0.8, 0.015))
        fb_b, still_b = still_baseline((-0.6, -0.01))
        assert np.abs(fb_a.as_array() - fb_b.as_array()).max() > 1.0
        rng = np.random.default_rng(0)
        for _ in range(20):
            injected = ContactWrench.from_array(rng.uniform(-30, 30, size=3))
            da = delta_tactile(still_a + injected, fb_a).as_array()
            db = delta_tactile(still_b + injected, fb_b).as_array()
            np.testing.assert_allclose(da, db, atol=1e-9)
            np.testing.assert_allclose(da, injected.as_array(), atol=1e-9)

    def test_matched_contact_episodes_give_matched_deltas(self):
        # tilt-only in-hand offsets keep the sensor at the same lever arms:
        # the same commanded trajectory produces the same contact sequence,
        # and baseline subtraction removes the differing hand load
        def run(offset):
            state = make_hover_state(
                clearance=0.25, hover_height=2.0, offset=offset, tactile_noise_std=0.0
            )
            stream = []
            for _ in range(10):
                state, res = step(state, (0.0, 0.0, 0.0))
                stream.append(res.raw_tactile)
            fb = estimate_baseline(stream, 0, 10)
            deltas, raws = [], []
            for k in range(25):
                action = (0.2, -0.6, 0.0) if k % 3 else (-0.3, -0.6, 0.0)
                state, res = step(state, action)
                raws.append(res.raw_tactile.as_array())
                deltas.append(delta_tactile(res.raw_tactile, fb).as_array())
            return np.array(raws), np.array(deltas)

        raw_a, delta_a = run((0.0, 0.015))
        raw_b, delta_b = run((0.0, -0.01))
        assert np.abs(raw_a - raw_b).max() > 1.0  # baselines genuinely differ
        np.testing.assert_allclose(delta_a, delta_b, atol=1e-9)


class TestGrouping:
    def test_edge_value_goes_to_upper_bin(self):
        cfg = GroupConfig(
            axes=("fx", "my"),
            bins=(2, 4),
            edges=[np.array([-1.0, 0.0, 1.0]), np.array([0.0, 1.0, 2.0, 3.0, 4.0])],
        )
        key = cfg.group_of(ContactWrench(fx=0.0, fz=0.0, my=2.0))
        assert key == GroupKey((1, 2))

    def test_minimum_maps_to_zero_key(self):
        cfg = build_group_config(
            [ContactWrench(-1, 0, -2), ContactWrench(1, 0, 2)], bins=(2, 4)
        )
        assert cfg.group_of(ContactWrench(-1, 0, -2)) == GroupKey((0, 0))

    def test_out_of_range_clamps(self):
        cfg = build_group_config(
            [ContactWrench(-1, 0, -2), ContactWrench(1, 0, 2)], bins=(2, 4)
        )
        assert cfg.group_of(ContactWrench(-99, 0, -99)) == GroupKey((0, 0))
        assert cfg.group_of(ContactWrench(99, 0, 99)) == GroupKey((1, 3))

    def test_brute_force_scan_agrees_with_searchsorted(self):
        rng = np.random.default_rng(42)
        cfg = build_group_config(
            [ContactWrench(-3, 0, -7), ContactWrench(5, 0, 11)], bins=(2, 4)
        )

        def brute(value, edges):
            inner = edges[1:-1]
            k = 0
            for e in inner:
                if value >= e:  # exact edge belongs upward
                    k += 1
            return k

        for _ in range(1000):
            w = ContactWrench(rng.uniform(-5, 7), 0.0, rng.uniform(-9, 13))
            expected = GroupKey(
                (brute(w.fx, cfg.edges[0]), brute(w.my, cfg.edges[1]))
            )
            assert cfg.group_of(w) == expected

    @settings(max_examples=200, deadline=None)
    @given(
        fx=st.floats(allow_nan=False, allow_infinity=False, width=64),
        my=st.floats(allow_nan=False, allow_infinity=False, width=64),
    )
    def test_every_finite_baseline_maps_to_exactly_one_key(self, fx, my):
        cfg = build_group_config(
            [ContactWrench(-1, 0, -2), ContactWrench(1, 0, 2)], bins=(2, 4)
        )
        key = cfg.group_of(ContactWrench(fx, 0.0, my))
        assert 0 <= key.indices[0] < 2
        assert 0 <= key.indices[1] < 4

    def test_group_config_round_trip(self):
        cfg = build_group_config(
            [ContactWrench(-1, 0, -2), ContactWrench(1, 0, 2)], bins=(2, 4)
        )
        clone = GroupConfig.from_dict(cfg.to_dict())
        assert clone.axes == cfg.axes
        for a, b in zip(clone.edges, cfg.edges):
            np.testing.assert_array_equal(a, b)


class TestBufferInsert:
    def test_intervened_lands_in_both(self):
        buf = simple_buffer()
        t = make_transition(intervened=True)
        buf.insert(t, into="online")
        assert len(buf.online) == 1 and len(buf.demo) == 1

    def test_regular_online_only(self):
        buf = simple_buffer()
        buf.insert(make_transition(), into="online")
        assert len(buf.online) == 1 and len(buf.demo) == 0

    def test_fifo_eviction_spares_demo(self):
        buf = simple_buffer()
        buf.online_capacity = buf.online.capacity = 3
        buf.insert(make_transition(tag=0.0, intervened=True), into="online")
        for i in range(1, 5):
            buf.insert(make_transition(tag=float(i)), into="online")
        assert len(buf.online) == 3
        tags = [t.actor_obs[0] for t in buf.online.items]
        assert tags == [2.0, 3.0, 4.0]  # oldest evicted
        assert len(buf.demo) == 1  # demo untouched by eviction

    def test_conservation_under_random_ops(self):
        buf = simple_buffer()
        buf.online_capacity = buf.online.capacity = 50
        rng = np.random.default_rng(3)
        for i in range(500):
            g = (int(rng.integers(2)), int(rng.integers(2)))
            buf.insert(make_transition(group=g, tag=float(i)), into="online")
            c = buf.counts()
            assert c["online"] == c["online_inserted"] - c["online_evicted"]
            in_groups = sum(len(v) for v in buf.online.groups.values())
            assert in_groups == c["online"]

    def test_reward_one_requires_done(self):
        with pytest.raises(ValueError):
            make_transition(reward=1.0, done=0.0)


class TestSampling:
    def test_single_pair_round_robin(self):
        buf = simple_buffer()
        buf.insert(make_transition(tag=1.0), into="demo")
        buf.insert(make_transition(tag=2.0), into="online")
        batch = buf.sample_batch(4, seed=0, group_uniform=False)
        assert [t.actor_obs[0] for t in batch] == [1.0, 1.0, 2.0, 2.0]

    def test_half_and_half_split_exact(self):
        buf = simple_buffer()
        for i in range(10):
            buf.insert(make_transition(tag=float(i)), into="demo")
            buf.insert(make_transition(tag=100.0 + i), into="online")
        batch = buf.sample_batch(64, seed=1, group_uniform=False)
        demo_count = sum(1 for t in batch if t.actor_obs[0] < 100)
        assert demo_count == 32 and len(batch) == 64
        batch = buf.sample_batch(7, seed=1, group_uniform=False)
        demo_count = sum(1 for t in batch if t.actor_obs[0] < 100)
        assert demo_count == 4 and len(batch) == 7

    def test_group_uniform_chi_square_on_skewed_population(self):
        # 1000:10:10:10 population; draws must be uniform over groups
        buf = simple_buffer(bins=(2, 2))
        groups = [(0, 0), (0, 1), (1, 0), (1, 1)]
        for n, g in zip((1000, 10, 10, 10), groups):
            for i in range(n):
                buf.insert(make_transition(group=g, tag=float(g[0] * 2 + g[1])), into="demo")
                buf.insert(make_transition(group=g, tag=float(g[0] * 2 + g[1])), into="online")
        counts = {g: 0 for g in groups}
        draws = 10_000
        batch = buf.sample_batch(draws, seed=7, group_uniform=True)
        for t in batch:
            counts[t.group_key.indices] += 1
        observed = np.array([counts[g] for g in groups])
        p = stats.chisquare(observed).pvalue
        assert p > 0.01, f"group draw counts {observed.tolist()} not uniform"

    def test_uniform_sampling_follows_population(self):
        buf = simple_buffer(bins=(2, 2))
        for n, g in zip((900, 100), [(0, 0), (1, 1)]):
            for _ in range(n):
                buf.insert(make_transition(group=g), into="demo")
                buf.insert(make_transition(group=g), into="online")
        batch = buf.sample_batch(2000, seed=3, group_uniform=False)
        frac_major = sum(1 for t in batch if t.group_key == GroupKey((0, 0))) / len(batch)
        assert 0.85 < frac_major < 0.95

    def test_empty_group_never_selected(self):
        rng = np.random.default_rng(11)
        for trial in range(30):
            buf = simple_buffer(bins=(2, 2))
            present = set()
            for _ in range(int(rng.integers(1, 20))):
                g = (int(rng.integers(2)), int(rng.integers(2)))
                present.add(g)
                buf.insert(make_transition(group=g), into="demo")
                buf.insert(make_transition(group=g), into="online")
            batch = buf.sample_batch(32, seed=trial, group_uniform=True)
            assert all(t.group_key.indices in present for t in batch)

    def test_empty_buffer_raises(self):
        buf = simple_buffer()
        buf.insert(make_transition(), into="demo")
        with pytest.raises(BufferError):
            buf.sample_batch(4, seed=0, group_uniform=False)


class TestMcReturns:
    def test_terminal_success(self):
        ep = [make_transition() for _ in range(5)]
        ep[-1] = make_transition(reward=1.0, done=1.0)
        label_mc_returns(ep, gamma=0.99)
        assert ep[-1].mc_return == 1.0

    def test_ten_steps_before_success(self):
        ep = [make_transition() for _ in range(11)]
        ep[-1] = make_transition(reward=1.0, done=1.0)
        label_mc_returns(ep, gamma=0.99)
        assert ep[0].mc_return == pytest.approx(0.99**10, abs=1e-12)

    def test_failure_episode_all_zero(self):
        ep = [make_transition() for _ in range(8)]
        label_mc_returns(ep, gamma=0.99)
        assert all(t.mc_return == 0.0 for t in ep)

    def test_interior_truncation_resets_accumulation(self):
        # segment 1 truncated with zero reward (e.g. operator takeover cut),
        # segment 2 ends in success: returns must not leak across the cut
        ep = [make_transition(), make_transition(done=1.0), make_transition(),
              make_transition(reward=1.0, done=1.0)]
        label_mc_returns(ep, gamma=0.9)
        assert ep[0].mc_return == 0.0 and ep[1].mc_return == 0.0
        assert ep[3].mc_return == 1.0 and ep[2].mc_return == pytest.approx(0.9)


class TestPersistence:
    def test_reload_reproduces_sampling(self, tmp_path):
        buf = simple_buffer()
        rng = np.random.default_rng(5)
        for i in range(200):
            g = (int(rng.integers(2)), int(rng.integers(2)))
            into = "demo" if i % 3 == 0 else "online"
            buf.insert(make_transition(group=g, tag=float(i)), into=into)
        p = tmp_path / "buffer.jsonl"
        buf.save(p)
        clone = DualBuffer.load(p)
        for seed in range(5):
            b1 = buf.sample_batch(16, seed=seed, group_uniform=True)
            b2 = clone.sample_batch(16, seed=seed, group_uniform=True)
            assert [t.actor_obs[0] for t in b1] == [t.actor_obs[0] for t in b2]
