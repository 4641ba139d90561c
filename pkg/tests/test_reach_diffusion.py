import numpy as np
import pytest

from pegrl.reach import (
    DemoEpisode,
    DiffusionSchedule,
    ReachDemoSet,
    ReachPolicy,
    ReachPolicyConfig,
    add_noise,
    execute_receding_horizon,
    init_policy,
    sample_chunk,
    train,
)
from pegrl.sim import default_config, reset


def constant_dataset(action, episodes=4, length=30, obs_dim=9, seed=0, constant_obs=False):
    rng = np.random.default_rng(seed)
    eps = []
    for _ in range(episodes):
        if constant_obs:
            obs = np.tile(np.linspace(0.0, 1.0, obs_dim), (length, 1))
        else:
            obs = rng.normal(size=(length, obs_dim))
        acts = np.tile(np.asarray(action, dtype=np.float64), (length, 1))
        eps.append(DemoEpisode(obs=obs, actions=acts, spawn_x=0.0, endpoint=np.zeros(2)))
    return ReachDemoSet(episodes=eps)


class TestSchedule:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            DiffusionSchedule(betas=np.array([0.5, 0.4]))  # not increasing
        with pytest.raises(ValueError):
            DiffusionSchedule(betas=np.array([0.0, 0.5]))  # not in (0,1)
        sched = DiffusionSchedule.linear(16)
        assert np.all(np.diff(sched.alpha_bar) < 0)

    def test_t_zero_is_identity(self):
        sched = DiffusionSchedule.linear(8)
        chunk = np.array([0.3, -0.7, 1.0])
        noisy = add_noise(sched, chunk, 0, np.ones(3) * 9.0)
        np.testing.assert_array_equal(noisy, chunk)

    def test_vanishing_signal_limit(self):
        sched = DiffusionSchedule(betas=np.linspace(0.5, 0.999, 20))
        resid = np.sqrt(sched.abar(20))
        chunk = np.full(4, 2.0)
        noise = np.array([1.0, -1.0, 0.5, 0.0])
        noisy = add_noise(sched, chunk, 20, noise)
        np.testing.assert_allclose(noisy, noise, atol=2.5 * resid + 1e-12)

    def test_out_of_range_step_rejected(self):
        sched = DiffusionSchedule.linear(8)
        with pytest.raises(ValueError):
            add_noise(sched, np.zeros(2), 9, np.zeros(2))

    def test_noisy_variance_matches_formula(self):
        # Monte-Carlo: Var(noisy) = abar * Var(chunk) + (1 - abar)
        sched = DiffusionSchedule.linear(16)
        rng = np.random.default_rng(1)
        chunk_std = 0.7
        t = 9
        ab = sched.abar(t)
        chunks = rng.normal(0, chunk_std, size=200_000)
        noise = rng.standard_normal(200_000)
        noisy = add_noise(sched, chunks, t, noise)
        expected = ab * chunk_std**2 + (1 - ab)
        assert abs(np.var(noisy) - expected) / expected < 0.02


class TestTrain:
    def test_constant_dataset_reproduced(self):
        action = np.array([0.5, -0.3, 0.01, 1.0])
        ds = constant_dataset(action, constant_obs=True)
        cfg = ReachPolicyConfig(horizon=4, hidden=(128, 128), lr=2e-3, num_steps=8)
        policy = train(ds, epochs=2500, batch=32, seed=0, config=cfg)
        for s in range(5):
            hist = np.stack([ds.episodes[0].obs[3], ds.episodes[0].obs[4]])
            chunk = sample_chunk(policy, hist, seed=s)
            assert np.max(np.abs(chunk - action)) < 0.05

    def test_zero_epochs_is_initialization(self):
        ds = constant_dataset([0.1, 0.1, 0.0, 0.0])
        cfg = ReachPolicyConfig(horizon=4, hidden=(32,))
        policy = train(ds, epochs=0, batch=16, seed=3, config=cfg)
        fresh = init_policy(ds.obs_dim, cfg, seed=3)
        np.testing.assert_array_equal(policy.eps_net.flat(), fresh.eps_net.flat())

    def test_loss_decreases_over_training(self):
        ds = constant_dataset([0.5, -0.3, 0.01, 1.0], episodes=2, length=20)
        cfg = ReachPolicyConfig(horizon=4, hidden=(64, 64))
        policy = train(ds, epochs=200, batch=32, seed=1, config=cfg)
        assert policy.train_losses[-1] < policy.train_losses[0]

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train(ReachDemoSet(), epochs=1, batch=8)


class TestSampling:
    def _one_point_policy(self, num_steps):
        cfg = ReachPolicyConfig(horizon=2, num_steps=num_steps, hidden=(8,))
        policy = init_policy(obs_dim=3, config=cfg, seed=0)
        target_n = np.array([0.25, -0.5, 0.75, 0.1, 0.0, -0.9, 0.3, 1.0])[: policy.chunk_dim]

        def perfect_eps(cond_n, t, x):
            ab = policy.schedule.abar(int(t[0]))
            return (x - np.sqrt(ab) * target_n) / np.sqrt(1.0 - ab)

        return policy, target_n, perfect_eps

    def test_single_step_reconstruction_identity(self):
        policy, target_n, perfect_eps = self._one_point_policy(num_steps=1)
        hist = np.zeros((2, 3))
        chunk = sample_chunk(policy, hist, seed=5, eps_fn=perfect_eps)
        recovered = policy.norm_actions(chunk)
        np.testing.assert_allclose(recovered.ravel(), target_n, atol=1e-10)

    def test_multi_step_deterministic_reconstruction(self):
        policy, target_n, perfect_eps = self._one_point_policy(num_steps=16)
        hist = np.zeros((2, 3))
        chunk = sample_chunk(policy, hist, seed=5, eps_fn=perfect_eps, deterministic=True)
        recovered = policy.norm_actions(chunk)
        np.testing.assert_allclose(recovered.ravel(), target_n, atol=1e-10)

    def test_same_seed_same_chunk(self):
        policy = init_policy(obs_dim=9, seed=2)
        hist = np.random.default_rng(0).normal(size=(2, 9))
        c1 = sample_chunk(policy, hist, seed=11)
        c2 = sample_chunk(policy, hist, seed=11)
        np.testing.assert_array_equal(c1, c2)

    def test_chunk_respects_bounds(self):
        policy = init_policy(obs_dim=9, seed=2)
        rng = np.random.default_rng(0)
        for s in range(10):
            chunk = sample_chunk(policy, rng.normal(size=(2, 9)), seed=s)
            bounds = np.array(policy.config.action_bounds)
            assert np.all(np.abs(chunk[:, :3]) <= bounds[:3] + 1e-12)
            assert np.all((chunk[:, 3] >= 0.0) & (chunk[:, 3] <= 1.0))


class TestExecutor:
    def test_open_loop_replans_every_horizon(self):
        cfg = ReachPolicyConfig(horizon=4)
        policy = init_policy(obs_dim=9, config=cfg, seed=0)
        state = reset(default_config("square", 0.25), seed=0)
        calls = []

        def fake_sampler(policy_, hist, seed):
            calls.append(seed)
            return np.tile([0.5, 0.0, 0.0, 0.0], (cfg.horizon, 1))

        state, trace = execute_receding_horizon(
            policy, state, replan_every=cfg.horizon, seed=1, max_steps=20,
            sample_fn=fake_sampler,
        )
        assert trace.timeout
        assert len(calls) == 5  # 20 steps / 4 per chunk

    def test_zero_motion_policy_times_out(self):
        policy = init_policy(obs_dim=9, seed=0)
        state = reset(default_config("square", 0.25), seed=0)

        def zero_sampler(policy_, hist, seed):
            return np.zeros((policy.config.horizon, 4))

        start = state.gripper_pose.copy()
        state, trace = execute_receding_horizon(
            policy, state, replan_every=4, seed=1, max_steps=30, sample_fn=zero_sampler
        )
        assert trace.timeout and not trace.reached
        np.testing.assert_array_equal(state.gripper_pose, start)

    def test_invalid_replan_interval(self):
        policy = init_policy(obs_dim=9, seed=0)
        state = reset(default_config("square", 0.25), seed=0)
        with pytest.raises(ValueError):
            execute_receding_horizon(policy, state, replan_every=99, seed=0)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        ds = constant_dataset([0.1, 0.2, 0.0, 1.0], episodes=3, length=12)
        p = tmp_path / "demos.jsonl"
        ds.save(p)
        loaded = ReachDemoSet.load(p)
        assert len(loaded) == 3
        np.testing.assert_array_equal(loaded.episodes[0].obs, ds.episodes[0].obs)
        np.testing.assert_array_equal(loaded.episodes[2].actions, ds.episodes[2].actions)

    def test_windows_padding(self):
        obs = np.arange(12, dtype=np.float64).reshape(4, 3)
        acts = np.arange(8, dtype=np.float64).reshape(4, 2)
        ds = ReachDemoSet(
            episodes=[DemoEpisode(obs=obs, actions=acts, spawn_x=0.0, endpoint=np.zeros(2))]
        )
        conds, chunks = ds.windows(horizon=3, obs_history=2)
        assert conds.shape == (4, 6) and chunks.shape == (4, 6)
        # first window: history front-padded by repeating frame 0
        np.testing.assert_array_equal(conds[0], np.concatenate([obs[0], obs[0]]))
        # last window: chunk edge-padded by repeating the final action
        np.testing.assert_array_equal(chunks[-1], np.concatenate([acts[3], acts[3], acts[3]]))

    def test_policy_checkpoint_round_trip(self, tmp_path):
        ds = constant_dataset([0.5, -0.3, 0.01, 1.0], episodes=2, length=10)
        cfg = ReachPolicyConfig(horizon=4, hidden=(32,))
        policy = train(ds, epochs=5, batch=16, seed=0, config=cfg)
        p = tmp_path / "reach.ckpt"
        policy.save(p)
        loaded = ReachPolicy.load(p)
        hist = np.stack([ds.episodes[0].obs[1], ds.episodes[0].obs[2]])
        np.testing.assert_array_equal(
            sample_chunk(policy, hist, seed=3), sample_chunk(loaded, hist, seed=3)
        )
