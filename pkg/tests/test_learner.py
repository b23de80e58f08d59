import numpy as np
import pytest

from conftest import state_observation
from widthplan import learner as learner_mod
from widthplan.errors import EmptyDataset, NonFiniteLoss
from widthplan.learner import (
    FitConfig,
    ParameterSet,
    ScheduleState,
    TrainingBatch,
    build_policy_batch,
    build_value_batch,
    fit_policy,
    fit_value,
    gradient_of,
    schedule_decision,
    update_network_parameters,
)
from widthplan.mdp import CriticalPath, TransitionRecord
from widthplan.nets import HEAD_LINEAR, HEAD_SOFTMAX, MLPApproximator, NetworkShape, init_params


def make_path(actions, rewards, terminal_last=True, width=2, palette=4):
    steps = []
    for i, (a, r) in enumerate(zip(actions, rewards)):
        steps.append(
            TransitionRecord(
                obs=state_observation(i, width, palette),
                action=a,
                reward=r,
                next_obs=state_observation(i + 1, width, palette),
                terminal=terminal_last and i == len(actions) - 1,
            )
        )
    return CriticalPath(tuple(steps))


def small_net(head, rng=None, input_dim=8, actions=4):
    shape = NetworkShape(input_dim, actions, (6, 5), head)
    gen = rng if rng is not None else np.random.default_rng(0)
    return MLPApproximator(shape, init_params(shape, gen))


class TestPolicyBatch:
    def test_one_row_per_transition(self):
        batch = build_policy_batch([make_path([0, 1, 2], [0, 0, 1])], n_actions=4)
        assert len(batch) == 3

    def test_one_hot_encoding(self):
        batch = build_policy_batch([make_path([2], [0.0])], n_actions=4)
        assert batch.targets.tolist() == [[0.0, 0.0, 1.0, 0.0]]

    def test_rows_cover_executed_actions_exactly(self, rng):
        actions = [int(a) for a in rng.integers(0, 4, size=9)]
        path = make_path(actions, [0.0] * 9)
        batch = build_policy_batch([path], n_actions=4)
        assert [int(np.argmax(row)) for row in batch.targets] == actions
        assert batch.observations == [t.obs for t in path]

    def test_empty_dataset_raises(self):
        with pytest.raises(EmptyDataset):
            build_policy_batch([], n_actions=4)
        with pytest.raises(EmptyDataset):
            build_policy_batch([CriticalPath(())], n_actions=4)


class TestValueBatch:
    def test_terminal_target_is_reward(self):
        value_net = small_net(HEAD_LINEAR)
        batch = build_value_batch([make_path([0], [5.0])], value_net, gamma=0.99)
        assert batch.targets.tolist() == [5.0]

    def test_td_arithmetic(self):
        class ConstantValue:
            def predict_value_batch(self, observations):
                return np.full(len(observations), 2.0)

        path = make_path([0], [1.0], terminal_last=False)
        batch = build_value_batch([path], ConstantValue(), gamma=0.99)
        assert batch.targets.tolist() == [pytest.approx(2.98)]

    def test_constant_reward_chain_zero_bootstrap(self):
        class ZeroValue:
            def predict_value_batch(self, observations):
                return np.zeros(len(observations))

        path = make_path([0] * 5, [1.0] * 5, terminal_last=True)
        batch = build_value_batch([path], ZeroValue(), gamma=0.99)
        assert batch.targets.tolist() == [1.0] * 5

    def test_gamma_validated(self):
        with pytest.raises(ValueError):
            build_value_batch([make_path([0], [1.0])], small_net(HEAD_LINEAR), gamma=0.0)

    def test_reward_clip_off_by_default(self):
        net = small_net(HEAD_LINEAR)
        batch = build_value_batch([make_path([0], [50.0])], net)
        assert batch.targets.tolist() == [50.0]

    def test_reward_clip_bounds_targets(self):
        net = small_net(HEAD_LINEAR)
        path = make_path([0, 1], [50.0, -7.0])
        batch = build_value_batch([path], net, gamma=1.0, reward_clip=1.0)
        # First transition bootstraps off the (random) net; only the reward
        # component is clipped.
        assert batch.targets[1] == -1.0
        assert batch.targets[0] == pytest.approx(
            1.0 + net.predict_value(path.steps[0].next_obs)
        )


class TestFits:
    def policy_batch(self, rng, n=40):
        obs = [state_observation(int(rng.integers(16))) for _ in range(n)]
        inputs = np.stack([o.to_onehot() for o in obs])
        targets = np.eye(4)[rng.integers(0, 4, size=n)]
        return TrainingBatch(obs, inputs, targets)

    def test_deterministic_given_seed(self, rng):
        net = small_net(HEAD_SOFTMAX, input_dim=16)
        batch = self.policy_batch(rng)
        cfg = FitConfig(batch_size=8, learning_rate=1e-2, epochs=3, seed=42)
        a = fit_policy(net, batch, cfg)
        b = fit_policy(net, batch, cfg)
        assert np.array_equal(a.params, b.params)

    def test_zero_learning_rate_unchanged(self, rng):
        net = small_net(HEAD_SOFTMAX, input_dim=16)
        batch = self.policy_batch(rng)
        out = fit_policy(net, batch, FitConfig(learning_rate=0.0, epochs=2))
        assert np.array_equal(out.params, net.params)

    def test_single_example_probability_increases_monotonically(self):
        net = small_net(HEAD_SOFTMAX, input_dim=16)
        obs = state_observation(5)
        batch = TrainingBatch([obs], obs.to_onehot()[None, :], np.eye(4)[[2]])
        probs = [net.predict_policy(obs)[2]]
        for _ in range(6):
            net = fit_policy(net, batch, FitConfig(batch_size=1, learning_rate=0.05, epochs=1))
            probs.append(net.predict_policy(obs)[2])
        assert all(b > a for a, b in zip(probs, probs[1:]))

    def test_full_batch_descent_reduces_loss(self, rng):
        net = small_net(HEAD_SOFTMAX, input_dim=16)
        batch = self.policy_batch(rng)
        before, _ = net.loss_and_grad(batch.inputs, batch.targets)
        fitted = fit_policy(
            net, batch, FitConfig(batch_size=len(batch), learning_rate=1e-3, epochs=1)
        )
        after, _ = fitted.loss_and_grad(batch.inputs, batch.targets)
        assert after <= before

    def test_value_fit_moves_toward_constant_target(self, rng):
        net = small_net(HEAD_LINEAR, input_dim=16)
        obs = [state_observation(int(rng.integers(16))) for _ in range(20)]
        inputs = np.stack([o.to_onehot() for o in obs])
        batch = TrainingBatch(obs, inputs, np.full(20, 3.0))
        before = float(np.mean(np.abs(net.predict_value_batch(obs) - 3.0)))
        for _ in range(10):
            net = fit_value(net, batch, FitConfig(batch_size=20, learning_rate=0.1, epochs=4))
        after = float(np.mean(np.abs(net.predict_value_batch(obs) - 3.0)))
        assert after < before

    def test_head_mismatch_rejected(self, rng):
        batch = self.policy_batch(rng)
        with pytest.raises(ValueError):
            fit_policy(small_net(HEAD_LINEAR, input_dim=16), batch, FitConfig())

    def test_non_finite_loss_aborts(self, rng):
        net = small_net(HEAD_LINEAR, input_dim=16)
        obs = [state_observation(0)]
        batch = TrainingBatch(obs, np.stack([obs[0].to_onehot()]), np.array([np.inf]))
        with pytest.raises(NonFiniteLoss):
            fit_value(net, batch, FitConfig(batch_size=1, epochs=1))


class TestGradientOf:
    def test_matches_finite_differences_both_losses(self, rng):
        from test_nets import finite_difference, relative_error

        pol = small_net(HEAD_SOFTMAX, input_dim=16)
        obs = [state_observation(int(rng.integers(16))) for _ in range(6)]
        inputs = np.stack([o.to_onehot() for o in obs])
        pb = TrainingBatch(obs, inputs, np.eye(4)[rng.integers(0, 4, 6)])
        grad = gradient_of(pol, pb)
        fd = finite_difference(lambda p: pol.loss_and_grad(pb.inputs, pb.targets, p)[0], pol.params)
        assert relative_error(grad, fd) < 1e-4

        val = small_net(HEAD_LINEAR, input_dim=16)
        vb = TrainingBatch(obs, inputs, rng.normal(size=6))
        grad = gradient_of(val, vb)
        fd = finite_difference(lambda p: val.loss_and_grad(vb.inputs, vb.targets, p)[0], val.params)
        assert relative_error(grad, fd) < 1e-4


class TestSchedule:
    def params(self):
        return ParameterSet(small_net(HEAD_SOFTMAX), small_net(HEAD_LINEAR))

    def test_degraded_candidate_rejected(self, rng):
        e_old = rng.normal(10.0, 1.0, size=12).tolist()
        e_new = rng.normal(0.0, 1.0, size=12).tolist()
        accepted, p = schedule_decision(e_old, e_new)
        assert not accepted
        assert p < 0.1

    def test_improved_candidate_accepted(self, rng):
        e_old = rng.normal(0.0, 1.0, size=12).tolist()
        e_new = rng.normal(10.0, 1.0, size=12).tolist()
        accepted, p = schedule_decision(e_old, e_new)
        assert accepted

    def test_identical_samples_accepted_at_half(self):
        xs = [1.0, 2.0, 3.0, 4.0]
        accepted, p = schedule_decision(xs, list(xs))
        assert accepted
        assert p == pytest.approx(0.5)

    def test_degenerate_samples_accepted(self):
        accepted, p = schedule_decision([2.0, 2.0], [2.0, 2.0])
        assert accepted
        assert p == 0.5

    def test_boundary_p_accepts(self, monkeypatch):
        # Rejection happens iff p < 0.1 exactly; the boundary itself accepts.
        monkeypatch.setattr(learner_mod, "welch_t_test", lambda a, b: 0.1)
        accepted, _ = schedule_decision([1, 2], [3, 4])
        assert accepted
        monkeypatch.setattr(learner_mod, "welch_t_test", lambda a, b: 0.0999999)
        accepted, _ = schedule_decision([1, 2], [3, 4])
        assert not accepted

    def test_update_network_parameters_accept_and_reject(self, rng):
        incumbent, candidate = self.params(), self.params()
        sched = ScheduleState(incumbent=incumbent)
        e_old = rng.normal(0.0, 1.0, size=10).tolist()
        e_new = rng.normal(10.0, 1.0, size=10).tolist()
        chosen, accepted = update_network_parameters(sched, candidate, e_old, e_new)
        assert accepted and chosen is candidate and sched.incumbent is candidate

        worse = rng.normal(-10.0, 1.0, size=10).tolist()
        second = self.params()
        chosen, accepted = update_network_parameters(sched, second, e_new, worse)
        assert not accepted and chosen is candidate and sched.incumbent is candidate
