import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from stlpi2.dynamics import (
    BlockNormBall, Box, ConsensusNetwork, DivergenceError, NoiseModel, NormBall, SingleIntegrator, Unicycle,
    constraint_violation, model_from_dict, rollout, rollout_batch, saturate, step,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_euler_step_examples():
    assert np.allclose(step(SingleIntegrator(), [0, 0], [1, 0], 0.0, 0.02), [0.02, 0])
    assert np.allclose(step(Unicycle(), [0, 0, 0], [1, 0], 0.0, 0.02), [0.02, 0, 0])
    x = np.tile([1.5, -0.5], 3)
    assert np.array_equal(step(ConsensusNetwork(), x, np.zeros(6), 0.0, 0.01), x)


def test_unicycle_heading_rate():
    x = step(Unicycle(), [0, 0, 0], [0, 1], 0.0, 0.1)
    assert x[2] == pytest.approx(0.5)


def test_consensus_drift_matrix():
    net = ConsensusNetwork()
    L = np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]], dtype=float)
    assert np.allclose(L.sum(axis=1), 0)
    x = np.random.default_rng(0).normal(size=6)
    assert np.allclose(net.drift(x), -0.1 * np.kron(L, np.eye(2)) @ x)


def test_saturation_examples():
    assert np.allclose(saturate([3, 4], NormBall(1)), [0.6, 0.8])
    assert np.allclose(saturate([0.5, -2], Box((1, 1))), [0.5, -1])
    assert np.array_equal(saturate([0.3, 0.4], NormBall(1)), [0.3, 0.4])
    u = saturate([3, 4, 0.1, 0.1, 0, -2], BlockNormBall(2, 1))
    assert np.allclose(u, [0.6, 0.8, 0.1, 0.1, 0, -1])


@settings(max_examples=200, deadline=None)
@given(arrays(float, (4, 6), elements=finite))
def test_saturation_feasible_and_idempotent(u):
    for c in (NormBall(1.0), Box((1.0,) * 6), BlockNormBall(2, 1.0)):
        s = saturate(u, c)
        assert constraint_violation(s, c) <= 1e-12
        assert np.array_equal(saturate(s, c), s)


def test_divergence_detected():
    with pytest.raises(DivergenceError):
        step(SingleIntegrator(), [0, 0], [np.inf, 0], 0.0, 0.1)


def test_rollout_examples():
    x0 = np.array([1.0, 2.0])
    tr = rollout(SingleIntegrator(), lambda x, k: np.zeros(2), x0, 1.0, 0.1)
    assert np.array_equal(tr.states, np.tile(x0, (11, 1)))
    tr = rollout(SingleIntegrator(), lambda x, k: np.array([1.0, 0.0]), x0, 1.0, 0.5)
    assert np.allclose(tr.states, [x0, x0 + [0.5, 0], x0 + [1.0, 0]])


def test_rollout_records_saturated_inputs():
    tr = rollout(SingleIntegrator(), lambda x, k: np.array([3.0, 4.0]), np.zeros(2), 0.2, 0.1)
    assert np.allclose(tr.inputs, [[0.6, 0.8]] * 2)
    assert np.allclose(tr.states[-1], [0.12, 0.16])


def test_rollout_rejects_non_integral_horizon():
    with pytest.raises(ValueError):
        rollout(SingleIntegrator(), lambda x, k: np.zeros(2), np.zeros(2), 1.0, 0.3)


def test_seeded_noisy_rollout_is_deterministic():
    noise = NoiseModel(0.04)
    run = lambda: rollout(Unicycle(), lambda x, k: np.array([0.5, 0.1]), np.zeros(3), 1.0, 0.02,  # noqa: E731
                          noise, np.random.default_rng(11))
    a, b = run(), run()
    assert np.array_equal(a.states, b.states)
    assert not np.array_equal(a.states, rollout(Unicycle(), lambda x, k: np.array([0.5, 0.1]), np.zeros(3),
                                                1.0, 0.02).states)


def test_noise_scaled_by_dt():
    noise = NoiseModel(0.04)
    w = noise.sample(np.random.default_rng(3), 1, 2)
    tr = rollout(SingleIntegrator(), lambda x, k: np.zeros(2), np.zeros(2), 0.5, 0.5, noise, np.random.default_rng(3))
    assert np.allclose(tr.states[1], 0.5 * w[0])
    big = noise.sample(np.random.default_rng(0), 200000, 1)
    assert big.var() == pytest.approx(0.04, rel=0.02)


def test_noisy_rollout_needs_rng():
    with pytest.raises(ValueError):
        rollout(SingleIntegrator(), lambda x, k: np.zeros(2), np.zeros(2), 1.0, 0.5, NoiseModel(0.1))


def test_consensus_centroid_is_invariant():
    net = ConsensusNetwork()
    x0 = np.array([3.0, 0.8, 2.0, 0.8, 1.2, 0.7])
    tr = rollout(net, lambda x, k: np.zeros(6), x0, 10.0, 0.01)
    cent = tr.states.reshape(-1, 3, 2).mean(axis=1)
    assert np.max(np.abs(cent - cent[0])) <= 1e-10


def test_euler_first_order_convergence():
    def endpoint(dt):
        policy = lambda x, k: np.array([0.8, 0.3 * np.sin(k * dt)])  # noqa: E731
        return rollout(Unicycle(), policy, np.zeros(3), 2.0, dt).states[-1]

    ref = endpoint(0.0005)
    e1 = np.linalg.norm(endpoint(0.02) - ref)
    e2 = np.linalg.norm(endpoint(0.01) - ref)
    assert 1.5 <= e1 / e2 <= 2.5


def test_batch_matches_single_rollouts():
    model = Unicycle()
    x0 = np.array([0.5, 0.5, 0.3])
    gains = np.array([[0.5, 0.2], [1.5, -0.4], [0.1, 0.0]])
    S, U = rollout_batch(model, lambda x, k: gains - 0.1 * x[:, :2], x0, 20, 0.05, batch=3)
    for i in range(3):
        tr = rollout(model, lambda x, k: gains[i] - 0.1 * x[:2], x0, 1.0, 0.05)
        assert np.allclose(tr.states, S[i], atol=1e-14)
        assert np.allclose(tr.inputs, U[i], atol=1e-14)


@pytest.mark.parametrize("model", [SingleIntegrator(), Unicycle(), ConsensusNetwork()])
def test_model_dict_round_trip(model):
    again = model_from_dict(model.to_dict())
    assert again.to_dict() == model.to_dict()
    assert (again.n, again.m) == (model.n, model.m)
