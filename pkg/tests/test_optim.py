import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aucbench.errors import EmptyClass, EmptyStage, ShapeMismatch
from aucbench.losses import CompositeLossSpec, composite_grads, composite_objective, minmax_score_grads
from aucbench.optim import (
    OptimizerConfig,
    OptimizerState,
    accumulate_stage,
    apply_regularizers,
    direction,
    end_stage,
    pesg_step,
    schedule_lr,
    sgd_update,
    update_d,
)


@pytest.mark.parametrize("epoch, expected", [(0, 0.01), (10, 0.01), (29, 0.01), (30, 0.001), (35, 0.001), (45, 0.0001)])
def test_schedule(epoch, expected):
    cfg = OptimizerConfig(base_lr=0.01, lr_drop_epochs=(30, 40))
    assert schedule_lr(cfg, epoch) == pytest.approx(expected, rel=1e-12)


def test_schedule_rejects_negative_epoch():
    with pytest.raises(ValueError):
        schedule_lr(OptimizerConfig(), -1)


@pytest.mark.parametrize("kwargs", [
    {"base_lr": 0.0}, {"momentum_beta": 0.0}, {"momentum_beta": 1.5}, {"adam_beta": 1.0},
    {"adam_floor": 0.0}, {"composite_d_beta": 0.0}, {"weight_decay": -1.0},
    {"lr_drop_epochs": (40, 30)}, {"lr_drop_epochs": (30, 30)}, {"style": "rmsprop"},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)


def test_regularizer_examples():
    out = apply_regularizers(np.zeros(2), np.ones(2), np.zeros(2), 0.0, 0.02)
    np.testing.assert_allclose(out, [0.04, 0.04], rtol=1e-12)
    out = apply_regularizers(np.array([0.3]), np.array([2.0]), np.array([0.0]), 1e-4, 0.0)
    assert out[0] == pytest.approx(0.3 + 2e-4, rel=1e-12)
    g = np.array([1.5, -2.0])
    np.testing.assert_array_equal(apply_regularizers(g, np.ones(2), np.zeros(2), 0.0, 0.0), g)
    with pytest.raises(ShapeMismatch):
        apply_regularizers(np.zeros(2), np.zeros(3), np.zeros(2), 0.1, 0.0)


def test_momentum_beta_one_is_sgd():
    rng = np.random.default_rng(0)
    sgd = OptimizerConfig(style="SGD")
    mom = OptimizerConfig(style="Momentum", momentum_beta=1.0)
    s1, s2 = OptimizerState(), OptimizerState()
    for _ in range(50):
        g = rng.normal(size=7)
        np.testing.assert_array_equal(direction(s1, sgd, g), direction(s2, mom, g))


def test_momentum_geometric_convergence():
    cfg = OptimizerConfig(style="Momentum", momentum_beta=0.1)
    state = OptimizerState()
    grad = np.array([2.0, -1.0])
    for t in range(1, 30):
        g = direction(state, cfg, grad)
        np.testing.assert_allclose(g, grad * (1 - 0.9**t), rtol=1e-12)


def test_adam_plug_in_example():
    cfg = OptimizerConfig(style="Adam")
    state = OptimizerState(v=np.array([0.1]), u=np.array([0.04]))
    # grad equal to the running moments keeps v fixed and nearly fixes u
    g = direction(state, cfg, np.array([0.1]))
    assert state.v[0] == pytest.approx(0.1, rel=1e-12)
    expected = state.v[0] / np.sqrt(state.u[0] + 1e-8)
    assert g[0] == pytest.approx(expected, rel=1e-12)
    assert 0.1 / np.sqrt(0.04 + 1e-8) == pytest.approx(0.5, abs=1e-6)


def test_adam_sign_limit():
    cfg = OptimizerConfig(style="Adam")
    state = OptimizerState()
    # magnitudes well above sqrt(G0); near it the floor itself shrinks |g|
    grad = np.array([0.05, -50.0, 3.0])
    for _ in range(10_000):
        g = direction(state, cfg, grad)
    np.testing.assert_allclose(np.abs(g), 1.0, atol=1e-3)
    np.testing.assert_array_equal(np.sign(g), np.sign(grad))


@settings(max_examples=100, deadline=None)
@given(st.lists(arrays(np.float64, 3, elements=st.floats(-1e3, 1e3, allow_nan=False)), min_size=1, max_size=20))
def test_adam_second_moment_nonnegative_and_bounded(stream):
    cfg = OptimizerConfig(style="Adam")
    state = OptimizerState()
    for grad in stream:
        g = direction(state, cfg, grad)
        assert np.all(state.u >= 0)
        assert np.all(np.abs(g) <= np.abs(state.v) / np.sqrt(cfg.adam_floor) + 1e-12)


def test_sgd_update_examples():
    np.testing.assert_allclose(sgd_update([1.0], [0.5], 0.1), [0.95])
    w = np.array([1.0, -2.0])
    np.testing.assert_array_equal(sgd_update(w, np.zeros(2), 0.3), w)
    g1, g2 = np.array([0.2, 0.1]), np.array([-0.4, 0.3])
    two = sgd_update(sgd_update(w, g1, 0.1), g2, 0.1)
    np.testing.assert_allclose(two, sgd_update(w, g1 + g2, 0.1), rtol=1e-14)
    with pytest.raises(ShapeMismatch):
        sgd_update(w, np.zeros(3), 0.1)


def test_update_d_examples():
    state = OptimizerState()
    assert update_d(state, 0.5, 0.0, 0.9) == pytest.approx(0.45)
    state = OptimizerState(d=3.0)
    assert update_d(state, 1.25, 1.0, 1.0) == 0.25


def test_update_d_error_ratio():
    state = OptimizerState(d=0.0)
    target, beta0 = 0.7, 0.3
    prev = abs(state.d - target)
    for _ in range(40):
        update_d(state, target, 0.0, beta0)
        err = abs(state.d - target)
        assert err == pytest.approx((1 - beta0) * prev, rel=1e-9)
        prev = err


def _pesg(alpha, pos, neg, lr, c=1.0):
    state = OptimizerState(alpha=alpha)
    w = np.zeros(2)
    return pesg_step(state, OptimizerConfig(style="SGD"), w, pos, neg, lambda gp, gn: np.zeros(2), 0.0, 0.0, c, lr)


def test_pesg_alpha_examples():
    # gap of exactly c: already at equilibrium
    assert _pesg(0.0, [1.0, 1.0], [0.0], 0.1)[3] == 0.0
    assert _pesg(0.0, [0.3], [0.3], 0.1)[3] == pytest.approx(0.1)
    # projection clips negative ascent
    assert _pesg(0.05, [5.0], [0.0], 0.5)[3] == 0.0


def test_pesg_empty_class():
    with pytest.raises(EmptyClass):
        _pesg(0.0, [], [0.1], 0.1)


def test_pesg_alpha_stays_nonnegative():
    rng = np.random.default_rng(3)
    state = OptimizerState()
    cfg = OptimizerConfig(style="SGD")
    w, a, b = np.zeros(1), 0.0, 0.0
    for _ in range(10_000):
        pos, neg = rng.normal(1.5, 2, size=3), rng.normal(0, 2, size=3)
        w, a, b, alpha = pesg_step(state, cfg, w, pos, neg, lambda gp, gn: np.zeros(1), a, b, 1.0, 0.5)
        assert alpha >= 0.0


def test_pesg_w_direction_matches_csh():
    rng = np.random.default_rng(5)
    for _ in range(25):
        pos, neg = rng.normal(size=4), rng.normal(size=6)
        a, b, c = rng.normal(), rng.normal(), rng.uniform(0.1, 2)
        alpha = max(c + neg.mean() - pos.mean(), 0.0)
        gp, gn, ga, gb = minmax_score_grads(pos, neg, a, b, alpha)
        cp, cn, ca, cb = composite_grads(CompositeLossSpec("CSH", c), pos, neg, a, b, pos.mean() - neg.mean())
        np.testing.assert_allclose(gp, cp, atol=1e-10)
        np.testing.assert_allclose(gn, cn, atol=1e-10)
        assert abs(ga - ca) <= 1e-10 and abs(gb - cb) <= 1e-10


def test_pesg_regularizes_w_only():
    state = OptimizerState(w_bar_prev=np.zeros(2))
    cfg = OptimizerConfig(style="SGD", weight_decay=0.5, cer_gamma=0.25)
    w = np.array([1.0, -1.0])
    new_w, a, b, _ = pesg_step(state, cfg, w, [0.5], [0.5], lambda gp, gn: np.zeros(2), 0.5, 0.5, 1.0, 0.1)
    np.testing.assert_allclose(new_w, w - 0.1 * (0.5 * w + 0.5 * w))
    assert (a, b) == (0.5, 0.5)


def test_end_stage_examples():
    state = OptimizerState.for_params(np.array([7.0]))
    np.testing.assert_array_equal(state.w_bar_prev, [7.0])
    accumulate_stage(state, [0.0])
    accumulate_stage(state, [1.0])
    end_stage(state)
    np.testing.assert_allclose(state.w_bar_prev, [0.5])
    assert state.stage_len == 0 and state.stages_closed == 1
    accumulate_stage(state, [3.0])
    end_stage(state)
    np.testing.assert_allclose(state.w_bar_prev, [3.0])
    with pytest.raises(EmptyStage):
        end_stage(state)


@pytest.mark.parametrize("kind", ["CSQ", "CL"])
def test_composite_step_descends(kind):
    rng = np.random.default_rng(11)
    cfg = OptimizerConfig(style="SGD", composite_d_beta=1.0)
    spec = CompositeLossSpec(kind, 1.0, 1.0)
    for _ in range(20):
        pos, neg = rng.normal(size=5), rng.normal(size=5)
        a, b = rng.normal(size=2)
        state = OptimizerState()
        update_d(state, pos.mean(), neg.mean(), cfg.composite_d_beta)
        gp, gn, ga, gb = composite_grads(spec, pos, neg, a, b, state.d)
        theta = np.concatenate([pos, neg, [a, b]])
        g = direction(state, cfg, np.concatenate([gp, gn, [ga, gb]]))
        new = sgd_update(theta, g, 1e-4)
        before = composite_objective(spec, pos, neg, a, b)
        after = composite_objective(spec, new[:5], new[5:10], new[10], new[11])
        assert after < before
