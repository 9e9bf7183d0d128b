import numpy as np
import pytest

from seqtune.errors import ContractViolation
from seqtune.lstm import GridLstm, HiddenState, LstmParams, SequenceLstm


def make_model(rng, hidden=6, inputs=3, outputs=2):
    return SequenceLstm(LstmParams.init_random(rng, hidden, inputs, outputs))


def finite_diff(loss, arr, idx, eps=1e-5):
    arr[idx] += eps
    up = loss()
    arr[idx] -= 2 * eps
    down = loss()
    arr[idx] += eps
    return (up - down) / (2 * eps)


def test_zero_weights_zero_state_gives_zero_output():
    m = SequenceLstm(LstmParams.zeros(4, 2, 2))
    state, y, _ = m.forward_step(m.zero_state(), np.array([0.7, -1.3]))
    assert np.array_equal(y, np.zeros((1, 2)))
    assert np.array_equal(state.h, np.zeros((1, 4)))
    assert np.array_equal(state.c, np.zeros((1, 4)))


def test_zero_weights_unit_cell_state_closed_form():
    # all gates sit at 0.5, candidate at 0: c' = 0.5, h' = 0.5 * tanh(0.5)
    m = SequenceLstm(LstmParams.zeros(3, 1, 1))
    start = HiddenState(np.zeros((1, 3)), np.ones((1, 3)))
    state, _, _ = m.forward_step(start, np.array([2.0]))
    assert np.allclose(state.c, 0.5, atol=1e-15)
    assert np.allclose(state.h, 0.5 * np.tanh(0.5), atol=1e-15)
    assert state.h[0, 0] == pytest.approx(0.23105857863, abs=1e-10)


def test_reference_shape_configuration():
    # 1 input, 32 hidden units, 1 linear output, no biases
    rng = np.random.default_rng(0)
    m = make_model(rng, hidden=32, inputs=1, outputs=1)
    _, y, _ = m.forward_step(m.zero_state(), np.array([0.5]))
    assert y.shape == (1, 1)
    assert set(m.params.arrays()) == {
        "input_weights", "recurrent_weights", "output_weights"}


def test_shape_mismatch_rejected():
    rng = np.random.default_rng(1)
    m = make_model(rng)
    with pytest.raises(ContractViolation):
        m.forward_step(m.zero_state(), np.array([1.0]))  # wrong input width
    with pytest.raises(ContractViolation):
        LstmParams(np.zeros((8, 2)), np.zeros((8, 3)), np.zeros((1, 2)))


def test_open_loop_rollout_equals_composed_steps():
    rng = np.random.default_rng(2)
    m = make_model(rng)
    xs = rng.normal(0, 1, (6, 1, 3))
    _, outputs = m.rollout(m.zero_state(), xs)
    state = m.zero_state()
    for t in range(6):
        state, y, _ = m.forward_step(state, xs[t])
        assert np.array_equal(outputs[t], y)


def test_closed_loop_zero_model_stays_zero():
    m = SequenceLstm(LstmParams.zeros(4, 1, 1))
    _, outputs = m.rollout(m.zero_state(), first_input=np.array([0.0]),
                           steps=5, closed_loop=True)
    assert np.array_equal(outputs, np.zeros((5, 1, 1)))


def test_closed_loop_requires_matching_dims():
    rng = np.random.default_rng(3)
    m = make_model(rng, inputs=3, outputs=2)
    with pytest.raises(ContractViolation):
        m.rollout(m.zero_state(), first_input=np.zeros(3), steps=4,
                  closed_loop=True)


def test_zero_output_grads_give_zero_gradients():
    rng = np.random.default_rng(4)
    m = make_model(rng)
    trace, outputs = m.rollout(m.zero_state(), rng.normal(0, 1, (5, 1, 3)))
    grads, sg, ig = m.backward(trace, np.zeros_like(outputs))
    assert all(np.array_equal(g, np.zeros_like(g)) for g in grads.values())
    assert np.array_equal(sg.h, np.zeros_like(sg.h))
    assert np.array_equal(ig, np.zeros_like(ig))


def test_backward_rejects_length_mismatch():
    rng = np.random.default_rng(5)
    m = make_model(rng)
    trace, outputs = m.rollout(m.zero_state(), rng.normal(0, 1, (5, 1, 3)))
    with pytest.raises(ContractViolation):
        m.backward(trace, outputs[:3])


@pytest.mark.parametrize("closed_loop,steps", [(False, 1), (False, 8), (True, 8)])
def test_bptt_matches_finite_differences(closed_loop, steps):
    rng = np.random.default_rng(6)
    hidden, width, batch = 5, 2, 2
    p = LstmParams.init_random(rng, hidden, width, width)
    m = SequenceLstm(p)
    seed = m.random_state(rng, 0.3, batch)
    xs = rng.normal(0, 1, (steps, batch, width))
    kwargs = (dict(first_input=xs[0], steps=steps, closed_loop=True)
              if closed_loop else dict(inputs=xs))
    trace, out = m.rollout(seed, **(kwargs))
    target = rng.normal(0, 1, out.shape)
    grads, sg, ig = m.backward(trace, 2.0 * (out - target))

    def loss():
        _, o = SequenceLstm(p).rollout(seed, **kwargs)
        return np.sum((o - target) ** 2)

    checks = [(p.input_weights, grads["input_weights"], (1, 0)),
              (p.recurrent_weights, grads["recurrent_weights"], (2, 3)),
              (p.output_weights, grads["output_weights"], (0, 1)),
              (seed.h, sg.h, (0, 2)),
              (seed.c, sg.c, (1, 4))]
    if not closed_loop:
        checks.append((xs, ig, (steps // 2, 1, 0)))
    else:
        checks.append((xs, ig, (0, 1, 0)))  # seed input is the free variable
    for arr, grad, idx in checks:
        num = finite_diff(loss, arr, idx)
        assert grad[idx] == pytest.approx(num, rel=1e-4, abs=1e-10)


def test_determinism_bit_identical():
    rng = np.random.default_rng(7)
    m = make_model(rng)
    xs = rng.normal(0, 1, (10, 2, 3))
    seed = m.random_state(rng, 0.2, 2)
    t1, o1 = m.rollout(seed, xs)
    t2, o2 = m.rollout(seed, xs)
    assert np.array_equal(o1, o2)
    g1 = m.backward(t1, np.ones_like(o1))
    g2 = m.backward(t2, np.ones_like(o2))
    for k in g1[0]:
        assert np.array_equal(g1[0][k], g2[0][k])


# -- grid model --------------------------------------------------------------

def grid_model(rng, rows=3, cols=3, hidden=3):
    p = LstmParams.init_random(rng, hidden, 1 + 4 * hidden, 1)
    return GridLstm(p, (rows, cols))


def test_grid_zero_weights_zero_field():
    g = GridLstm(LstmParams.zeros(4, 17, 1), (4, 4))
    _, out, _ = g.forward_step(g.zero_state(), np.ones((4, 4)))
    assert np.array_equal(out, np.zeros((1, 4, 4)))


def test_grid_rejects_wrong_extents():
    rng = np.random.default_rng(8)
    g = grid_model(rng)
    with pytest.raises(ContractViolation):
        g.forward_step(g.zero_state(), np.ones((4, 4)))


def test_grid_locality_one_step_then_neighbours():
    rng = np.random.default_rng(9)
    g = grid_model(rng, rows=5, cols=5)
    field = np.zeros((5, 5))
    field[2, 2] = 1.0
    zero_in = np.zeros((2, 1, 5, 5))
    zero_in[0, 0] = field
    _, out_hit = g.rollout(g.zero_state(), zero_in)
    _, out_ref = g.rollout(g.zero_state(), np.zeros((2, 1, 5, 5)))
    diff1 = out_hit[0, 0] != out_ref[0, 0]
    assert diff1[2, 2]
    assert diff1.sum() == 1  # step 1: only the poked cell differs
    diff2 = out_hit[1, 0] != out_ref[1, 0]
    for r, c in [(1, 2), (3, 2), (2, 1), (2, 3)]:
        assert diff2[r, c]  # step 2: influence reaches the 4-neighbourhood
    assert not diff2[0, 0] and not diff2[4, 4]


def test_grid_parameter_sharing_uniform_field():
    rng = np.random.default_rng(10)
    g = grid_model(rng, rows=4, cols=4)
    _, out, _ = g.forward_step(g.zero_state(), np.full((4, 4), 0.37))
    assert np.allclose(out, out[0, 0, 0])
    # perturbing the shared weights shifts all positions identically
    arrays = {k: v.copy() for k, v in g.params.arrays().items()}
    arrays["output_weights"] += 0.01
    g2 = GridLstm(LstmParams(**arrays), (4, 4))
    _, out2, _ = g2.forward_step(g2.zero_state(), np.full((4, 4), 0.37))
    assert np.allclose(out2 - out, (out2 - out)[0, 0, 0])


@pytest.mark.parametrize("closed_loop", [False, True])
def test_grid_bptt_matches_finite_differences(closed_loop):
    rng = np.random.default_rng(11)
    g = grid_model(rng, rows=3, cols=3, hidden=3)
    seed = g.random_state(rng, 0.2)
    xs = rng.normal(0, 1, (3, 1, 3, 3))
    kwargs = (dict(first_input=xs[0], steps=3, closed_loop=True)
              if closed_loop else dict(inputs=xs))
    trace, out = g.rollout(seed, **kwargs)
    target = rng.normal(0, 1, out.shape)
    grads, sg, fg = g.backward(trace, 2.0 * (out - target))

    def loss():
        _, o = g.rollout(seed, **kwargs)
        return np.sum((o - target) ** 2)

    checks = [(g.params.input_weights, grads["input_weights"], (2, 1)),
              (g.params.recurrent_weights, grads["recurrent_weights"], (5, 2)),
              (g.params.output_weights, grads["output_weights"], (0, 1)),
              (seed.h, sg.h, (0, 4, 1)),
              (seed.c, sg.c, (0, 7, 2)),
              (xs, fg, (0, 0, 1, 1))]
    for arr, grad, idx in checks:
        num = finite_diff(loss, arr, idx)
        assert grad[idx] == pytest.approx(num, rel=1e-4, abs=1e-10)
