import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackparse import autodiff as ad
from stackparse.errors import ShapeError, StackUnderflow
from stackparse.stack_lstm import LSTMBuilder, RNNBuilder, new_stack, pop, push, summary
from oracles import gradcheck, scalar_sigmoid as sig


def builder(n=3, m=4, layers=2, seed=0, kind=LSTMBuilder, init="glorot"):
    store = ad.ParameterStore()
    return store, kind(store, "s", n, m, layers, np.random.default_rng(seed), init)


def vec(*xs):
    return ad.constant(np.array(xs, dtype=float))


# ----------------------------------------------------------- construction


def test_gate_shapes():
    _, b = builder(n=3, m=4, layers=2)
    w0, w1 = b.weights(0), b.weights(1)
    for g in "ifco":
        assert w0[f"W_{g}x"].shape == (4, 3)
        assert w1[f"W_{g}x"].shape == (4, 4)
        assert w0[f"W_{g}h"].shape == (4, 4)
        assert w0[f"b_{g}"].shape == (4,)
    for g in "ifo":
        assert w0[f"W_{g}c"].shape == (4, 4)


def test_layers_validated():
    with pytest.raises(ValueError):
        builder(layers=0)
    with pytest.raises(ValueError):
        builder(layers=0, kind=RNNBuilder)


def test_zero_params_give_zero_summary():
    _, b = builder(init="zeros")
    s = new_stack(b, vec(5, -2, 1))
    assert np.array_equal(summary(s).value, np.zeros(4))
    s = push(s, vec(1, 1, 1))
    assert np.array_equal(summary(s).value, np.zeros(4))
    # c = f * c_prev + i * tanh(0) = 0.5 * 0 from the zero guard state
    assert np.array_equal(s.backbone[s.top].states[0][0].value, np.zeros(8))


def test_fresh_stacks_are_deterministic():
    _, b = builder()
    g = vec(0.1, 0.2, 0.3)
    assert np.array_equal(new_stack(b, g).summary().value, new_stack(b, g).summary().value)


def test_push_shape_checked():
    _, b = builder()
    s = new_stack(b, vec(0, 0, 0))
    with pytest.raises(ShapeError):
        push(s, vec(1, 2))


def test_pop_on_empty_rejected():
    _, b = builder()
    s = new_stack(b, vec(0, 0, 0))
    with pytest.raises(StackUnderflow):
        pop(s)
    s2, _ = pop(push(s, vec(1, 2, 3)))
    with pytest.raises(StackUnderflow):
        pop(s2)


def test_push_push_depth_and_top():
    _, b = builder()
    s = new_stack(b, vec(0, 0, 0))
    a = push(s, vec(1, 0, 0))
    c = push(a, vec(0, 1, 0))
    assert len(c) == 2 and c.top != a.top


def test_pop_returns_pushed_input():
    _, b = builder()
    x = vec(1, 2, 3)
    s, got = pop(push(new_stack(b, vec(0, 0, 0)), x))
    assert got is x


def test_upper_layer_zero_weights_fixed_point():
    store, b = builder(n=3, m=4, layers=2, seed=3)
    for p in b.layers[1]:
        p.value[...] = 0.0
    s = new_stack(b, vec(0.3, -0.2, 0.9))
    for x in ([1, 2, 3], [-1, 0.5, 0], [4, 4, 4]):
        s = push(s, vec(*x))
        assert np.array_equal(summary(s).value, np.zeros(4))
        assert np.any(s.backbone[s.top].states[0][1].value != 0)


# ----------------------------------------------------------- scalar oracles


def scalar_lstm(p, x, c_prev, h_prev):
    i = sig(p["ix"] * x + p["ih"] * h_prev + p["ic"] * c_prev + p["bi"])
    f = sig(p["fx"] * x + p["fh"] * h_prev + p["fc"] * c_prev + p["bf"])
    c = f * c_prev + i * math.tanh(p["cx"] * x + p["ch"] * h_prev + p["bc"])
    o = sig(p["ox"] * x + p["oh"] * h_prev + p["oc"] * c + p["bo"])
    return c, o * math.tanh(c)


SCALAR = {"ix": 0.5, "ih": -0.3, "ic": 0.2, "bi": 0.1,
          "fx": -0.4, "fh": 0.6, "fc": -0.1, "bf": 0.7,
          "cx": 0.9, "ch": -0.8, "bc": -0.2,
          "ox": 0.3, "oh": 0.25, "oc": -0.6, "bo": 0.05}


def test_scalar_lstm_matches_hand_evaluation():
    _, b = builder(n=1, m=1, layers=1, init="zeros")
    w = b.weights(0)
    for k, v in SCALAR.items():
        name = f"b_{k[1]}" if k[0] == "b" else f"W_{k[0]}{k[1]}"
        w[name][...] = v
    guard, xs = 0.4, [1.0, -2.0, 0.5]
    c, h = scalar_lstm(SCALAR, guard, 0.0, 0.0)
    s = new_stack(b, vec(guard))
    assert summary(s).value[0] == pytest.approx(h, abs=1e-15)
    for x in xs:
        c, h = scalar_lstm(SCALAR, x, c, h)
        s = push(s, vec(x))
        ch = s.backbone[s.top].states[0][0].value
        assert ch[0] == pytest.approx(c, abs=1e-15)
        assert summary(s).value[0] == pytest.approx(h, abs=1e-15)


def test_scalar_rnn_matches_hand_evaluation():
    store, b = builder(n=1, m=1, layers=1, kind=RNNBuilder, init="zeros")
    P = b.layers[0]
    P["W_hx"].value[0, 0], P["W_hh"].value[0, 0], P["b_h"].value[0] = 0.7, -1.2, 0.3
    h = sig(0.7 * 0.2 + 0.3)
    s = new_stack(b, vec(0.2))
    assert summary(s).value[0] == pytest.approx(h, abs=1e-15)
    for x in (1.0, -0.5):
        h = sig(0.7 * x - 1.2 * h + 0.3)
        s = push(s, vec(x))
        assert summary(s).value[0] == pytest.approx(h, abs=1e-15)


def test_rnn_zero_params_give_half():
    _, b = builder(kind=RNNBuilder, init="zeros")
    s = push(new_stack(b, vec(1, 2, 3)), vec(3, 2, 1))
    assert np.array_equal(summary(s).value, np.full(4, 0.5))


# ------------------------------------------------- fused cell vs op graph


def composed_cell(b, layer, x, c_prev, h_prev):
    """The same equations built from generic autodiff nodes."""
    Wx, Wh, Wc, Woc, bias = b.layers[layer]
    m = b.hidden_dim

    def rows(p, g):
        return ad.Node(p.value[g * m:(g + 1) * m], (p,), _rows_back(p.value.shape, g, m), "rows")

    def gate(g, c):
        pairs = [(rows(Wx, g), x), (rows(Wh, g), h_prev)]
        if c is not None:
            pairs.append((rows(Wc, g) if g < 2 else Woc, c))
        return ad.affine_sum(rows(bias, g), pairs)

    i = ad.sigmoid(gate(0, c_prev))
    f = ad.sigmoid(gate(1, c_prev))
    c = ad.add(ad.hadamard(f, c_prev), ad.hadamard(i, ad.tanh(gate(2, None))))
    o = ad.sigmoid(gate(3, c))
    return c, ad.hadamard(o, ad.tanh(c))


def _rows_back(shape, g, m):
    def back(grad):
        out = np.zeros(shape)
        out[g * m:(g + 1) * m] = grad
        return (out,)
    return back


def test_fused_cell_matches_composed_ops():
    store, b = builder(n=3, m=4, layers=1, seed=9)
    rng = np.random.default_rng(1)
    x = ad.Parameter("x", rng.normal(size=3))
    ch0 = ad.Parameter("ch0", rng.normal(size=8))
    w = ad.constant(rng.normal(size=8))

    def fused():
        ch = b.step(x, ((ch0, None),))[0][0]
        return ad.sum_elements(ad.hadamard(w, ch))

    def composed():
        c_prev = ad.Node(ch0.value[:4], (ch0,), lambda g: (np.concatenate([g, np.zeros(4)]),), "s")
        h_prev = ad.Node(ch0.value[4:], (ch0,), lambda g: (np.concatenate([np.zeros(4), g]),), "s")
        c, h = composed_cell(b, 0, x, c_prev, h_prev)
        return ad.sum_elements(ad.hadamard(w, ad.concat([c, h])))

    params = [x, ch0, *store.trainable()]
    lf = fused()
    ad.backward(lf)
    g_fused = [p.grad.copy() for p in params]
    for p in params:
        p.grad[...] = 0.0
    lc = composed()
    ad.backward(lc)
    assert float(lf.value) == pytest.approx(float(lc.value), abs=1e-14)
    for gf, p in zip(g_fused, params):
        np.testing.assert_allclose(gf, p.grad, rtol=1e-12, atol=1e-14)


def test_stack_gradients_match_finite_differences():
    store, b = builder(n=2, m=3, layers=2, seed=4)
    guard = store.add("guard", (2,), np.random.default_rng(5))
    xs = [ad.constant(v) for v in np.random.default_rng(6).normal(size=(3, 2))]

    def loss():
        s = new_stack(b, guard)
        s = push(push(s, xs[0]), xs[1])
        s, _ = pop(s)
        s = push(s, xs[2])
        return ad.sum_elements(ad.tanh(summary(s)))

    worst, _ = gradcheck(loss, store.trainable())
    assert worst < 1e-6


def test_abandoned_entry_gets_gradient_only_if_consumed():
    # x_b is pushed then popped; it influences the loss only if its summary
    # was read before the pop
    store, b = builder(n=2, m=3, layers=1, seed=2)
    xa = ad.constant([0.3, -0.7])
    xb = ad.Parameter("xb", np.array([0.5, 0.2]))
    xc = ad.constant([-0.1, 0.8])

    def loss(consume):
        s = push(new_stack(b, ad.constant([0.0, 0.0])), xa)
        s2 = push(s, xb)
        read = summary(s2)
        s3, _ = pop(s2)
        out = ad.sum_elements(summary(push(s3, xc)))
        return ad.add(out, ad.sum_elements(read)) if consume else out

    xb.grad[...] = 0
    ad.backward(loss(False))
    assert np.array_equal(xb.grad, np.zeros(2))
    num = ad.numeric_gradient(lambda: float(loss(False).value), xb)
    assert np.array_equal(num, np.zeros(2))

    worst, _ = gradcheck(lambda: loss(True), [xb])
    assert np.any(xb.grad != 0)
    assert worst < 1e-6


# ------------------------------------------------------------ persistence


def test_push_pop_restores_fresh_summary():
    _, b = builder()
    s = new_stack(b, vec(0.2, 0.1, 0.0))
    before = summary(s).value.copy()
    s2, _ = pop(push(s, vec(1, 2, 3)))
    assert np.array_equal(summary(s2).value, before)


def test_path_equivalence_example():
    _, b = builder()
    g = vec(0.2, 0.1, 0.0)
    a, bb, c = vec(1, 0, 0), vec(0, 1, 0), vec(0, 0, 1)
    s, _ = pop(push(push(new_stack(b, g), a), bb))
    s = push(s, c)
    t = push(push(new_stack(b, g), a), c)
    assert np.array_equal(summary(s).value, summary(t).value)


def test_branching_leaves_prefix_intact():
    _, b = builder()
    prefix = push(push(new_stack(b, vec(0, 0, 1)), vec(1, 1, 1)), vec(2, 0, 1))
    before = summary(prefix).value.copy()
    left = push(prefix, vec(5, 5, 5))
    right = push(pop(prefix)[0], vec(-1, -1, -1))
    assert np.array_equal(summary(prefix).value, before)
    assert not np.array_equal(summary(left).value, summary(right).value)
    assert len(prefix) == 2


def ops_strategy():
    return st.lists(st.one_of(st.just(None), st.integers(0, 7)), max_size=40)


@pytest.mark.parametrize("kind", [LSTMBuilder, RNNBuilder])
@given(ops=ops_strategy())
@settings(max_examples=40, deadline=None)
def test_interleavings_property(kind, ops):
    _, b = builder(n=2, m=3, layers=2, kind=kind, seed=1)
    inputs = [ad.constant(v) for v in np.random.default_rng(0).normal(size=(8, 2))]
    s = new_stack(b, ad.constant([0.1, 0.2]))
    saved = []     # summary observed before each live push
    pushes = 0
    for op in ops:
        if op is None:
            if len(s) == 0:
                with pytest.raises(StackUnderflow):
                    pop(s)
                continue
            s, _ = pop(s)
            assert np.array_equal(summary(s).value, saved.pop())
        else:
            saved.append(summary(s).value.copy())
            s = push(s, inputs[op])
            pushes += 1
        # no-overwrite and pointer-chain depth
        assert len(s.backbone) == pushes + 1
        i, hops = s.top, 0
        while s.backbone[i].prev != -1:
            i, hops = s.backbone[i].prev, hops + 1
        assert hops == len(s)
    # path equivalence: replaying only the live inputs gives the same summary
    t = new_stack(b, ad.constant([0.1, 0.2]))
    for x in s.live_inputs():
        t = push(t, x)
    assert np.array_equal(summary(t).value, summary(s).value)
