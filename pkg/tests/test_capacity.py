import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchfb.capacity import (
    blahut_arimoto,
    joint_quantities,
    max_joint_mi,
    max_structured,
    theorem1_class_check,
    two_way_sum_bounds,
)
from switchfb.channel import MacChannel, binary_adder, binary_xor, deterministic_channel
from switchfb.errors import ConvergenceError
from switchfb.info import StructuredInputDist, induced_joint, conditional_entropy, structured_terms
from switchfb.regions import build_example2

from conftest import channels, class_channels, random_channel

IDENTITY = deterministic_channel(2, 2, 2, lambda a, b: a)


def xlog2(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log2(np.where(p > 0, p, 1)), 0.0)


def grid_product_oracle(W, steps=1001):
    """Exhaustive grid over product Bernoulli inputs (binary inputs): max of I(X1,X2;Y) and
    of I(X1;Y|X2) + I(X2;Y|X1), by direct formulas."""
    g = np.linspace(0, 1, steps)
    a = g[:, None, None, None, None]
    b = g[None, :, None, None, None]
    px1 = np.concatenate([1 - a, a], axis=2)  # (.., .., 2, 1, 1)
    px2 = np.concatenate([1 - b, b], axis=3)
    P = px1 * px2  # (steps, steps, 2, 2, 1)
    J = P * W[None, None]
    hy_x = -xlog2(W)[None, None].__mul__(P).sum(axis=(2, 3, 4))
    hy = -xlog2(J.sum(axis=(2, 3))).sum(axis=-1)
    mi = hy - hy_x
    j_x2y = J.sum(axis=2)
    j_x1y = J.sum(axis=3)
    px2m = P.sum(axis=2)[..., 0]
    px1m = P.sum(axis=3)[..., 0]
    h_y_x2 = -xlog2(j_x2y).sum(axis=(2, 3)) + xlog2(px2m).sum(axis=2)
    h_y_x1 = -xlog2(j_x1y).sum(axis=(2, 3)) + xlog2(px1m).sum(axis=2)
    tw = (h_y_x2 - hy_x) + (h_y_x1 - hy_x)
    return float(mi.max()), float(tw.max())


def test_ba_adder_log3():
    res = max_joint_mi(binary_adder())
    assert res.value == pytest.approx(math.log2(3), abs=1e-9)
    q = res.argmax.ravel() @ binary_adder().compound()
    np.testing.assert_allclose(q, [1 / 3] * 3, atol=1e-6)


def test_ba_identity_one_bit():
    assert max_joint_mi(IDENTITY).value == pytest.approx(1.0, abs=1e-9)


def test_ba_example2_log24():
    res = max_joint_mi(build_example2(2))
    assert res.value == pytest.approx(math.log2(24), abs=1e-6)


def test_ba_useless_channel():
    ch = MacChannel(np.full((2, 3, 2), 0.5))
    assert max_joint_mi(ch).value == pytest.approx(0.0, abs=1e-12)


def test_ba_non_convergence_carries_best():
    ch = random_channel(np.random.default_rng(3), 3, 3, 4)
    with pytest.raises(ConvergenceError) as info:
        max_joint_mi(ch, tol=1e-15, max_iter=2)
    assert info.value.best_value > 0 and info.value.gap > 0


@given(channels())
def test_ba_monotone_and_reproducible(ch):
    res = max_joint_mi(ch, tol=1e-9)
    h = np.array(res.history)
    assert np.all(np.diff(h) >= -1e-12)
    assert 0 <= res.gap_bound < 1e-9
    assert joint_quantities(ch, res.argmax)["I"] == pytest.approx(res.value, abs=1e-9)


@given(channels(), st.integers(0, 2**32 - 1))
def test_ba_invariant_under_relabelling(ch, seed):
    rng = np.random.default_rng(seed)
    W = ch.transition[rng.permutation(ch.x1_size)][:, rng.permutation(ch.x2_size)][:, :, rng.permutation(ch.y_size)]
    assert max_joint_mi(MacChannel(W)).value == pytest.approx(max_joint_mi(ch).value, abs=2e-9)


def test_blahut_arimoto_bsc():
    e = 0.11
    W = np.array([[1 - e, e], [e, 1 - e]])
    value, r, _, gap, _ = blahut_arimoto(W, 1e-12)
    h = -(e * math.log2(e) + (1 - e) * math.log2(1 - e))
    assert value == pytest.approx(1 - h, abs=1e-11)


# frozen from grid_product_oracle(adder): both maxima attained at uniform inputs
ADDER_PRODUCT_MI = 1.5
ADDER_PRODUCT_TW = 2.0


def test_grid_oracle_frozen_values():
    mi, tw = grid_product_oracle(binary_adder().transition)
    assert mi == pytest.approx(ADDER_PRODUCT_MI, abs=1e-9)
    assert tw == pytest.approx(ADDER_PRODUCT_TW, abs=1e-9)


def test_structured_single_u_matches_grid():
    res = max_structured((1, 0, 0, 0), binary_adder(), u_size=1, restarts=4)
    assert res.value == pytest.approx(ADDER_PRODUCT_MI, abs=1e-6)


def test_structured_individual_term():
    res = max_structured((0, 1, 0, 0), binary_adder(), restarts=4)
    assert res.value == pytest.approx(1.0, abs=1e-6)


@given(channels(max_in=2, max_out=3))
@settings(max_examples=15)
def test_structured_full_u_matches_ba(ch):
    tol = 1e-7
    res = max_structured((0, 0, 0, 1), ch, u_size=ch.x1_size * ch.x2_size, restarts=4, tol=tol)
    assert res.value == pytest.approx(max_joint_mi(ch).value, abs=2 * tol + 1e-9)


@given(channels(max_in=2, max_out=3), st.sampled_from([(1, 0, 0, 0), (1, 1, 1, 0), (0.5, 0.2, 0.3, 1)]))
@settings(max_examples=15)
def test_structured_more_u_never_hurts(ch, w):
    # the larger-U run starts from the smaller optimum padded with an unused symbol
    small = max_structured(w, ch, u_size=1, restarts=4)
    big = max_structured(w, ch, u_size=2, restarts=4, inits=[small.argmax])
    assert small.value <= big.value + 1e-7


@given(channels(max_in=2, max_out=3))
@settings(max_examples=15)
def test_structured_value_reproduces(ch):
    w = np.array([0.3, 0.4, 0.1, 0.2])
    res = max_structured(w, ch, u_size=3, restarts=3)
    assert float(w @ structured_terms(ch, res.argmax)) == pytest.approx(res.value, abs=1e-9)
    h = np.array(res.history)
    assert np.all(np.diff(h) >= -1e-9)


def test_two_way_adder():
    tw = two_way_sum_bounds(binary_adder())
    assert tw.sum_inner == pytest.approx(2.0, abs=1e-6)
    assert tw.sum_outer == pytest.approx(2.0, abs=1e-6)


def test_two_way_useless_and_identity():
    tw = two_way_sum_bounds(MacChannel(np.full((2, 2, 3), 1 / 3)))
    assert tw.sum_inner == pytest.approx(0.0, abs=1e-9) and tw.sum_outer == pytest.approx(0.0, abs=1e-6)
    tw = two_way_sum_bounds(IDENTITY)
    assert tw.sum_inner == pytest.approx(1.0, abs=1e-6) and tw.sum_outer == pytest.approx(1.0, abs=1e-6)


@given(channels(max_in=2, max_out=3))
@settings(max_examples=25)
def test_two_way_inner_vs_grid_and_outer(ch):
    tw = two_way_sum_bounds(ch)
    _, grid = grid_product_oracle(ch.transition, steps=201)
    assert tw.sum_inner >= grid - 1e-3
    assert tw.sum_inner <= tw.sum_outer


def test_class_check_examples():
    assert theorem1_class_check(binary_adder())
    assert theorem1_class_check(binary_xor())
    check = theorem1_class_check(IDENTITY)
    assert not check
    side, y, x1, pair = check.witness
    assert side == "x2" and IDENTITY.transition[x1, pair[0], y] > 0 and IDENTITY.transition[x1, pair[1], y] > 0


@given(class_channels(), st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_class_implies_zero_equivocation(ch, seed):
    assert theorem1_class_check(ch)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        P = rng.dirichlet(np.ones(ch.x1_size * ch.x2_size)).reshape(ch.x1_size, ch.x2_size)
        j = induced_joint(ch, StructuredInputDist.from_joint(P), 1.0)
        assert conditional_entropy(j, "X1", ("Y", "X2")) < 1e-10
        assert conditional_entropy(j, "X2", ("Y", "X1")) < 1e-10
