import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchfb.channel import binary_adder
from switchfb.errors import ValidationError
from switchfb.info import (
    JointDist,
    StructuredInputDist,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    induced_joint,
    is_robustly_typical,
    joint_from_x1x2,
    mutual_information,
    structured_terms,
)

from conftest import channels

H13 = (1 / 3) * math.log2(3) + (2 / 3) * math.log2(1.5)


def bern(p):
    return JointDist(("A",), np.array([1 - p, p]))


def test_entropy_examples():
    assert entropy(bern(0.5), "A") == pytest.approx(1.0, abs=1e-15)
    assert entropy(bern(1 / 3), "A") == pytest.approx(0.918296, abs=1e-6)
    assert entropy(bern(1 / 3), "A") == pytest.approx(H13, abs=1e-12)
    assert entropy(bern(0.0), "A") == 0.0


def test_entropy_unknown_variable():
    with pytest.raises(ValidationError):
        entropy(bern(0.5), "B")


def test_adder_uniform_inputs():
    d = joint_from_x1x2(binary_adder(), np.full((2, 2), 0.25))
    assert mutual_information(d, ("X1", "X2"), "Y") == pytest.approx(1.5, abs=1e-12)


def test_dsbs_one_third_into_adder():
    q = 1 / 3
    P = np.array([[(1 - q) / 2, q / 2], [q / 2, (1 - q) / 2]])
    d = joint_from_x1x2(binary_adder(), P)
    assert mutual_information(d, ("X1", "X2"), "Y") == pytest.approx(H13 + 1 - q, abs=1e-12)
    assert mutual_information(d, ("X1", "X2"), "Y") == pytest.approx(math.log2(3), abs=1e-12)


def test_independent_variables_have_zero_mi():
    d = JointDist(("A", "B"), np.outer([0.3, 0.7], [0.1, 0.5, 0.4]))
    assert mutual_information(d, "A", "B") == pytest.approx(0.0, abs=1e-15)


def test_overlapping_sets_rejected():
    d = JointDist(("A", "B"), np.full((2, 2), 0.25))
    with pytest.raises(ValidationError):
        conditional_mutual_information(d, "A", "B", "A")


def test_switch_one_passes_output():
    dist = StructuredInputDist.product([0.4, 0.6], [0.5, 0.5])
    j = induced_joint(binary_adder(), dist, 1.0)
    np.testing.assert_allclose(j.marginal(("Yd",)).mass[:3], j.marginal(("Y",)).mass, atol=1e-15)
    assert j.marginal(("Ye",)).mass[3] == pytest.approx(1.0)


def test_erasure_identity_on_joint():
    d = joint_from_x1x2(binary_adder(), np.full((2, 2), 0.25), 0.3)
    assert mutual_information(d, ("X1", "X2"), "Yd") == pytest.approx(0.3 * 1.5, abs=1e-12)


def test_single_u_gives_independent_inputs():
    dist = StructuredInputDist.product([0.2, 0.8], [0.7, 0.3])
    j = induced_joint(binary_adder(), dist, 0.5)
    assert mutual_information(j, "X1", "X2") == pytest.approx(0.0, abs=1e-14)


def test_induced_joint_alphabet_mismatch():
    with pytest.raises(ValidationError):
        induced_joint(binary_adder(), StructuredInputDist.product([1.0], [0.5, 0.5]), 0.5)


def test_typical_exact_frequencies():
    ref = JointDist(("A", "B"), np.array([[0.25, 0.25], [0.5, 0.0]]))
    a = np.array([0, 0, 1, 1])
    b = np.array([0, 1, 0, 0])
    assert is_robustly_typical([a, b], ref, 0.01)


def test_zero_probability_symbol_not_typical():
    ref = JointDist(("A", "B"), np.array([[0.25, 0.25], [0.5, 0.0]]))
    assert not is_robustly_typical([np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1])], ref, 0.9)


def test_typical_length_mismatch():
    ref = JointDist(("A", "B"), np.full((2, 2), 0.25))
    with pytest.raises(ValidationError):
        is_robustly_typical([np.zeros(3, int), np.zeros(4, int)], ref, 0.1)


def test_bernoulli_samples_typical_with_high_probability():
    rng = np.random.default_rng(7)
    ref = bern(0.5)
    hits = sum(is_robustly_typical(rng.integers(0, 2, 10**4), ref, 0.1) for _ in range(1000))
    assert hits / 1000 >= 0.99


def random_joint(seed, shape):
    rng = np.random.default_rng(seed)
    m = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    return JointDist(tuple("ABC"[: len(shape)]), m)


@given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 4), min_size=2, max_size=3))
def test_chain_rule(seed, shape):
    d = random_joint(seed, shape)
    assert entropy(d, ("A", "B")) == pytest.approx(entropy(d, "A") + conditional_entropy(d, "B", "A"), abs=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_cmi_symmetry_and_definition(seed):
    d = random_joint(seed, (2, 3, 2))
    i_ab = conditional_mutual_information(d, "A", "B", "C")
    assert i_ab == pytest.approx(conditional_mutual_information(d, "B", "A", "C"), abs=1e-12)
    assert i_ab == pytest.approx(conditional_entropy(d, "A", "C") - conditional_entropy(d, "A", ("B", "C")),
                                 abs=1e-12)
    assert i_ab >= 0


def random_structured(rng, k1, k2, u_size):
    return StructuredInputDist(rng.dirichlet(np.ones(u_size)), rng.dirichlet(np.ones(k1), u_size),
                               rng.dirichlet(np.ones(k2), u_size))


@given(channels(), st.integers(1, 3), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_data_processing_over_switch(ch, u_size, p, seed):
    dist = random_structured(np.random.default_rng(seed), ch.x1_size, ch.x2_size, u_size)
    j = induced_joint(ch, dist, p)
    assert mutual_information(j, ("X1", "X2"), "Yd") <= mutual_information(j, ("X1", "X2"), "Y") + 1e-12


@given(channels(), st.integers(1, 3), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_erasure_factorisation(ch, u_size, p, seed):
    dist = random_structured(np.random.default_rng(seed), ch.x1_size, ch.x2_size, u_size)
    j = induced_joint(ch, dist, p)
    lhs = conditional_mutual_information(j, ("X1", "X2"), "Yd", "U")
    rhs = p * conditional_mutual_information(j, ("X1", "X2"), "Y", "U")
    assert lhs == pytest.approx(rhs, abs=1e-10)


@given(channels(), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_structured_terms_match_generic_measures(ch, u_size, seed):
    dist = random_structured(np.random.default_rng(seed), ch.x1_size, ch.x2_size, u_size)
    j = induced_joint(ch, dist, 1.0)
    expect = [
        conditional_mutual_information(j, ("X1", "X2"), "Y", "U"),
        conditional_mutual_information(j, "X1", "Y", ("U", "X2")),
        conditional_mutual_information(j, "X2", "Y", ("U", "X1")),
        mutual_information(j, ("X1", "X2"), "Y"),
    ]
    np.testing.assert_allclose(structured_terms(ch, dist), expect, atol=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_structured_conditional_independence(seed):
    rng = np.random.default_rng(seed)
    dist = random_structured(rng, 3, 2, 3)
    J = dist.joint_ux1x2()
    for u in range(3):
        cond = J[u] / J[u].sum()
        np.testing.assert_allclose(cond, np.outer(cond.sum(axis=1), cond.sum(axis=0)), atol=1e-14)


def test_mixture_and_from_joint():
    P = np.array([[0.1, 0.2], [0.3, 0.4]])
    np.testing.assert_allclose(StructuredInputDist.from_joint(P).joint_x1x2(), P, atol=1e-15)
    a = StructuredInputDist.product([1, 0], [0, 1])
    b = StructuredInputDist.product([0, 1], [1, 0])
    m = StructuredInputDist.mixture([a, b], [0.25, 0.75])
    np.testing.assert_allclose(m.joint_x1x2(), [[0, 0.25], [0.75, 0]], atol=1e-15)
