import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_l2, rational_weighted_mean
from swarmlearn.errors import EmptyInput, NonFinite, ShapeMismatch
from swarmlearn.params import ShapeSpec, WeightVector, l2_distance, linear_combine


def wv(*xs):
    return WeightVector(list(xs))


def test_single_input_is_identity():
    v = wv(2, 4)
    assert linear_combine([v], [7]) is v


def test_symmetric_mean():
    assert linear_combine([wv(0, 0), wv(2, 2)], [1, 1]).tolist() == [1.0, 1.0]


def test_rational_oracle_case():
    vecs = [wv(1, 0), wv(5, 8), wv(-3, 2)]
    expected = rational_weighted_mean([v.values for v in vecs], [1, 2, 1])
    assert expected == [2.0, 4.5]
    np.testing.assert_allclose(linear_combine(vecs, [1, 2, 1]).values, expected, rtol=0, atol=1e-12)


def test_l2_examples():
    assert l2_distance(wv(1, 1), wv(1, 1)) == 0.0
    assert l2_distance(wv(0, 0), wv(3, 4)) == 5.0


def test_l2_matches_naive_loop(rng):
    a, b = rng.normal(size=10), rng.normal(size=10)
    assert abs(l2_distance(WeightVector(a), WeightVector(b)) - naive_l2(a, b)) < 1e-12


def test_errors():
    with pytest.raises(EmptyInput):
        linear_combine([], [])
    with pytest.raises(ShapeMismatch):
        linear_combine([wv(1), wv(1, 2)], [1, 1])
    with pytest.raises(ShapeMismatch):
        l2_distance(wv(1), wv(1, 2))
    with pytest.raises(NonFinite):
        wv(1.0, float("nan"))
    with pytest.raises(ValueError):
        linear_combine([wv(1), wv(2)], [0, 0])
    with pytest.raises(ValueError):
        linear_combine([wv(1), wv(2)], [1, -1])


def test_weight_vector_is_frozen():
    src = np.array([1.0, 2.0])
    v = WeightVector(src)
    src[0] = 99.0
    assert v.values[0] == 1.0
    with pytest.raises(ValueError):
        v.values[0] = 5.0
    with pytest.raises(AttributeError):
        v.values = np.zeros(2)


def test_shape_unpack_and_json():
    s = ShapeSpec(((2, 3), (2,), (1,)))
    assert s.total_len == 9
    parts = WeightVector(np.arange(9.0), s).tensors()
    assert [p.shape for p in parts] == [(2, 3), (2,), (1,)]
    assert parts[1].tolist() == [6.0, 7.0]
    assert ShapeSpec.from_json(s.to_json()) == s
    with pytest.raises(ShapeMismatch):
        WeightVector(np.zeros(8), s)


vectors = st.integers(1, 6).flatmap(lambda n: st.integers(1, 5).flatmap(lambda d: st.tuples(
    st.lists(st.lists(st.floats(-1e3, 1e3), min_size=d, max_size=d), min_size=n, max_size=n),
    st.lists(st.integers(1, 1000), min_size=n, max_size=n))))


@settings(max_examples=200, deadline=None)
@given(vectors, st.randoms(use_true_random=False))
def test_joint_permutation_is_bit_identical(case, rnd):
    vs, cs = case
    order = list(range(len(vs)))
    rnd.shuffle(order)
    a = linear_combine([WeightVector(v) for v in vs], cs)
    b = linear_combine([WeightVector(vs[i]) for i in order], [cs[i] for i in order])
    assert a.values.tobytes() == b.values.tobytes()


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_result_lies_in_coordinatewise_hull(case):
    vs, cs = case
    out = linear_combine([WeightVector(v) for v in vs], cs).values
    arr = np.array(vs)
    tol = 1e-9 * (1 + np.abs(arr).max())
    assert np.all(out >= arr.min(axis=0) - tol) and np.all(out <= arr.max(axis=0) + tol)


@settings(max_examples=100, deadline=None)
@given(vectors, st.integers(1, 50))
def test_coefficient_scaling_is_invariant(case, k):
    vs, cs = case
    a = linear_combine([WeightVector(v) for v in vs], cs).values
    b = linear_combine([WeightVector(v) for v in vs], [c * k for c in cs]).values
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
