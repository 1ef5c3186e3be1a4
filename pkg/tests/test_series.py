from math import comb

import numpy as np
import pytest

from manipatch.errors import DimensionMismatch, SizeError
from manipatch.series import (
    CoeffSeq,
    Scaling,
    VectorSeq,
    cauchy_product,
    convolution_matrix,
    ell1_norm,
    enumerate_multiindices,
    evaluate,
    index_count,
    rescale,
)


def random_seq(rng, n_s, N, decay=0.7):
    ordering = enumerate_multiindices(n_s, N)
    values = rng.normal(size=ordering.count) + 1j * rng.normal(size=ordering.count)
    return CoeffSeq(ordering, values * decay ** ordering.orders)


def test_graded_order():
    ordering = enumerate_multiindices(2, 3)
    assert [ordering.index(k) for k in range(ordering.count)] == [
        (0, 0),
        (1, 0),
        (0, 1),
        (2, 0),
        (1, 1),
        (0, 2),
    ]
    assert ordering.order_slice(2) == slice(3, 6)


def test_counts():
    assert index_count(3, 5) == comb(7, 3)
    assert len(enumerate_multiindices(3, 5)) == 35
    assert len(enumerate_multiindices(1, 9)) == 9


def test_positions_match_enumeration():
    ordering = enumerate_multiindices(3, 9)
    assert np.array_equal(ordering.positions(ordering.indices), np.arange(ordering.count))
    for k in (0, 1, 17, ordering.count - 1):
        assert ordering.position(ordering.index(k)) == k


def test_position_does_not_depend_on_order():
    assert enumerate_multiindices(2, 5).position((1, 2)) == enumerate_multiindices(
        2, 10
    ).position((1, 2))


def test_position_outside_truncation():
    with pytest.raises(KeyError):
        enumerate_multiindices(2, 3).position((2, 1))
    with pytest.raises(ValueError):
        enumerate_multiindices(2, 3).position((-1, 1))


def test_size_error():
    with pytest.raises(SizeError):
        enumerate_multiindices(10, 100)


def test_cauchy_product_is_polynomial_product():
    rng = np.random.default_rng(0)
    u, v = random_seq(rng, 2, 4), random_seq(rng, 2, 4)
    w = cauchy_product(u, v, 7)
    theta = np.array([0.3, -0.5])
    as_vec = lambda s: VectorSeq.from_components([s])
    assert evaluate(as_vec(w), theta)[0] == pytest.approx(
        evaluate(as_vec(u), theta)[0] * evaluate(as_vec(v), theta)[0], rel=1e-13
    )


def test_cauchy_product_truncates():
    ordering = enumerate_multiindices(2, 3)
    u = CoeffSeq.delta(ordering, (1, 0))
    v = CoeffSeq.delta(ordering, (0, 2))
    assert not np.any(cauchy_product(u, v, 3).values)
    assert cauchy_product(u, v, 4)[(1, 2)] == 1.0


def test_cauchy_product_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        cauchy_product(
            CoeffSeq.delta(enumerate_multiindices(2, 3), (0, 0)),
            CoeffSeq.delta(enumerate_multiindices(3, 3), (0, 0, 0)),
            3,
        )


@pytest.mark.parametrize("nu", [1.0, 0.7])
def test_banach_algebra(nu):
    rng = np.random.default_rng(1)
    for _ in range(500):
        u, v = random_seq(rng, 2, 6), random_seq(rng, 2, 6)
        product = cauchy_product(u, v, 8)
        assert ell1_norm(product, nu) <= ell1_norm(u, nu) * ell1_norm(v, nu) * (1 + 1e-12)


@pytest.mark.slow
def test_banach_algebra_many_pairs():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        n_s = int(rng.integers(1, 4))
        u, v = random_seq(rng, n_s, 5, 0.9), random_seq(rng, n_s, 5, 0.9)
        product = cauchy_product(u, v, 9)
        assert ell1_norm(product) <= ell1_norm(u) * ell1_norm(v) * (1 + 1e-12)


def test_ell1_norm():
    ordering = enumerate_multiindices(2, 3)
    u = CoeffSeq(ordering, [1, 0, 2j, 0, -3, 0])
    assert ell1_norm(u) == 6.0
    assert ell1_norm(u, 0.5) == pytest.approx(1 + 1 + 0.75)
    with pytest.raises(ValueError):
        ell1_norm(u, 0.0)


def test_convolution_matrix():
    rng = np.random.default_rng(3)
    p, c = random_seq(rng, 2, 5), random_seq(rng, 2, 5)
    M = convolution_matrix(p.values, 2, 5)
    assert np.allclose(M @ c.values, cauchy_product(p, c, 5).values, atol=1e-14)


def test_rescale_identity():
    rng = np.random.default_rng(4)
    a = VectorSeq.from_components([random_seq(rng, 2, 6), random_seq(rng, 2, 6)])
    gamma = (0.4, 1.3)
    theta = np.array([0.5, -0.6])
    assert np.allclose(
        evaluate(rescale(a, gamma), theta), evaluate(a, np.multiply(gamma, theta)), atol=1e-13
    )


def test_scaling_validation():
    with pytest.raises(ValueError):
        Scaling((1.0, -2.0))
    with pytest.raises(ValueError):
        Scaling((1.0, 2.0), ((0, 1),))
    gamma = Scaling((2.0, 0.5))
    assert np.allclose(gamma.weights(enumerate_multiindices(2, 3)), [1, 2, 0.5, 4, 1, 0.25])
    assert (gamma * gamma.inverse()).is_identity()


def test_evaluation_outside_polydisc_warns(caplog):
    a = VectorSeq.from_components([CoeffSeq.delta(enumerate_multiindices(1, 3), (1,))])
    with caplog.at_level("WARNING", logger="manipatch"):
        evaluate(a, [2.0])
    assert "outside the unit polydisc" in caplog.text


def test_vector_seq_with_order():
    rng = np.random.default_rng(5)
    a = VectorSeq.from_components([random_seq(rng, 2, 4)])
    padded = a.with_order(7)
    assert padded.max_order == 7
    assert np.array_equal(padded.values[:, : a.ordering.count], a.values)
    assert not np.any(padded.values[:, a.ordering.count :])
    assert padded.norm() == pytest.approx(a.norm())
