import numpy as np
import pytest

from manipatch.errors import UnsupportedDegree
from manipatch.parameterization import Parameterization, linear_jet
from manipatch.series import Scaling, VectorSeq, enumerate_multiindices
from manipatch.validation import (
    BoundSet,
    bound_Y,
    bound_Z1,
    bounds_from_scratch,
    build_A,
    compute_bounds,
    is_proof_valid,
    newton_like_map,
    operator_norm_K,
    radii_report,
    radii_root_interval,
)


@pytest.fixture(scope="module")
def bridge_A(bridge_par):
    return build_A(bridge_par)


def bound_set(Y, Z0, Z1, Z2):
    return BoundSet(
        np.array([Y]), np.array([Z0]), np.array([Z1]), np.array([Z2]), Scaling.ones(1)
    )


def test_A_inverts_the_finite_block(bridge_A):
    assert np.allclose(bridge_A.finite_block @ bridge_A.derivative, np.eye(bridge_A.size), atol=1e-10)


def test_K_of_identity():
    ordering = enumerate_multiindices(2, 4)
    K = operator_norm_K(np.eye(2 * ordering.count), ordering, gamma=(0.3, 2.0))
    assert np.allclose(K, np.eye(2))


def check_K_bounds_the_action(samples):
    rng = np.random.default_rng(0)
    ordering = enumerate_multiindices(2, 4)
    n, count = 2, ordering.count
    gamma = Scaling((0.6, 1.4))
    w = gamma.weights(ordering)
    for _ in range(samples):
        B = rng.normal(size=(n * count, n * count)) * rng.uniform(0, 1, (n * count, n * count)) ** 4
        K = operator_norm_K(B, ordering, gamma=gamma)
        h = rng.normal(size=n * count) + 1j * rng.normal(size=n * count)
        Bh = (B @ h).reshape(count, n).T
        h_norms = np.abs(h.reshape(count, n).T) @ w
        assert np.all(np.abs(Bh) @ w <= K @ h_norms * (1 + 1e-12))


def test_K_bounds_the_action():
    check_K_bounds_the_action(50)


@pytest.mark.slow
def test_K_bounds_the_action_thoroughly():
    check_K_bounds_the_action(1000)


def test_root_interval():
    r0, r1 = radii_root_interval(bound_set(1e-10, 0.1, 0.1, 1.0))
    assert r0 == pytest.approx(1.25e-10, rel=1e-6)
    assert r1 == pytest.approx(0.8, rel=1e-6)
    assert radii_root_interval(bound_set(1.0, 0.1, 0.1, 1.0)) is None
    assert radii_root_interval(bound_set(0.0, 0.5, 0.6, 1.0)) is None


def test_root_interval_linear():
    r0, r1 = radii_root_interval(bound_set(1e-8, 0.0, 0.5, 0.0))
    assert r0 == pytest.approx(2e-8, rel=1e-6)
    assert r1 == np.inf


def test_report_with_exact_zero_defect():
    report = radii_report(bound_set(0.0, 0.1, 0.1, 1.0), 1e-5, 10)
    assert report.verdict
    assert report.root_interval[0] == 0.0
    assert report.r_used == pytest.approx(1e-8)


def test_report_rejects_large_root():
    report = radii_report(bound_set(1e-4, 0.1, 0.1, 1.0), 1e-5, 10)
    assert report.root_interval is not None
    assert not report.verdict


def test_bridge_proof(bridge_par, bridge_A):
    report = is_proof_valid(bridge_par, bridge_A, (0.1, 0.1), interval=True)
    assert report.verdict
    assert report.bounds.interval
    assert report.r_used <= bridge_par.problem.r_max
    assert report.injective
    assert report.as_dict()["N"] == bridge_par.N


def test_interval_bounds_dominate(bridge_par, bridge_A):
    gamma = (0.5, 0.5)
    loose = compute_bounds(bridge_par, bridge_A, gamma, interval=False)
    tight = compute_bounds(bridge_par, bridge_A, gamma, interval=True)
    for name in ("Y", "Z0", "Z1", "Z2"):
        assert np.all(getattr(tight, name) >= getattr(loose, name)), name


def test_rescaled_bounds_match_from_scratch(bridge_par, bridge_A):
    rng = np.random.default_rng(1)
    for t in rng.uniform(0.8, 1.6, 5):
        gamma = (t, t)
        cheap = compute_bounds(bridge_par, bridge_A, gamma)
        scratch = bounds_from_scratch(bridge_par, gamma)
        assert scratch.from_scratch
        assert cheap.Y == pytest.approx(scratch.Y, rel=1e-7, abs=1e-13)
        assert cheap.Z1 == pytest.approx(scratch.Z1, rel=1e-10)
        assert cheap.Z2 == pytest.approx(scratch.Z2, rel=1e-7)
        # both Z0 are rounding noise
        assert cheap.Z0 == pytest.approx(scratch.Z0, abs=1e-9)


def test_fallback_recomputes_from_scratch(bridge_par, bridge_A):
    bounds = compute_bounds(bridge_par, bridge_A, (0.9, 0.9), z0_fallback=0.0)
    assert bounds.from_scratch
    assert not compute_bounds(bridge_par, bridge_A, (0.9, 0.9)).from_scratch


def test_cubic_field_has_no_proof(fhn_par):
    with pytest.raises(UnsupportedDegree) as info:
        is_proof_valid(fhn_par, None, (1.0, 1.0))
    assert info.value.degree == 3
    assert "defect" in str(info.value)


def test_newton_like_map_moves_by_Y(bridge_par, bridge_A):
    T = newton_like_map(bridge_A, bridge_par.coeffs)
    a = bridge_par.coeffs.with_order(T.max_order)
    Y = bound_Y(bridge_A, (1.0, 1.0))
    assert np.abs(T.values - a.values).sum(axis=1) == pytest.approx(Y, abs=1e-12)


def test_newton_like_map_contracts(bridge_par, bridge_A):
    rng = np.random.default_rng(2)
    bounds = compute_bounds(bridge_par, bridge_A, (1.0, 1.0))
    a = bridge_par.coeffs
    r = 1e-6
    h = rng.normal(size=a.values.shape) + 1j * rng.normal(size=a.values.shape)
    h = r * h / np.abs(h).sum(axis=1, keepdims=True)
    moved = newton_like_map(bridge_A, VectorSeq(a.ordering, a.values + h))
    fixed = newton_like_map(bridge_A, a)
    change = np.abs(moved.values - fixed.values).sum(axis=1)
    assert np.all(change <= (bounds.Z0 + bounds.Z1) * r + bounds.Z2 * r**2 + 1e-13)


@pytest.mark.parametrize("gamma", [(1.0, 1.0), (0.4, 0.4), (2.5, 2.5)])
def test_tail_of_A_is_small(bridge_par, bridge_A, gamma):
    rng = np.random.default_rng(4)
    N, n = bridge_par.N, bridge_par.problem.n
    ordering = enumerate_multiindices(2, bridge_par.residual_order)
    w = bridge_par.problem.scaling(gamma).weights(ordering)
    bound = 1.0 / (N * bridge_par.problem.spectral.min_abs_re)
    head = bridge_A.ordering.count
    for _ in range(20):
        values = rng.normal(size=(n, ordering.count)) + 1j * rng.normal(size=(n, ordering.count))
        values[:, :head] = 0.0
        image = bridge_A.apply(VectorSeq(ordering, values))
        assert np.all(image.values[:, :head] == 0.0)
        ratio = (np.abs(image.values) @ w) / (np.abs(values) @ w)
        assert np.all(ratio <= bound * (1 + 1e-12))


def test_bridge_Z1_closed_form(bridge):
    beta = bridge.field.parameters["beta"]
    for N in (12, 30):
        problem = bridge.with_order(N)
        par = Parameterization(linear_jet(problem), problem)
        tail = 1.0 / (N * abs(problem.spectral.lambdas[0].real))
        floating = bound_Z1(par, (1.0, 1.0))
        rigorous = bound_Z1(par, (1.0, 1.0), interval=True)
        assert floating[1:] == pytest.approx([tail, tail, (1 + beta) * tail], rel=1e-14)
        assert np.all(rigorous >= floating)
        assert rigorous[1:] == pytest.approx(floating[1:], rel=1e-12)
    assert tail == pytest.approx(1 / 15)


def test_no_proof_at_huge_scaling(bridge_par, bridge_A):
    report = is_proof_valid(bridge_par, bridge_A, (1e3, 1e3), interval=False)
    assert not report.verdict
    assert report.root_interval is None
