import numpy as np
import pytest

from manipatch.errors import DefectiveMatrix, NonHyperbolic, ResonanceDetected
from manipatch.spectrum import (
    check_nonresonance,
    eigenpairs,
    resonance_order,
    select_and_pair,
)

FHN_P = [0.003374970076610, 0.0, 0.000674994015322]
FHN_LAMBDAS = [-0.662724919921474, -0.184083645070452]
FHN_VECTORS = [
    [-0.576099055982516, 0.381795200742850, -0.722732524787547],
    [-0.966141520359494, 0.177850852721684, -0.186921472344981],
]


def test_eigenpairs_residuals():
    rng = np.random.default_rng(0)
    J = rng.normal(size=(5, 5))
    for lam, v in eigenpairs(J):
        assert np.abs(J @ v - lam * v).max() <= 1e-10 * np.abs(v).max()
        assert np.linalg.norm(v) == pytest.approx(1.0)
        k = int(np.argmax(np.abs(v)))
        assert v[k].imag == pytest.approx(0.0, abs=1e-15) and v[k].real > 0


def test_repeated_semisimple_eigenvalue():
    pairs = eigenpairs(np.diag([-1.0, -1.0, -2.0]))
    vectors = np.stack([v for _, v in pairs], axis=1)
    assert np.linalg.matrix_rank(vectors) == 3


def test_defective_matrix():
    with pytest.raises(DefectiveMatrix):
        eigenpairs(np.array([[-1.0, 1.0], [0.0, -1.0]]))


def test_anchor_normalization():
    J = np.array([[-2.0, 1.0], [0.0, -1.0]])
    for lam, v in eigenpairs(J, anchor=0):
        assert v[0] == 1.0


def test_select_real_stable():
    J = np.diag([-3.0, 2.0, -1.0])
    spectral = select_and_pair(eigenpairs(J))
    assert np.allclose(spectral.lambdas, [-3.0, -1.0])
    assert spectral.pairing == ()
    assert np.allclose(np.abs(spectral.vectors), [[1, 0], [0, 0], [0, 1]])


def test_select_unstable_negates():
    J = np.diag([-3.0, 2.0, -1.0])
    spectral = select_and_pair(eigenpairs(J), "unstable")
    assert np.allclose(spectral.lambdas, [-2.0])
    assert spectral.stability == "unstable"


def test_non_hyperbolic():
    with pytest.raises(NonHyperbolic):
        select_and_pair(eigenpairs(np.diag([-1.0, 0.0])))


def test_lorenz_origin(lorenz):
    spectral = lorenz.spectral
    assert lorenz.n == 3 and lorenz.field.d == 2 and lorenz.n_s == 2
    assert np.allclose(spectral.p, 0.0)
    slow = -8.0 / 3.0
    fast = (-11.0 - np.sqrt(81.0 + 4.0 * 280.0)) / 2.0
    assert np.allclose(spectral.lambdas, [fast, slow], atol=1e-13)


def test_fhn_matches_published_values(fhn):
    spectral = fhn.spectral
    assert np.allclose(spectral.p, FHN_P, atol=1e-12)
    assert np.allclose(spectral.lambdas.real, FHN_LAMBDAS, atol=1e-12)
    assert np.allclose(spectral.lambdas.imag, 0.0)
    for k, published in enumerate(FHN_VECTORS):
        # eigenvectors are defined up to sign
        v = spectral.vectors[:, k].real
        assert min(np.abs(v - published).max(), np.abs(v + published).max()) < 1e-12


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.9])
def test_bridge_pair(beta):
    from manipatch.problems import load_problem

    bridge = load_problem("bridge", N=5, overrides={"beta": beta})
    lam = -0.5 * np.sqrt(2 - beta) + 0.5j * np.sqrt(2 + beta)
    spectral = bridge.spectral
    assert bridge.n == 4 and bridge.n_s == 2
    assert spectral.pairing == ((0, 1),)
    assert np.allclose(spectral.lambdas, [lam, np.conj(lam)], atol=1e-13)
    assert np.allclose(spectral.vectors[:, 0], [1, lam, lam**2, lam**3], atol=1e-12)
    assert np.array_equal(spectral.vectors[:, 1], np.conj(spectral.vectors[:, 0]))


def test_lorenz_eye_is_a_pair(lorenz_eye):
    spectral = lorenz_eye.spectral
    assert spectral.stability == "unstable"
    assert spectral.pairing == ((0, 1),)
    assert np.all(spectral.lambdas.real < 0)
    assert spectral.lambdas[0].imag > 0


def test_resonance_detected():
    with pytest.raises(ResonanceDetected) as info:
        check_nonresonance([-1.0, -2.0])
    assert info.value.alpha == (2, 0)
    assert info.value.j == 1


def test_non_resonant():
    check = check_nonresonance([-1.0, -2.5])
    assert check.max_order == resonance_order([-1.0, -2.5]) == 4
    assert check.min_gap > 0.1
    assert check.report()["nonresonant"]
