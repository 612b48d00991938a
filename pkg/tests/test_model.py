import math

import numpy as np
import pytest
from scipy import integrate, sparse, stats

from dbnabs import (
    Kernel,
    ModelKind,
    SafeSet,
    ValidationError,
    build_generic,
    build_linear_gaussian,
    density_eval,
    dependency_dag,
    kernel_mass,
)
from dbnabs.model import adaptive_simpson, gaussian_mass


def test_linear_gaussian_parents_follow_nonzeros():
    m = build_linear_gaussian([[0.8, 0.0], [0.5, 0.8]], [0.2, 0.3])
    assert m.kind is ModelKind.LINEAR_GAUSSIAN
    assert m.parents == ((0,), (0, 1))
    assert dependency_dag(m).arcs == ((0, 0), (0, 1), (1, 1))
    assert dependency_dag(m).children == ((0, 1), (1,))


def test_dense_sparse_and_triplets_agree():
    dense = np.array([[0.8, 0.0, 0.0], [0.5, 0.8, 0.0], [0.0, 0.5, 0.8]])
    a = build_linear_gaussian(dense, [0.2] * 3)
    b = build_linear_gaussian(sparse.csr_matrix(dense), [0.2] * 3)
    c = build_linear_gaussian({"triplets": [[0, 0, 0.8], [1, 0, 0.5], [1, 1, 0.8], [2, 1, 0.5], [2, 2, 0.8]]}, [0.2] * 3)
    for m in (b, c):
        np.testing.assert_array_equal(m.phi, a.phi)
        assert m.parents == a.parents


@pytest.mark.parametrize(
    "phi, sigma",
    [
        ([[1.0, 0.0]], [0.2]),
        ([[1.0]], [0.0]),
        ([[1.0]], [-0.1]),
        ([[np.nan]], [0.2]),
        ([[1.0, 0.0], [0.0, 1.0]], [0.2]),
    ],
)
def test_linear_gaussian_rejects_bad_input(phi, sigma):
    with pytest.raises(ValidationError):
        build_linear_gaussian(phi, sigma)


def test_safe_set_validation():
    with pytest.raises(ValidationError):
        SafeSet([1.0], [1.0])
    with pytest.raises(ValidationError):
        SafeSet([0.0], [np.inf])
    A = SafeSet([-1, 0], [1, 3])
    assert A.volume == 6.0
    assert A.contains([1.0, 3.0]) and not A.contains([1.0001, 0.0])


def test_density_matches_scipy_normal():
    m = build_linear_gaussian([[0.8, 0.0], [0.5, 0.8]], [0.2, 0.3])
    got = density_eval(m, 1, 0.4, {0: 0.1, 1: -0.2})
    want = stats.norm.pdf(0.4, loc=0.5 * 0.1 + 0.8 * -0.2, scale=0.3)
    assert got == pytest.approx(want, rel=1e-14)
    # full-state and parent-order inputs give the same value
    assert density_eval(m, 1, 0.4, [0.1, -0.2]) == pytest.approx(want, rel=1e-14)


def test_density_edge_values():
    m = build_linear_gaussian([[0.8]], [0.2])
    assert density_eval(m, 0, np.inf, [0.0]) == 0.0
    with pytest.raises(ValidationError):
        density_eval(m, 0, np.nan, [0.0])
    with pytest.raises(ValidationError):
        density_eval(m, 3, 0.0, [0.0])


def test_gaussian_mass_far_tail_keeps_precision():
    # both tails computed directly so the difference is not lost to cancellation
    got = gaussian_mass(8.0, 9.0, 0.0, 1.0)
    want = stats.norm.sf(8.0) - stats.norm.sf(9.0)
    assert got == pytest.approx(want, rel=1e-10)


def test_adaptive_simpson_against_closed_form():
    assert adaptive_simpson(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-10)
    assert adaptive_simpson(lambda x: math.exp(-x * x), -3, 3) == pytest.approx(
        math.sqrt(math.pi) * math.erf(3.0), abs=1e-10
    )


def _laplace_kernel(parents, scale, coef):
    def pdf(x, pv):
        mu = sum(c * v for c, v in zip(coef, pv))
        return math.exp(-abs(x - mu) / scale) / (2 * scale)

    def quantile(u, pv):
        mu = sum(c * v for c, v in zip(coef, pv))
        return mu - scale * math.copysign(math.log(1 - 2 * abs(u - 0.5)), u - 0.5)

    return Kernel(parents, pdf, quantile=quantile)


def test_generic_kernel_mass_matches_quad():
    k = _laplace_kernel((0,), 0.3, (0.7,))
    m = build_generic([k])
    got = kernel_mass(m, 0, (-0.2, 0.5), [0.4])
    want, _ = integrate.quad(lambda x: k.pdf(x, (0.4,)), -0.2, 0.5, points=[0.28])
    assert got == pytest.approx(want, abs=1e-9)


def test_generic_rejects_unnormalized_kernel():
    bad = Kernel((0,), lambda x, pv: 2.0 * stats.norm.pdf(x))
    with pytest.raises(ValidationError, match="integrates"):
        build_generic([bad])


def test_generic_lipschitz_must_respect_dag():
    k = _laplace_kernel((0,), 0.3, (0.7,))
    with pytest.raises(ValidationError):
        build_generic([k, k], lipschitz=[[1.0, 1.0], [1.0, 0.0]])
