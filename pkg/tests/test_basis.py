import numpy as np
import pytest

from hdg2d.basis import eval_basis, gram_condition, p_dim, reference_basis
from hdg2d.quadrature import edge_quadrature, triangle_quadrature


@pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
def test_dimensions(k):
    basis = reference_basis(k)
    assert basis.cell_dim == (k + 1) * (k + 2) // 2 == p_dim(k)
    assert basis.edge_dim == k + 1


def test_k0_constant_with_zero_gradient():
    basis = reference_basis(0)
    pts = np.array([[0.25, 0.25], [0.1, 0.7]])
    vals, grads = eval_basis(basis, pts)
    assert np.abs(vals - np.sqrt(2.0)).max() < 1e-15
    assert np.abs(grads).max() == 0.0


def test_k2_has_six_functions():
    assert reference_basis(2).cell_dim == 6


@pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
def test_cell_orthonormal_under_quadrature(k):
    basis = reference_basis(k)
    rule = triangle_quadrature(2 * k)
    vals = basis.cell.values(rule.xy)
    gram = (vals * rule.weights[:, None]).T @ vals
    assert np.abs(gram - np.eye(basis.cell_dim)).max() < 1e-13
    assert np.isfinite(gram_condition(basis))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_edge_orthonormal(k):
    basis = reference_basis(k)
    rule = edge_quadrature(2 * k)
    vals = basis.edge.values(rule.t)
    gram = (vals * rule.weights[:, None]).T @ vals
    assert np.abs(gram - np.eye(k + 1)).max() < 1e-13


def test_partition_of_unity_projection():
    basis = reference_basis(3)
    rule = triangle_quadrature(6)
    vals = basis.cell.values(rule.xy)
    coeff = np.einsum("q,qi->i", rule.weights, vals)  # L2 moments of 1
    recon = vals @ coeff
    assert np.abs(recon - 1.0).max() < 1e-13


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_gradients_match_finite_differences(k, rng):
    basis = reference_basis(k)
    pts = rng.uniform(0.05, 0.4, size=(12, 2))
    _, grads = eval_basis(basis, pts)
    step = 1e-6
    for a in range(2):
        e = np.zeros(2)
        e[a] = step
        fd = (basis.cell.values(pts + e) - basis.cell.values(pts - e)) / (2 * step)
        assert np.abs(fd - grads[..., a]).max() < 1e-7


def test_degree_slice_is_top_modes():
    basis = reference_basis(3)
    sl = basis.cell.degree_slice(3)
    assert sl == slice(6, 10)


def test_degree_out_of_range():
    with pytest.raises(ValueError):
        reference_basis(5)
