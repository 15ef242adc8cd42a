import numpy as np
import pytest
import scipy.sparse as sparse

from helpers import bumpy_sphere, cached_bumpy_shape, dense_generalized_eigh, unit_area_triangle
from lskit.errors import RankDeficientMass
from lskit.meshes import apply_rigid, random_rotation, validate_mesh
from lskit.spectral import MetricMeasure, compute_shape, eigenbasis, metric_measure, shape_dna
from lskit.synth import grid_patch, icosphere


@pytest.fixture(scope="module")
def ico2():
    v, t = icosphere(2)
    return validate_mesh(v, t, "ico2")


def test_unit_triangle_barycentric_mass():
    mm = metric_measure(unit_area_triangle())
    np.testing.assert_allclose(mm.mass_diag, np.full(3, 1.0 / 3.0), atol=1e-14)
    assert abs(mm.total_area - 1.0) < 1e-14


def test_stiffness_row_sums_zero(ico2):
    mm = metric_measure(ico2)
    row_sums = np.asarray(mm.stiffness.sum(axis=1)).ravel()
    scale = np.abs(mm.stiffness).max()
    assert np.abs(row_sums).max() <= 1e-10 * scale


def test_stiffness_symmetric(ico2):
    mm = metric_measure(ico2)
    L = mm.stiffness
    asym = sparse.linalg.norm(L - L.T, "fro") / sparse.linalg.norm(L, "fro")
    assert asym <= 1e-12


def test_uniform_scaling_scales_mass_not_stiffness(ico2):
    mm = metric_measure(ico2)
    s = 1.7
    scaled = validate_mesh(ico2.vertices * s, ico2.triangles, "scaled")
    mm_s = metric_measure(scaled)
    np.testing.assert_allclose(mm_s.mass_diag, mm.mass_diag * s**2, rtol=1e-12)
    d = sparse.linalg.norm(mm_s.stiffness - mm.stiffness, "fro")
    assert d <= 1e-12 * sparse.linalg.norm(mm.stiffness, "fro")


def test_k1_constant_eigenvector(ico2):
    mm = metric_measure(ico2)
    basis = eigenbasis(mm, 1)
    assert basis.eigenvalues[0] <= 1e-10
    expected = 1.0 / np.sqrt(mm.total_area)
    np.testing.assert_allclose(np.abs(basis.eigenvectors[:, 0]), expected, rtol=1e-8)
    assert basis.eigenvectors[:, 0].max() > 0  # sign convention


def test_unit_sphere_low_spectrum(ico2):
    # continuous sphere Laplacian eigenvalues are l(l+1); the l=1 triple is 2
    shape = compute_shape(ico2, 10)
    lam = shape.basis.eigenvalues
    assert lam[0] <= 1e-10
    np.testing.assert_allclose(lam[1:4], 2.0, rtol=0.05)
    np.testing.assert_allclose(lam[4:9], 6.0, rtol=0.05)


def test_full_basis_against_dense_oracle():
    mesh = grid_patch(6)  # 49 vertices
    mm = metric_measure(mesh)
    basis = eigenbasis(mm, mesh.num_vertices)
    lam_o, _ = dense_generalized_eigh(mm.stiffness, mm.mass_diag)
    np.testing.assert_allclose(basis.eigenvalues, lam_o, atol=1e-8 * lam_o.max())
    gram = basis.eigenvectors.T @ (mm.mass_diag[:, None] * basis.eigenvectors)
    assert np.abs(gram - np.eye(mesh.num_vertices)).max() <= 1e-10


def test_generalized_residual_and_orthonormality():
    shape = cached_bumpy_shape(1, 2, 25)
    L = shape.mm.stiffness
    scale = sparse.linalg.norm(L, "fro")
    resid = L @ shape.basis.eigenvectors - (
        shape.mm.mass_diag[:, None] * shape.basis.eigenvectors
    ) * shape.basis.eigenvalues[None, :]
    assert np.linalg.norm(resid, axis=0).max() <= 1e-8 * scale
    gram = shape.basis.eigenvectors.T @ (shape.mm.mass_diag[:, None] * shape.basis.eigenvectors)
    assert np.abs(gram - np.eye(25)).max() <= 1e-8
    lam = shape.basis.eigenvalues
    assert lam[0] <= 1e-8 * lam[-1]
    assert np.all(np.diff(lam) >= -1e-12)


def test_rigid_motion_invariance():
    mesh = bumpy_sphere(2, 2)
    rng = np.random.default_rng(5)
    moved = apply_rigid(mesh, random_rotation(rng), np.array([0.4, -2.0, 1.0]), "moved")
    mm, mm2 = metric_measure(mesh), metric_measure(moved)
    np.testing.assert_allclose(mm2.mass_diag, mm.mass_diag, rtol=1e-9)
    d = sparse.linalg.norm(mm2.stiffness - mm.stiffness, "fro")
    assert d <= 1e-9 * sparse.linalg.norm(mm.stiffness, "fro")
    b1 = eigenbasis(mm, 15)
    b2 = eigenbasis(mm2, 15)
    np.testing.assert_allclose(b2.eigenvalues, b1.eigenvalues, rtol=1e-9, atol=1e-12)


def test_connected_sphere_has_single_zero_mode(ico2):
    shape = compute_shape(ico2, 6)
    lam = shape.basis.eigenvalues
    assert lam[0] <= 1e-10
    assert lam[1] > 1e-3  # next mode well away from zero
    assert np.all(lam >= 0)


def test_eigenbasis_deterministic():
    a = cached_bumpy_shape(3, 1, 12)
    mm = metric_measure(bumpy_sphere(3, 1))
    again = eigenbasis(mm, 12)
    np.testing.assert_array_equal(a.basis.eigenvectors, again.eigenvectors)
    np.testing.assert_array_equal(a.basis.eigenvalues, again.eigenvalues)


def test_sign_convention():
    shape = cached_bumpy_shape(4, 1, 10)
    vecs = shape.basis.eigenvectors
    idx = np.argmax(np.abs(vecs), axis=0)
    assert np.all(vecs[idx, np.arange(10)] > 0)


def test_shape_dna_prefix_and_errors():
    from lskit.spectral import SpectralBasis

    basis = SpectralBasis(np.array([0.0, 2.1, 2.2]), np.zeros((5, 3)), "toy")
    np.testing.assert_array_equal(shape_dna(basis, 2), [0.0, 2.1])
    with pytest.raises(ValueError):
        shape_dna(basis, 4)


def test_shape_dna_rigid_invariance():
    mesh = bumpy_sphere(6, 1)
    rng = np.random.default_rng(11)
    moved = apply_rigid(mesh, random_rotation(rng), np.array([1.0, 1.0, -3.0]), "m")
    d1 = shape_dna(compute_shape(mesh, 12).basis)
    d2 = shape_dna(compute_shape(moved, 12).basis)
    scale = max(d1.max(), 1.0)
    assert np.abs(d1 - d2).max() <= 1e-9 * scale


def test_rank_deficient_mass_rejected():
    mesh = unit_area_triangle()
    mm = metric_measure(mesh)
    bad = MetricMeasure(mm.stiffness, np.array([1.0, 0.0, 1.0]), "bad")
    with pytest.raises(RankDeficientMass):
        eigenbasis(bad, 2)


def test_k_out_of_range():
    mm = metric_measure(unit_area_triangle())
    with pytest.raises(ValueError):
        eigenbasis(mm, 4)
    with pytest.raises(ValueError):
        eigenbasis(mm, 0)
