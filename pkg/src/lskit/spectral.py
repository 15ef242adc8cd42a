"""Per-shape discrete spectral geometry.

Builds the cotangent stiffness matrix and barycentric lumped mass matrix of a
triangle mesh, solves the generalized eigenproblem L phi = lambda M phi for the
truncated Laplace-Beltrami basis, and extracts spectrum-prefix (shape-DNA)
descriptors.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as sla

from .errors import DegenerateGeometry, RankDeficientMass, SolverFailure, SpectralGapWarning
from .meshes import Mesh

logger = logging.getLogger(__name__)

# dense generalized solve below this vertex count, shift-invert iteration above
DENSE_SOLVER_MAX_VERTICES = 2000

# relative gap under which adjacent eigenvalues are treated as one cluster
CLUSTER_GAP_TOL = 1e-8


@dataclass(frozen=True)
class MetricMeasure:
    """Cotangent stiffness L (sparse, PSD) and lumped vertex areas (diagonal of M)."""

    stiffness: sparse.csr_matrix
    mass_diag: np.ndarray
    shape_id: str = ""

    @property
    def mass(self):
        return sparse.diags(self.mass_diag)

    @property
    def num_vertices(self):
        return self.mass_diag.shape[0]

    @property
    def total_area(self):
        return float(self.mass_diag.sum())


@dataclass(frozen=True)
class SpectralBasis:
    """Truncated Laplace-Beltrami eigenbasis of one shape.

    eigenvalues : (k,) ascending, nonnegative
    eigenvectors : (n, k), M-orthonormal columns
    clusters : list of (start, stop) index ranges of near-degenerate eigenvalues
        (relative gap below CLUSTER_GAP_TOL); comparisons of individual
        eigenvectors are only well-posed outside these ranges.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    shape_id: str = ""
    clusters: tuple = field(default_factory=tuple)

    @property
    def k(self):
        return self.eigenvalues.shape[0]

    @property
    def num_vertices(self):
        return self.eigenvectors.shape[0]


@dataclass(frozen=True)
class Shape:
    """Bundle of everything the pipeline needs per shape."""

    mesh: Mesh
    mm: MetricMeasure
    basis: SpectralBasis

    @property
    def shape_id(self):
        return self.mesh.shape_id

    def dna(self, d=None):
        return shape_dna(self.basis, d)


def metric_measure(mesh: Mesh) -> MetricMeasure:
    """Cotangent stiffness and barycentric (one-third triangle area) mass.

    The stiffness is assembled in its positive semidefinite convention:
    off-diagonal entries -(cot a + cot b)/2, diagonal minus the row sum, so
    that constants are in the kernel and x^T L x >= 0.
    """
    v, t = mesh.vertices, mesh.triangles
    n = mesh.num_vertices

    # edge vectors opposite each corner: corner c sees edge t[c+1] -> t[c+2]
    p = [v[t[:, i]] for i in range(3)]
    edges = [p[2] - p[1], p[0] - p[2], p[1] - p[0]]
    double_area = np.linalg.norm(np.cross(edges[0], -edges[2]), axis=1)

    rows, cols, vals = [], [], []
    for corner in range(3):
        a, b = (corner + 1) % 3, (corner + 2) % 3
        # cot of the angle at `corner` weights the opposite edge (a, b)
        u, w = -edges[b], edges[a]
        cot = np.einsum("ij,ij->i", u, w) / double_area
        half_cot = 0.5 * cot
        i, j = t[:, a], t[:, b]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-half_cot, -half_cot, half_cot, half_cot]
    vals = np.concatenate(vals)
    if not np.all(np.isfinite(vals)):
        raise DegenerateGeometry(f"non-finite cotangent weight on mesh '{mesh.shape_id}'")
    L = sparse.coo_matrix(
        (vals, (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()

    areas = 0.5 * double_area
    mass = np.zeros(n)
    for corner in range(3):
        np.add.at(mass, t[:, corner], areas / 3.0)
    if np.any(mass <= 0):
        raise DegenerateGeometry(f"vertex with zero lumped area on mesh '{mesh.shape_id}'")
    return MetricMeasure(L, mass, mesh.shape_id)


def _eigen_clusters(eigenvalues, tol=CLUSTER_GAP_TOL):
    """(start, stop) ranges of adjacent eigenvalues closer than tol * scale."""
    lam = np.asarray(eigenvalues)
    if lam.size < 2:
        return ()
    scale = max(1.0, float(np.max(np.abs(lam))))
    close = np.diff(lam) < tol * scale
    clusters = []
    start = None
    for i, c in enumerate(close):
        if c and start is None:
            start = i
        elif not c and start is not None:
            clusters.append((start, i + 1))
            start = None
    if start is not None:
        clusters.append((start, lam.size))
    return tuple(clusters)


def _fix_signs(vecs):
    """Flip columns so the entry of largest magnitude is positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigenbasis(mm: MetricMeasure, k: int) -> SpectralBasis:
    """k smallest generalized eigenpairs of (L, M), M-orthonormal, ascending.

    Dense symmetric solve (via the M^(-1/2) similarity transform, M being
    diagonal) up to DENSE_SOLVER_MAX_VERTICES vertices; shift-invert Lanczos
    beyond that. Deterministic output: fixed solver start vector and a sign
    convention making each eigenvector's largest-magnitude entry positive.
    """
    n = mm.num_vertices
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in 1..{n}")
    if np.any(mm.mass_diag <= 0):
        raise RankDeficientMass(f"mass matrix of '{mm.shape_id}' has non-positive entries")

    inv_sqrt_m = 1.0 / np.sqrt(mm.mass_diag)
    if n <= DENSE_SOLVER_MAX_VERTICES:
        A = mm.stiffness.toarray() * inv_sqrt_m[:, None] * inv_sqrt_m[None, :]
        A = 0.5 * (A + A.T)
        try:
            lam, u = scipy.linalg.eigh(A, subset_by_index=(0, k - 1))
        except scipy.linalg.LinAlgError as exc:
            raise SolverFailure(f"dense eigensolve failed on '{mm.shape_id}': {exc}") from exc
        vecs = u * inv_sqrt_m[:, None]
    else:
        scale = float(np.mean(mm.stiffness.diagonal()))
        v0 = np.full(n, 1.0 / np.sqrt(n))  # deterministic start vector
        try:
            lam, vecs = sla.eigsh(
                mm.stiffness.tocsc(),
                k=k,
                M=sparse.diags(mm.mass_diag).tocsc(),
                sigma=-1e-8 * max(scale, 1.0),
                which="LM",
                v0=v0,
            )
        except sla.ArpackError as exc:
            raise SolverFailure(f"shift-invert eigensolve failed on '{mm.shape_id}': {exc}") from exc
        order = np.argsort(lam)
        lam, vecs = lam[order], vecs[:, order]

    # clip the rounding noise on the zero mode(s)
    floor = -1e-10 * max(1.0, abs(float(lam[-1])))
    lam = np.where((lam < 0) & (lam > floor), 0.0, lam)
    vecs = _fix_signs(vecs)
    clusters = _eigen_clusters(lam)
    if clusters:
        logger.debug("shape '%s': eigenvalue clusters %s", mm.shape_id, clusters)
    if clusters and clusters[-1][1] == k and k > 1:
        warnings.warn(
            f"shape '{mm.shape_id}': truncation at k={k} falls inside an eigenvalue "
            f"cluster {clusters[-1]}; the spanned subspace is discretization-sensitive",
            SpectralGapWarning,
            stacklevel=2,
        )
    return SpectralBasis(lam, vecs, mm.shape_id, clusters)


def shape_dna(basis: SpectralBasis, d=None) -> np.ndarray:
    """First d eigenvalues as an isometry-invariant descriptor vector."""
    if d is None:
        d = basis.k
    if not 1 <= d <= basis.k:
        raise ValueError(f"d={d} must be in 1..{basis.k}")
    return basis.eigenvalues[:d].copy()


def compute_shape(mesh: Mesh, k: int) -> Shape:
    """Run the per-shape stage: metric/measure then truncated eigenbasis."""
    mm = metric_measure(mesh)
    return Shape(mesh, mm, eigenbasis(mm, k))


def project_function(shape: Shape, f):
    """Spectral coefficients of a vertex function: Phi^T M f."""
    return shape.basis.eigenvectors.T @ (shape.mm.mass_diag * f)


def reconstruct_function(shape: Shape, coeffs):
    """Vertex function from spectral coefficients: Phi a."""
    return shape.basis.eigenvectors @ coeffs
