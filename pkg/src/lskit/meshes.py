"""Triangle mesh container, file loaders (OFF / OBJ / ASCII-PLY) and validation.

All loaders return a validated :class:`Mesh`: indices in range, no zero-area
triangles, manifold edges. Connectivity is checked and reported as a
:class:`~lskit.errors.MeshWarning` rather than an error.
"""

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateGeometry, IndexOutOfRange, MeshWarning, NonManifoldMesh, ParseError

AREA_EPS = 1e-14


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh.

    vertices : (n, 3) float64 positions
    triangles : (m, 3) int64 vertex indices
    shape_id : stable string identifier used throughout the pipeline
    """

    vertices: np.ndarray
    triangles: np.ndarray
    shape_id: str = field(default="")

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    def with_id(self, shape_id):
        return Mesh(self.vertices, self.triangles, shape_id)


def triangle_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - p0
    e2 = vertices[triangles[:, 2]] - p0
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def _edge_counts(triangles):
    """Multiplicity of every undirected edge."""
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    return counts


def component_count(vertices, triangles):
    """Number of connected components (isolated vertices count as components)."""
    n = vertices.shape[0]
    if triangles.size == 0:
        return n
    i = np.concatenate([triangles[:, 0], triangles[:, 1], triangles[:, 2]])
    j = np.concatenate([triangles[:, 1], triangles[:, 2], triangles[:, 0]])
    adj = coo_matrix((np.ones(i.size), (i, j)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp


def validate_mesh(vertices, triangles, shape_id=""):
    """Build a Mesh after checking indices, degeneracy and manifoldness.

    Raises IndexOutOfRange / DegenerateGeometry / NonManifoldMesh; emits a
    MeshWarning when the mesh is not a single connected component.
    """
    v = np.ascontiguousarray(vertices, dtype=np.float64)
    t = np.ascontiguousarray(triangles, dtype=np.int64)
    if v.ndim != 2 or v.shape[1] != 3:
        raise ParseError(f"vertex array must be (n, 3), got {v.shape}")
    if t.ndim != 2 or t.shape[1] != 3:
        raise ParseError(f"triangle array must be (m, 3), got {t.shape}")
    if not np.all(np.isfinite(v)):
        raise ParseError("non-finite vertex coordinate")
    if t.size:
        if t.min() < 0 or t.max() >= v.shape[0]:
            bad = int(t.max() if t.max() >= v.shape[0] else t.min())
            raise IndexOutOfRange(f"face index {bad} out of range for {v.shape[0]} vertices")
        if np.any(t[:, 0] == t[:, 1]) or np.any(t[:, 1] == t[:, 2]) or np.any(t[:, 2] == t[:, 0]):
            raise DegenerateGeometry("triangle with a repeated vertex")
        areas = triangle_areas(v, t)
        scale = float(np.max(areas)) if areas.size else 1.0
        small = np.nonzero(areas <= AREA_EPS * max(scale, 1.0))[0]
        if small.size:
            raise DegenerateGeometry(f"zero-area triangle(s): {small[:8].tolist()}")
        counts = _edge_counts(t)
        if np.any(counts > 2):
            raise NonManifoldMesh("edge shared by more than two triangles")
    ncomp = component_count(v, t)
    if ncomp != 1:
        warnings.warn(
            f"mesh '{shape_id}' has {ncomp} connected components", MeshWarning, stacklevel=2
        )
    return Mesh(v, t, shape_id)


# ---------------------------------------------------------------------------
# parsers


def _data_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _parse_off(text):
    lines = _data_lines(text)
    try:
        first = next(lines)
    except StopIteration:
        raise ParseError("empty OFF file") from None
    if first.startswith("OFF"):
        rest = first[3:].strip()
        header = rest.split() if rest else next(lines, "").split()
    else:
        header = first.split()  # headerless variant: counts on the first line
    if len(header) < 2:
        raise ParseError("OFF header must contain vertex and face counts")
    try:
        nv, nf = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ParseError(f"bad OFF counts: {header}") from exc
    verts = np.empty((nv, 3))
    for i in range(nv):
        parts = next(lines, None)
        if parts is None:
            raise ParseError(f"OFF file truncated at vertex {i}")
        vals = parts.split()
        if len(vals) < 3:
            raise ParseError(f"vertex line {i} has {len(vals)} fields")
        verts[i] = [float(vals[0]), float(vals[1]), float(vals[2])]
    tris = []
    for i in range(nf):
        parts = next(lines, None)
        if parts is None:
            raise ParseError(f"OFF file truncated at face {i}")
        vals = [int(x) for x in parts.split()]
        d = vals[0]
        if d < 3 or len(vals) < d + 1:
            raise ParseError(f"face line {i} malformed: {parts!r}")
        poly = vals[1 : d + 1]
        for a in range(1, d - 1):  # fan triangulation for d > 3
            tris.append((poly[0], poly[a], poly[a + 1]))
    return verts, np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def _obj_index(token, nv):
    idx = int(token.split("/", 1)[0])
    if idx < 0:
        idx = nv + idx
    else:
        idx -= 1
    return idx


def _parse_obj(text):
    verts, tris = [], []
    for line in _data_lines(text):
        fields = line.split()
        if fields[0] == "v":
            if len(fields) < 4:
                raise ParseError(f"OBJ vertex line too short: {line!r}")
            verts.append([float(fields[1]), float(fields[2]), float(fields[3])])
        elif fields[0] == "f":
            if len(fields) < 4:
                raise ParseError(f"OBJ face line too short: {line!r}")
            poly = [_obj_index(tok, len(verts)) for tok in fields[1:]]
            for a in range(1, len(poly) - 1):
                tris.append((poly[0], poly[a], poly[a + 1]))
    if not verts:
        raise ParseError("OBJ file contains no vertices")
    return np.asarray(verts, dtype=np.float64), np.asarray(tris, dtype=np.int64).reshape(-1, 3)


def _parse_ply(text):
    lines = iter(text.splitlines())
    if next(lines, "").strip() != "ply":
        raise ParseError("missing 'ply' magic line")
    fmt = next(lines, "").strip()
    if not fmt.startswith("format ascii"):
        raise ParseError("only ASCII PLY is supported")
    counts = {}
    order = []
    vertex_props = []
    current = None
    for line in lines:
        line = line.strip()
        if line.startswith("comment") or not line:
            continue
        if line == "end_header":
            break
        fields = line.split()
        if fields[0] == "element":
            current = fields[1]
            counts[current] = int(fields[2])
            order.append(current)
        elif fields[0] == "property" and current == "vertex" and fields[1] != "list":
            vertex_props.append(fields[-1])
    else:
        raise ParseError("PLY header not terminated by end_header")
    if "vertex" not in counts or "face" not in counts:
        raise ParseError("PLY header must declare vertex and face elements")
    try:
        cols = [vertex_props.index(c) for c in ("x", "y", "z")]
    except ValueError as exc:
        raise ParseError("PLY vertex element lacks x/y/z properties") from exc

    body = [ln.strip() for ln in lines if ln.strip()]
    pos = 0
    verts = np.empty((counts["vertex"], 3))
    tris = []
    for elem in order:
        n = counts[elem]
        if pos + n > len(body):
            raise ParseError(f"PLY body truncated in element '{elem}'")
        chunk = body[pos : pos + n]
        pos += n
        if elem == "vertex":
            for i, ln in enumerate(chunk):
                vals = ln.split()
                verts[i] = [float(vals[c]) for c in cols]
        elif elem == "face":
            for ln in chunk:
                vals = [int(x) for x in ln.split()]
                d = vals[0]
                if d < 3 or len(vals) < d + 1:
                    raise ParseError(f"PLY face line malformed: {ln!r}")
                poly = vals[1 : d + 1]
                for a in range(1, d - 1):
                    tris.append((poly[0], poly[a], poly[a + 1]))
    return verts, np.asarray(tris, dtype=np.int64).reshape(-1, 3)


_PARSERS = {"off": _parse_off, "obj": _parse_obj, "ply": _parse_ply}
_EXTENSIONS = {".off": "off", ".obj": "obj", ".ply": "ply"}


def load_mesh(path, fmt=None, shape_id=None):
    """Load and validate a mesh from OFF, OBJ or ASCII-PLY.

    Parameters
    ----------
    path : str or Path
    fmt : {'off', 'obj', 'ply'}, optional
        Inferred from the file extension when omitted.
    shape_id : str, optional
        Defaults to the file name without extension.
    """
    path = os.fspath(path)
    if fmt is None:
        ext = os.path.splitext(path)[1].lower()
        if ext not in _EXTENSIONS:
            raise ParseError(f"cannot infer mesh format from extension {ext!r}")
        fmt = _EXTENSIONS[ext]
    fmt = fmt.lower()
    if fmt not in _PARSERS:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        verts, tris = _PARSERS[fmt](text)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if shape_id is None:
        shape_id = os.path.splitext(os.path.basename(path))[0]
    return validate_mesh(verts, tris, shape_id)


def save_off(mesh, path):
    """Write a mesh as OFF with full float precision (round-trips exactly)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_triangles} 0\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")


# ---------------------------------------------------------------------------
# transforms used when building test collections


def apply_rigid(mesh, rotation, translation, shape_id=None):
    """Rigidly move a mesh: v -> R v + t."""
    rotation = np.asarray(rotation, dtype=np.float64)
    translation = np.asarray(translation, dtype=np.float64)
    verts = mesh.vertices @ rotation.T + translation
    return Mesh(verts, mesh.triangles.copy(), shape_id or mesh.shape_id)


def permute_vertices(mesh, perm, shape_id=None):
    """Relabel vertices so that new vertex p = old vertex perm[p].

    Returns the relabeled mesh together with the correspondence pairs
    (old index, new index) mapping the original onto the relabeled copy.
    """
    perm = np.asarray(perm, dtype=np.int64)
    if np.sort(perm).tolist() != list(range(mesh.num_vertices)):
        raise ValueError("perm must be a permutation of all vertex indices")
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(mesh.num_vertices)
    verts = mesh.vertices[perm]
    tris = inverse[mesh.triangles]
    pairs = np.stack([perm, np.arange(mesh.num_vertices)], axis=1)
    return Mesh(verts, tris, shape_id or mesh.shape_id), pairs


def random_rotation(rng):
    """Uniform random rotation matrix (QR of a Gaussian, sign-fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
