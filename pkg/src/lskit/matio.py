"""Persistence: portable matrix container, workspace manifest, config.

The matrix container is a fixed little-endian binary layout (magic
"LSKMAT01", dtype code, dimensions, row-major float64 payload) so artifacts
round-trip bit-exactly across platforms. A collection workspace is a single
directory whose manifest.json is the source of truth: every referenced file
carries a sha256 that is verified before any computation builds on it.
"""

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ManifestError, ParseError

MAGIC = b"LSKMAT01"
_DTYPE_F64 = 1
_HEADER = struct.Struct("<8sQQQ")  # magic, dtype code, rows, cols

TOOL_VERSION = "0.1.0"


def _atomic_write(path, data: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(path, array):
    """Write a 1D or 2D float64 array (vectors are stored as one column)."""
    arr = np.asarray(array, dtype="<f8")
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"container stores 2D matrices, got ndim={arr.ndim}")
    header = _HEADER.pack(MAGIC, _DTYPE_F64, arr.shape[0], arr.shape[1])
    _atomic_write(path, header + np.ascontiguousarray(arr).tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ParseError(f"{path}: truncated container header")
    magic, code, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if code != _DTYPE_F64:
        raise ParseError(f"{path}: unsupported dtype code {code}")
    expected = _HEADER.size + rows * cols * 8
    if len(blob) != expected:
        raise ParseError(f"{path}: payload is {len(blob) - _HEADER.size} bytes, expected {rows * cols * 8}")
    arr = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(rows, cols)
    return np.array(arr, dtype=np.float64)


def read_vector(path):
    arr = read_matrix(path)
    if arr.shape[1] != 1:
        raise ParseError(f"{path}: expected a column vector, got {arr.shape}")
    return arr[:, 0]


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Config:
    """Pipeline knobs echoed into the manifest (tolerances are recorded too,
    via `effective`, so a workspace documents exactly what produced it)."""

    k: int = 50
    m: int = 40
    kind: str = "area"  # "area" | "conformal" | "both"
    normalized: bool = False
    topology: str = "mst"
    maps: str = "correspondence"  # "correspondence" | "landmarks" | "identity"
    landmark_weight: float = 1e-3
    within_weight: float = 1.0
    mesh_format: str = ""

    def effective(self):
        from . import fmaps, latent, opalg, spectral, variability

        doc = asdict(self)
        doc["tolerances"] = {
            "pinv_rel_tol": fmaps.PINV_REL_TOL,
            "tikhonov_floor": fmaps.TIKHONOV_FLOOR,
            "landmark_radius_factor": fmaps.LANDMARK_RADIUS_FACTOR,
            "dense_solver_max_vertices": spectral.DENSE_SOLVER_MAX_VERTICES,
            "cluster_gap_tol": spectral.CLUSTER_GAP_TOL,
            "dense_block_limit": latent.DENSE_BLOCK_LIMIT,
            "spectral_gap_warn_tol": latent.GAP_WARN_TOL,
            "orthonormal_tol": variability.ORTHONORMAL_TOL,
            "condition_limit": opalg.CONDITION_LIMIT,
        }
        return doc

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        doc.pop("tolerances", None)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ManifestError(f"unknown config keys {sorted(unknown)}")
        return cls(**doc)


class Workspace:
    """Single-writer collection directory with manifest integrity checks."""

    MANIFEST = "manifest.json"

    def __init__(self, root):
        self.root = os.path.abspath(os.fspath(root))

    def path(self, *parts):
        return os.path.join(self.root, *parts)

    def rel(self, path):
        return os.path.relpath(os.path.abspath(path), self.root)

    @property
    def manifest_path(self):
        return self.path(self.MANIFEST)

    def exists(self):
        return os.path.isfile(self.manifest_path)

    def init_manifest(self, config: Config):
        manifest = {
            "tool": "lskit",
            "version": TOOL_VERSION,
            "config": config.effective(),
            "shapes": {},
            "hashes": {},
        }
        self.save_manifest(manifest)
        return manifest

    def load_manifest(self, verify=True):
        if not self.exists():
            raise ManifestError(f"no manifest at {self.manifest_path}")
        with open(self.manifest_path, "r", encoding="utf-8") as fh:
            try:
                manifest = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"malformed manifest: {exc}") from exc
        if verify:
            self.verify(manifest)
        return manifest

    def save_manifest(self, manifest):
        data = json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8") + b"\n"
        _atomic_write(self.manifest_path, data)

    def verify(self, manifest):
        """Abort (ManifestError) when any tracked file is missing or altered."""
        for rel, digest in manifest.get("hashes", {}).items():
            full = self.path(rel)
            if not os.path.isfile(full):
                raise ManifestError(f"missing artifact {rel!r}")
            actual = sha256_file(full)
            if actual != digest:
                raise ManifestError(
                    f"hash mismatch for {rel!r}: manifest {digest[:12]}..., file {actual[:12]}..."
                )

    def track(self, manifest, relpath):
        manifest.setdefault("hashes", {})[relpath] = sha256_file(self.path(relpath))

    def write_tracked_matrix(self, manifest, relpath, array):
        write_matrix(self.path(relpath), array)
        self.track(manifest, relpath)
        return relpath
