"""Binary and JSON file formats.

MPS file (all integers little-endian ``uint32``)::

    magic      8 bytes  b"PBMPS001"
    N, d, center        (center = 0xFFFFFFFF when unset)
    bonds      N + 1 integers, boundary dimensions included
    model      32 bytes ASCII fingerprint, NUL padded
    data       site tensors in order, each ``(left, physical, right)``
               in row-major order, every entry as a little-endian
               ``float64`` pair (real, imag)

A JSON sidecar ``<path>.json`` repeats the header and carries free-form
metadata.  Matrices (subspace bases) use the same element encoding with
the header ``b"PBMAT001"``, rows, cols.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .mps import MPS
from .patch import PatchSubspace

MPS_MAGIC = b"PBMPS001"
MAT_MAGIC = b"PBMAT001"
NO_CENTER = 0xFFFFFFFF
FINGERPRINT_BYTES = 32
ELEMENT = np.dtype("<c16")
INDEX_ORDER = "left,physical,right row-major; complex as little-endian float64 (real, imag)"


def _sidecar(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".json")


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_json(doc) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def write_json(path, doc) -> None:
    Path(path).write_text(dumps_json(doc))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def mps_header(mps: MPS) -> dict:
    bonds = [1] + mps.bond_dims + [1]
    return {
        "N": mps.N,
        "d": mps.d,
        "bonds": bonds,
        "center": mps.center,
        "model": mps.model_fingerprint,
        "index_order": INDEX_ORDER,
    }


def mps_to_bytes(mps: MPS) -> bytes:
    fp = (mps.model_fingerprint or "").encode("ascii")
    if len(fp) > FINGERPRINT_BYTES:
        raise ValueError("model fingerprint too long")
    bonds = [1] + mps.bond_dims + [1]
    center = NO_CENTER if mps.center is None else mps.center
    parts = [MPS_MAGIC, struct.pack(f"<3I{len(bonds)}I", mps.N, mps.d, center, *bonds),
             fp.ljust(FINGERPRINT_BYTES, b"\0")]
    parts += [np.ascontiguousarray(t, dtype=ELEMENT).tobytes() for t in mps.tensors]
    return b"".join(parts)


def mps_from_bytes(data: bytes) -> MPS:
    if data[:8] != MPS_MAGIC:
        raise ValueError("not an MPS file")
    off = 8
    N, d, center = struct.unpack_from("<3I", data, off)
    off += 12
    bonds = struct.unpack_from(f"<{N + 1}I", data, off)
    off += 4 * (N + 1)
    fp = data[off : off + FINGERPRINT_BYTES].rstrip(b"\0").decode("ascii")
    off += FINGERPRINT_BYTES
    tensors = []
    for i in range(N):
        shape = (bonds[i], d, bonds[i + 1])
        n = int(np.prod(shape))
        t = np.frombuffer(data, dtype=ELEMENT, count=n, offset=off).reshape(shape)
        tensors.append(t.astype(complex))
        off += n * ELEMENT.itemsize
    if off != len(data):
        raise ValueError(f"trailing {len(data) - off} bytes in MPS file")
    return MPS(tuple(tensors), None if center == NO_CENTER else center, fp)


def write_mps(path, mps: MPS, metadata: dict | None = None) -> None:
    """Write the binary file and its JSON sidecar."""
    Path(path).write_bytes(mps_to_bytes(mps))
    doc = mps_header(mps)
    doc["metadata"] = metadata or {}
    write_json(_sidecar(path), doc)


def read_mps(path) -> MPS:
    mps = mps_from_bytes(Path(path).read_bytes())
    side = _sidecar(path)
    if side.exists():
        doc = read_json(side)
        head = mps_header(mps)
        for key in ("N", "d", "bonds", "center", "model"):
            if doc.get(key) != head[key]:
                raise ValueError(f"sidecar field {key!r} disagrees with the binary header")
    return mps


def read_mps_metadata(path) -> dict:
    side = _sidecar(path)
    return read_json(side).get("metadata", {}) if side.exists() else {}


def matrix_to_bytes(m: np.ndarray) -> bytes:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    return MAT_MAGIC + struct.pack("<2I", *m.shape) + np.ascontiguousarray(m, dtype=ELEMENT).tobytes()


def matrix_from_bytes(data: bytes) -> np.ndarray:
    if data[:8] != MAT_MAGIC:
        raise ValueError("not a matrix file")
    rows, cols = struct.unpack_from("<2I", data, 8)
    n = rows * cols
    if len(data) != 16 + n * ELEMENT.itemsize:
        raise ValueError("matrix file size does not match its header")
    return np.frombuffer(data, dtype=ELEMENT, count=n, offset=16).reshape(rows, cols).astype(complex)


def write_subspace(path, patch: PatchSubspace, metadata: dict | None = None) -> None:
    """Binary ``W`` at ``path`` and the JSON header beside it."""
    Path(path).write_bytes(matrix_to_bytes(patch.basis))
    doc = patch.header()
    doc["basis_shape"] = list(patch.basis.shape)
    doc["metadata"] = metadata or {}
    write_json(_sidecar(path), doc)


def read_subspace_basis(path) -> tuple[np.ndarray, dict]:
    return matrix_from_bytes(Path(path).read_bytes()), read_json(_sidecar(path))
