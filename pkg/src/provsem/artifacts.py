"""Binary blobs with JSON manifests, file hashing and stage manifests."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

MANIFEST_VERSION = 1


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_tree(path: str | Path) -> str:
    """Digest of every file under ``path`` (relative names + contents), order-independent."""
    path = Path(path)
    if path.is_file():
        return sha256_file(path)
    h = hashlib.sha256()
    for f in sorted(p for p in path.rglob("*") if p.is_file()):
        h.update(str(f.relative_to(path)).encode())
        h.update(sha256_file(f).encode())
    return h.hexdigest()


def config_hash(obj) -> str:
    """Stable under key reordering."""
    return sha256_bytes(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8"))


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_json(path: str | Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def pack_arrays(arrays: dict[str, np.ndarray]) -> tuple[bytes, dict]:
    """Concatenate arrays as little-endian bytes; returns (blob, layout)."""
    blob = bytearray()
    layout = {}
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        dtype = "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"
        b = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        layout[name] = {"dtype": dtype, "shape": list(arr.shape), "offset": len(blob), "nbytes": len(b)}
        blob += b
    return bytes(blob), layout


def unpack_arrays(blob: bytes, layout: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, spec in layout.items():
        raw = blob[spec["offset"] : spec["offset"] + spec["nbytes"]]
        out[name] = np.frombuffer(raw, dtype=spec["dtype"]).reshape(spec["shape"]).copy()
    return out


def write_blob_model(directory: str | Path, name: str, arrays: dict, manifest: dict) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    blob, layout = pack_arrays(arrays)
    (d / f"{name}.bin").write_bytes(blob)
    dump_json({"version": MANIFEST_VERSION, **manifest, "arrays": layout}, d / f"{name}.json")


def read_blob_model(directory: str | Path, name: str) -> tuple[dict, dict]:
    d = Path(directory)
    man = load_json(d / f"{name}.json")
    if "version" not in man:
        raise ValueError(f"{d / name}.json has no version field")
    return man, unpack_arrays((d / f"{name}.bin").read_bytes(), man["arrays"])
