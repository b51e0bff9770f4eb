"""Content-addressed on-disk store: one JSON file per key."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path


def content_key(*parts: str) -> str:
    """SHA-256 over length-prefixed parts, so ("ab","c") and ("a","bc") differ."""
    h = hashlib.sha256()
    for p in parts:
        b = p.encode("utf-8")
        h.update(len(b).to_bytes(8, "little"))
        h.update(b)
    return h.hexdigest()


class DiskCache:
    """Files live at ``root/<key[:2]>/<key>.json``.

    Writes go to a temp file in the same directory and are moved into place with
    ``os.replace``, so a reader never sees a partial record and concurrent writers
    of the same key leave one complete value behind.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def __contains__(self, key: str) -> bool:
        return self.path_for(key).exists()

    def get(self, key: str) -> dict | None:
        try:
            with open(self.path_for(key), encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None

    def put(self, key: str, record: dict) -> None:
        target = self.path_for(key)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".", suffix=".part")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(record, fh, sort_keys=True, ensure_ascii=False)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*/*.json"))
