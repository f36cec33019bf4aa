"""File-based reference feature store.

A store is a directory holding one grid file per enrolled patch plus a JSON
manifest listing every record with its checksum and originating config
digest.  Enrollment is atomic: the feature file and the manifest are both
staged to temporary names, fsynced, and renamed into place, so a crash at
any point leaves the previous manifest intact.  Concurrent enrollments are
serialized through a lock file; verification is read-only.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .gridio import file_sha256, read_grid, write_grid
from .match import correlation

MANIFEST_NAME = "manifest.json"
LOCK_NAME = ".enroll.lock"
STORE_VERSION = 1
_ID_RE = re.compile(r"^[A-Za-z0-9_\-]+$")


class StoreError(RuntimeError):
    """Inconsistent store state or invalid store operation."""


@dataclass(frozen=True)
class FeatureRecord:
    patch_id: str
    feature_kind: str
    subband_index: int | None
    filename: str
    sha256: str
    config_digest: str


class FeatureStore:
    """Directory-backed store of enrolled reference features."""

    def __init__(self, root):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def initialize(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        if not self.manifest_path.exists():
            self._write_manifest([])

    def records(self) -> list[FeatureRecord]:
        if not self.manifest_path.exists():
            raise StoreError(f"no manifest at {self.manifest_path}")
        data = json.loads(self.manifest_path.read_text())
        if data.get("store_version") != STORE_VERSION:
            raise StoreError(f"unsupported store version {data.get('store_version')}")
        return [FeatureRecord(**rec) for rec in data["records"]]

    def patch_ids(self) -> list[str]:
        return [rec.patch_id for rec in self.records()]

    def verify_integrity(self) -> None:
        """Raise unless every listed file exists and its checksum matches."""
        for rec in self.records():
            path = self.root / rec.filename
            if not path.exists():
                raise StoreError(f"missing feature file {rec.filename}")
            if file_sha256(path) != rec.sha256:
                raise StoreError(f"checksum mismatch for {rec.filename}")

    def enroll(
        self,
        patch_id: str,
        grid: np.ndarray,
        feature_kind: str,
        subband_index: int | None = None,
        config_digest: str = "",
        metadata: dict[str, str] | None = None,
        lock_timeout: float = 5.0,
    ) -> FeatureRecord:
        """Atomically add a reference feature under a new patch id."""
        if not _ID_RE.match(patch_id):
            raise ValueError(f"invalid patch id {patch_id!r}")
        self.initialize()
        with self._lock(lock_timeout):
            records = self.records()
            if any(rec.patch_id == patch_id for rec in records):
                raise StoreError(f"patch id {patch_id!r} already enrolled")
            meta = dict(metadata or {})
            meta.update(
                feature_kind=feature_kind,
                patch_id=patch_id,
                config_digest=config_digest,
            )
            staged = self._stage_feature(patch_id, grid, meta)
            final = self.root / f"{patch_id}.pgrd"
            os.replace(staged, final)
            record = FeatureRecord(
                patch_id=patch_id,
                feature_kind=feature_kind,
                subband_index=subband_index,
                filename=final.name,
                sha256=file_sha256(final),
                config_digest=config_digest,
            )
            self._write_manifest([asdict(r) for r in records] + [asdict(record)])
        return record

    def load_feature(self, patch_id: str) -> tuple[np.ndarray, FeatureRecord]:
        for rec in self.records():
            if rec.patch_id == patch_id:
                grid, _ = read_grid(self.root / rec.filename)
                return grid, rec
        raise StoreError(f"unknown patch id {patch_id!r}")

    def verify(self, grid: np.ndarray, patch_id: str | None = None):
        """Correlation of a test feature against one record or the whole store.

        Returns (best_patch_id, score) ranked by score when no id is given.
        """
        if patch_id is not None:
            reference, _ = self.load_feature(patch_id)
            return patch_id, correlation(grid, reference)
        records = self.records()
        if not records:
            raise StoreError("store is empty")
        scores = []
        for rec in records:
            reference, _ = read_grid(self.root / rec.filename)
            scores.append((rec.patch_id, correlation(grid, reference)))
        return max(scores, key=lambda item: item[1])

    # -- internals ----------------------------------------------------------

    def _stage_feature(self, patch_id: str, grid, metadata) -> Path:
        """Write the feature payload to a temporary name and fsync it."""
        staged = self.root / f".{patch_id}.pgrd.tmp"
        write_grid(staged, grid, metadata)
        fd = os.open(staged, os.O_RDONLY)
        try:
            os.fsync(fd)
        finally:
            os.close(fd)
        return staged

    def _write_manifest(self, record_dicts: list[dict]) -> None:
        payload = json.dumps(
            {"store_version": STORE_VERSION, "records": record_dicts},
            indent=2,
            sort_keys=True,
        )
        staged = self.root / (MANIFEST_NAME + ".tmp")
        staged.write_text(payload)
        fd = os.open(staged, os.O_RDONLY)
        try:
            os.fsync(fd)
        finally:
            os.close(fd)
        os.replace(staged, self.manifest_path)

    def _lock(self, timeout: float):
        return _FileLock(self.root / LOCK_NAME, timeout)


class _FileLock:
    """Best-effort exclusive lock via O_EXCL creation of a lock file."""

    def __init__(self, path: Path, timeout: float):
        self.path = path
        self.timeout = timeout
        self.fd = None

    def __enter__(self):
        deadline = time.monotonic() + self.timeout
        while True:
            try:
                self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                return self
            except FileExistsError:
                if time.monotonic() >= deadline:
                    raise StoreError(f"could not acquire store lock {self.path}")
                time.sleep(0.01)

    def __exit__(self, *exc):
        if self.fd is not None:
            os.close(self.fd)
            self.path.unlink(missing_ok=True)
        return False
