"""Workspace directory: descriptors, chain snapshots and an append-only run log."""

from __future__ import annotations

import os
from datetime import datetime, timezone
from pathlib import Path

import orjson
from loguru import logger

from cantor_measures import codec
from cantor_measures.config import DEFAULT_WORKSPACE, DESCRIPTOR_DIR, RUN_LOG_DIR, SNAPSHOT_DIR
from cantor_measures.errors import WorkspaceError

RUN_LOG_FILE = "run_log.jsonl"


class Workspace:
    def __init__(self, root=None):
        self.root = Path(root or DEFAULT_WORKSPACE)

    @property
    def descriptors(self):
        return self.root / DESCRIPTOR_DIR

    @property
    def snapshots(self):
        return self.root / SNAPSHOT_DIR

    @property
    def runs(self):
        return self.root / RUN_LOG_DIR

    def resolve(self, name, kind=None):
        """A path as given if it exists, else the named file inside the workspace."""
        path = Path(name)
        if path.is_absolute() or path.exists():
            return path
        base = {"descriptor": self.descriptors, "snapshot": self.snapshots}.get(kind, self.root)
        candidate = base / path
        if not candidate.exists() and candidate.suffix != ".json":
            named = candidate.with_name(candidate.name + ".json")
            if named.exists():
                return named
        return candidate

    def output_path(self, name, kind="snapshot"):
        path = Path(name)
        if path.is_absolute() or path.parent != Path("."):
            return path
        base = {"descriptor": self.descriptors, "snapshot": self.snapshots}.get(kind, self.root)
        return base / path

    # ---------------- Files ----------------

    def read_json(self, name, kind=None):
        path = self.resolve(name, kind)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise WorkspaceError(f"cannot read {path}: {e.strerror or e}") from e
        logger.debug("Read {} bytes from {}", len(data), path)
        return codec.loads(data)

    def write_json(self, name, obj, kind="snapshot"):
        path = self.output_path(name, kind)
        data = codec.dumps(obj)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        except OSError as e:
            raise WorkspaceError(f"cannot write {path}: {e.strerror or e}") from e
        logger.info("Wrote {}", path)
        return path

    def load_descriptor(self, name):
        return codec.descriptor_from_json(self.read_json(name, "descriptor"))

    def load_snapshot(self, name):
        return codec.snapshot_from_json(self.read_json(name, "snapshot"))

    def save_snapshot(self, name, chain):
        return self.write_json(name, codec.snapshot_to_json(chain), "snapshot")

    # ---------------- Run log ----------------

    def log_run(self, op, input_hash, exit_code):
        record = {
            "time": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
            "op": op,
            "input_hash": input_hash,
            "exit": exit_code,
        }
        try:
            self.runs.mkdir(parents=True, exist_ok=True)
            with open(self.runs / RUN_LOG_FILE, "ab") as f:
                f.write(orjson.dumps(record, option=orjson.OPT_SORT_KEYS) + b"\n")
        except OSError as e:
            logger.warning("Run log not written: {}", e)
        return record
