"""Run manifests: enough metadata to reproduce any CLI output bit-for-bit."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path


def _tool_version() -> str:
    try:
        return version("meshgap")
    except PackageNotFoundError:
        return "unknown"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, command: str, params: dict, inputs=(), seeds=None) -> Path:
    """Write manifest.json in out_dir. The timestamp is the only field that
    varies between identical re-runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "params": params,
        "seeds": seeds if seeds is not None else {},
        "inputs": {str(p): file_digest(p) for p in inputs},
        "tool_version": _tool_version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
