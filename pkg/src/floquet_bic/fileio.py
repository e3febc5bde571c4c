"""Deterministic CSV/JSON emission and the run manifest.

Every float is printed with 17 significant digits so downstream consumers
can reproduce the binary values exactly; re-running a command with the same
configuration byte-reproduces every table.  The manifest records the
resolved configuration, tool versions and a sha256 per emitted file (the
manifest timestamp is the only non-reproducible field).
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy


def fmt(value) -> str:
    """Canonical text form: 17 significant digits for floats."""
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> Path:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_json(path: Path, payload) -> Path:
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, files: list[Path]) -> Path:
    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "versions": {
            "floquet-bic": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "files": {f.name: sha256_of(f) for f in sorted(files)},
        "created": datetime.now(timezone.utc).isoformat(),
    }
    return write_json(out_dir / "manifest.json", manifest)
