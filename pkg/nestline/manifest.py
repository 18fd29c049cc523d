"""
Run manifests: what a command read, how it was called and what it wrote.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from nestline import __version__

MANIFEST_HEADER = "nestline-manifest v1"


def file_digest(path: str | Path) -> str:
    """
    SHA-256 of a file's bytes.

    Args:
        path: File to hash

    Returns:
        str: "sha256:<hex digest>"
    """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return f"sha256:{digest.hexdigest()}"


def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


@dataclass
class RunManifest:
    command: str
    parameters: dict = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    version: str = __version__
    wall_time: float = 0.0
    started: float = field(default_factory=time.perf_counter, repr=False)

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path: str | Path) -> None:
        self.outputs.append(str(path))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc.pop("started")
        return {"format": MANIFEST_HEADER, **doc}

    def write(self, out: str | Path) -> Path:
        """Stamp the wall time and write `<out>.manifest.json` next to the primary output."""
        self.wall_time = round(time.perf_counter() - self.started, 6)
        path = manifest_path(out)
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        return path


def read_manifest(path: str | Path) -> RunManifest:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    doc.pop("format", None)
    return RunManifest(**doc)
