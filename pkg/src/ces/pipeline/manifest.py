"""Run manifest: reproducibility record written at every stage boundary.

The manifest lists the configuration hash, seeds, per-stage timings and
status, and a checksum inventory of every file the run has produced. It is
rewritten atomically after each stage so a crashed run still leaves an
accurate record of the completed stages.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field

from ces import __version__
from ces.pipeline.io import atomic_write_text, read_json

MANIFEST_NAME = "manifest.json"


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    out_dir: str
    config_digest: str
    seed: int
    stages: dict = field(default_factory=dict)  # name -> {status, seconds}
    files: dict = field(default_factory=dict)  # relative path -> sha256
    library_version: str = __version__

    @property
    def path(self) -> str:
        return os.path.join(self.out_dir, MANIFEST_NAME)

    def record_stage(self, name: str, status: str, seconds: float) -> None:
        self.stages[name] = {"status": status, "seconds": seconds}

    def record_file(self, path) -> None:
        rel = os.path.relpath(path, self.out_dir)
        self.files[rel] = file_sha256(path)

    def write(self) -> None:
        payload = {
            "config_hash": self.config_digest,
            "seed": self.seed,
            "library_version": self.library_version,
            "stages": self.stages,
            "files": self.files,
        }
        atomic_write_text(self.path, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load_or_create(cls, out_dir: str, config_digest: str, seed: int) -> "RunManifest":
        """Continue an existing manifest if it matches this config, else start fresh."""
        path = os.path.join(out_dir, MANIFEST_NAME)
        if os.path.exists(path):
            payload = read_json(path)
            if payload.get("config_hash") == config_digest:
                return cls(out_dir, config_digest, seed,
                           payload.get("stages", {}), payload.get("files", {}),
                           payload.get("library_version", __version__))
        return cls(out_dir, config_digest, seed)
