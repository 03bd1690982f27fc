"""Run manifests: everything needed to reproduce and audit a solver run."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__


def build_id() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        )
        desc = out.stdout.strip()
        if desc:
            return f"diffcv-{__version__}-{desc}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"diffcv-{__version__}"


def _plain(x):
    """Convert numpy scalars/arrays and dataclasses into JSON-ready values."""
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return _plain(dataclasses.asdict(x))
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


@dataclass
class RunManifest:
    command: str
    seed: int
    config: dict
    losses: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    status: str = "ok"
    build: str = field(default_factory=build_id)

    def result_hash(self) -> str:
        """SHA-256 over everything except timings and artifact paths."""
        core = {
            "command": self.command,
            "seed": self.seed,
            "config": _plain(self.config),
            "losses": _plain(self.losses),
            "results": _plain(self.results),
            "status": self.status,
        }
        blob = json.dumps(core, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_dict(self) -> dict:
        d = _plain(dataclasses.asdict(self))
        d["result_hash"] = self.result_hash()
        return d

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
