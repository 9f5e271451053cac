"""Run manifest: what produced a set of output files."""
from __future__ import annotations

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

from ..mesher import MeshParams
from ..model import BoardModel
from .model_file import dumps_model


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - source checkout
        return "0+unknown"


def model_hash(model: BoardModel) -> str:
    """SHA-256 of the model's canonical TOML form."""
    return hashlib.sha256(dumps_model(model).encode("utf-8")).hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    model_name: str
    model_hash: str
    mesh_params: dict
    solver_settings: dict = field(default_factory=dict)
    tool_version: str = field(default_factory=tool_version)
    timings: dict = field(default_factory=dict)  # seconds per phase
    artifacts: dict = field(default_factory=dict)  # file name -> sha256
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    @classmethod
    def start(cls, command: str, model: BoardModel, params: MeshParams, **settings) -> "RunManifest":
        return cls(command, model.name, model_hash(model), asdict(params), dict(settings))

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def add(self, *paths) -> None:
        for p in paths:
            p = Path(p)
            self.artifacts[p.name] = file_digest(p)

    def to_dict(self, stable: bool = False) -> dict:
        """Plain dict; ``stable=True`` drops wall-clock fields for comparisons."""
        d = asdict(self)
        if stable:
            d.pop("created")
            d.pop("timings")
        return d

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
