import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .database import FAILED, RUNNING

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """What one invocation produced; artifact paths are relative to `output_dir`."""

    config_hash: str
    version: str
    seed: int
    output_dir: str
    started_at: str
    finished_at: Optional[str] = None
    stages: dict = field(default_factory=dict)  # stage -> running | completed | skipped | failed
    # file name -> {"stage": .., "sha256": ..}, plus "incomplete": true when its stage failed
    artifacts: dict = field(default_factory=dict)
    rank_winner: Optional[str] = None
    selected_model: Optional[str] = None
    best_method: Optional[str] = None
    error: Optional[str] = None

    @property
    def incomplete(self) -> bool:
        return self.error is not None or any(s in (FAILED, RUNNING) for s in self.stages.values())

    def path(self, name: str) -> Path:
        return Path(self.output_dir) / name

    def has(self, name: str) -> bool:
        """Present on disk and written by a stage that finished."""
        entry = self.artifacts.get(name)
        return entry is not None and not entry.get("incomplete") and self.path(name).exists()

    def add(self, stage: str, paths: Sequence[Path], incomplete: bool = False) -> None:
        for path in paths:
            path = Path(path)
            entry = {"stage": stage, "sha256": sha256_file(path)}
            if incomplete:
                entry["incomplete"] = True
            self.artifacts[path.name] = entry

    def stage_artifacts(self, stage: str) -> dict:
        """file name -> (path, sha256) for one stage."""
        return {name: (self.path(name), entry["sha256"])
                for name, entry in self.artifacts.items() if entry["stage"] == stage}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["incomplete"] = self.incomplete
        out["artifacts"] = dict(sorted(self.artifacts.items()))
        return out

    def save(self) -> Path:
        path = self.path(MANIFEST_NAME)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        doc = json.loads(path.read_text(encoding="utf-8"))
        doc.pop("incomplete", None)
        return cls(**doc)
