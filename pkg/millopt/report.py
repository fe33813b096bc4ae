import logging
from pathlib import Path

import pandas as pd

from .manifest import RunManifest

log = logging.getLogger(__name__)

REPORT_NAME = "report.txt"

# (title, producing stage, artifacts shown in order)
SECTIONS = (
    ("Descriptive statistics", "stats", ("stats.txt",)),
    ("Model ranking", "rank", ("ranking.txt",)),
    ("Chosen model", "train", ("model_cv.txt",)),
    ("Feature selection", "rfe", ("rfe.txt",)),
    ("Optimiser comparison", "optimize", ("campaign_summary.txt",)),
    ("Candidate solutions", "optimize", ("candidates.csv",)),
)

_RULE = "=" * 78


def _render(manifest: RunManifest, name: str) -> str:
    path = manifest.path(name)
    if name.endswith(".csv"):
        frame = pd.read_csv(path)
        frame.index = pd.RangeIndex(1, len(frame) + 1)
        with pd.option_context("display.width", 200, "display.max_columns", None):
            return f"{len(frame)} candidates (best first)\n" + frame.to_string(float_format="%.3f")
    return path.read_text(encoding="utf-8").rstrip("\n")


def build_report(manifest: RunManifest) -> tuple:
    """Returns (text, missing section titles)."""
    body = []
    missing = []
    for title, stage, names in SECTIONS:
        status = manifest.stages.get(stage)
        if status == "skipped":
            body.append(f"{_RULE}\n{title}\n{_RULE}\n(stage '{stage}' disabled in the configuration)")
            continue
        if not all(manifest.has(name) for name in names):
            missing.append(title)
            continue
        parts = [_render(manifest, name) for name in names]
        body.append(f"{_RULE}\n{title}\n{_RULE}\n" + "\n\n".join(parts))

    header = [
        "millopt run report",
        f"version: {manifest.version}",
        f"config hash: {manifest.config_hash}",
        f"master seed: {manifest.seed}",
    ]
    if manifest.selected_model:
        header.append(f"selected model: {manifest.selected_model}")
    if manifest.best_method:
        header.append(f"best optimiser: {manifest.best_method}")
    if missing:
        header.append("status: PARTIAL (missing: " + ", ".join(missing) + ")")
    else:
        header.append("status: complete")
    if manifest.error:
        header.append(f"error: {manifest.error}")
    return "\n".join(header) + "\n\n" + "\n\n".join(body) + "\n", missing


def emit_report(manifest) -> Path:
    """Write report.txt next to the manifest's artifacts; `manifest` may be a directory."""
    if not isinstance(manifest, RunManifest):
        manifest = RunManifest.load(manifest)
    text, missing = build_report(manifest)
    path = manifest.path(REPORT_NAME)
    path.write_text(text, encoding="utf-8")
    if missing:
        log.warning("Report is partial; missing sections: %s", ", ".join(missing))
    else:
        log.info("Report written to %s", path)
    return path
