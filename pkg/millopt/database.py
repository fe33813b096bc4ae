import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

import aiosqlite

log = logging.getLogger(__name__)

SCHEMA_SQL = """
CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    config_hash TEXT NOT NULL,
    seed INTEGER NOT NULL,
    version TEXT NOT NULL,
    output_dir TEXT NOT NULL,
    status TEXT NOT NULL DEFAULT 'running',
    started_at TEXT DEFAULT (datetime('now')),
    finished_at TEXT
);

CREATE TABLE IF NOT EXISTS stages (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    run_id INTEGER NOT NULL,
    stage TEXT NOT NULL,
    status TEXT NOT NULL,
    detail TEXT,
    updated_at TEXT DEFAULT (datetime('now')),
    UNIQUE(run_id, stage)
);

CREATE TABLE IF NOT EXISTS artifacts (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    run_id INTEGER NOT NULL,
    stage TEXT NOT NULL,
    label TEXT NOT NULL,
    path TEXT NOT NULL,
    sha256 TEXT NOT NULL,
    UNIQUE(run_id, label)
);
"""

RUNNING = "running"
COMPLETED = "completed"
FAILED = "failed"


@dataclass
class RunRecord:
    id: int
    config_hash: str
    seed: int
    version: str
    output_dir: str
    status: str
    started_at: str
    finished_at: Optional[str]


@dataclass
class StageRecord:
    run_id: int
    stage: str
    status: str
    detail: Optional[str]
    updated_at: str


@dataclass
class ArtifactRecord:
    run_id: int
    stage: str
    label: str
    path: str
    sha256: str


class RunRegistry:
    """Run, stage and artifact-checksum history for pipeline executions."""

    def __init__(self, path: str):
        self.path = path
        self._conn: Optional[aiosqlite.Connection] = None

    async def init(self) -> None:
        self._conn = await aiosqlite.connect(self.path)
        self._conn.row_factory = aiosqlite.Row
        await self._conn.executescript(SCHEMA_SQL)
        await self._conn.commit()
        log.info("Run registry initialized at %s", self.path)

    async def close(self) -> None:
        if self._conn:
            await self._conn.close()
            self._conn = None

    async def __aenter__(self) -> "RunRegistry":
        await self.init()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.close()

    # -------------------------------------------------------------------------
    # Runs
    # -------------------------------------------------------------------------

    async def start_run(self, config_hash: str, seed: int, version: str, output_dir: str) -> int:
        now = datetime.now(timezone.utc).isoformat()
        cur = await self._conn.execute(
            """INSERT INTO runs (config_hash, seed, version, output_dir, status, started_at)
               VALUES (?, ?, ?, ?, ?, ?)""",
            (config_hash, int(seed), version, str(output_dir), RUNNING, now),
        )
        await self._conn.commit()
        return cur.lastrowid

    async def finish_run(self, run_id: int, status: str) -> None:
        now = datetime.now(timezone.utc).isoformat()
        await self._conn.execute(
            "UPDATE runs SET status = ?, finished_at = ? WHERE id = ?",
            (status, now, run_id),
        )
        await self._conn.commit()

    async def get_run(self, run_id: int) -> Optional[RunRecord]:
        async with self._conn.execute("SELECT * FROM runs WHERE id = ?", (run_id,)) as cur:
            row = await cur.fetchone()
        if row is None:
            return None
        return self._row_to_run(row)

    async def latest_completed_run(self, config_hash: str, seed: int,
                                   exclude: Optional[int] = None) -> Optional[RunRecord]:
        async with self._conn.execute(
            """SELECT * FROM runs
               WHERE config_hash = ? AND seed = ? AND status = ? AND id != ?
               ORDER BY id DESC LIMIT 1""",
            (config_hash, int(seed), COMPLETED, -1 if exclude is None else exclude),
        ) as cur:
            row = await cur.fetchone()
        if row is None:
            return None
        return self._row_to_run(row)

    def _row_to_run(self, row) -> RunRecord:
        return RunRecord(
            id=row["id"],
            config_hash=row["config_hash"],
            seed=row["seed"],
            version=row["version"],
            output_dir=row["output_dir"],
            status=row["status"],
            started_at=row["started_at"],
            finished_at=row["finished_at"],
        )

    # -------------------------------------------------------------------------
    # Stages
    # -------------------------------------------------------------------------

    async def set_stage(self, run_id: int, stage: str, status: str,
                        detail: Optional[str] = None) -> None:
        now = datetime.now(timezone.utc).isoformat()
        await self._conn.execute(
            """INSERT INTO stages (run_id, stage, status, detail, updated_at)
               VALUES (?, ?, ?, ?, ?)
               ON CONFLICT(run_id, stage)
               DO UPDATE SET status = excluded.status, detail = excluded.detail,
                             updated_at = excluded.updated_at""",
            (run_id, stage, status, detail, now),
        )
        await self._conn.commit()

    async def stages_for(self, run_id: int) -> list:
        async with self._conn.execute(
            "SELECT * FROM stages WHERE run_id = ? ORDER BY id", (run_id,)
        ) as cur:
            rows = await cur.fetchall()
        return [
            StageRecord(run_id=r["run_id"], stage=r["stage"], status=r["status"],
                        detail=r["detail"], updated_at=r["updated_at"])
            for r in rows
        ]

    # -------------------------------------------------------------------------
    # Artifacts
    # -------------------------------------------------------------------------

    async def record_artifacts(self, run_id: int, stage: str, artifacts: dict) -> None:
        """`artifacts` maps label -> (path, sha256)."""
        await self._conn.executemany(
            """INSERT INTO artifacts (run_id, stage, label, path, sha256)
               VALUES (?, ?, ?, ?, ?)
               ON CONFLICT(run_id, label)
               DO UPDATE SET stage = excluded.stage, path = excluded.path,
                             sha256 = excluded.sha256""",
            [(run_id, stage, label, str(path), digest)
             for label, (path, digest) in sorted(artifacts.items())],
        )
        await self._conn.commit()

    async def artifacts_for(self, run_id: int) -> list:
        async with self._conn.execute(
            "SELECT * FROM artifacts WHERE run_id = ? ORDER BY label", (run_id,)
        ) as cur:
            rows = await cur.fetchall()
        return [self._row_to_artifact(r) for r in rows]

    async def compare_with_previous(self, run_id: int, config_hash: str, seed: int) -> list:
        """Labels whose checksum differs from the latest completed run with the same inputs."""
        previous = await self.latest_completed_run(config_hash, seed, exclude=run_id)
        if previous is None:
            return []
        before = {a.label: a.sha256 for a in await self.artifacts_for(previous.id)}
        mismatches = []
        for artifact in await self.artifacts_for(run_id):
            digest = before.get(artifact.label)
            if digest is not None and digest != artifact.sha256:
                mismatches.append(artifact.label)
        if mismatches:
            log.warning("Run %d differs from run %d (same config and seed) in: %s",
                        run_id, previous.id, ", ".join(mismatches))
        else:
            log.info("Run %d reproduces run %d", run_id, previous.id)
        return mismatches

    def _row_to_artifact(self, row) -> ArtifactRecord:
        return ArtifactRecord(
            run_id=row["run_id"],
            stage=row["stage"],
            label=row["label"],
            path=row["path"],
            sha256=row["sha256"],
        )
