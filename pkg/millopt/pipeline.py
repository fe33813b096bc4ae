"""End-to-end surrogate optimisation pipeline.

Stages run in this order, each writing its artifacts under the output
directory:

    clean     data_clean.csv, clean_report.txt/.kv (data_raw.csv and
              schema.yaml for synthetic sources)
    stats     stats.csv, histograms.csv, stats.txt
    compare   cv_<model>.csv/.txt per roster entry, cv_folds.csv
    rank      ranking.csv, ranking.txt
    lof       lof_scores.csv, lof_comparison.csv/.txt, data_model.csv
    rfe       rfe_ranking.csv, rfe_sweep.csv, rfe.txt, selected_features.txt
    train     model.json, refits.csv, model_cv.csv/.txt
    optimize  trace_<method>.csv, envelope_<method>.csv, campaign_summary.csv/.txt,
              candidates.csv
    report    report.txt

manifest.json lists every artifact with its SHA-256. A stage that is asked
for an upstream result it does not hold in memory reads the upstream
artifact from disk when resuming, or runs the upstream stage otherwise, so
every stage can run on its own.
"""
import asyncio
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .config import PipelineConfig, config_hash
from .database import COMPLETED, FAILED, RUNNING, RunRegistry
from .dataset import (
    Dataset,
    clean,
    describe,
    dump_schema,
    kfold_split,
    load_csv,
    load_schema,
    write_csv,
    write_stats,
)
from .errors import MilloptError, StageError
from .evaluation import CvResult, compare_models, cross_validate, spec_trainer
from .manifest import MANIFEST_NAME, RunManifest
from .metrics import METRIC_NAMES, MetricReport, compute_metrics, rank_models, summarize_folds
from .models import fit, load_model, save_model
from .optimize import Bounds, run_campaign, surrogate_objective
from .preprocess import lof_scores, remove_outliers, rfe, rfe_sweep
from .report import emit_report
from .synthetic import SyntheticMill, generate_synthetic_mill

log = logging.getLogger(__name__)

STAGES = ("clean", "stats", "compare", "rank", "lof", "rfe", "train", "optimize", "report")

SKIPPED = "skipped"


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text.rstrip("\n") + "\n", encoding="utf-8")
    return path


def _write_frame(path: Path, frame: pd.DataFrame, index: bool = False) -> Path:
    frame.to_csv(path, index=index)
    return path


# -------------------------------------------------------------------------
# Stage context
# -------------------------------------------------------------------------

class PipelineContext:
    """In-memory results of one invocation plus the manifest they are recorded in."""

    def __init__(self, config: PipelineConfig, resume: bool = False):
        self.config = config
        self.out = Path(config.output_dir)
        self.resume = resume
        now = datetime.now(timezone.utc).isoformat()
        self.manifest = RunManifest(config_hash=config_hash(config), version=__version__,
                                    seed=config.seed, output_dir=str(self.out), started_at=now)
        if resume and (self.out / MANIFEST_NAME).exists():
            previous = RunManifest.load(self.out)
            if previous.config_hash == self.manifest.config_hash and previous.seed == config.seed:
                self.manifest.stages = dict(previous.stages)
                self.manifest.artifacts = dict(previous.artifacts)
                self.manifest.rank_winner = previous.rank_winner
                self.manifest.selected_model = previous.selected_model
                self.manifest.best_method = previous.best_method
            else:
                log.info("Ignoring artifacts in %s: they were produced by another config or seed",
                         self.out)
        self._done = set()
        self._cache = {}

    # ---- stage dispatch ----

    def run_stage(self, stage: str) -> str:
        """Run one stage unless this context already ran it; returns its status."""
        if stage in self._done:
            return self.manifest.stages[stage]
        runner = getattr(self, f"_stage_{stage}")
        self.manifest.stages[stage] = RUNNING
        log.info("Stage %s started", stage)
        before = self._snapshot()
        try:
            produced = runner()
        except StageError:
            self.manifest.stages[stage] = FAILED
            self._record_partial(stage, before)
            raise
        except Exception as e:
            self.manifest.stages[stage] = FAILED
            self._record_partial(stage, before)
            self.manifest.error = f"[{stage}] {e}"
            if isinstance(e, MilloptError):
                log.error("Stage %s failed: %s", stage, e)
            else:
                log.error("Stage %s failed", stage, exc_info=True)
            raise StageError(stage, e) from e
        if produced is None:
            self.manifest.stages[stage] = SKIPPED
            log.info("Stage %s skipped (disabled)", stage)
        else:
            self.manifest.add(stage, produced)
            self.manifest.stages[stage] = COMPLETED
            log.info("Stage %s completed (%d artifacts)", stage, len(produced))
        self._done.add(stage)
        return self.manifest.stages[stage]

    def _snapshot(self) -> dict:
        return {p.name: (p.stat().st_mtime_ns, p.stat().st_size)
                for p in self.out.iterdir() if p.is_file()}

    def _record_partial(self, stage: str, before: dict) -> None:
        """List files a failed stage wrote or rewrote, flagged incomplete."""
        written = []
        for path in sorted(self.out.iterdir()):
            if not path.is_file() or path.name == MANIFEST_NAME:
                continue
            if before.get(path.name) == (path.stat().st_mtime_ns, path.stat().st_size):
                continue
            entry = self.manifest.artifacts.get(path.name)
            # upstream stages that finished inside this one keep their own entries
            if entry and entry["stage"] != stage and entry["stage"] in self._done:
                continue
            written.append(path)
        if written:
            self.manifest.add(stage, written, incomplete=True)
            log.warning("Stage %s left %d incomplete artifact(s): %s", stage, len(written),
                        ", ".join(p.name for p in written))

    def _cached(self, key: str, artifact: Optional[str], load, stage: str):
        if key in self._cache:
            return self._cache[key]
        if self.resume and artifact is not None and self.manifest.has(artifact):
            log.info("Reusing %s from %s", artifact, self.out)
            self._cache[key] = load(self.manifest.path(artifact))
            return self._cache[key]
        self.run_stage(stage)
        return self._cache[key]

    # ---- data ----

    def schema(self) -> tuple:
        """(features, target_spec) of the configured source."""
        if "schema" not in self._cache:
            if self.config.data.source == "synthetic":
                mill = SyntheticMill()
                self._cache["schema"] = (mill.schema, mill.target_spec)
            else:
                self._cache["schema"] = load_schema(self.config.data.schema_path)
        return self._cache["schema"]

    def raw(self) -> Dataset:
        if "raw" not in self._cache:
            cfg = self.config.data
            if cfg.source == "synthetic":
                self._cache["raw"] = generate_synthetic_mill(cfg.n, cfg.synthetic_seed,
                                                             cfg.noise_std)
            else:
                features, target_spec = self.schema()
                self._cache["raw"] = load_csv(cfg.csv_path, features, cfg.target_name,
                                              target_spec)
        return self._cache["raw"]

    def _load_data(self, path: Path) -> Dataset:
        schema, target_spec = self.schema()
        return load_csv(path, schema, self.raw_target_name(), target_spec)

    def raw_target_name(self) -> str:
        if self.config.data.source == "synthetic":
            return self.schema()[1].name
        return self.config.data.target_name

    def clean_data(self) -> Dataset:
        return self._cached("clean", "data_clean.csv", self._load_data, "clean")

    def comparison(self) -> dict:
        return self._cached("comparison", "cv_folds.csv", self._load_comparison, "compare")

    def ranking(self):
        return self._cached("ranking", None, None, "rank")

    def selected_name(self) -> str:
        pinned = self.config.selection.pinned
        if pinned is not None:
            return pinned
        if self.resume and "ranking" not in self._cache and self.manifest.rank_winner:
            return self.manifest.rank_winner
        return self.ranking().best

    def selected_spec(self):
        return self.config.roster_entry(self.selected_name()).to_spec()

    def model_data(self) -> Dataset:
        return self._cached("model_data", "data_model.csv", self._load_data, "lof")

    def features(self) -> tuple:
        return self._cached("features", "selected_features.txt", _read_features, "rfe")

    def model(self):
        return self._cached("model", "model.json", load_model, "train")

    def _load_comparison(self, path: Path) -> dict:
        frame = pd.read_csv(path)
        results = {}
        for name in self.config.roster_specs():
            rows = frame[frame["model"] == name].sort_values("fold")
            reports = tuple(MetricReport(**{m: float(row[m]) for m in METRIC_NAMES})
                            for _, row in rows.iterrows())
            results[name] = CvResult(name=name, reports=reports, summary=summarize_folds(reports))
        return results

    # ---- stages ----

    def _stage_clean(self):
        raw = self.raw()
        produced = []
        if self.config.data.source == "synthetic":
            features, target_spec = self.schema()
            dump_schema(self.out / "schema.yaml", features, target_spec)
            write_csv(raw, self.out / "data_raw.csv")
            produced += [self.out / "schema.yaml", self.out / "data_raw.csv"]
        if not self.config.cleaning.enabled:
            self._cache["clean"] = raw
            return produced or None
        data, report = clean(raw)
        self._cache["clean"] = data
        write_csv(data, self.out / "data_clean.csv")
        produced += [
            self.out / "data_clean.csv",
            _write_text(self.out / "clean_report.txt", report.to_text()),
            _write_text(self.out / "clean_report.kv", report.to_kv()),
        ]
        return produced

    def _stage_stats(self):
        stats = describe(self.clean_data(), self.config.data.stats_bins)
        return list(write_stats(stats, self.out).values())

    def _stage_compare(self):
        cfg = self.config
        results = compare_models(cfg.roster_specs(), self.clean_data(), cfg.cv.k, cfg.cv_seed,
                                 workers=cfg.workers, mape_epsilon=cfg.cv.mape_epsilon)
        self._cache["comparison"] = results
        produced = []
        long_rows = []
        for name, result in results.items():
            result.summary.to_csv(self.out / f"cv_{name}.csv")
            produced.append(self.out / f"cv_{name}.csv")
            produced.append(_write_text(self.out / f"cv_{name}.txt",
                                        result.summary.to_table(f"{name}: {cfg.cv.k}-fold CV")))
            for fold, report in enumerate(result.reports, start=1):
                long_rows.append({"model": name, "fold": fold, **report.as_dict()})
        frame = pd.DataFrame(long_rows, columns=["model", "fold", *METRIC_NAMES])
        produced.append(_write_frame(self.out / "cv_folds.csv", frame))
        return produced

    def _stage_rank(self):
        results = self.comparison()
        report = rank_models({name: r.reports for name, r in results.items()},
                             self.config.ranking.metric)
        self._cache["ranking"] = report
        self.manifest.rank_winner = report.best
        self.manifest.selected_model = self.selected_name()
        if self.config.selection.pinned:
            log.info("Rank winner %s overridden by pinned model %s", report.best,
                     self.config.selection.pinned)
        text = report.to_text() + f"\nrank winner: {report.best}\nselected model: " \
                                  f"{self.manifest.selected_model}"
        return [
            _write_frame(self.out / "ranking.csv", report.to_frame()),
            _write_text(self.out / "ranking.txt", text),
        ]

    def _stage_lof(self):
        cfg = self.config.lof
        data = self.clean_data()
        if not cfg.enabled:
            self._cache["model_data"] = data
            return None
        result = lof_scores(data, cfg.k, contamination=cfg.contamination)
        threshold = result.threshold if cfg.threshold is None else cfg.threshold
        filtered = remove_outliers(data, result, threshold)

        name = self.selected_name()
        trainer = spec_trainer(self.selected_spec())
        k, seed, workers = self.config.cv.k, self.config.cv_seed, self.config.workers
        before = cross_validate(trainer, data, kfold_split(data, k, seed), workers, name=name)
        after = cross_validate(trainer, filtered, kfold_split(filtered, k, seed), workers,
                               name=name)
        base = before.summary.stat("r2", "Median")
        new = after.summary.stat("r2", "Median")
        gain = (new - base) / abs(base) if base != 0 else new - base
        applied = bool(gain >= cfg.min_improvement)
        self._cache["model_data"] = filtered if applied else data
        log.info("LOF study: median R2 %.4f -> %.4f (%+.2f%%), removal %s", base, new,
                 100 * gain, "applied" if applied else "not applied")

        comparison = pd.concat([
            before.summary.to_frame().assign(dataset="with_outliers"),
            after.summary.to_frame().assign(dataset="outliers_removed"),
        ])
        text = "\n\n".join([
            f"LOF outlier study (k={cfg.k}, threshold {threshold:.4f}, "
            f"{int(np.count_nonzero(result.scores > threshold))} of {data.n} rows flagged)",
            before.summary.to_table(f"{name} with outliers (n={data.n})"),
            after.summary.to_table(f"{name} outliers removed (n={filtered.n})"),
            f"median R2 change: {100 * gain:+.2f}% (required {100 * cfg.min_improvement:.2f}%); "
            f"removal {'applied' if applied else 'not applied'}",
        ])
        write_csv(self._cache["model_data"], self.out / "data_model.csv")
        return [
            _write_frame(self.out / "lof_scores.csv", result.to_frame()),
            _write_frame(self.out / "lof_comparison.csv", comparison, index=True),
            _write_text(self.out / "lof_comparison.txt", text),
            self.out / "data_model.csv",
        ]

    def _stage_rfe(self):
        cfg = self.config.rfe
        data = self.model_data()
        if not cfg.enabled:
            self._cache["features"] = data.feature_names
            return None
        trainer_name = cfg.trainer or self.selected_name()
        trainer = spec_trainer(self.config.roster_entry(trainer_name).to_spec())
        seed = self.config.seed
        produced = []
        if cfg.k is not None:
            result = rfe(data, trainer, cfg.k, seed, n_repeats=cfg.n_repeats, holdout=cfg.holdout)
            selected = result.selected
        else:
            k_max = data.d if cfg.k_max is None else min(cfg.k_max, data.d)
            k_min = max(1, min(cfg.k_min, k_max))
            sweep = rfe_sweep(data, trainer, range(k_min, k_max + 1), self.config.cv.k, seed,
                              workers=self.config.workers, n_repeats=cfg.n_repeats,
                              holdout=cfg.holdout)
            result = sweep.rfe
            selected = sweep.selected()
            produced.append(_write_frame(self.out / "rfe_sweep.csv", sweep.to_frame()))
        removed = [name for name in data.feature_names if name not in selected]
        self._cache["features"] = tuple(selected)
        text = "\n".join([
            result.to_text(),
            "",
            f"trainer: {trainer_name}",
            f"selected features ({len(selected)}): {', '.join(selected)}",
            f"removed features ({len(removed)}): {', '.join(removed) or 'none'}",
        ])
        produced += [
            _write_frame(self.out / "rfe_ranking.csv", result.to_frame()),
            _write_text(self.out / "rfe.txt", text),
            _write_text(self.out / "selected_features.txt", "\n".join(selected)),
        ]
        return produced

    def _stage_train(self):
        cfg = self.config
        name = self.selected_name()
        spec = self.selected_spec()
        data = self.model_data().select(self.features())

        refits = []
        best_model, best_r2 = None, -np.inf
        for refit in range(cfg.selection.best_of_refits):
            rng = np.random.default_rng([cfg.seed, refit])
            perm = rng.permutation(data.n)
            n_test = max(2, int(round(cfg.selection.holdout * data.n)))
            test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
            model = fit(spec, data.take(train))
            held_out = data.take(test)
            r2 = compute_metrics(model.predict(held_out.rows), held_out.target).r2
            refits.append({"refit": refit, "n_train": int(train.size), "holdout_r2": r2})
            log.debug("Refit %d of %s: held-out R2 %.4f", refit, name, r2)
            if best_model is None or r2 > best_r2:
                best_model, best_r2 = model, r2
        self._cache["model"] = best_model
        self.manifest.selected_model = name
        log.info("Kept %s refit with held-out R2 %.4f", name, best_r2)

        cv = cross_validate(spec_trainer(spec), data, kfold_split(data, cfg.cv.k, cfg.cv_seed),
                            cfg.workers, name=name, mape_epsilon=cfg.cv.mape_epsilon)
        r2 = cv.metric("r2")
        text = "\n".join([
            f"chosen model: {name} ({spec.family}) on {data.d} features",
            f"best of {cfg.selection.best_of_refits} refits: held-out R2 {best_r2:.4f}",
            "CV R2 per fold: " + ", ".join(f"{v:.4f}" for v in r2),
            "",
            cv.summary.to_table(f"{name}: {cfg.cv.k}-fold CV on selected features"),
        ])
        cv.summary.to_csv(self.out / "model_cv.csv")
        return [
            save_model(best_model, self.out / "model.json"),
            _write_frame(self.out / "refits.csv", pd.DataFrame(refits)),
            self.out / "model_cv.csv",
            _write_text(self.out / "model_cv.txt", text),
        ]

    def _stage_optimize(self):
        cfg = self.config.campaign
        if not cfg.enabled:
            return None
        model = self.model()
        schema = {s.name: s for s in self.schema()[0]}
        bounds = Bounds.from_features([schema[name] for name in model.feature_names])
        result = run_campaign(surrogate_objective(model), bounds, cfg.method_specs(), cfg.runs,
                              self.config.seed, workers=self.config.workers,
                              feature_names=model.feature_names)
        self.manifest.best_method = result.best_method
        produced = []
        for method in result.results:
            produced.append(_write_frame(self.out / f"trace_{method.name}.csv",
                                         method.trace_frame()))
            produced.append(_write_frame(self.out / f"envelope_{method.name}.csv",
                                         method.envelope_frame()))
        target = self.raw_target_name()
        produced += [
            _write_frame(self.out / "campaign_summary.csv", result.summary_frame()),
            _write_text(self.out / "campaign_summary.txt", result.summary_text()),
            _write_frame(self.out / "candidates.csv", result.candidates_frame(target)),
        ]
        return produced

    def _stage_report(self):
        return [emit_report(self.manifest)]


def _read_features(path: Path) -> tuple:
    return tuple(line.strip() for line in path.read_text(encoding="utf-8").splitlines()
                 if line.strip())


# -------------------------------------------------------------------------
# Entry points
# -------------------------------------------------------------------------

def registry_path(config: PipelineConfig) -> str:
    return os.environ.get("MILLOPT_REGISTRY") or os.path.join(config.output_dir, "runs.db")


async def _sync(registry: RunRegistry, run_id: int, manifest: RunManifest) -> None:
    for stage, status in manifest.stages.items():
        await registry.set_stage(run_id, stage, status)
        artifacts = manifest.stage_artifacts(stage)
        if artifacts:
            await registry.record_artifacts(run_id, stage, artifacts)


async def run_stages(config: PipelineConfig, stages: Sequence[str] = STAGES,
                     resume: bool = True) -> RunManifest:
    """Run `stages` in order; upstream results come from disk when resuming, else are recomputed."""
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValueError(f"Unknown stage(s): {', '.join(unknown)}")
    os.makedirs(config.output_dir, exist_ok=True)
    ctx = PipelineContext(config, resume=resume)

    registry = RunRegistry(registry_path(config))
    await registry.init()
    run_id = await registry.start_run(ctx.manifest.config_hash, config.seed, __version__,
                                      config.output_dir)
    status = FAILED
    try:
        for stage in stages:
            try:
                await asyncio.to_thread(ctx.run_stage, stage)
            finally:
                await _sync(registry, run_id, ctx.manifest)
        status = COMPLETED
        await registry.compare_with_previous(run_id, ctx.manifest.config_hash, config.seed)
    finally:
        ctx.manifest.finished_at = datetime.now(timezone.utc).isoformat()
        ctx.manifest.save()
        await registry.finish_run(run_id, status)
        await registry.close()
    return ctx.manifest


async def run_pipeline(config: PipelineConfig) -> RunManifest:
    """Every stage from scratch; disabled stages are recorded as skipped."""
    log.info("Pipeline started (seed %d, output %s)", config.seed, config.output_dir)
    manifest = await run_stages(config, STAGES, resume=False)
    log.info("Pipeline finished: selected model %s, best method %s", manifest.selected_model,
             manifest.best_method)
    return manifest
