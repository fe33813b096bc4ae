import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .dataset import dump_schema, write_csv
from .errors import MilloptError, StageError
from .models import load_model, model_info
from .pipeline import STAGES, run_pipeline, run_stages
from .synthetic import SyntheticMill, generate_synthetic_mill

log = logging.getLogger(__name__)

_STAGE_HELP = {
    "clean": "drop non-finite and out-of-bound rows",
    "stats": "descriptive statistics and histograms",
    "compare": "cross-validate every roster model",
    "rank": "Friedman ranking with paired t-tests",
    "lof": "local outlier factor study",
    "rfe": "recursive feature elimination sweep",
    "train": "fit the selected model on the selected features",
    "optimize": "optimiser/sampler campaign on the surrogate",
    "report": "write the plain-text run report",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML pipeline configuration")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--output-dir", help="artifact directory")
    common.add_argument("--workers", type=int, help="thread pool size")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(
        prog="millopt",
        description="Surrogate-based mill throughput optimisation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"millopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=_STAGE_HELP[stage])
    sub.add_parser("pipeline", parents=[common], help="run every stage from scratch")

    synth = sub.add_parser("synth", parents=[common], help="write a synthetic mill dataset")
    synth.add_argument("--n", type=int, default=2000, help="number of rows")
    synth.add_argument("--noise-std", type=float, default=20.0)
    synth.add_argument("--out", default="synthetic_mill.csv", help="CSV destination")
    synth.add_argument("--schema-out", default="synthetic_mill.schema.yaml",
                       help="schema YAML destination")

    info = sub.add_parser("model-info", help="print the structure of a saved model")
    info.add_argument("path", help="model JSON file")
    return parser


def setup_logging(level: str) -> None:
    """Configure the root logger on first use; later calls only change its level."""
    numeric = getattr(logging, str(level).upper(), logging.INFO)
    logging.basicConfig(
        level=numeric,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    logging.getLogger().setLevel(numeric)


def _overrides(args) -> dict:
    return {
        "seed": getattr(args, "seed", None),
        "output_dir": getattr(args, "output_dir", None),
        "workers": getattr(args, "workers", None),
        "log_level": getattr(args, "log_level", None),
    }


def _cmd_synth(args, seed: int) -> int:
    data = generate_synthetic_mill(args.n, seed, args.noise_std)
    mill = SyntheticMill()
    write_csv(data, args.out)
    dump_schema(args.schema_out, mill.schema, mill.target_spec)
    print(f"wrote {data.n} rows to {args.out} and the schema to {args.schema_out}")
    print(f"noise-free maximum {mill.maximum:.3f} {mill.target_spec.unit}")
    return 0


def _cmd_model_info(args) -> int:
    print(model_info(load_model(args.path)))
    return 0


def _print_manifest(manifest, stages) -> None:
    for stage in stages:
        print(f"{stage}: {manifest.stages.get(stage, 'not run')}")
        for path, _ in sorted(manifest.stage_artifacts(stage).values()):
            print(f"  {path}")


def dispatch(args) -> int:
    if args.command == "model-info":
        return _cmd_model_info(args)

    config = load_config(args.config, _overrides(args))
    setup_logging(config.log_level)

    if args.command == "synth":
        return _cmd_synth(args, config.seed)
    os.makedirs(config.output_dir, exist_ok=True)
    if args.command == "pipeline":
        manifest = asyncio.run(run_pipeline(config))
        _print_manifest(manifest, STAGES)
        print(f"manifest: {Path(config.output_dir) / 'manifest.json'}")
        return 0
    manifest = asyncio.run(run_stages(config, [args.command], resume=True))
    _print_manifest(manifest, [args.command])
    return 0


def main(argv=None) -> int:
    """Parse, run, and map failures to exit codes (1 for toolkit errors, 2 for usage)."""
    args = build_parser().parse_args(argv)
    setup_logging(getattr(args, "log_level", None) or os.environ.get("LOG_LEVEL", "INFO"))
    try:
        return dispatch(args)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except MilloptError as e:
        print(f"error: [{args.command}] {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: [{args.command}] {e}", file=sys.stderr)
        return 1
    except Exception:
        log.exception("Unexpected failure in %s", args.command)
        return 1
