"""
Flowembed - Main Entry Point

Command-line front end for the pipeline. Each subcommand runs one stage
against the run directory (--out) and prints the stage's structured result
as JSON on stdout; logs go to stderr.

    flowembed synth --config config.example/pipeline.json --out runs/demo
    flowembed build-graph --holdout class_03 --out runs/demo
    ...
    flowembed train --out runs/demo
    flowembed zdt --out runs/demo

Stages after build-graph reuse the holdout class recorded with the graph
when --holdout is not given.

Exit codes: 0 on success, 1 on a pipeline error, 2 on invalid arguments.
"""

import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from src.config import load_config
from src.errors import FlowEmbedError
from src.pipeline import STAGES, PipelineRunner
from src.utils import configure_logging, get_logger

logger = get_logger(__name__)


# =============================================================================
# ARGUMENTS
# =============================================================================

# CLI flag -> config field
CONFIG_FLAGS = {
    "seed": "seed",
    "holdout": "holdout",
    "out": "out_dir",
    "repeats": "repeats",
    "threshold": "zdt_threshold",
    "profiles": "profiles",
    "cluster_mode": "cluster_mode",
}

STAGE_HELP = {
    "synth": "generate a labeled synthetic flow dataset",
    "ingest": "parse and sort a flow CSV into the run directory",
    "build-graph": "build the weighted connection graph",
    "embed-nodes": "compute FastRP node embeddings",
    "make-examples": "slide windows over class streams into (F, A) examples",
    "train": "train the ST-PCN embedder",
    "embed": "embed examples (or a new flow file with --flows)",
    "classify": "random forest classification on frozen embeddings",
    "zdt": "zero-day threat detection with a held-out class",
    "cata": "closest attack type attribution for the held-out class",
    "eval": "clustering and detection metrics of the test embeddings",
    "project": "3-D PCA projection of the embeddings",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON (or TOML) config file")
    common.add_argument("--seed", type=int, help="seed for every random stage")
    common.add_argument(
        "--holdout", help="class kept out of graph and training; later stages reuse it"
    )
    common.add_argument("--out", help="run directory")
    common.add_argument("--force", action="store_true", help="accept artifacts from another config")

    parser = argparse.ArgumentParser(
        prog="flowembed",
        description="Network-flow behavior embeddings and downstream malware tasks",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    commands = {
        stage: subparsers.add_parser(stage, parents=[common], help=STAGE_HELP[stage])
        for stage in STAGES
    }
    commands["synth"].add_argument("--profiles", help="JSON list of class profiles")
    commands["ingest"].add_argument("input_path", nargs="?", help="flow CSV to ingest")
    commands["embed"].add_argument("--flows", help="new flow CSV to embed against stored nodes")
    commands["classify"].add_argument(
        "--with-holdout", action="store_true", help="repeated-holdout protocol"
    )
    commands["classify"].add_argument("--repeats", type=int, help="holdout repetitions")
    commands["zdt"].add_argument("--repeats", type=int, help="sweep this many holdout classes")
    commands["zdt"].add_argument("--threshold", type=float, help="ZDT decision threshold")
    commands["eval"].add_argument(
        "--cluster-mode", choices=["kmeans", "truth"], help="predicted clustering source"
    )
    return parser


def stage_options(command: str, args: argparse.Namespace) -> Dict[str, Any]:
    """Options passed through to the stage method."""
    if command == "ingest":
        return {"input_path": args.input_path}
    if command == "embed":
        return {"flows": args.flows}
    if command == "classify":
        return {"with_holdout": args.with_holdout, "repeats": args.repeats}
    if command == "zdt":
        return {"repeats": args.repeats}
    return {}


# =============================================================================
# ENTRY POINT
# =============================================================================

def cli(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one stage, print its result; returns the exit code."""
    args = build_parser().parse_args(argv)
    overrides = {
        field: getattr(args, flag)
        for flag, field in CONFIG_FLAGS.items()
        if getattr(args, flag, None) is not None
    }

    try:
        config = load_config(args.config, **overrides)
    except FlowEmbedError as exc:
        configure_logging()
        print(json.dumps(exc.to_dict(), indent=2, sort_keys=True, default=str))
        return 1

    configure_logging(config.log_level, config.log_format)
    runner = PipelineRunner(config, force=args.force)
    result = runner.run(args.command, **stage_options(args.command, args))
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return 0 if result.get("status") == "ok" else 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
