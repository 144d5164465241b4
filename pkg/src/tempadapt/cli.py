"""Command-line interface for the pipeline.

Subcommands run the pipeline through the named stage; ``all`` runs
everything and writes the manifest; ``report`` charts a results file.
Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .corpus import CorpusError
from .pipeline import (
    ConfigError,
    PipelineConfig,
    StageError,
    dump_stats,
    render_report,
    run_pipeline,
)

_STAGE_COMMANDS = ("ingest", "stats", "tuples", "templates", "prompts", "emit-train", "all")


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--c1", dest="c1_path", help="snapshot file for T1")
    parser.add_argument("--c2", dest="c2_path", help="snapshot file for T2")
    parser.add_argument("--t1", dest="t1_label", help="timestamp label for T1")
    parser.add_argument("--t2", dest="t2_label", help="timestamp label for T2")
    parser.add_argument("--format", dest="input_format", choices=("lines", "records"))
    parser.add_argument("--method", choices=("freq", "div", "cont"))
    parser.add_argument("--template-source", dest="template_source", choices=("manual", "auto"))
    parser.add_argument("--template-file", dest="template_file")
    parser.add_argument("--emb1", dest="emb1_path", help="embedding table for T1")
    parser.add_argument("--emb2", dest="emb2_path", help="embedding table for T2")
    parser.add_argument("-k", "--k", dest="k", type=int)
    parser.add_argument("-m", "--m", dest="m", type=int)
    parser.add_argument("--beam-width", dest="beam_width", type=int)
    parser.add_argument("--out", dest="output_dir", help="output directory")


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        name: getattr(args, name, None)
        for name in PipelineConfig.__dataclass_fields__
        if getattr(args, name, None) is not None
    }
    if args.config:
        return PipelineConfig.from_file(args.config, overrides)
    return PipelineConfig(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tempadapt",
        description="Mine semantic-shift tuples from two corpus snapshots and "
        "emit prompts for time-adapting a masked language model.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGE_COMMANDS:
        stage_parser = sub.add_parser(name, help=f"run the pipeline through {name!r}")
        _add_override_flags(stage_parser)
    report = sub.add_parser("report", help="chart perplexity against k")
    report.add_argument("results", help="results TSV (dataset model method template k perplexity)")
    report.add_argument("--out", default="report.svg", help="chart output path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "report":
            out = render_report(args.results, args.out)
            print(f"wrote {out} and {out.with_suffix('.tsv')}")
            return 0
        config = _build_config(args)
        if args.command == "stats":
            config.validate()
            dump_stats(config)
            print(f"wrote stats TSVs to {config.output_dir}")
            return 0
        until = None if args.command == "all" else args.command
        manifest = run_pipeline(config, until=until)
        for artifact in manifest["artifacts"]:
            print(f"{artifact['sha256'][:12]}  {artifact['path']}")
        return 0
    except (ConfigError, CorpusError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
