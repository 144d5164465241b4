"""Bridge command line: extract, serve, finetune, perplexity."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import BridgeConfig
from .evaluate import masked_perplexity
from .extract import extract_embeddings
from .finetune import finetune
from .formats import read_sentences, write_results
from .models import load_mlm
from .oracle_server import serve


def _config_from_args(args: argparse.Namespace) -> BridgeConfig:
    fields = {}
    for name in BridgeConfig.__dataclass_fields__:
        value = getattr(args, name, None)
        if value is not None:
            fields[name] = value
    return BridgeConfig(**fields)


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", required=True, help="model name or checkpoint directory")
    parser.add_argument("--device", default=None)
    parser.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlmbridge")
    sub = parser.add_subparsers(dest="command", required=True)

    extract = sub.add_parser("extract", help="emit per-occurrence contextual embeddings")
    _add_model_flags(extract)
    extract.add_argument("--sentences", required=True, help="sentence export file")
    extract.add_argument("--tokens", help="comma-separated tokens of interest")
    extract.add_argument("--tokens-file", help="file with one token per line")
    extract.add_argument("--label", required=True, help="snapshot label")
    extract.add_argument("--out", required=True, help="exchange file to write")
    extract.add_argument("--occurrence-cap", dest="occurrence_cap", type=int, default=None)

    server = sub.add_parser("serve", help="serve the likelihood oracle on stdio")
    _add_model_flags(server)

    tune = sub.add_parser("finetune", help="fine-tune the MLM on a training file")
    _add_model_flags(tune)
    tune.add_argument("--train", required=True, help="masked training file")
    tune.add_argument("--out", required=True, help="checkpoint directory")
    tune.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    tune.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    tune.add_argument("--epochs", type=int, default=None)
    tune.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    tune.add_argument("--warmup-fraction", dest="warmup_fraction", type=float, default=None)
    tune.add_argument("--linear-decay", dest="linear_decay", action="store_true", default=None)

    ppl = sub.add_parser("perplexity", help="masked perplexity on a sentence file")
    _add_model_flags(ppl)
    ppl.add_argument("--sentences", required=True)
    ppl.add_argument("--limit", type=int, help="evaluate only the first N sentences")
    ppl.add_argument("--results", help="append a results TSV row here")
    ppl.add_argument("--dataset", default="dataset")
    ppl.add_argument("--model-label", dest="model_label", default="model")
    ppl.add_argument("--method", default="freq")
    ppl.add_argument("--template", default="manual")
    ppl.add_argument("-k", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    config = _config_from_args(args)

    if args.command == "extract":
        tokens: list[str] = []
        if args.tokens:
            tokens.extend(t for t in args.tokens.split(",") if t)
        if args.tokens_file:
            tokens.extend(
                t.strip() for t in Path(args.tokens_file).read_text().splitlines() if t.strip()
            )
        if not tokens:
            print("no tokens of interest given", file=sys.stderr)
            return 2
        n = extract_embeddings(args.sentences, tokens, config, args.out, args.label)
        print(f"wrote {n} records to {args.out}")
        return 0

    if args.command == "serve":
        serve(config)
        return 0

    if args.command == "finetune":
        summary = finetune(config, args.train, args.out)
        print(
            f"fine-tuned on {summary['instances']} instances; "
            f"final epoch loss {summary['epoch_losses'][-1]:.4f}; checkpoint at {args.out}"
        )
        return 0

    if args.command == "perplexity":
        tokenizer, model = load_mlm(config.model, config.device)
        sentences = [" ".join(s) for s in read_sentences(args.sentences)]
        if args.limit:
            sentences = sentences[: args.limit]
        value = masked_perplexity(model, tokenizer, sentences, device=config.device)
        print(f"masked perplexity: {value:.6g}")
        if args.results:
            write_results(
                args.results,
                [(args.dataset, args.model_label, args.method, args.template, args.k, value)],
                append=True,
            )
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
