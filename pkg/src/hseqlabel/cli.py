"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checkpoint import CheckpointError, load_model, save_model
from .crf import CrfError
from .doc_model import AnnotationError
from .evaluation import dumps_report, evaluate, format_report
from .experiments import comparison_table, run_ablation
from .features import FeatureConfig, FeatureError, HandcraftedFeatureSpec, load_embeddings, read_external_features, write_embeddings
from .ingest import CorpusError, SplitSpec, build_document, load_corpus, make_document, split_corpus, write_corpus
from .model import ConfigError, ModelConfig, predict, require_task
from .neural import NumericError
from .training import build_documents, section_subrecords, train, train_section_specific

logger = logging.getLogger("hseqlabel")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Shared helpers


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise UsageError(f"{path}: expected a JSON object")
    return obj


def model_config(args) -> ModelConfig:
    """Config file overlaid by explicit command-line flags."""
    obj = _load_json(getattr(args, "config", None))
    if args.seed is not None:
        obj["seed"] = args.seed
    if getattr(args, "task", None):
        obj["task"] = args.task
    if getattr(args, "head", None):
        obj["head"] = args.head
    if getattr(args, "no_birnn", False):
        obj["use_token_birnn"] = obj["use_line_birnn"] = False
    if getattr(args, "token_scheme", None):
        obj["token_scheme"] = args.token_scheme
    if getattr(args, "language_mode", None):
        obj["language_mode"] = args.language_mode
    if getattr(args, "epochs", None) is not None:
        obj["epochs"] = args.epochs
    if getattr(args, "hidden", None) is not None:
        obj["hidden"] = args.hidden
    if getattr(args, "external_features", None) and "feature_source" not in obj:
        obj["feature_source"] = "external"
    try:
        return ModelConfig.from_json(obj)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def external_config(path: str) -> FeatureConfig:
    raw = read_external_features(path)
    dim = None
    for lines in raw.values():
        for rows in lines:
            if rows:
                dim = len(rows[0])
                break
        if dim is not None:
            break
    if dim is None:
        raise FeatureError(f"{path}: no feature rows found")
    return FeatureConfig("external", external=raw, external_dim=dim)


def feature_config(args, source: str) -> FeatureConfig:
    if source == "external":
        if not args.external_features:
            raise UsageError("this model needs --external-features")
        return external_config(args.external_features)
    table = load_embeddings(args.embeddings) if args.embeddings else None
    if table is None:
        logger.warning("no --embeddings given: using handcrafted features only")
    return FeatureConfig("embedding", table=table, spec=HandcraftedFeatureSpec.default())


def _attach(model, args) -> None:
    if model.config.feature_source == "external":
        if not args.external_features:
            raise UsageError("this model needs --external-features")
        model.attach_features(external=read_external_features(args.external_features))
    else:
        if not args.embeddings and model.embedding_digest is not None:
            raise UsageError("this model needs the --embeddings it was trained with")
        model.attach_features(table=load_embeddings(args.embeddings) if args.embeddings else None)


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    from .synth import GeneratorProfile, corpus_stats, generate_corpus, synthetic_embeddings

    obj = _load_json(args.config)
    if args.seed is not None:
        obj["seed"] = args.seed
    if args.count is not None:
        obj["count"] = args.count
    try:
        profile = GeneratorProfile.from_json(obj)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad generator profile: {exc}") from None
    if not args.out:
        raise UsageError("synth needs --out")
    records = generate_corpus(profile)
    write_corpus(records, args.out)
    stats = corpus_stats(records) if records else None
    if args.embeddings:
        write_embeddings(synthetic_embeddings(records, profile, dim=args.dim, seed=profile.seed), args.embeddings)
    if stats is not None:
        print(f"wrote {stats.documents} documents ({stats.mean_lines:.1f} lines, {stats.mean_tokens:.1f} tokens on average)")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = model_config(args)
    features = feature_config(args, cfg.feature_source)
    records = load_corpus(args.corpus)
    if args.holdout:
        records, held = split_corpus(records, SplitSpec(1.0 - args.holdout, cfg.seed))
    else:
        held = None
    if args.section:
        result = train_section_specific(cfg, records, args.section, features, held)
    else:
        eval_docs = build_documents(held, cfg) if held else None
        result = train(cfg, build_documents(records, cfg), features, eval_docs)
    if args.checkpoint:
        save_model(result.model, args.checkpoint)
    history = {"history": [h.to_json() for h in result.history], "best_epoch": result.best_epoch,
               "config": result.model.config.to_json()}
    _write(json.dumps(history, indent=2), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.checkpoint)
    _attach(model, args)
    cfg = model.config
    records = load_corpus(args.corpus)
    if args.section:
        if cfg.task != "tokens_only":
            raise UsageError("--section evaluation needs a section-specific (tokens-only) model")
        records = section_subrecords(records, args.section)
    docs = [build_document(r, model.token_scheme, model.line_scheme, cfg.language_mode) for r in records]
    report = evaluate(model, docs)
    _write(dumps_report(report), args.out)
    if args.out:
        print(format_report(report))
    return EXIT_OK


def cmd_parse(args) -> int:
    model = load_model(args.checkpoint)
    _attach(model, args)
    if args.level:
        require_task(model, args.level)
    cfg = model.config
    docs = []
    if args.corpus:
        docs += [make_document(r.id, r.text, cfg.language_mode) for r in load_corpus(args.corpus)]
    for path in args.inputs:
        docs.append(make_document(Path(path).stem, Path(path).read_text(encoding="utf-8"), cfg.language_mode))
    if not docs:
        raise UsageError("parse needs input files or --corpus")
    out = []
    for doc in docs:
        res = predict(model, doc)
        out.append(json.dumps(res.to_json(doc, model.line_scheme, model.token_scheme), ensure_ascii=False))
    _write("\n".join(out), args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = model_config(args)
    features = feature_config(args, "embedding")
    external = external_config(args.external_features) if args.external_features else None
    records = load_corpus(args.corpus)
    train_r, test_r = split_corpus(records, SplitSpec(args.train_fraction, cfg.seed))
    seeds = [cfg.seed + k for k in range(args.seeds)]
    results = run_ablation(cfg, train_r, test_r, features, seeds, external, progress=lambda m: logger.info(m))
    table = comparison_table(results)
    print(table)
    if args.out:
        Path(args.out).write_text(json.dumps(
            {name: {"description": vr.description, "seeds": seeds, "runs": vr.runs, "summary": vr.summary()}
             for name, vr in results.items()}, indent=2), encoding="utf-8")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import format_results, run_all

    results = run_all(seed=args.seed or 0)
    print(format_results(results))
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_NUMERIC


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hseqlabel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, model_flags=True):
        p.add_argument("-v", "--verbose", action="store_true", help="log progress")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        if model_flags:
            p.add_argument("--config", help="model config JSON; flags given here take precedence")
            p.add_argument("--embeddings", help="word vectors in text format")
            p.add_argument("--external-features", help="precomputed per-line token features (JSONL)")
            p.add_argument("--task", choices=["lines", "tokens", "multi"])
            p.add_argument("--head", choices=["crf", "softmax"])
            p.add_argument("--no-birnn", action="store_true", help="feed initial features straight to the heads")
            p.add_argument("--token-scheme", choices=["bio", "io"])
            p.add_argument("--language-mode", choices=["default", "cjk"])
            p.add_argument("--epochs", type=int)
            p.add_argument("--hidden", type=int)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    common(p, model_flags=False)
    p.add_argument("--config", help="generator profile JSON")
    p.add_argument("--count", type=int)
    p.add_argument("--embeddings", help="also write synthetic word vectors here")
    p.add_argument("--dim", type=int, default=32)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--holdout", type=float, default=0.0, help="fraction held out for best-epoch selection")
    p.add_argument("--section", choices=["contact", "work", "education"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on an annotated corpus")
    common(p, model_flags=False)
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--external-features")
    p.add_argument("--section", choices=["contact", "work", "education"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("parse", help="label plain-text documents")
    common(p, model_flags=False)
    p.add_argument("inputs", nargs="*")
    p.add_argument("--corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--external-features")
    p.add_argument("--level", choices=["lines", "tokens"], help="fail unless the model predicts this level")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("ablate", help="compare ablation variants over several seeds")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference checks of all gradients")
    common(p, model_flags=False)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on --help and on usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, CrfError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CorpusError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        for err in getattr(exc, "errors", [])[:20]:
            print(f"  {err}", file=sys.stderr)
        return EXIT_DATA
    except (AnnotationError, FeatureError, CheckpointError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
