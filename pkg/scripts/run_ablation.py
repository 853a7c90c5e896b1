"""Multi-seed comparison of the architecture variants and of single- vs multi-task training.

Prints mean [min, max] test micro-F1 per variant and optionally writes all
per-seed metrics to JSON.
"""

import argparse
import json

from hseqlabel.experiments import ABLATION_VARIANTS, TASK_VARIANTS, comparison_table, run_section_specific, run_variant
from hseqlabel.features import FeatureConfig, HandcraftedFeatureSpec
from hseqlabel.model import ModelConfig
from hseqlabel.synth import GeneratorProfile, generate_corpus, synthetic_embeddings


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--train", type=int, default=300)
    ap.add_argument("--test", type=int, default=50)
    ap.add_argument("--variants", nargs="+", default=list(ABLATION_VARIANTS) + ["tokens_only"])
    ap.add_argument("--section", choices=["contact", "work", "education"],
                    help="also train a section-specific model on gold segments")
    ap.add_argument("--out")
    args = ap.parse_args()

    records = generate_corpus(GeneratorProfile(seed=0, count=args.train + args.test))
    train_r, test_r = records[:args.train], records[args.train:]
    features = FeatureConfig("embedding", table=synthetic_embeddings(records, dim=32, seed=0),
                             spec=HandcraftedFeatureSpec.default())
    base = ModelConfig(hidden=args.hidden, epochs=args.epochs)
    seeds = list(range(args.seeds))
    table = {**ABLATION_VARIANTS, **TASK_VARIANTS}
    results = {}
    for name in args.variants:
        desc, overrides = table[name]
        results[name] = run_variant(name, desc, base, overrides, train_r, test_r, features, seeds, progress=print)
    print(comparison_table(results, ("tokens.micro_f1", "lines.micro_f1", "sections.work")))

    dump = {name: {"description": vr.description, "runs": vr.runs, "summary": vr.summary()}
            for name, vr in results.items()}
    if args.section:
        f1 = [run_section_specific(ModelConfig(hidden=args.hidden, epochs=args.epochs, seed=s), args.section,
                                   train_r, test_r, features)["tokens"]["micro_f1"] for s in seeds]
        print(f"section-specific {args.section}: token F1 {100 * sum(f1) / len(f1):.2f}")
        dump[f"section_{args.section}"] = f1
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(dump, fh, indent=2)


if __name__ == "__main__":
    main()
