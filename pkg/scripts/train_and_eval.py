"""Train one configuration on a synthetic split and report test metrics.

Example:
    python scripts/train_and_eval.py --epochs 5 --hidden 32 --task multi
"""

import argparse
import json
import time

from hseqlabel.evaluation import evaluate, format_report
from hseqlabel.features import FeatureConfig, HandcraftedFeatureSpec
from hseqlabel.model import ModelConfig
from hseqlabel.synth import GeneratorProfile, generate_corpus, synthetic_embeddings
from hseqlabel.training import build_documents, train


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--corpus-seed", type=int, default=0)
    ap.add_argument("--train", type=int, default=300)
    ap.add_argument("--test", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--task", default="multi", choices=["multi", "lines", "tokens"])
    ap.add_argument("--head", default="crf", choices=["crf", "softmax"])
    ap.add_argument("--no-birnn", action="store_true")
    ap.add_argument("--config", help="ModelConfig JSON overriding the flags above")
    ap.add_argument("--out", help="write the report JSON here")
    args = ap.parse_args()

    records = generate_corpus(GeneratorProfile(seed=args.corpus_seed, count=args.train + args.test))
    train_r, test_r = records[:args.train], records[args.train:]
    features = FeatureConfig("embedding", table=synthetic_embeddings(records, dim=32, seed=args.corpus_seed),
                             spec=HandcraftedFeatureSpec.default())
    obj = dict(task=args.task, head=args.head, hidden=args.hidden, epochs=args.epochs, seed=args.seed,
               use_token_birnn=not args.no_birnn, use_line_birnn=not args.no_birnn)
    if args.config:
        with open(args.config) as fh:
            obj.update(json.load(fh))
    cfg = ModelConfig.from_json(obj)

    t0 = time.perf_counter()
    result = train(cfg, build_documents(train_r, cfg), features,
                   progress=lambda r: print(f"epoch {r.epoch:>2}  loss {r.mean_loss:9.4f}  {r.seconds:5.1f}s"))
    print(f"trained in {time.perf_counter() - t0:.0f}s")
    report = evaluate(result.model, build_documents(test_r, cfg))
    print(format_report(report))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)


if __name__ == "__main__":
    main()
