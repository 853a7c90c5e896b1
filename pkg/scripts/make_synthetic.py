"""Generate a synthetic corpus plus matching word vectors and print its statistics."""

import argparse
from pathlib import Path

from hseqlabel.features import write_embeddings
from hseqlabel.ingest import write_corpus
from hseqlabel.synth import GeneratorProfile, corpus_stats, generate_corpus, synthetic_embeddings


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="runs/synthetic")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=350)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--profile", help="generator profile JSON")
    args = ap.parse_args()

    profile = GeneratorProfile.load(args.profile) if args.profile else GeneratorProfile()
    profile = GeneratorProfile.from_json({**vars(profile), "seed": args.seed, "count": args.count})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = generate_corpus(profile)
    write_corpus(records, out / "corpus.jsonl")
    write_embeddings(synthetic_embeddings(records, profile, dim=args.dim, seed=args.seed), out / "vectors.txt")
    s = corpus_stats(records)
    print(f"{s.documents} documents, {s.mean_lines:.1f} lines and {s.mean_tokens:.1f} tokens per document")
    print(f"wrote {out / 'corpus.jsonl'} and {out / 'vectors.txt'}")


if __name__ == "__main__":
    main()
