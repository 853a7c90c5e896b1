"""Acceptance criteria, one test per criterion.

The learning criteria share one synthetic corpus (300 train / 50 test
documents, default profile, noise off) and one set of multi-seed runs. Every
run uses hidden width 32 and 5 epochs to keep the whole module near 15
minutes on a single core.
"""

import itertools
import time

import numpy as np
import pytest

from hseqlabel.checkpoint import dumps_model, loads_model
from hseqlabel.crf import CrfParams, log_partition, score_path, viterbi_decode
from hseqlabel.doc_model import (
    ENTITY_TYPES,
    GROUPED_SECTIONS,
    SECTION_TYPES,
    AnnotationSet,
    EntitySpan,
    TokenLabelScheme,
    decode_line_labels,
    decode_token_labels,
    encode_line_labels,
    encode_token_labels,
)
from hseqlabel.experiments import ABLATION_VARIANTS, TASK_VARIANTS, run_section_specific, run_variant
from hseqlabel.features import FeatureConfig, HandcraftedFeatureSpec
from hseqlabel.gradcheck import SUITES, run_all
from hseqlabel.ingest import make_document
from hseqlabel.model import ModelConfig, predict
from hseqlabel.synth import GeneratorProfile, generate_corpus, generate_document, synthetic_embeddings
from hseqlabel.training import build_documents, train

SEEDS = (0, 1, 2)
BASE = ModelConfig(hidden=32, epochs=5)
N_TRAIN, N_TEST = 300, 50


@pytest.fixture(scope="module")
def corpus():
    records = generate_corpus(GeneratorProfile(seed=0, count=N_TRAIN + N_TEST))
    return records[:N_TRAIN], records[N_TRAIN:]


@pytest.fixture(scope="module")
def features(corpus):
    train_r, test_r = corpus
    table = synthetic_embeddings(train_r + test_r, dim=32, seed=0)
    return FeatureConfig("embedding", table=table, spec=HandcraftedFeatureSpec.default())


@pytest.fixture(scope="module")
def runs(corpus, features):
    train_r, test_r = corpus
    out = {}
    for name, (desc, overrides) in ABLATION_VARIANTS.items():
        out[name] = run_variant(name, desc, BASE, overrides, train_r, test_r, features, SEEDS,
                                progress=print, keep_models=(name == "v1"))
    desc, overrides = TASK_VARIANTS["tokens_only"]
    out["tokens_only"] = run_variant("tokens_only", desc, BASE, overrides, train_r, test_r, features, SEEDS,
                                     progress=print)
    return out


def pct(x):
    return f"{100 * x:.2f}%"


# ---------------------------------------------------------------------------


def test_criterion_01_crf_oracle(criterion):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    n, worst, paths_ok = 0, 0.0, True
    for N, K in itertools.product(range(1, 7), range(1, 6)):
        for _ in range(8):
            E = rng.normal(size=(N, K))
            p = CrfParams(rng.normal(size=(K, K)), rng.normal(size=K), rng.normal(size=K))
            paths = list(itertools.product(range(K), repeat=N))
            scores = np.array([score_path(E, p, y) for y in paths])
            m = scores.max()
            worst = max(worst, abs(log_partition(E, p) - (m + np.log(np.exp(scores - m).sum()))))
            best, s = viterbi_decode(E, p)
            # lowest-index tie-break: the first maximizer in lexicographic order
            paths_ok &= tuple(best) == paths[int(np.argmax(scores))] and abs(s - m) < 1e-12
            n += 1
        # exact ties exercise the tie rule
        paths_ok &= list(viterbi_decode(np.zeros((N, K)), CrfParams.zeros(K))[0]) == [0] * N
    elapsed = time.perf_counter() - t0
    ok = n >= 200 and worst < 1e-9 and paths_ok and elapsed < 5.0
    criterion(1, ok, f"{n} instances, max |logZ - brute| {worst:.1e}, viterbi paths match {paths_ok}, {elapsed:.2f}s")


def test_criterion_02_gradients(criterion):
    from hseqlabel.cli import main

    t0 = time.perf_counter()
    results = run_all(seed=0)
    elapsed = time.perf_counter() - t0
    suites = {r.suite.split("[")[0].removesuffix("_nll") for r in results}
    worst = max(r.error for r in results)
    code = main(["gradcheck"])
    ok = all(r.ok for r in results) and suites == set(SUITES) and code == 0 and elapsed < 60.0
    criterion(2, ok, f"{len(results)} tensors over {len(suites)} suites, max rel err {worst:.1e}, "
                     f"gradcheck exit {code}, {elapsed:.1f}s")


def random_annotation_set(rng):
    """A random document with a valid section/group layout and gap-separated entities."""
    L = int(rng.integers(1, 30))
    words = ["Ab", "cd", "E9", "x", "Yz", "-", "q"]
    lines = [" ".join(rng.choice(words, size=int(rng.integers(0, 6)))) for _ in range(L)]
    doc = make_document("r", "\n".join(lines) + "\n")
    sections, groups, prev = [], [], None
    j = 0
    while j < L:
        if rng.random() < 0.3:
            j, prev = j + 1, None
            continue
        n = int(rng.integers(1, min(8, L - j) + 1))
        typ = str(rng.choice([t for t in SECTION_TYPES if t != prev]))
        sections.append((typ, j, j + n - 1))
        if typ in GROUPED_SECTIONS:
            k = j
            while k < j + n:
                if rng.random() < 0.5:
                    g = int(rng.integers(1, j + n - k + 1))
                    groups.append((typ, k, k + g - 1))
                    k += g
                else:
                    k += 1
        j, prev = j + n, typ
    ents, last = [], -2
    for line in doc.lines:
        # one untagged token between spans keeps them apart under IO, across line breaks too
        i = max(line.token_start, last + 2)
        while i <= line.token_end and not doc.tokens[i].is_empty_marker:
            if rng.random() < 0.4:
                n = int(rng.integers(1, line.token_end - i + 2))
                ents.append(EntitySpan(str(rng.choice(ENTITY_TYPES)), doc.tokens[i].char_start,
                                       doc.tokens[i + n - 1].char_end))
                last = i + n - 1
                i += n + 1
            else:
                i += 1
    return doc, AnnotationSet.of(sections, groups, ents)


def test_criterion_03_codec_round_trips(criterion):
    rng = np.random.default_rng(0)
    schemes = [TokenLabelScheme(ENTITY_TYPES, k) for k in ("bio", "io")]
    t0 = time.perf_counter()
    failures = 0
    for _ in range(1000):
        doc, ann = random_annotation_set(rng)
        back = decode_line_labels(encode_line_labels(doc, ann))
        failures += (back.sections, back.groups) != (ann.sections, ann.groups)
        for s in schemes:
            failures += decode_token_labels(encode_token_labels(doc, ann, s), doc, s) != list(ann.entities)
    elapsed = time.perf_counter() - t0
    criterion(3, failures == 0 and elapsed < 5.0, f"1000 sets, {failures} round-trip failures, {elapsed:.2f}s")


def test_criterion_04_learnability(criterion, runs, corpus, features):
    v1 = runs["v1"]
    tok, line = v1.runs[0]["tokens.micro_f1"], v1.runs[0]["lines.micro_f1"]
    # same seed, fewer epochs: the loss history must be a bit-identical prefix
    cfg = ModelConfig(hidden=32, epochs=2, seed=SEEDS[0])
    again = train(cfg, build_documents(corpus[0], cfg), features).losses
    deterministic = again == v1.losses[0][:2]
    seconds = v1.seconds[0]
    ok = tok >= 0.90 and line >= 0.90 and deterministic and seconds < 15 * 60
    criterion(4, ok, f"seed {SEEDS[0]}, {BASE.epochs} epochs: token F1 {pct(tok)}, line F1 {pct(line)}, "
                     f"deterministic {deterministic}, trained in {seconds:.0f}s")


def test_criterion_05_birnn_ablation(criterion, runs):
    v1, v3 = runs["v1"].mean("tokens.micro_f1"), runs["v3"].mean("tokens.micro_f1")
    criterion(5, v1 - v3 >= 0.05, f"token F1 IF+BiRNN+CRF {pct(v1)} vs IF+CRF {pct(v3)}, "
                                  f"gap {100 * (v1 - v3):.2f} points (need >= 5)")


def test_criterion_06_crf_vs_softmax(criterion, runs):
    v1, v2 = runs["v1"].mean("tokens.micro_f1"), runs["v2"].mean("tokens.micro_f1")
    criterion(6, v1 >= v2 - 0.01, f"token F1 CRF {pct(v1)} vs softmax {pct(v2)} (need CRF >= softmax - 1 point)")


def test_criterion_07_multi_vs_single(criterion, runs):
    multi, single = runs["v1"].mean("tokens.micro_f1"), runs["tokens_only"].mean("tokens.micro_f1")
    criterion(7, multi >= single - 0.01,
              f"token F1 multi-task {pct(multi)} vs tokens-only {pct(single)} (need multi >= single - 1 point)")


def test_criterion_08_section_specific(criterion, runs, corpus, features):
    train_r, test_r = corpus
    unified = runs["v1"].mean("sections.work")
    specific = np.mean([run_section_specific(ModelConfig(hidden=32, epochs=5, seed=s), "work", train_r, test_r,
                                             features)["tokens"]["micro_f1"] for s in SEEDS])
    criterion(8, specific >= unified,
              f"work entity F1 section-specific {pct(specific)} vs unified {pct(unified)} (need >=)")


def test_criterion_09_determinism_and_serialization(criterion, runs, corpus, features):
    small = corpus[0][:20]
    cfg = ModelConfig(hidden=8, epochs=3, seed=7)
    a = train(cfg, build_documents(small, cfg), features).losses
    b = train(cfg, build_documents(small, cfg), features).losses
    model = runs["v1"].models[0]
    back = loads_model(dumps_model(model))
    back.attach_features(features.table)
    docs = [make_document(r.id, r.text) for r in corpus[1]]
    same = sum(predict(model, d) == predict(back, d) for d in docs)
    ok = a == b and same == len(docs) == 50
    criterion(9, ok, f"loss histories identical {a == b}, identical predictions after reload {same}/{len(docs)}")


def test_criterion_10_throughput(criterion, runs):
    model = runs["v1"].models[0]
    rec = generate_document(GeneratorProfile(seed=99, target_lines=120), 0)
    text = "\n".join(rec.text.split("\n")[:100]) + "\n"
    doc = make_document("cv100", text)
    assert doc.num_lines == 100
    predict(model, doc)  # warm caches once
    t0 = time.perf_counter()
    predict(model, make_document("cv100", text))
    elapsed = time.perf_counter() - t0
    criterion(10, elapsed < 1.0, f"100-line resume ({doc.num_tokens} tokens) parsed in {1000 * elapsed:.0f} ms")
