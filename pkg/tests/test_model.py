import dataclasses

import numpy as np
import pytest

from hseqlabel.checkpoint import CheckpointError, dumps_model, load_model, loads_model, save_model
from hseqlabel.doc_model import AnnotationSet, EntitySpan, TokenLabelScheme
from hseqlabel.features import FeatureConfig, initial_features
from hseqlabel.ingest import CorpusRecord, make_document
from hseqlabel.model import (
    ConfigError,
    ModelConfig,
    TrainedModel,
    forward,
    init_params,
    loss_and_gradients,
    param_shapes,
    predict,
    require_task,
)
from hseqlabel.synth import GeneratorProfile, generate_corpus
from hseqlabel.training import (
    build_documents,
    new_model,
    section_config,
    section_subrecords,
    train,
    train_section_specific,
)


def make(config, features):
    return new_model(config, features)


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(task="both")
    with pytest.raises(ConfigError):
        ModelConfig(head="mlp")
    with pytest.raises(ConfigError):
        ModelConfig(dropout=1.0)
    with pytest.raises(ConfigError):
        ModelConfig(entity_types=("name", "hobby"))
    assert ModelConfig(task="lines").task == "lines_only"


def test_config_json_round_trip():
    cfg = ModelConfig(hidden=7, head="softmax", entity_types=("name", "city"))
    assert ModelConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigError):
        ModelConfig.from_json({"hidden": 3, "depth": 2})


def test_param_shapes_follow_config():
    s = param_shapes(ModelConfig(hidden=4), 10, 33)
    assert s["token_rnn.fw.W"] == (16, 10) and s["line_rnn.fw.U"] == (16, 4)
    assert s["token_out.W"] == (33, 16) and s["line_out.W"] == (18, 8)
    s = param_shapes(ModelConfig(hidden=4, use_token_birnn=False, use_line_birnn=False), 10, 33)
    assert not any("rnn" in k for k in s) and s["line_out.W"] == (18, 20) and s["token_out.W"] == (33, 30)
    s = param_shapes(ModelConfig(hidden=4, head="softmax", task="tokens_only"), 10, 33)
    assert set(s) == {f"token_rnn.{d}.{k}" for d in ("fw", "bw") for k in "WUb"} | {"token_out.W", "token_out.b"}


def test_emission_shapes(small_features):
    doc = make_document("d", "x\n")
    m = make(ModelConfig(hidden=3), small_features)
    fwd = forward(m, doc, initial_features(doc, small_features))
    assert fwd.line_emissions.shape == (1, 18) and fwd.token_emissions.shape == (1, 33)
    m = make(ModelConfig(hidden=3, task="lines_only"), small_features)
    assert forward(m, doc, initial_features(doc, small_features)).token_emissions is None


def test_token_head_sees_line_state(small_features):
    doc = make_document("d", "Jane Doe\nBoston\n")
    X = initial_features(doc, small_features)
    m = make(ModelConfig(hidden=3, seed=1), small_features)
    base = forward(m, doc, X).token_emissions
    m.params["token_out.W"][:, 6:] = 0.0  # line-state half
    assert not np.allclose(forward(m, doc, X).token_emissions, base)


def test_zero_token_weight_matches_lines_only(small_corpus, small_features):
    ld = build_documents(small_corpus[:1], ModelConfig())[0]
    X = initial_features(ld.doc, small_features)
    multi = make(ModelConfig(hidden=4, lambda_token=0.0, seed=2, dropout=0.0), small_features)
    lines = make(ModelConfig(hidden=4, task="lines_only", seed=2, dropout=0.0), small_features)
    lines.params = type(lines.params)({k: multi.params[k] for k in lines.params})
    l1, g1 = loss_and_gradients(multi, ld.doc, X, ld.line_labels, ld.token_labels)
    l2, g2 = loss_and_gradients(lines, ld.doc, X, ld.line_labels, ld.token_labels)
    assert l1 == l2
    for k in g2:
        np.testing.assert_array_equal(g1[k], g2[k])
    for k in ("token_out.W", "token_out.b", "token_crf.transitions", "token_crf.start", "token_crf.end"):
        assert not g1[k].any()
    assert np.isfinite(l1)


def test_loss_decreases_on_50_docs(small_features):
    records = generate_corpus(GeneratorProfile(seed=21, count=50, target_lines=40))
    cfg = ModelConfig(hidden=8, epochs=10, seed=0)
    losses = train(cfg, build_documents(records, cfg), small_features).losses
    assert np.mean(losses[5:]) < np.mean(losses[:5])
    assert losses[-1] < losses[0]


def test_training_deterministic(small_corpus, small_features):
    cfg = ModelConfig(hidden=4, epochs=2, seed=9)
    docs = build_documents(small_corpus[:6], cfg)
    a, b = train(cfg, docs, small_features), train(cfg, docs, small_features)
    assert a.losses == b.losses
    assert all(np.array_equal(a.model.params[k], b.model.params[k]) for k in a.model.params)


def test_memorizes_one_document(small_features):
    rec = CorpusRecord("m", "Jane Doe\nLanguages\nEnglish, French\n", AnnotationSet.of(
        [("contact", 0, 0), ("languages", 1, 2)],
        entities=[("name", 0, 8), ("language_name", 19, 26), ("language_name", 28, 34)]))
    cfg = ModelConfig(hidden=8, epochs=150, dropout=0.0, seed=0, adam={"lr": 0.01})
    docs = build_documents([rec], cfg)
    model = train(cfg, docs, small_features).model
    res = predict(model, docs[0].doc)
    assert list(res.line_labels) == list(docs[0].line_labels)
    assert list(res.token_labels) == list(docs[0].token_labels)
    assert res.annotations.entities == rec.annotations.entities


def test_predict_contract(tiny_model, small_corpus):
    for rec in small_corpus[-3:]:
        doc = make_document(rec.id, rec.text)
        res = predict(tiny_model, doc)
        assert len(res.line_labels) == doc.num_lines and len(res.token_labels) == doc.num_tokens
    res = predict(tiny_model, make_document("e", ""))
    assert res.line_labels == () and res.annotations.entities == ()


def test_all_o_decodes_to_no_entities(small_features):
    m = make(ModelConfig(hidden=3, task="tokens_only", head="softmax"), small_features)
    m.params["token_out.b"][0] = 100.0
    assert predict(m, make_document("d", "nothing to see\n")).annotations.entities == ()


def test_checkpoint_round_trip(tmp_path, tiny_model):
    path = tmp_path / "m.hsl"
    save_model(tiny_model, path)
    back = load_model(path)
    assert back.config == tiny_model.config and back.feature_dim == tiny_model.feature_dim
    assert back.embedding_digest == tiny_model.embedding_digest
    assert back.feature_spec == tiny_model.feature_spec
    assert set(back.params) == set(tiny_model.params)
    for k, v in tiny_model.params.items():
        assert np.array_equal(back.params[k], v)
    assert dumps_model(back) == dumps_model(tiny_model)


def test_checkpoint_corruption(tiny_model):
    buf = bytearray(dumps_model(tiny_model))
    buf[len(buf) // 2] ^= 0xFF
    with pytest.raises(CheckpointError, match="checksum"):
        loads_model(bytes(buf))
    with pytest.raises(CheckpointError):
        loads_model(b"XXXX" + bytes(buf[4:]))
    with pytest.raises(CheckpointError):
        loads_model(bytes(buf[:10]))


def test_lines_only_checkpoint_rejects_token_request(small_features):
    m = make(ModelConfig(hidden=3, task="lines_only"), small_features)
    back = loads_model(dumps_model(m))
    require_task(back, "lines")
    with pytest.raises(ConfigError):
        require_task(back, "tokens")


def test_section_specific_scheme():
    cfg = section_config(ModelConfig(), "work")
    assert cfg.task == "tokens_only"
    assert TokenLabelScheme(cfg.entity_types, "bio").size == 7
    assert set(cfg.entity_types) == {"company", "job_title", "period"}


def test_section_subrecords_rebased(small_corpus):
    subs = section_subrecords(small_corpus, "work")
    assert subs
    ents = {r.id: r for r in small_corpus}
    for sub in subs:
        parent = ents[sub.id.split("#")[0]]
        offset = parent.text.index(sub.text)
        for e in sub.annotations.entities:
            assert e.type in {"company", "job_title", "period"}
            orig = EntitySpan(e.type, e.char_start + offset, e.char_end + offset)
            assert orig in parent.annotations.entities
            assert sub.text[e.char_start:e.char_end] == parent.text[orig.char_start:orig.char_end]


def test_section_specific_absent(small_corpus, small_features):
    no_work = [dataclasses.replace(r, annotations=AnnotationSet()) for r in small_corpus[:2]]
    with pytest.raises(ValueError):
        train_section_specific(ModelConfig(hidden=3, epochs=1), no_work, "work", small_features)
    with pytest.raises(ValueError):
        section_subrecords(small_corpus, "skills")
