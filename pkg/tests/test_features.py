import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hseqlabel.features import (
    BASE_FEATURES,
    EmbeddingTable,
    FeatureConfig,
    FeatureError,
    HandcraftedFeatureSpec,
    embed_token,
    handcrafted_features,
    handcrafted_matrix,
    initial_features,
    load_embeddings,
    load_external_line_features,
    validate_external_features,
    write_embeddings,
)
from hseqlabel.ingest import make_document

SPEC = HandcraftedFeatureSpec.default()
IDX = {n: i for i, n in enumerate(SPEC.names)}


def test_load_embeddings(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 3\na 1 0 0\nb 0 1 0\n")
    t = load_embeddings(p)
    assert len(t.vocab) == 2 and t.dim == 3
    np.testing.assert_array_equal(embed_token(t, "b"), [0, 1, 0])


def test_short_row_reports_row(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("2 3\na 1 0 0\nb 0 1\n")
    with pytest.raises(FeatureError, match="row 3"):
        load_embeddings(p)


def test_empty_file(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("")
    with pytest.raises(FeatureError, match="missing header"):
        load_embeddings(p)


def test_duplicate_keeps_first(tmp_path, caplog):
    p = tmp_path / "e.txt"
    p.write_text("2 2\na 1 0\na 0 1\n")
    t = load_embeddings(p)
    np.testing.assert_array_equal(embed_token(t, "a"), [1, 0])
    assert "duplicate" in caplog.text


def test_embedding_round_trip(tmp_path):
    t = EmbeddingTable({"x": 0, "y": 1}, np.array([[0.5, -1.0], [2.0, 0.25]]))
    write_embeddings(t, tmp_path / "e.txt")
    u = load_embeddings(tmp_path / "e.txt")
    assert u.vocab == t.vocab and np.allclose(u.vectors, t.vectors)


def test_oov_and_lowercase():
    t = EmbeddingTable({"john": 0}, np.array([[1.0, 2.0]]))
    np.testing.assert_array_equal(embed_token(t, "John"), embed_token(t, "john"))
    np.testing.assert_array_equal(embed_token(t, "zzz"), [0, 0])


def feat(text, i):
    return handcrafted_features(make_document("d", text), i, SPEC)


def test_shape_flags():
    v = feat("JOHN smith\n", 0)
    assert v[IDX["is_all_caps"]] == 1 and v[IDX["is_title_case"]] == 0 and v[IDX["contains_digit"]] == 0
    v = feat("Hired in 2019\n", 2)
    assert v[IDX["is_all_digits"]] == 1 and v[IDX["re_year"]] == 1
    assert v[IDX["len_4_6"]] == 1 and v[IDX["pos_in_line"]] == 1


def test_first_token_positions():
    v = feat("a b\nc d\n", 0)
    assert v[IDX["pos_in_line"]] == 0 and v[IDX["line_pos_in_doc"]] == 0


def test_regex_flags_span_tokens():
    doc = make_document("d", "mail jane.doe@acme.com now\n")
    M = handcrafted_matrix(doc, SPEC)
    flags = M[:, IDX["re_email"]]
    assert flags[0] == 0 and flags[-1] == 0 and all(flags[1:-1] == 1)


def test_dictionary_flags():
    doc = make_document("d", "January intern\n")
    M = handcrafted_matrix(doc, SPEC)
    assert M[0, IDX["dict_months"]] == 1


def test_dimension_concatenation():
    t = EmbeddingTable({"a": 0}, np.eye(3)[:1])
    cfg = FeatureConfig(table=t, spec=SPEC)
    X = initial_features(make_document("d", "a b\nc\n"), cfg)
    assert X.shape == (3, 21 + len(SPEC.dictionaries)) == (3, 3 + len(BASE_FEATURES) + len(SPEC.dictionaries))
    assert initial_features(make_document("e", ""), cfg).shape == (0, cfg.dim)


@given(st.text(alphabet=st.characters(codec="utf-8"), max_size=80))
def test_handcrafted_in_unit_interval(text):
    M = handcrafted_matrix(make_document("d", text), SPEC)
    assert M.shape[1] == SPEC.dim
    assert np.all(np.isfinite(M)) and np.all((M >= 0) & (M <= 1))


def test_features_independent_of_other_documents(small_corpus, small_features):
    from hseqlabel.ingest import build_document
    docs = [build_document(r).doc for r in small_corpus[:3]]
    before = initial_features(docs[1], small_features)
    for d in reversed(docs):
        initial_features(d, small_features)
    np.testing.assert_array_equal(initial_features(docs[1], small_features), before)


def test_external_examples(tmp_path):
    doc = make_document("x", "a b c\nd e\n")
    raw = [np.ones((3, 4)).tolist(), np.zeros((2, 4)).tolist()]
    ext = validate_external_features(raw, doc)
    assert [m.shape for m in ext.lines] == [(3, 4), (2, 4)]
    with pytest.raises(FeatureError, match="width"):
        validate_external_features([raw[0], np.zeros((2, 5)).tolist()], doc)
    with pytest.raises(FeatureError, match="line 1"):
        validate_external_features([raw[0], np.zeros((3, 4)).tolist()], doc)
    with pytest.raises(FeatureError):
        validate_external_features(raw[:1], doc)
    p = tmp_path / "x.jsonl"
    p.write_text('{"id": "other", "lines": []}\n')
    with pytest.raises(FeatureError, match="no features"):
        load_external_line_features(p, doc)


def test_external_initial_features():
    doc = make_document("x", "a b\n\nc\n")
    cfg = FeatureConfig("external", external={"x": [[[1, 2], [3, 4]], [], [[5, 6]]]}, external_dim=2)
    X = initial_features(doc, cfg)
    np.testing.assert_array_equal(X, [[1, 2], [3, 4], [0, 0], [5, 6]])
    with pytest.raises(FeatureError):
        initial_features(make_document("y", "a\n"), cfg)
