from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extsum.alignment import (
    SALVAGE,
    STRICT,
    AlignmentResult,
    ParsedOutput,
    Unparseable,
    align_to_document,
    edit_distance,
    first_json_object,
    normalize,
    normalized_similarity,
    parse_output,
    validate_scores,
)
from extsum.textcore import Document
from oracles import levenshtein

DOC = Document.from_text(
    "d", "The council approved the budget on Monday. Critics called it rushed. The mayor will sign it next week."
)


def test_parse_examples():
    out = parse_output('{"summary": ["A.","B."]}', "extractive")
    assert out.parse_mode == STRICT and out.summary_sentences == ("A.", "B.")
    out = parse_output('Sure! {"summary": ["A."]}', "extractive")
    assert out.parse_mode == SALVAGE and out.summary_sentences == ("A.",)
    out = parse_output('{"scores": {"coherence":4,"consistency":5,"fluency":4,"efficiency":3}}', "evaluator")
    assert out.parse_mode == STRICT and validate_scores(out.scores) == {
        "coherence": 4, "consistency": 5, "fluency": 4, "efficiency": 3}


def test_parse_fallbacks():
    assert parse_output("Line one.\n\nLine two.", "extractive").summary_sentences == ("Line one.", "Line two.")
    assert parse_output("just prose", "abstractive") == ParsedOutput(SALVAGE, summary_text="just prose")
    out = parse_output('{"summary": "x", "reason": "why"}', "explanation")
    assert out.summary_sentences == ("x",) and out.reason == "why"
    assert parse_output('{"summary": ["a", "b"]}', "abstractive").summary_text == "a b"
    with pytest.raises(Unparseable):
        parse_output("I rate it highly", "evaluator")


def test_brace_scanner_respects_strings():
    text = 'noise {"summary": ["has } brace", "and \\" quote"]} trailing {"x": 1}'
    assert first_json_object(text) == '{"summary": ["has } brace", "and \\" quote"]}'
    assert first_json_object("{bad} then {\"ok\": true}") == '{"ok": true}'
    assert first_json_object("nothing") is None


def test_parsed_roundtrip():
    out = parse_output('{"summary": ["A."], "reason": "r"}', "explanation")
    assert ParsedOutput.from_dict(out.to_dict()) == out


@pytest.mark.parametrize("bad", [{"coherence": 6, "consistency": 5, "fluency": 4, "efficiency": 3},
                                 {"coherence": 0, "consistency": 5, "fluency": 4, "efficiency": 3},
                                 {"coherence": 4.5, "consistency": 5, "fluency": 4, "efficiency": 3},
                                 {"coherence": True, "consistency": 5, "fluency": 4, "efficiency": 3},
                                 {"consistency": 5, "fluency": 4, "efficiency": 3}])
def test_validate_scores_rejects(bad):
    with pytest.raises(ValueError):
        validate_scores(bad)


def test_similarity_examples():
    assert normalized_similarity("same text", "same text") == 1.0
    assert normalized_similarity("abcd", "abed") == 0.75
    assert normalized_similarity("", "") == 1.0
    assert normalized_similarity("  Hello  World! ", "hello world") == 1.0
    assert normalized_similarity("Hello, world", "hello world") < 1.0
    assert normalize("“Quoted.”") == "quoted"


def test_align_examples():
    s = DOC.sentence_texts
    res = align_to_document([s[0], s[2]], DOC)
    assert res.indices == [0, 2] and res.copy_rate == 1.0
    edited = "The council approved the budget on Tuesday."
    res = align_to_document([edited], DOC)
    assert res.indices == [0] and res.matched[0].similarity < 1.0 and res.copy_rate == 0.0
    a, b = normalize(edited), normalize(s[0])
    assert res.matched[0].similarity == pytest.approx(1 - levenshtein(a, b) / max(len(a), len(b)), abs=1e-12)
    res = align_to_document(["Aliens landed in the harbour."], DOC)
    assert res.matched == () and res.unmatched == ("Aliens landed in the harbour.",) and res.copy_rate == 0.0


def test_align_each_sentence_used_once():
    s = DOC.sentence_texts[0]
    res = align_to_document([s, s], DOC)
    assert res.indices == [0] and len(res.unmatched) == 1 and res.copy_rate == 0.5


def test_align_rejects_bad_threshold():
    with pytest.raises(ValueError):
        align_to_document(["x"], DOC, threshold=0)


def test_alignment_roundtrip():
    res = align_to_document([DOC.sentence_texts[1], "nope"], DOC)
    assert AlignmentResult.from_dict(res.to_dict()) == res


def test_self_alignment_on_fixtures(cnn_corpus):
    from extsum.oracle import greedy_oracle

    for entry in cnn_corpus:
        doc = entry.to_document()
        ext = greedy_oracle(doc, entry.summary, 3)
        res = align_to_document(list(ext.texts), doc)
        assert res.indices == list(ext.indices) and res.copy_rate == 1.0
        for thr in (0.5, 0.8, 0.95):
            assert align_to_document(list(ext.texts), doc, thr).indices == list(ext.indices)


short = st.text(alphabet="abc .,", max_size=12)


@settings(max_examples=300)
@given(short, short)
def test_edit_distance_matches_table(a, b):
    assert edit_distance(a, b) == levenshtein(a, b) == edit_distance(b, a)
    sim = normalized_similarity(a, b)
    assert 0.0 <= sim <= 1.0 and sim == normalized_similarity(b, a)


words = st.lists(st.sampled_from(["red", "blue", "green", "cat", "dog", "ran", "sat"]), min_size=1, max_size=5)
sentence = words.map(lambda ws: " ".join(ws).capitalize() + ".")


@settings(max_examples=200)
@given(st.lists(sentence, min_size=1, max_size=6, unique_by=normalize), st.randoms(use_true_random=False))
def test_exact_copies_align_under_any_order(sents, rnd):
    doc = Document.from_sentences("h", " ".join(sents), sents)
    order = list(range(len(sents)))
    rnd.shuffle(order)
    res = align_to_document([sents[i] for i in order], doc)
    assert res.indices == order and res.copy_rate == 1.0


@settings(max_examples=200)
@given(st.lists(sentence, min_size=1, max_size=5), st.lists(sentence, min_size=1, max_size=4))
def test_threshold_monotonicity(doc_sents, claims):
    doc = Document.from_sentences("h", " ".join(doc_sents), doc_sents)
    counts = [len(align_to_document(claims, doc, t).matched) for t in (0.5, 0.8, 0.95)]
    assert counts[0] >= counts[1] >= counts[2]
    for t in (0.5, 0.8, 0.95):
        for m in align_to_document(claims, doc, t).matched:
            assert m.similarity >= t
