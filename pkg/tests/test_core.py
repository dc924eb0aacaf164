import pytest
from hypothesis import given
from hypothesis import strategies as st

from summarena.core import (
    AlignmentEntry,
    AlignmentSet,
    FactSource,
    KeyFact,
    KeyFactSet,
    SummaryDoc,
    Transcript,
    Turn,
    normalize_key_fact,
    split_into_lines,
)
from summarena.errors import InputError


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("A. B.", ["A.", "B."]),
        ("One line no period", ["One line no period"]),
        ("X.\nY. Z.", ["X.", "Y.", "Z."]),
        ("  Wait! Really?  Yes.\n\n\nDone", ["Wait!", "Really?", "Yes.", "Done"]),
        ("3.5 million units", ["3.5 million units"]),
    ],
)
def test_split_into_lines(raw, expected):
    assert split_into_lines(raw) == expected


@pytest.mark.parametrize("raw", ["", "   ", "\n \n\t"])
def test_split_rejects_empty(raw):
    with pytest.raises(InputError, match="empty summary"):
        split_into_lines(raw)


text_strategy = st.text(alphabet=st.sampled_from("ab .!?\n\t,"), min_size=1, max_size=40)


@given(text_strategy)
def test_split_is_idempotent_on_joined_output(raw):
    try:
        first = split_into_lines(raw)
    except InputError:
        return
    assert split_into_lines("\n".join(first)) == first
    assert split_into_lines(raw) == first


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("Kevin Carr ran with his tent.", "kevin carr ran with his tent"),
        ("  A   B ", "a b"),
        ("", ""),
        ("Done?!", "done"),
    ],
)
def test_normalize_key_fact(raw, expected):
    assert normalize_key_fact(raw) == expected


@given(st.text(max_size=50))
def test_normalize_is_idempotent(raw):
    once = normalize_key_fact(raw)
    assert normalize_key_fact(once) == once


def test_key_fact_set_rejects_normalized_duplicates():
    with pytest.raises(InputError, match="duplicate"):
        KeyFactSet((KeyFact("The budget grew.", 1), KeyFact("the  budget grew", 2)))


def test_key_fact_set_build_dedups_and_truncates():
    facts = KeyFactSet.build(["A x.", "B y.", "a X", "C z.", "D w."], max_facts=3)
    assert facts.texts == ["A x.", "B y.", "C z."]
    assert [f.ordinal for f in facts] == [1, 2, 3]
    with pytest.raises(InputError):
        KeyFactSet(facts.facts, max_facts=2)


def test_key_fact_set_digest_ignores_case_and_punctuation():
    a = KeyFactSet.build(["Alpha beta.", "Gamma"])
    b = KeyFactSet.build(["alpha beta", "GAMMA!"], source=FactSource.TRANSCRIPT)
    assert a.digest() == b.digest()


def test_summary_doc_line_cap():
    text = "\n".join(f"Line {i}." for i in range(5))
    assert SummaryDoc.from_text("m", "x", text, max_lines=5).n == 5
    with pytest.raises(InputError, match="limit of 4"):
        SummaryDoc.from_text("m", "x", text, max_lines=4)


def test_summary_numbered_rendering():
    doc = SummaryDoc.from_text("m", "x", "First. Second.")
    assert doc.numbered() == "1. First.\n2. Second."
    assert doc.summary_id == "m:x"


def test_alignment_invariants():
    with pytest.raises(InputError):
        AlignmentEntry(1, False, frozenset({2}))
    with pytest.raises(InputError):
        AlignmentSet((AlignmentEntry(1, True, {1}), AlignmentEntry(3, False)))
    ok = AlignmentSet((AlignmentEntry(2, False), AlignmentEntry(1, True, {1})))
    assert [e.fact_ordinal for e in ok.entries] == [1, 2]


def test_alignment_check_against_summary():
    doc = SummaryDoc.from_text("m", "x", "One. Two.")
    facts = KeyFactSet.build(["f"])
    with pytest.raises(InputError, match="cites line 3"):
        AlignmentSet((AlignmentEntry(1, True, {3}),)).check(facts, doc)


def test_transcript_validation_and_rendering():
    t = Transcript("m1", (Turn("Ann", "Hi there "), Turn("Bo", "Hello")))
    assert t.render() == "Ann: Hi there\nBo: Hello"
    with pytest.raises(InputError):
        Transcript("", (Turn("a", "b"),))
    with pytest.raises(InputError):
        Transcript("m", ())
    with pytest.raises(InputError):
        Turn("a", "   ")
