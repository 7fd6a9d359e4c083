import pytest
from hypothesis import given
from hypothesis import strategies as st

from sugkit.context import SuggestionContext, assemble, parse, prompt_tokens, serialize
from sugkit.miner import ClickLogRecord, build_index, ingest_logs
from sugkit.vocab import Q_MARK, SEGMENT_MARKERS, Vocabulary

VOCAB = Vocabulary.from_chars("abcdefghijklmnopqrstuvwxyz :")


def _index():
    recs = [
        ClickLogRecord(1, "BJ", "pi", "pizza", True),
        ClickLogRecord(1, "BJ", "pi", "pizza", True),
        ClickLogRecord(2, "MO", "pi", "pizza hut", True),
        ClickLogRecord(2, "MO", "pi", "pita", True),
    ]
    return build_index(ingest_logs(recs, (1, 7)))


def test_empty_index_gives_prefix_only_context():
    ctx = assemble("pi", "BJ", build_index(ingest_logs([], (1, 7))))
    assert ctx == SuggestionContext(prefix="pi", city="BJ")


def test_candidates_are_not_padded():
    ctx = assemble("pi", "MO", _index(), m=10)
    assert ctx.candidates == ("pita", "pizza hut", "pizza")


def test_hot_words_capped_at_n():
    hot = [f"w{i}" for i in range(12)]
    ctx = assemble("pi", "BJ", None, hot_words=hot, n=10)
    assert ctx.hot_words == tuple(hot[:10])


def test_history_keeps_most_recent():
    hist = [f"h{i}" for i in range(15)]
    assert assemble("pi", "", None, history=hist).behavior_history == tuple(hist[-10:])


def test_negative_caps_rejected():
    with pytest.raises(ValueError):
        assemble("pi", "", None, m=-1)


def test_context_invariants():
    with pytest.raises(ValueError):
        SuggestionContext(prefix="")
    with pytest.raises(ValueError):
        SuggestionContext(prefix="a", candidates=("x", "x"))


def test_serialize_is_deterministic_and_order_sensitive():
    a = SuggestionContext("pi", candidates=("pizza", "pita"))
    b = SuggestionContext("pi", candidates=("pita", "pizza"))
    assert serialize(a, VOCAB) == serialize(a, VOCAB)
    assert serialize(a, VOCAB).tokens != serialize(b, VOCAB).tokens


def test_empty_optional_fields_keep_all_markers():
    toks = serialize(SuggestionContext("pi"), VOCAB).tokens
    markers = [VOCAB.id(m) for m in SEGMENT_MARKERS]
    assert [t for t in toks if t in markers] == markers
    assert toks == (markers[0], VOCAB.id("p"), VOCAB.id("i"), *markers[1:])


def test_segment_order_follows_field_order():
    ctx = SuggestionContext("p", candidates=("c",), hot_words=("h",), behavior_history=("b",), user_profile=("u:1",))
    toks = serialize(ctx, VOCAB).tokens
    pos = [toks.index(VOCAB.id(m)) for m in SEGMENT_MARKERS]
    assert pos == sorted(pos)


def test_unknown_characters_become_unk_and_are_counted():
    out = serialize(SuggestionContext("p€"), VOCAB)
    assert out.unk_count == 1
    assert out.unk_chars == ("€",)
    assert VOCAB.unk_id in out.tokens


def test_prompt_ends_with_answer_marker_and_prefix():
    ctx = SuggestionContext("pi")
    p = prompt_tokens(ctx, VOCAB)
    assert p[-3:] == (VOCAB.id(Q_MARK), VOCAB.id("p"), VOCAB.id("i"))


def test_typed_marker_text_encodes_as_plain_characters():
    vocab = Vocabulary.from_chars("<P>ab")
    ids, n_unk = vocab.encode("<P>")
    assert n_unk == 0
    assert ids == [vocab.id("<"), vocab.id("P"), vocab.id(">")]
    assert not set(ids) & vocab.reserved


text = st.text(alphabet="abcdefgh :", min_size=1, max_size=6)


@given(
    prefix=text,
    cands=st.lists(text, max_size=4, unique=True),
    hot=st.lists(text, max_size=3),
    hist=st.lists(text, max_size=3),
    prof=st.lists(text, max_size=3),
)
def test_parse_inverts_serialize(prefix, cands, hot, hist, prof):
    ctx = SuggestionContext(prefix, "BJ", tuple(cands), tuple(hot), tuple(hist), tuple(prof))
    assert parse(serialize(ctx, VOCAB).tokens, VOCAB, city="BJ") == ctx


@given(a=st.lists(text, min_size=1, max_size=3), b=st.lists(text, min_size=1, max_size=3))
def test_serialize_injective(a, b):
    ca = SuggestionContext(a[0], hot_words=tuple(a[1:]))
    cb = SuggestionContext(b[0], hot_words=tuple(b[1:]))
    if ca != cb:
        assert serialize(ca, VOCAB).tokens != serialize(cb, VOCAB).tokens


def test_vocab_round_trip():
    assert Vocabulary.from_dict(VOCAB.to_dict()) == VOCAB
