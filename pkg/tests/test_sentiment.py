import math
import random
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from listening_energy.corpus import Role, Turn
from listening_energy.errors import EmptyUtterance, MalformedLine, MissingFile
from listening_energy.sentiment import (
    BOOSTERS,
    EMPTY_SCORES,
    NEGATIONS,
    Lexicon,
    LexiconEntry,
    NonEnglishWarning,
    load_lexicon,
    normalize,
    polarity_scores,
    resolve_lexicon_path,
    score_turn,
    tokenize,
    vendored_lexicon_path,
)

# Values below were produced by vaderSentiment 3.3.2 (rounded to 4 places).
EXPERT_SPEAKER_2 = 0.5859  # "Yes, and tiredness as well."
EXPERT_SPEAKER_3 = 0.2732  # "That's it, I really need it. Of consideration as well."


class TestLoadLexicon:
    def test_vendored_entry_matches_file(self, lexicon):
        raw = vendored_lexicon_path().read_text(encoding="utf-8").splitlines()
        line = next(l for l in raw if l.startswith("good\t"))
        assert float(line.split("\t")[1]) == 1.9
        assert lexicon.entry("good") == LexiconEntry("good", 1.9)

    def test_empty_file_scores_neutral(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        lex = load_lexicon(path)
        assert len(lex) == 0
        s = polarity_scores("what a good day", lex)
        assert (s.negative, s.neutral, s.positive, s.compound) == (0.0, 1.0, 0.0, 0.0)

    def test_non_numeric_valence(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("good\t1.9\nbad\tterrible\n")
        with pytest.raises(MalformedLine) as err:
            load_lexicon(path)
        assert err.value.line_number == 2

    def test_single_field_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("good\n")
        with pytest.raises(MalformedLine):
            load_lexicon(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            load_lexicon(tmp_path / "nope.txt")

    def test_duplicates_comments_and_unreachable_entries(self, tmp_path):
        path = tmp_path / "lex.txt"
        path.write_text("# header\nlol\t2.9\textra\n\nlol\t1.8\n:D\t2.3\nfed up\t-1.8\r\n")
        lex = load_lexicon(path)
        assert dict(lex) == {"lol": 1.8}

    def test_vendored_file_size(self, lexicon):
        # 7520 lines; 14 mixed-case and 4 multi-word entries are dropped
        # and 14 tokens appear twice
        assert len(lexicon) == 7520 - 14 - 4 - 14

    def test_resolution_order(self, tmp_path, monkeypatch):
        monkeypatch.delenv("LISTENING_ENERGY_LEXICON", raising=False)
        assert resolve_lexicon_path() == vendored_lexicon_path()
        monkeypatch.setenv("LISTENING_ENERGY_LEXICON", str(tmp_path / "env.txt"))
        assert resolve_lexicon_path() == tmp_path / "env.txt"
        assert resolve_lexicon_path(tmp_path / "cli.txt") == tmp_path / "cli.txt"


class TestTokenize:
    def test_sentence(self):
        assert tokenize("I can not take it anymore.").tokens == ("I", "can", "not", "take", "it", "anymore")

    def test_empty(self):
        assert tokenize("").tokens == ()

    def test_emphasis_recorded_separately(self):
        stream = tokenize("GREAT!!!")
        assert stream.tokens == ("GREAT",)
        assert stream.exclamations == 3

    @pytest.mark.parametrize("word", [":)", ":-(", "<3", "ok!", "no,"])
    def test_short_forms_kept_verbatim(self, word):
        assert tokenize(word).tokens == (word,)

    def test_case_and_inner_punctuation_preserved(self):
        assert tokenize("Don't, (really)").tokens == ("Don't", "really")


class TestPolarityScores:
    def test_empty(self, lexicon):
        assert polarity_scores("", lexicon) == EMPTY_SCORES

    def test_no_valenced_tokens(self, lexicon):
        s = polarity_scores("The cat sat on the mat", lexicon)
        assert s.compound == 0.0 and s.neutral == 1.0

    def test_closing_complaint_has_no_lexicon_hits(self, lexicon):
        # "take" and "anymore" carry no valence and a negator alone scores 0
        assert polarity_scores("I can not take it anymore.", lexicon).compound == 0.0

    def test_reference_example(self, lexicon):
        assert polarity_scores("VADER is smart, handsome, and funny.", lexicon).compound == pytest.approx(0.8316, abs=1e-4)

    def test_punctuation_only(self, lexicon):
        assert polarity_scores("!!! ... ?", lexicon) == EMPTY_SCORES

    def test_emoticon_counts(self, lexicon):
        assert polarity_scores(":)", lexicon).compound > 0

    @pytest.mark.parametrize(
        "plain, modified",
        [
            ("The book was good.", "The book was very good."),
            ("The book was good.", "The book was GOOD and fine."),
            ("The book was good.", "The book was good!!!"),
        ],
    )
    def test_emphasis_raises_intensity(self, lexicon, plain, modified):
        assert polarity_scores(modified, lexicon).compound > polarity_scores(plain, lexicon).compound

    def test_negation_flips(self, lexicon):
        assert polarity_scores("The book was not good.", lexicon).compound < 0

    def test_but_shifts_weight(self, lexicon):
        s = polarity_scores("The food was great but the service was bad.", lexicon)
        assert s.compound < 0

    def test_deterministic(self, lexicon):
        text = "It sounds like you've been feeling overwhelmed by the situation."
        assert polarity_scores(text, lexicon) == polarity_scores(text, lexicon)

    def test_non_english_warning(self, lexicon):
        with pytest.warns(NonEnglishWarning):
            polarity_scores("Я больше не могу, good", lexicon)

    def test_english_does_not_warn(self, lexicon):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            polarity_scores("I'm fine, thanks.", lexicon)

    def test_rounded_dict(self, lexicon):
        d = polarity_scores("VADER is smart, handsome, and funny.", lexicon).as_dict(digits=3)
        assert d == {"neg": 0.0, "neu": 0.254, "pos": 0.746, "compound": 0.832}


class TestScoreTurn:
    def test_expert_utterances(self, lexicon):
        t = Turn(3, Role.SPEAKER, "Yes, and tiredness as well.")
        assert score_turn(t, lexicon) == pytest.approx(EXPERT_SPEAKER_2, abs=1e-4)
        t = Turn(5, Role.SPEAKER, "That's it, I really need it. Of consideration as well.")
        assert score_turn(t, lexicon) == pytest.approx(EXPERT_SPEAKER_3, abs=1e-4)

    @pytest.mark.parametrize("text", ["", "   "])
    def test_empty(self, lexicon, text):
        with pytest.raises(EmptyUtterance):
            score_turn(Turn(1, Role.SPEAKER, text), lexicon)


def test_oracle_corpus_matches(lexicon, oracle_records):
    for record in oracle_records:
        s = polarity_scores(record["text"], lexicon)
        assert abs(s.compound - record["compound"]) <= 1e-4, record["text"]
        # proportions are frozen at 3 decimals
        if record["neu"] or record["pos"] or record["neg"]:
            if s != EMPTY_SCORES:
                assert abs(s.positive - record["pos"]) <= 5e-4, record["text"]
                assert abs(s.negative - record["neg"]) <= 5e-4, record["text"]


def test_live_reference_differential(lexicon):
    vader = pytest.importorskip("vaderSentiment.vaderSentiment")
    analyzer = vader.SentimentIntensityAnalyzer()
    rng = random.Random(20240611)
    words = sorted(lexicon)
    pool = rng.sample(words, 500) + sorted(NEGATIONS) + sorted(BOOSTERS) + [
        "but", "least", "at", "no", "or", "the", "kind", "of", "so", "this", "!", "?", ":)",
    ]
    for _ in range(3000):
        parts = []
        for _ in range(rng.randint(1, 12)):
            w = rng.choice(pool)
            if rng.random() < 0.15:
                w = w.upper()
            if rng.random() < 0.15:
                w += rng.choice("!?.,")
            parts.append(w)
        text = " ".join(parts)
        expected = analyzer.polarity_scores(text)["compound"]
        assert abs(polarity_scores(text, lexicon).compound - expected) <= 1e-4, text


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_normalize_is_odd_and_bounded(s):
    assert normalize(-s) == -normalize(s)
    assert -1.0 <= normalize(s) <= 1.0
    assert math.copysign(1, normalize(s)) == math.copysign(1, s) or s == 0


def test_normalize_zero():
    assert normalize(0.0) == 0.0


@pytest.mark.parametrize("s, expected", [(math.inf, 1.0), (-math.inf, -1.0), (1e200, 1.0), (-1e200, -1.0)])
def test_normalize_extremes(s, expected):
    assert normalize(s) == expected


def test_normalize_nan():
    with pytest.raises(ValueError):
        normalize(math.nan)


@given(
    st.floats(min_value=-100, max_value=100, allow_nan=False),
    st.floats(min_value=1e-6, max_value=100, allow_nan=False),
)
def test_normalize_strictly_increasing(s, gap):
    assert normalize(s) < normalize(s + gap)


@st.composite
def lexicon_texts(draw):
    from listening_energy.sentiment import default_lexicon

    vocab = sorted(default_lexicon())[:3000] + sorted(BOOSTERS) + sorted(NEGATIONS) + ["but", "!", "?"]
    words = draw(st.lists(st.sampled_from(vocab), min_size=1, max_size=25))
    shaped = [w.upper() if draw(st.booleans()) and i % 3 == 0 else w for i, w in enumerate(words)]
    return " ".join(shaped)


@settings(max_examples=300, deadline=None)
@given(lexicon_texts())
def test_bounds_and_closure(text):
    s = polarity_scores(text)
    assert -1.0 <= s.compound <= 1.0
    if tokenize(text).tokens and s != EMPTY_SCORES:
        assert abs(s.negative + s.neutral + s.positive - 1.0) <= 1e-3


def test_lexicon_is_read_only(lexicon):
    with pytest.raises(TypeError):
        lexicon["good"] = 0.0  # type: ignore[index]
    assert isinstance(lexicon, Lexicon)
