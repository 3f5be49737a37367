"""Lexicon-and-rules sentiment scoring of single utterances.

The rule set and constants are those of the VADER tool (Hutto & Gilbert,
2014), reproduced so that compound scores agree with it to rounding. The
compound score of an utterance is what the rest of the toolkit calls its
*energy*.
"""

from __future__ import annotations

import logging
import math
import os
import string
import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping

from .errors import EmptyUtterance, MalformedLine, MissingFile

log = logging.getLogger(__name__)

LEXICON_ENV_VAR = "LISTENING_ENERGY_LEXICON"

ALPHA = 15.0
BOOSTER_INCREMENT = 0.293
CAPS_INCREMENT = 0.733
NEGATION_SCALAR = -0.74
EXCLAMATION_STEP = 0.292
EXCLAMATION_CAP = 4
QUESTION_STEP = 0.18
QUESTION_CAP = 0.96
BUT_BEFORE_WEIGHT = 0.5
BUT_AFTER_WEIGHT = 1.5

NEGATIONS = frozenset(
    """aint arent cannot cant couldnt darent didnt doesnt ain't aren't can't
    couldn't daren't didn't doesn't dont hadnt hasnt havent isnt mightnt
    mustnt neither don't hadn't hasn't haven't isn't mightn't mustn't neednt
    needn't never none nope nor not nothing nowhere oughtnt shant shouldnt
    uhuh wasnt werent oughtn't shan't shouldn't uh-uh wasn't weren't without
    wont wouldnt won't wouldn't rarely seldom despite""".split()
)

_BOOSTERS_UP = """absolutely amazingly awfully completely considerable
    considerably decidedly deeply effing enormous enormously entirely
    especially exceptional exceptionally extreme extremely fabulously flipping
    flippin frackin fracking fricking frickin frigging friggin fully fuckin
    fucking fuggin fugging greatly hella highly hugely incredible incredibly
    intensely major majorly more most particularly purely quite really
    remarkably so substantially thoroughly total totally tremendous
    tremendously uber unbelievably unusually utter utterly very""".split()
_BOOSTERS_DOWN = """almost barely hardly kinda kindof kind-of less little
    marginal marginally occasional occasionally partly scarce scarcely slight
    slightly somewhat sorta sortof sort-of""".split()

BOOSTERS: Mapping[str, float] = MappingProxyType(
    {
        **{w: BOOSTER_INCREMENT for w in _BOOSTERS_UP},
        **{w: -BOOSTER_INCREMENT for w in _BOOSTERS_DOWN},
        "just enough": -BOOSTER_INCREMENT,
        "kind of": -BOOSTER_INCREMENT,
        "sort of": -BOOSTER_INCREMENT,
    }
)

# Phrases whose valence replaces that of the lexicon word they contain.
IDIOMS: Mapping[str, float] = MappingProxyType(
    {
        "the shit": 3.0,
        "the bomb": 3.0,
        "bad ass": 1.5,
        "badass": 1.5,
        "bus stop": 0.0,
        "yeah right": -2.0,
        "kiss of death": -1.5,
        "to die for": 3.0,
        "beating heart": 3.5,
    }
)

_INTENSIFYING = ("so", "this")


@dataclass(frozen=True)
class LexiconEntry:
    token: str
    valence: float

    def __post_init__(self):
        if not self.token or any(c.isspace() for c in self.token):
            raise ValueError(f"invalid lexicon token {self.token!r}")
        if not math.isfinite(self.valence):
            raise ValueError(f"non-finite valence for {self.token!r}")


class Lexicon(Mapping[str, float]):
    """Read-only token -> valence lookup. Keys are lowercase."""

    def __init__(self, entries: Mapping[str, float] | None = None, source: str = ""):
        self._valences = MappingProxyType(dict(entries or {}))
        self.source = source

    def __getitem__(self, token: str) -> float:
        return self._valences[token]

    def __iter__(self) -> Iterator[str]:
        return iter(self._valences)

    def __len__(self) -> int:
        return len(self._valences)

    def __contains__(self, token: object) -> bool:
        return token in self._valences

    def entry(self, token: str) -> LexiconEntry:
        return LexiconEntry(token, self._valences[token])

    def __repr__(self) -> str:
        return f"Lexicon({len(self)} entries, source={self.source!r})"


def load_lexicon(path: str | os.PathLike) -> Lexicon:
    """Parse a tab-separated ``token<TAB>valence[<TAB>...]`` file.

    Blank lines and lines starting with ``#`` are skipped. Later duplicates
    replace earlier ones. Entries containing uppercase letters or
    whitespace are dropped: scoring only ever looks up single lowercased
    tokens, so such entries are unreachable.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    valences: dict[str, float] = {}
    dropped = 0
    with path.open(encoding="utf-8", newline="") as fh:
        for number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise MalformedLine(number, "expected token and valence separated by a tab")
            token, measure = fields[0], fields[1]
            try:
                valence = float(measure)
            except ValueError:
                raise MalformedLine(number, f"non-numeric valence {measure!r}") from None
            if not math.isfinite(valence):
                raise MalformedLine(number, f"non-finite valence {measure!r}")
            if not token:
                raise MalformedLine(number, "empty token")
            if token != token.lower() or any(c.isspace() for c in token):
                dropped += 1
                continue
            valences[token] = valence
    if dropped:
        log.debug("dropped %d unreachable lexicon entries from %s", dropped, path)
    return Lexicon(valences, source=str(path))


def vendored_lexicon_path() -> Path:
    return Path(str(resources.files("listening_energy") / "data" / "vader_lexicon.txt"))


def resolve_lexicon_path(explicit: str | os.PathLike | None = None) -> Path:
    """Explicit path, then ``$LISTENING_ENERGY_LEXICON``, then the vendored file."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(LEXICON_ENV_VAR)
    if env:
        return Path(env)
    return vendored_lexicon_path()


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    return load_lexicon(vendored_lexicon_path())


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple[str, ...]
    exclamations: int = 0
    questions: int = 0

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def _strip_token(word: str) -> str:
    stripped = word.strip(string.punctuation)
    # emoticons like ":)" or short words like "ok!" would be mangled
    if len(stripped) <= 2:
        return word
    return stripped


def tokenize(text: str) -> TokenStream:
    """Split on whitespace and trim surrounding ASCII punctuation.

    Case is preserved. A word whose trimmed form would be two characters or
    fewer is kept verbatim, which keeps emoticons intact.
    """
    return TokenStream(
        tokens=tuple(_strip_token(w) for w in text.split()),
        exclamations=text.count("!"),
        questions=text.count("?"),
    )


@dataclass(frozen=True)
class SentimentScores:
    negative: float
    neutral: float
    positive: float
    compound: float

    def as_dict(self, digits: int | None = None) -> dict[str, float]:
        values = {
            "neg": self.negative,
            "neu": self.neutral,
            "pos": self.positive,
            "compound": self.compound,
        }
        if digits is not None:
            values = {k: round(v, digits) for k, v in values.items()}
        return values


EMPTY_SCORES = SentimentScores(0.0, 0.0, 0.0, 0.0)


def normalize(total: float, alpha: float = ALPHA) -> float:
    """Map a raw valence sum onto [-1, 1]: ``total / sqrt(total**2 + alpha)``.

    Evaluated as ``1 / sqrt(1 + (sqrt(alpha) / total)**2)`` with the sign
    of ``total``. The two are equal algebraically, but here every step is a
    single correctly rounded monotone operation, so the float result is
    monotone in ``total`` over all doubles and exactly odd. The direct form
    is not: near 1e8 neighbouring inputs can come out in reverse order.
    """
    if math.isnan(total):
        raise ValueError("valence sum is NaN")
    if total == 0:
        return total
    ratio = math.sqrt(alpha) / total
    return math.copysign(1.0 / math.sqrt(1.0 + ratio * ratio), total)


def is_negation(word: str) -> bool:
    return word in NEGATIONS or "n't" in word


def _mixed_caps(tokens: tuple[str, ...]) -> bool:
    shouting = sum(1 for t in tokens if t.isupper())
    return 0 < len(tokens) - shouting < len(tokens)


def _booster_shift(word: str, valence: float, mixed_caps: bool) -> float:
    shift = BOOSTERS.get(word.lower(), 0.0)
    if not shift:
        return 0.0
    if valence < 0:
        shift = -shift
    if mixed_caps and word.isupper():
        shift += CAPS_INCREMENT if valence > 0 else -CAPS_INCREMENT
    return shift


def _apply_negation(valence: float, lowered: list[str], distance: int, i: int) -> float:
    # distance 1..3 dispatches on the word that many places back
    if distance == 1:
        if is_negation(lowered[i - 1]):
            valence *= NEGATION_SCALAR
    elif distance == 2:
        if lowered[i - 2] == "never" and lowered[i - 1] in _INTENSIFYING:
            valence *= 1.25
        elif lowered[i - 2] == "without" and lowered[i - 1] == "doubt":
            pass
        elif is_negation(lowered[i - 2]):
            valence *= NEGATION_SCALAR
    else:
        # the reference groups this test as (never and so/this) or so/this
        if (lowered[i - 3] == "never" and lowered[i - 2] in _INTENSIFYING) or (
            lowered[i - 1] in _INTENSIFYING
        ):
            valence *= 1.25
        elif lowered[i - 3] == "without" and "doubt" in (lowered[i - 2], lowered[i - 1]):
            pass
        elif is_negation(lowered[i - 3]):
            valence *= NEGATION_SCALAR
    return valence


def _apply_idioms(valence: float, lowered: list[str], i: int) -> float:
    w3, w2, w1, w0 = lowered[i - 3], lowered[i - 2], lowered[i - 1], lowered[i]
    back = [f"{w1} {w0}", f"{w2} {w1} {w0}", f"{w2} {w1}", f"{w3} {w2} {w1}", f"{w3} {w2}"]
    for phrase in back:
        if phrase in IDIOMS:
            valence = IDIOMS[phrase]
            break
    n = len(lowered)
    if n - 1 > i:
        phrase = f"{w0} {lowered[i + 1]}"
        if phrase in IDIOMS:
            valence = IDIOMS[phrase]
    if n - 1 > i + 1:
        phrase = f"{w0} {lowered[i + 1]} {lowered[i + 2]}"
        if phrase in IDIOMS:
            valence = IDIOMS[phrase]
    for phrase in (f"{w3} {w2} {w1}", f"{w3} {w2}", f"{w2} {w1}"):
        if phrase in BOOSTERS:
            valence += BOOSTERS[phrase]
    return valence


def _token_valence(
    tokens: tuple[str, ...], lowered: list[str], i: int, lexicon: Lexicon, mixed_caps: bool
) -> float:
    word = lowered[i]
    if word not in lexicon:
        return 0.0
    base = lexicon[word]
    valence = base
    # "no" directly before a rated word acts as a negator, not a rating
    if word == "no" and i != len(lowered) - 1 and lowered[i + 1] in lexicon:
        valence = 0.0
    if (
        (i > 0 and lowered[i - 1] == "no")
        or (i > 1 and lowered[i - 2] == "no")
        or (i > 2 and lowered[i - 3] == "no" and lowered[i - 1] in ("or", "nor"))
    ):
        valence = base * NEGATION_SCALAR

    if mixed_caps and tokens[i].isupper():
        valence += CAPS_INCREMENT if valence > 0 else -CAPS_INCREMENT

    for distance in (1, 2, 3):
        j = i - distance
        if j < 0 or lowered[j] in lexicon:
            continue
        shift = _booster_shift(tokens[j], valence, mixed_caps)
        if shift and distance == 2:
            shift *= 0.95
        elif shift and distance == 3:
            shift *= 0.9
        valence += shift
        valence = _apply_negation(valence, lowered, distance, i)
        if distance == 3:
            valence = _apply_idioms(valence, lowered, i)

    if i > 0 and lowered[i - 1] == "least" and "least" not in lexicon:
        if i == 1 or lowered[i - 2] not in ("at", "very"):
            valence *= NEGATION_SCALAR
    return valence


def _reweight_but(lowered: list[str], valences: list[float]) -> None:
    """Halve valences before the first "but" and boost those after it, in place.

    Positions are located by value lookup, as the reference does, so equal
    valences on both sides of the conjunction interact. Kept for parity.
    """
    if "but" not in lowered:
        return
    pivot = lowered.index("but")
    for k in range(len(valences)):
        value = valences[k]
        at = valences.index(value)
        if at < pivot:
            valences[at] = value * BUT_BEFORE_WEIGHT
        elif at > pivot:
            valences[at] = value * BUT_AFTER_WEIGHT


def _punctuation_boost(stream: TokenStream) -> float:
    boost = min(stream.exclamations, EXCLAMATION_CAP) * EXCLAMATION_STEP
    if stream.questions > 3:
        boost += QUESTION_CAP
    elif stream.questions > 1:
        boost += stream.questions * QUESTION_STEP
    return boost


def _is_punctuation_only(tokens: tuple[str, ...], lexicon: Lexicon) -> bool:
    return all(not any(c.isalnum() for c in t) and t.lower() not in lexicon for t in tokens)


class NonEnglishWarning(UserWarning):
    pass


def _warn_if_non_english(text: str) -> None:
    letters = [c for c in text if c.isalpha()]
    if letters and sum(1 for c in letters if not c.isascii()) > 0.3 * len(letters):
        warnings.warn(
            "input is mostly non-ASCII; the lexicon covers English only",
            NonEnglishWarning,
            stacklevel=3,
        )


def raw_valences(text: str, lexicon: Lexicon) -> tuple[TokenStream, list[float]]:
    """Per-token adjusted valences, after the contrastive-conjunction pass."""
    stream = tokenize(text.strip())
    tokens = stream.tokens
    lowered = [t.lower() for t in tokens]
    mixed_caps = _mixed_caps(tokens)
    valences: list[float] = []
    for i, word in enumerate(lowered):
        if word in BOOSTERS or (word == "kind" and i < len(lowered) - 1 and lowered[i + 1] == "of"):
            valences.append(0.0)
        else:
            valences.append(_token_valence(tokens, lowered, i, lexicon, mixed_caps))
    _reweight_but(lowered, valences)
    return stream, valences


def polarity_scores(text: str, lexicon: Lexicon | None = None) -> SentimentScores:
    """Score ``text``; ``lexicon`` defaults to the vendored one."""
    if lexicon is None:
        lexicon = default_lexicon()
    _warn_if_non_english(text)
    stream, valences = raw_valences(text, lexicon)
    if not valences or _is_punctuation_only(stream.tokens, lexicon):
        return EMPTY_SCORES

    boost = _punctuation_boost(stream)
    # plain left-to-right sum; fsum would drift from the reference in the last ulp
    total = float(sum(valences))
    if total > 0:
        total += boost
    elif total < 0:
        total -= boost
    compound = normalize(total)

    pos_mass = sum(v + 1 for v in valences if v > 0)
    neg_mass = sum(v - 1 for v in valences if v < 0)
    neutral_count = sum(1 for v in valences if v == 0)
    if pos_mass > abs(neg_mass):
        pos_mass += boost
    elif pos_mass < abs(neg_mass):
        neg_mass -= boost
    mass = pos_mass + abs(neg_mass) + neutral_count
    return SentimentScores(
        negative=abs(neg_mass / mass),
        neutral=abs(neutral_count / mass),
        positive=abs(pos_mass / mass),
        compound=compound,
    )


def score_turn(turn, lexicon: Lexicon | None = None) -> float:
    """Energy of one conversation turn (its compound score)."""
    text = getattr(turn, "text", turn)
    if not text or not text.strip():
        raise EmptyUtterance(position=getattr(turn, "position", None))
    return polarity_scores(text, lexicon).compound
