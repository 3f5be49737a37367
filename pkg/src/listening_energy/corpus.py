"""Conversation data model and the line-delimited corpus format.

One JSON object per line::

    {"id": "...", "kind": "expert|extended|control", "provider": "...",
     "turns": [{"role": "speaker|listener", "text": "..."}, ...]}
"""

from __future__ import annotations

import enum
import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MissingFile, ParseError, StructureViolation
from .fsutil import atomic_write_text

log = logging.getLogger(__name__)

EXPERT_TURNS = 5
MAX_TURNS = 12

_RECORD_FIELDS = ("id", "kind", "provider", "turns")


class Role(str, enum.Enum):
    SPEAKER = "speaker"
    LISTENER = "listener"

    @classmethod
    def at(cls, position: int) -> "Role":
        """Role expected at a 1-based turn position."""
        return cls.SPEAKER if position % 2 == 1 else cls.LISTENER

    @property
    def other(self) -> "Role":
        return Role.LISTENER if self is Role.SPEAKER else Role.SPEAKER


@dataclass(frozen=True)
class DatasetKind:
    name: str
    provider: str = ""

    NAMES = ("expert", "extended", "control")

    def __post_init__(self):
        if self.name not in self.NAMES:
            raise ValueError(f"unknown dataset kind {self.name!r}")
        if self.name == "expert" and self.provider:
            raise ValueError("expert datasets have no provider")
        if self.name != "expert" and not self.provider:
            raise ValueError(f"{self.name} datasets need a provider name")

    @classmethod
    def expert(cls) -> "DatasetKind":
        return cls("expert")

    @classmethod
    def extended(cls, provider: str) -> "DatasetKind":
        return cls("extended", provider)

    @classmethod
    def control(cls, provider: str) -> "DatasetKind":
        return cls("control", provider)

    @property
    def label(self) -> str:
        """Dataset identifier such as ``expert`` or ``extended-gemini``."""
        return self.name if not self.provider else f"{self.name}-{self.provider}"


@dataclass(frozen=True)
class Turn:
    position: int
    role: Role
    text: str


@dataclass(frozen=True)
class Conversation:
    """An ordered, role-alternating exchange that opens with the speaker.

    Construction checks alternation, non-empty text and the five-turn rule
    for expert conversations. The twelve-turn cap for generated kinds is
    applied by the loaders through :func:`truncate`.
    """

    id: str
    kind: DatasetKind
    turns: tuple[Turn, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        for k, turn in enumerate(self.turns, start=1):
            if turn.position != k:
                raise StructureViolation(self.id, "positions", f"turn {k} has position {turn.position}")
            if turn.role is not Role.at(k):
                raise StructureViolation(
                    self.id, "alternation", f"position {k} must be {Role.at(k).value}"
                )
            if not turn.text.strip():
                raise StructureViolation(self.id, "empty-utterance", f"position {k}")
        if self.kind.name == "expert" and len(self.turns) != EXPERT_TURNS:
            raise StructureViolation(
                self.id, "turn-count", f"expert conversations have {EXPERT_TURNS} turns, got {len(self.turns)}"
            )

    @classmethod
    def from_texts(cls, id: str, kind: DatasetKind, texts: Iterable[str]) -> "Conversation":
        turns = tuple(Turn(k, Role.at(k), t) for k, t in enumerate(texts, start=1))
        return cls(id, kind, turns)

    def __len__(self) -> int:
        return len(self.turns)


@dataclass(frozen=True)
class CorpusSet:
    kind: DatasetKind
    conversations: tuple[Conversation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "conversations", tuple(self.conversations))
        seen = set()
        for conv in self.conversations:
            if conv.kind != self.kind:
                raise StructureViolation(conv.id, "mixed-kinds", f"{conv.kind.label} in a {self.kind.label} set")
            if conv.id in seen:
                raise StructureViolation(conv.id, "duplicate-id")
            seen.add(conv.id)

    @property
    def dataset_id(self) -> str:
        return self.kind.label

    def __len__(self) -> int:
        return len(self.conversations)

    def __iter__(self):
        return iter(self.conversations)

    def get(self, conversation_id: str) -> Conversation | None:
        for conv in self.conversations:
            if conv.id == conversation_id:
                return conv
        return None


def truncate(conversation: Conversation, max_turns: int = MAX_TURNS) -> Conversation:
    if max_turns < 1:
        raise ValueError("max_turns must be positive")
    if len(conversation.turns) <= max_turns:
        return conversation
    return Conversation(conversation.id, conversation.kind, conversation.turns[:max_turns])


def split_by_role(conversation: Conversation) -> tuple[list[Turn], list[Turn]]:
    """Speaker turns (odd positions) and listener turns (even positions)."""
    speaker = [t for t in conversation.turns if t.role is Role.SPEAKER]
    listener = [t for t in conversation.turns if t.role is Role.LISTENER]
    return speaker, listener


def seed_preserved(extended: Conversation, seed: Conversation) -> bool:
    n = len(seed.turns)
    return [t.text for t in extended.turns[:n]] == [t.text for t in seed.turns]


# -- serialization ---------------------------------------------------------


def conversation_record(conv: Conversation) -> dict:
    return {
        "id": conv.id,
        "kind": conv.kind.name,
        "provider": conv.kind.provider,
        "turns": [{"role": t.role.value, "text": t.text} for t in conv.turns],
    }


def dumps_corpus(corpus: CorpusSet | Sequence[Conversation]) -> str:
    convs = corpus.conversations if isinstance(corpus, CorpusSet) else corpus
    return "".join(json.dumps(conversation_record(c), ensure_ascii=False) + "\n" for c in convs)


def write_corpus(corpus: CorpusSet, path: str | os.PathLike) -> Path:
    return atomic_write_text(Path(path), dumps_corpus(corpus))


def _parse_record(line: str, locator: str) -> tuple[str, DatasetKind, list[tuple[str, str]]]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(locator, f"invalid JSON ({exc.msg})") from None
    if not isinstance(record, dict):
        raise ParseError(locator, "record must be an object")
    if set(record) != set(_RECORD_FIELDS):
        raise ParseError(locator, f"record fields must be exactly {', '.join(_RECORD_FIELDS)}")
    cid, kind, provider, turns = (record[k] for k in _RECORD_FIELDS)
    if not isinstance(cid, str) or not cid:
        raise ParseError(locator, "id must be a non-empty string")
    if not isinstance(provider, str):
        raise ParseError(locator, "provider must be a string")
    try:
        dataset_kind = DatasetKind(kind, provider)
    except ValueError as exc:
        raise ParseError(locator, str(exc)) from None
    if not isinstance(turns, list):
        raise ParseError(locator, "turns must be an array")
    parsed = []
    for k, turn in enumerate(turns, start=1):
        if not isinstance(turn, dict) or set(turn) != {"role", "text"}:
            raise ParseError(f"{locator} turn {k}", "turn must have exactly role and text")
        if turn["role"] not in ("speaker", "listener") or not isinstance(turn["text"], str):
            raise ParseError(f"{locator} turn {k}", "role must be speaker|listener and text a string")
        parsed.append((turn["role"], turn["text"]))
    return cid, dataset_kind, parsed


def parse_corpus(lines: Iterable[str], source: str = "<corpus>", max_turns: int = MAX_TURNS) -> CorpusSet:
    conversations = []
    kind = None
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        locator = f"{source}:{number}"
        cid, this_kind, turns = _parse_record(line, locator)
        if kind is None:
            kind = this_kind
        elif this_kind != kind:
            raise StructureViolation(cid, "mixed-kinds", f"{this_kind.label} after {kind.label}")
        for k, (role, _text) in enumerate(turns, start=1):
            if role != Role.at(k).value:
                raise StructureViolation(cid, "alternation", f"position {k} must be {Role.at(k).value}")
        texts = [text for _role, text in turns]
        if not texts:
            raise StructureViolation(cid, "turn-count", "conversation has no turns")
        if this_kind.name != "expert" and len(texts) > max_turns:
            log.warning("%s: truncating %s from %d to %d turns", locator, cid, len(texts), max_turns)
            texts = texts[:max_turns]
        if this_kind.name == "extended" and len(texts) < EXPERT_TURNS:
            raise StructureViolation(cid, "turn-count", "extended conversations keep the 5 seed turns")
        conversations.append(Conversation.from_texts(cid, this_kind, texts))
    if kind is None:
        raise ParseError(source, "corpus file holds no records")
    return CorpusSet(kind, conversations)


def load_corpus(path: str | os.PathLike, max_turns: int = MAX_TURNS) -> CorpusSet:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(str(path), f"not UTF-8 ({exc.reason})") from None
    return parse_corpus(text.split("\n"), source=str(path), max_turns=max_turns)


FIXTURE_NAMES = ("expert", "extended-chatgpt", "extended-gemini", "control-chatgpt", "control-gemini")


def fixture_path(name: str) -> Path:
    """Path of a bundled example corpus, e.g. ``fixture_path("expert")``."""
    if name not in FIXTURE_NAMES:
        raise ValueError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURE_NAMES)}")
    return Path(str(resources.files("listening_energy") / "data" / "fixtures" / f"{name}.jsonl"))


def load_fixture(name: str) -> CorpusSet:
    return load_corpus(fixture_path(name))
