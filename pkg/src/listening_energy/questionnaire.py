"""Expert rating form, its response store, and the discordance report.

A dataset is *discordant* when its automated listener trend looks like
progress (Growing) while the human rating of empathetic listening is low.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import MissingFile, MissingSummary, OutOfRange, ParseError
from .fsutil import atomic_write_text
from .trajectory import TrajectorySummary, TrendLabel

log = logging.getLogger(__name__)

SCALE_FIELDS = ("friendly", "nice", "sensible", "empathetic_listening")

_IMPRESSION = "Looking at how the conversation evolved, rate your impression of the chatbot on these scales, from"
QUESTIONS = {
    "friendly": f"{_IMPRESSION} Unfriendly to Friendly",
    "nice": f"{_IMPRESSION} Awful to Nice",
    "sensible": f"{_IMPRESSION} Foolish to Sensible",
    "empathetic_listening": (
        "How do you evaluate the empathetic listening ability of the chatbot, "
        "from Very unsatisfied to Very satisfied?"
    ),
}
FREE_TEXT_PROMPT = "Any further comments on the evaluated interactions (optional):"

DEFAULT_RATING_CUTOFF = 2


@dataclass(frozen=True)
class QuestionnaireResponse:
    dataset_id: str
    friendly: int
    nice: int
    sensible: int
    empathetic_listening: int
    free_text: str | None = None
    rater: str = "expert"
    presentation_order: int | None = None

    def __post_init__(self):
        if not self.dataset_id:
            raise ValueError("dataset_id must be non-empty")
        for name in SCALE_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
                raise OutOfRange(name, value)

    @property
    def key(self) -> str:
        return f"{self.dataset_id}:{self.rater}"

    def to_record(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "rater": self.rater,
            "friendly": self.friendly,
            "nice": self.nice,
            "sensible": self.sensible,
            "empathetic_listening": self.empathetic_listening,
            "free_text": self.free_text,
            "presentation_order": self.presentation_order,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "QuestionnaireResponse":
        return cls(**record)


class ResponseStore:
    """Line-delimited response file; one record per (dataset, rater)."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._responses: dict[str, QuestionnaireResponse] = {}
        if self.path is not None and self.path.exists():
            self._responses = {r.key: r for r in read_responses(self.path)}

    def __len__(self) -> int:
        return len(self._responses)

    def __iter__(self):
        return iter(self._responses.values())

    def responses(self) -> list[QuestionnaireResponse]:
        return list(self._responses.values())

    def put(self, response: QuestionnaireResponse) -> str:
        if response.key in self._responses:
            log.warning("overwriting stored response for %s", response.key)
        self._responses[response.key] = response
        if self.path is not None:
            atomic_write_text(self.path, dumps_responses(self._responses.values()))
        return response.key


def record_response(response: QuestionnaireResponse, store: ResponseStore) -> str:
    return store.put(response)


def dumps_responses(responses: Iterable[QuestionnaireResponse]) -> str:
    return "".join(json.dumps(r.to_record(), ensure_ascii=False) + "\n" for r in responses)


def read_responses(path: str | os.PathLike) -> list[QuestionnaireResponse]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    out = []
    for number, line in enumerate(path.read_text(encoding="utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        try:
            out.append(QuestionnaireResponse.from_record(json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            raise ParseError(f"{path}:{number}", f"bad response record ({exc})") from None
    return out


@dataclass(frozen=True)
class DiscordanceEntry:
    dataset_id: str
    rater: str
    listener_trend: TrendLabel
    empathetic_listening: int
    discordant: bool

    def as_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "rater": self.rater,
            "listener_trend": self.listener_trend.value,
            "empathetic_listening": self.empathetic_listening,
            "discordant": self.discordant,
        }


def is_discordant(
    trend: TrendLabel,
    rating: int,
    cutoff: int = DEFAULT_RATING_CUTOFF,
    flagged_trend: TrendLabel = TrendLabel.GROWING,
) -> bool:
    return trend is flagged_trend and rating <= cutoff


def discordance_report(
    responses: Iterable[QuestionnaireResponse],
    summaries: Mapping[str, TrajectorySummary],
    cutoff: int = DEFAULT_RATING_CUTOFF,
    flagged_trend: TrendLabel = TrendLabel.GROWING,
) -> list[DiscordanceEntry]:
    """One entry per response; raters are never averaged together."""
    entries = []
    for response in responses:
        summary = summaries.get(response.dataset_id)
        if summary is None:
            raise MissingSummary(response.dataset_id)
        entries.append(
            DiscordanceEntry(
                dataset_id=response.dataset_id,
                rater=response.rater,
                listener_trend=summary.trend,
                empathetic_listening=response.empathetic_listening,
                discordant=is_discordant(summary.trend, response.empathetic_listening, cutoff, flagged_trend),
            )
        )
    return entries
