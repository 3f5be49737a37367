"""Per-role energy series, their index-wise aggregates and trend labels."""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .corpus import CorpusSet, Conversation, Role, split_by_role
from .errors import EmptyInput, EmptyUtterance, MixedRoles, TooShort
from .sentiment import Lexicon, score_turn

DEFAULT_TREND_THRESHOLD = 0.02
DEFAULT_CONVERGENCE_THRESHOLD = 0.1

CSV_COLUMNS = ("role", "index", "min", "max", "mean", "n")


class TrendLabel(str, enum.Enum):
    GROWING = "growing"
    STEADY = "steady"
    DECLINING = "declining"


@dataclass(frozen=True)
class EnergySeries:
    role: Role
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ConversationEnergy:
    conversation_id: str
    speaker: EnergySeries
    listener: EnergySeries


@dataclass(frozen=True)
class TrajectorySummary:
    role: Role
    per_index_min: tuple[float, ...]
    per_index_max: tuple[float, ...]
    per_index_mean: tuple[float, ...]
    n_conversations_per_index: tuple[int, ...]
    trend: TrendLabel
    slope: float

    def __len__(self) -> int:
        return len(self.per_index_mean)


@dataclass(frozen=True)
class HypothesisReport:
    starts_negative: bool
    first_speaker_mean: float
    equalization_gap: float
    ends_positive: bool
    convergence_gap: float
    converged: bool

    def as_dict(self) -> dict:
        return {
            "starts_negative": self.starts_negative,
            "first_speaker_mean": self.first_speaker_mean,
            "equalization_gap": self.equalization_gap,
            "ends_positive": self.ends_positive,
            "convergence_gap": self.convergence_gap,
            "converged": self.converged,
        }


def score_conversation(conversation: Conversation, lexicon: Lexicon | None = None) -> ConversationEnergy:
    speaker, listener = split_by_role(conversation)

    def energies(turns):
        out = []
        for turn in turns:
            try:
                out.append(score_turn(turn, lexicon))
            except EmptyUtterance:
                raise EmptyUtterance(conversation.id, turn.position) from None
        return out

    return ConversationEnergy(
        conversation.id,
        EnergySeries(Role.SPEAKER, energies(speaker)),
        EnergySeries(Role.LISTENER, energies(listener)),
    )


def score_corpus(corpus: CorpusSet, lexicon: Lexicon | None = None, workers: int = 1) -> list[ConversationEnergy]:
    """Score every turn; results follow corpus order regardless of ``workers``."""
    convs = list(corpus.conversations)
    if workers <= 1 or len(convs) < 2:
        return [score_conversation(c, lexicon) for c in convs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: score_conversation(c, lexicon), convs))


def ols_slope(values: Sequence[float]) -> float:
    n = len(values)
    x_mean = (n - 1) / 2
    y_mean = math.fsum(values) / n
    num = math.fsum((i - x_mean) * (y - y_mean) for i, y in enumerate(values))
    den = math.fsum((i - x_mean) ** 2 for i in range(n))
    return num / den


def classify_trend(mean_series: Sequence[float], threshold: float = DEFAULT_TREND_THRESHOLD) -> tuple[TrendLabel, float]:
    """Least-squares slope per turn index, and the label it implies."""
    if len(mean_series) < 2:
        raise TooShort(f"need at least 2 points to fit a trend, got {len(mean_series)}")
    slope = ols_slope(mean_series)
    if slope > threshold:
        return TrendLabel.GROWING, slope
    if slope < -threshold:
        return TrendLabel.DECLINING, slope
    return TrendLabel.STEADY, slope


def aggregate(series_list: Iterable[EnergySeries], trend_threshold: float = DEFAULT_TREND_THRESHOLD) -> TrajectorySummary:
    """Index-wise min, max and mean across series of one role.

    Shorter series simply stop contributing past their end; the per-index
    counts record how many series reached each index. Means are computed
    exactly and rounded once, so they never fall outside [min, max] and do
    not depend on series order.
    """
    series_list = list(series_list)
    if not series_list:
        raise EmptyInput("aggregate needs at least one series")
    role = series_list[0].role
    if any(s.role is not role for s in series_list):
        raise MixedRoles("all series passed to aggregate must share one role")
    length = max(len(s) for s in series_list)
    mins, maxs, means, counts = [], [], [], []
    for i in range(length):
        column = [s.values[i] for s in series_list if len(s) > i]
        mins.append(min(column))
        maxs.append(max(column))
        means.append(float(sum(map(Fraction, column), Fraction(0)) / len(column)))
        counts.append(len(column))
    if length >= 2:
        trend, slope = classify_trend(means, trend_threshold)
    else:
        trend, slope = TrendLabel.STEADY, 0.0
    return TrajectorySummary(role, tuple(mins), tuple(maxs), tuple(means), tuple(counts), trend, slope)


def summarize_corpus(
    scored: Sequence[ConversationEnergy], trend_threshold: float = DEFAULT_TREND_THRESHOLD
) -> dict[Role, TrajectorySummary]:
    if not scored:
        raise EmptyInput("no scored conversations")
    # id-sorted so the reduction is independent of scoring order
    ordered = sorted(scored, key=lambda c: c.conversation_id)
    return {
        Role.SPEAKER: aggregate([c.speaker for c in ordered], trend_threshold),
        Role.LISTENER: aggregate([c.listener for c in ordered], trend_threshold),
    }


def hypothesis_check(
    speaker: TrajectorySummary,
    listener: TrajectorySummary,
    convergence_threshold: float = DEFAULT_CONVERGENCE_THRESHOLD,
) -> HypothesisReport:
    """Test the negative-start, positive-end and convergence expectations."""
    if not len(speaker) or not len(listener):
        raise EmptyInput("hypothesis check needs non-empty summaries")
    s_first, s_last = speaker.per_index_mean[0], speaker.per_index_mean[-1]
    l_first, l_last = listener.per_index_mean[0], listener.per_index_mean[-1]
    gap = abs(s_last - l_last)
    return HypothesisReport(
        starts_negative=s_first < 0,
        first_speaker_mean=s_first,
        equalization_gap=abs(l_first - s_first),
        ends_positive=min(s_last, l_last) > max(s_first, l_first),
        convergence_gap=gap,
        converged=gap < convergence_threshold,
    )


def moving_average(values: Sequence[float], window: int = 3) -> list[float]:
    """Centered moving average; the window shrinks at the ends. Plotting only."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    half = window // 2
    out = []
    for i in range(len(values)):
        chunk = values[max(0, i - half) : i + half + 1]
        out.append(math.fsum(chunk) / len(chunk))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def summaries_to_csv(summaries: Iterable[TrajectorySummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    order = {Role.SPEAKER: 0, Role.LISTENER: 1}
    for summary in sorted(summaries, key=lambda s: order[s.role]):
        for i in range(len(summary)):
            writer.writerow(
                [
                    summary.role.value,
                    i,
                    _fmt(summary.per_index_min[i]),
                    _fmt(summary.per_index_max[i]),
                    _fmt(summary.per_index_mean[i]),
                    summary.n_conversations_per_index[i],
                ]
            )
    return buf.getvalue()


def summaries_from_csv(text: str, trend_threshold: float = DEFAULT_TREND_THRESHOLD) -> dict[Role, TrajectorySummary]:
    rows: dict[Role, list[dict]] = {}
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"summary CSV must have columns {','.join(CSV_COLUMNS)}")
    for row in reader:
        rows.setdefault(Role(row["role"]), []).append(row)
    out = {}
    for role, items in rows.items():
        items.sort(key=lambda r: int(r["index"]))
        means = tuple(float(r["mean"]) for r in items)
        if len(means) >= 2:
            trend, slope = classify_trend(means, trend_threshold)
        else:
            trend, slope = TrendLabel.STEADY, 0.0
        out[role] = TrajectorySummary(
            role,
            tuple(float(r["min"]) for r in items),
            tuple(float(r["max"]) for r in items),
            means,
            tuple(int(r["n"]) for r in items),
            trend,
            slope,
        )
    return out
