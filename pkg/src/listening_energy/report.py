"""Analysis outputs: the summary CSV, hypothesis report, per-role charts and manifest.

Everything is rendered into memory first and only then written, so a
failure part-way leaves the output directory as it was.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402

from . import __version__  # noqa: E402
from .corpus import CorpusSet, Role  # noqa: E402
from .fsutil import atomic_write_many, sha256_bytes, sha256_file  # noqa: E402
from .sentiment import Lexicon  # noqa: E402
from .trajectory import (  # noqa: E402
    DEFAULT_CONVERGENCE_THRESHOLD,
    DEFAULT_TREND_THRESHOLD,
    HypothesisReport,
    TrajectorySummary,
    hypothesis_check,
    moving_average,
    score_corpus,
    summaries_to_csv,
    summarize_corpus,
)

ROLE_TITLES = {
    Role.SPEAKER: "Energy tendency of the speaker",
    Role.LISTENER: "Energy tendency of the listener",
}


@dataclass(frozen=True)
class ChartStyle:
    mean_color: str = "red"
    bound_color: str = "blue"
    start_index: int = 0
    smooth: bool = False
    width: float = 5.0
    height: float = 3.6


@dataclass
class RunManifest:
    inputs: dict[str, str]
    lexicon: dict[str, str]
    thresholds: dict[str, float]
    options: dict = field(default_factory=dict)
    tool_version: str = __version__
    outputs: dict[str, str] = field(default_factory=dict)

    @property
    def digest(self) -> str:
        """Hash of input contents and settings; paths and outputs are excluded."""
        core = {
            "inputs": sorted(self.inputs.values()),
            "lexicon": sorted(self.lexicon.values()),
            "thresholds": self.thresholds,
            "options": self.options,
            "tool_version": self.tool_version,
        }
        return sha256_bytes(json.dumps(core, sort_keys=True).encode("utf-8"))

    def to_json(self) -> str:
        body = {
            "run_digest": self.digest,
            "tool_version": self.tool_version,
            "inputs": self.inputs,
            "lexicon": self.lexicon,
            "thresholds": self.thresholds,
            "options": self.options,
            "outputs": self.outputs,
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def render_role_svg(summary: TrajectorySummary, style: ChartStyle = ChartStyle(), run_digest: str = "") -> bytes:
    """Min/max/mean energy against per-role turn index, y fixed to [-1, 1]."""
    xs = [style.start_index + i for i in range(len(summary))]
    lows, highs, means = summary.per_index_min, summary.per_index_max, summary.per_index_mean
    if style.smooth:
        lows, highs, means = moving_average(lows), moving_average(highs), moving_average(means)

    fig = Figure(figsize=(style.width, style.height))
    ax = fig.add_subplot()
    ax.plot(xs, highs, color=style.bound_color, linewidth=1.2, label="maximum")
    ax.plot(xs, lows, color=style.bound_color, linewidth=1.2, linestyle="--", label="minimum")
    ax.plot(xs, means, color=style.mean_color, linewidth=2.0, marker="o", markersize=3, label="average")
    ax.axhline(0.0, color="0.75", linewidth=0.6, zorder=0)
    ax.set_ylim(-1.0, 1.0)
    if xs:
        ax.set_xticks(xs)
        ax.set_xlim(xs[0] - 0.25, xs[-1] + 0.25)
    ax.set_xlabel("interaction")
    ax.set_ylabel("energy")
    ax.set_title(f"{ROLE_TITLES[summary.role]} ({summary.trend.value}, slope {summary.slope:+.3f})", fontsize=9)
    ax.legend(loc="lower right", fontsize=7, frameon=False)
    fig.tight_layout()

    buf = io.BytesIO()
    metadata = {"Date": None, "Creator": f"listening-energy {__version__}"}
    if run_digest:
        metadata["Identifier"] = run_digest
    with matplotlib.rc_context({"svg.hashsalt": run_digest or "listening-energy", "svg.fonttype": "path"}):
        fig.savefig(buf, format="svg", metadata=metadata)
    return buf.getvalue()


@dataclass
class Analysis:
    dataset_id: str
    summaries: dict[Role, TrajectorySummary]
    hypothesis: HypothesisReport
    manifest: RunManifest
    files: dict[str, bytes]


def analyze(
    corpus: CorpusSet,
    lexicon: Lexicon,
    corpus_path: str | Path,
    lexicon_path: str | Path,
    trend_threshold: float = DEFAULT_TREND_THRESHOLD,
    convergence_threshold: float = DEFAULT_CONVERGENCE_THRESHOLD,
    style: ChartStyle = ChartStyle(),
    workers: int = 1,
) -> Analysis:
    scored = score_corpus(corpus, lexicon, workers=workers)
    summaries = summarize_corpus(scored, trend_threshold)
    report = hypothesis_check(summaries[Role.SPEAKER], summaries[Role.LISTENER], convergence_threshold)

    manifest = RunManifest(
        inputs={str(corpus_path): sha256_file(Path(corpus_path))},
        lexicon={str(lexicon_path): sha256_file(Path(lexicon_path))},
        thresholds={"trend": trend_threshold, "convergence": convergence_threshold},
        options={
            "start_index": style.start_index,
            "smooth": style.smooth,
            "mean_color": style.mean_color,
            "bound_color": style.bound_color,
        },
    )
    digest = manifest.digest
    hypothesis_doc = {
        "dataset_id": corpus.dataset_id,
        "run_digest": digest,
        "conversations": len(corpus),
        "hypothesis": report.as_dict(),
        "trends": {
            role.value: {"label": s.trend.value, "slope": s.slope} for role, s in summaries.items()
        },
    }
    files = {
        "trajectory.csv": summaries_to_csv(summaries.values()).encode("utf-8"),
        "hypothesis.json": (json.dumps(hypothesis_doc, indent=2) + "\n").encode("utf-8"),
        "speaker.svg": render_role_svg(summaries[Role.SPEAKER], style, digest),
        "listener.svg": render_role_svg(summaries[Role.LISTENER], style, digest),
    }
    manifest.outputs = {name: sha256_bytes(data) for name, data in sorted(files.items())}
    files["manifest.json"] = manifest.to_json().encode("utf-8")
    return Analysis(corpus.dataset_id, summaries, report, manifest, files)


def write_files(out_dir: str | Path, files: Mapping[str, bytes]) -> list[Path]:
    return atomic_write_many(Path(out_dir), files)
