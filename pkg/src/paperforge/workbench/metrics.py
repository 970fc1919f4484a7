"""Evaluation metrics over transcripts, episodes, and timer events.

Reporting categories:

- stage durations for PaperReading (human timer events), CodeGeneration,
  and ErrorCorrection (transcript records attributed to the stage active
  when each prompt was sent: extract/scaffold/funcgen count as code
  generation; repair/integration as error correction)
- prompt counts per stage and origin, with origin shares kept as exact
  rationals
- error statistics per failure class: episode count, total repair time,
  prompts by origin
- least-squares regression of repair time on human prompt count across
  episodes (slope, intercept, Pearson r), defined only when at least two
  distinct x values exist

Conservation invariants: prompt-count sums equal transcript totals, and
error-stat counts equal the number of episodes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from ..gateway import Transcript, load_transcript
from ..repair import RepairEpisode

PAPER_READING = "PaperReading"
CODE_GENERATION = "CodeGeneration"
ERROR_CORRECTION = "ErrorCorrection"

# Stage tag -> reporting category (prompts attributed to the stage active
# when they were sent).
STAGE_CATEGORY = {
    "extract": CODE_GENERATION,
    "scaffold": CODE_GENERATION,
    "funcgen": CODE_GENERATION,
    "integration": ERROR_CORRECTION,
    "repair": ERROR_CORRECTION,
}


@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    r: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r": self.r}


@dataclass
class MetricsReport:
    stage_durations_ms: dict = field(default_factory=dict)
    prompt_counts: dict = field(default_factory=dict)  # stage -> origin -> count
    origin_shares: dict = field(default_factory=dict)  # origin -> Fraction
    error_stats: dict = field(default_factory=dict)  # "Major/Minor" -> stats dict
    regression: Regression | None = None
    total_records: int = 0
    total_episodes: int = 0

    def to_dict(self) -> dict:
        return {
            "stage_durations_ms": dict(sorted(self.stage_durations_ms.items())),
            "prompt_counts": {
                stage: dict(sorted(origins.items()))
                for stage, origins in sorted(self.prompt_counts.items())
            },
            "origin_shares": {
                origin: {
                    "numerator": share.numerator,
                    "denominator": share.denominator,
                    "value": float(share),
                }
                for origin, share in sorted(self.origin_shares.items())
            },
            "error_stats": {k: dict(v) for k, v in sorted(self.error_stats.items())},
            "regression": self.regression.to_dict() if self.regression else None,
            "total_records": self.total_records,
            "total_episodes": self.total_episodes,
        }


def least_squares(points: list[tuple[float, float]]) -> Regression | None:
    """Ordinary least squares via the normal equations; None when fewer
    than two distinct x values exist."""
    if len({x for x, _ in points}) < 2:
        return None
    n = len(points)
    sx = sum(x for x, _ in points)
    sy = sum(y for _, y in points)
    sxy = sum(x * y for x, y in points)
    sxx = sum(x * x for x, _ in points)
    syy = sum(y * y for _, y in points)
    denom = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / denom
    intercept = (sy - slope * sx) / n
    var_y = n * syy - sy * sy
    r = 1.0 if var_y == 0 else (n * sxy - sx * sy) / math.sqrt(denom * var_y)
    return Regression(slope=slope, intercept=intercept, r=r)


def paper_reading_ms(timer_events: list[dict]) -> int:
    """Sum balanced start/stop intervals; an open trailing start accrues
    nothing."""
    total = 0.0
    open_start: float | None = None
    for event in timer_events:
        if event["category"] != PAPER_READING:
            continue
        if event["action"] == "start":
            open_start = event["at"]
        elif event["action"] == "stop" and open_start is not None:
            total += event["at"] - open_start
            open_start = None
    return int(total * 1000)


def compute_metrics(
    transcripts: list[Transcript],
    episodes: list[RepairEpisode],
    timer_events: list[dict] | None = None,
) -> MetricsReport:
    report = MetricsReport()
    durations = {PAPER_READING: 0, CODE_GENERATION: 0, ERROR_CORRECTION: 0}
    durations[PAPER_READING] = paper_reading_ms(timer_events or [])

    origin_totals: dict[str, int] = {}
    for transcript in transcripts:
        for record in transcript.records:
            stage_counts = report.prompt_counts.setdefault(record.stage, {})
            stage_counts[record.origin] = stage_counts.get(record.origin, 0) + 1
            origin_totals[record.origin] = origin_totals.get(record.origin, 0) + 1
            report.total_records += 1
            category = STAGE_CATEGORY.get(record.stage, CODE_GENERATION)
            durations[category] += record.duration_ms
    report.stage_durations_ms = durations

    if report.total_records:
        report.origin_shares = {
            origin: Fraction(count, report.total_records)
            for origin, count in origin_totals.items()
        }

    points: list[tuple[float, float]] = []
    for episode in episodes:
        key = str(episode.cls)
        stats = report.error_stats.setdefault(
            key,
            {
                "count": 0,
                "repair_time_ms": 0,
                "automatic_prompts": 0,
                "human_prompts": 0,
                "resolved": 0,
            },
        )
        stats["count"] += 1
        stats["repair_time_ms"] += episode.wall_clock_ms
        stats["automatic_prompts"] += episode.automatic_prompt_count
        stats["human_prompts"] += episode.human_prompt_count
        stats["resolved"] += 1 if episode.resolved else 0
        report.total_episodes += 1
        points.append((float(episode.human_prompt_count), float(episode.wall_clock_ms)))

    report.regression = least_squares(points)
    return report


def project_metrics(project_dir: str | Path) -> MetricsReport:
    """Compute the report from a project directory's persisted artifacts."""
    project_dir = Path(project_dir)
    transcripts = []
    transcripts_dir = project_dir / "transcripts"
    if transcripts_dir.is_dir():
        for path in sorted(transcripts_dir.glob("*.jsonl")):
            transcripts.append(load_transcript(path))
    episodes = []
    repairs_dir = project_dir / "repairs"
    if repairs_dir.is_dir():
        for path in sorted(repairs_dir.glob("*.json")):
            episodes.append(RepairEpisode.from_dict(json.loads(path.read_text("utf-8"))))
    timers_path = project_dir / "timers.json"
    timer_events = json.loads(timers_path.read_text("utf-8")) if timers_path.is_file() else []
    return compute_metrics(transcripts, episodes, timer_events)


CSV_HEADER = ("section", "key", "subkey", "value")


def render_csv(report: MetricsReport) -> str:
    """Flat CSV: section,key,subkey,value. Column set is pinned."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for category, ms in sorted(report.stage_durations_ms.items()):
        writer.writerow(("stage_duration_ms", category, "", ms))
    for stage, origins in sorted(report.prompt_counts.items()):
        for origin, count in sorted(origins.items()):
            writer.writerow(("prompt_count", stage, origin, count))
    for origin, share in sorted(report.origin_shares.items()):
        writer.writerow(
            ("origin_share", origin, "", f"{share.numerator}/{share.denominator}")
        )
    for cls, stats in sorted(report.error_stats.items()):
        for stat_key in ("count", "repair_time_ms", "automatic_prompts", "human_prompts", "resolved"):
            writer.writerow(("error_stat", cls, stat_key, stats[stat_key]))
    if report.regression is not None:
        writer.writerow(("regression", "slope", "", repr(report.regression.slope)))
        writer.writerow(("regression", "intercept", "", repr(report.regression.intercept)))
        writer.writerow(("regression", "r", "", repr(report.regression.r)))
    writer.writerow(("totals", "records", "", report.total_records))
    writer.writerow(("totals", "episodes", "", report.total_episodes))
    return buffer.getvalue()


def export_metrics(report: MetricsReport, fmt: str, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path.write_text(render_csv(report), "utf-8")
    elif fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r} (use csv or json)")
    return path
