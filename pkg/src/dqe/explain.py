"""Per-question breakdown of a score, as machine- and human-readable text.

Scores are interpretable: every final value decomposes into the generated
questions, the predicted answers (or the warning that none was found),
and their similarities. This module restructures a Score into a report
without recomputing anything.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from dqe.errors import InvalidInput, ParseError
from dqe.scoring import Score

_FORMATS = ("structured", "human")

_COLUMNS = ("direction", "question", "gold_answer", "predicted_answer", "unanswerable", "similarity")


@dataclass(frozen=True)
class ReportRow:
    direction: str
    question: str
    gold_answer: str
    predicted_answer: str
    unanswerable: bool
    similarity: float


@dataclass(frozen=True)
class ExampleReport:
    """Everything behind one example's score, in a fixed row order:
    source-to-hypothesis questions first, then the converse direction."""

    example_id: str
    mode: str
    hypothesis: str
    context: str
    rows: tuple[ReportRow, ...]
    final: float
    degenerate: bool


def explain_example(
    score: Score, *, example_id: str, hypothesis: str, context: str
) -> ExampleReport:
    """Flatten both direction breakdowns into one report.

    ``context`` is the linearized input in data mode, the reference in
    text mode.
    """
    rows = []
    for direction_score in (score.source_to_hyp, score.hyp_to_source):
        for outcome in direction_score.per_question:
            rows.append(
                ReportRow(
                    direction=direction_score.direction,
                    question=outcome.pair.question,
                    gold_answer=outcome.pair.answer,
                    predicted_answer=outcome.prediction.text,
                    unanswerable=outcome.prediction.unanswerable,
                    similarity=outcome.similarity,
                )
            )
    return ExampleReport(
        example_id=example_id,
        mode=score.mode,
        hypothesis=hypothesis,
        context=context,
        rows=tuple(rows),
        final=score.final,
        degenerate=score.source_to_hyp.degenerate or score.hyp_to_source.degenerate,
    )


def render(report: ExampleReport, format: str = "structured") -> str:
    """Render a report; 'structured' is JSON and parses back losslessly,
    'human' is a fixed-layout table with 4-decimal similarities."""
    if format not in _FORMATS:
        raise InvalidInput(f"unknown report format {format!r}")
    if format == "structured":
        return json.dumps(asdict(report), ensure_ascii=False)

    lines = [
        f"example: {report.example_id}  mode: {report.mode}  final: {report.final:.4f}"
        + ("  [degenerate]" if report.degenerate else ""),
        f"context:    {report.context}",
        f"hypothesis: {report.hypothesis}",
    ]
    if not report.rows:
        lines.append("(no questions generated)")
        return "\n".join(lines)
    cells = [
        (
            row.direction,
            row.question,
            row.gold_answer,
            "<unanswerable>" if row.unanswerable else row.predicted_answer,
            f"{row.similarity:.4f}",
        )
        for row in report.rows
    ]
    header = ("direction", "question", "gold", "predicted", "similarity")
    widths = [max(len(header[i]), *(len(c[i]) for c in cells)) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines.append(fmt.format(*header))
    lines.append("  ".join("-" * w for w in widths))
    lines.extend(fmt.format(*c) for c in cells)
    return "\n".join(lines)


def parse_report(text: str) -> ExampleReport:
    """Invert the structured rendering."""
    try:
        payload = json.loads(text)
        rows = tuple(ReportRow(**{k: row[k] for k in _COLUMNS}) for row in payload["rows"])
        return ExampleReport(
            example_id=payload["example_id"],
            mode=payload["mode"],
            hypothesis=payload["hypothesis"],
            context=payload["context"],
            rows=rows,
            final=payload["final"],
            degenerate=payload["degenerate"],
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed structured report: {exc}") from exc
