"""Dataset, ratings, and synthetic-corpus I/O plus dataset statistics.

The canonical on-disk dataset format is line-delimited JSON, one example
per line, with fields ``id``, ``triples`` (list of "s | p | o" strings)
or ``table`` (list of {key, value}), ``references`` and ``split``.
Adapters convert a documented subset of the native WebNLG / WikiBio / E2E
release formats into it. All readers skip leading lines that start with
"#", which output commands use for the run-signature header.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from dqe.data_model import AttributeValue, StructuredInput, Triple
from dqe.errors import EmptyDataset, InvariantViolation, ParseError
from dqe.scoring import contains_normalized

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")

CORPUS_FIELDS = (
    "example_id",
    "linearized_input",
    "question",
    "answer",
    "source_description",
    "qg_signature",
)


@dataclass(frozen=True)
class DtgExample:
    """A structured input with its gold descriptions."""

    id: str
    input: StructuredInput
    references: tuple[str, ...]
    split: str = "train"

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ParseError(f"unknown split {self.split!r}")
        if self.split == "train" and not self.references:
            raise ParseError(f"train example {self.id!r} has no reference")


@dataclass(frozen=True)
class RatedOutput:
    """A system hypothesis with its human ratings per dimension."""

    system_id: str
    example_id: str
    hypothesis: str
    ratings: Mapping[str, float]

    def __post_init__(self) -> None:
        if not self.ratings:
            raise ParseError(f"rated output {self.system_id}/{self.example_id} has no ratings")


@dataclass(frozen=True)
class SyntheticQaRecord:
    """One (linearized input, question, answer) training triple."""

    example_id: str
    linearized_input: str
    question: str
    answer: str
    source_description: str
    qg_signature: str

    def __post_init__(self) -> None:
        if not self.question.strip() or not self.answer.strip():
            raise InvariantViolation(
                f"record for {self.example_id!r} has an empty question or answer"
            )


@dataclass(frozen=True)
class DatasetStats:
    """Input sizes and reference lengths over a dataset."""

    table_size_max: int
    table_size_mean: float
    target_len_max: int
    target_len_mean: float


def _skip_header_lines(lines: Iterable[str]) -> Iterable[tuple[int, str]]:
    """Yield (1-based line number, line) pairs, dropping '#' comments."""
    for number, line in enumerate(lines, start=1):
        if line.startswith("#"):
            continue
        if line.strip():
            yield number, line


def _parse_triple_string(raw: str, line: int) -> Triple:
    fields = raw.split(" | ")
    if len(fields) != 3:
        raise ParseError(f"triple string needs 3 ' | '-separated fields: {raw!r}", line)
    return Triple(subject=fields[0], predicate=fields[1], object=fields[2])


def _canonical_example(record: dict, line: int) -> DtgExample:
    try:
        example_id = record["id"]
        references = tuple(record.get("references", ()))
        split = record.get("split", "train")
        if "triples" in record:
            entries: tuple = tuple(
                _parse_triple_string(t, line) for t in record["triples"]
            )
        elif "table" in record:
            entries = tuple(
                AttributeValue(key=row["key"], value=row["value"]) for row in record["table"]
            )
        else:
            raise ParseError("record has neither 'triples' nor 'table'", line)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed record: {exc}", line) from exc
    return DtgExample(
        id=example_id,
        input=StructuredInput(id=example_id, entries=entries),
        references=references,
        split=split,
    )


def _load_canonical(path: Path) -> list[DtgExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in _skip_header_lines(fh):
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
            examples.append(_canonical_example(record, line_no))
    return examples


def _load_webnlg(path: Path, split: str) -> list[DtgExample]:
    """WebNLG challenge JSON: entries with modifiedtripleset + lexicalisations."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    entries = payload.get("entries")
    if entries is None:
        raise ParseError("WebNLG file has no 'entries' key")
    examples = []
    for index, wrapper in enumerate(entries):
        entry = wrapper
        if isinstance(wrapper, dict) and "modifiedtripleset" not in wrapper:
            # Entries are often wrapped as {"<n>": {...}}.
            if len(wrapper) != 1:
                raise ParseError(f"entry {index} is not a single-key wrapper")
            entry = next(iter(wrapper.values()))
        try:
            triples = tuple(
                Triple(subject=t["subject"], predicate=t["property"], object=t["object"])
                for t in entry["modifiedtripleset"]
            )
            references = tuple(
                lex["lex"] for lex in entry.get("lexicalisations", []) if lex.get("lex")
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed WebNLG entry {index}: {exc}") from exc
        example_id = str(entry.get("eid") or f"webnlg-{index}")
        examples.append(
            DtgExample(
                id=example_id,
                input=StructuredInput(id=example_id, entries=triples),
                references=references,
                split=split,
            )
        )
    return examples


def _load_wikibio(path: Path, split: str) -> list[DtgExample]:
    """Line-delimited JSON with an 'infobox' mapping and a 'biography' text."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in _skip_header_lines(fh):
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
            infobox = record.get("infobox")
            if not infobox:
                raise ParseError("record has no 'infobox'", line_no)
            if isinstance(infobox, dict):
                items = infobox.items()
            else:
                items = ((row["key"], row["value"]) for row in infobox)
            try:
                rows = tuple(AttributeValue(key=str(k), value=str(v)) for k, v in items)
            except (KeyError, TypeError) as exc:
                raise ParseError(f"malformed infobox: {exc}", line_no) from exc
            example_id = str(record.get("id") or f"wikibio-{line_no}")
            references = tuple(
                r for r in ([record["biography"]] if "biography" in record else record.get("references", ()))
            )
            examples.append(
                DtgExample(
                    id=example_id,
                    input=StructuredInput(id=example_id, entries=rows),
                    references=references,
                    split=split,
                )
            )
    return examples


def _parse_mr(mr: str, line: int) -> tuple[AttributeValue, ...]:
    rows = []
    for chunk in mr.split(", "):
        chunk = chunk.strip()
        if not chunk.endswith("]") or "[" not in chunk:
            raise ParseError(f"malformed E2E attribute {chunk!r}", line)
        key, _, rest = chunk.partition("[")
        rows.append(AttributeValue(key=key.strip(), value=rest[:-1]))
    return tuple(rows)


def _load_e2e(path: Path, split: str) -> list[DtgExample]:
    """E2E release CSV with 'mr' and 'ref' columns."""
    examples = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"mr", "ref"}.issubset(reader.fieldnames):
            raise ParseError("E2E file must have 'mr' and 'ref' columns")
        for index, row in enumerate(reader):
            line_no = index + 2
            example_id = f"e2e-{index}"
            examples.append(
                DtgExample(
                    id=example_id,
                    input=StructuredInput(id=example_id, entries=_parse_mr(row["mr"], line_no)),
                    references=(row["ref"],) if row["ref"] else (),
                    split=split,
                )
            )
    return examples


def load_dtg_dataset(
    path: str | os.PathLike, format: str = "canonical", split: str = "train"
) -> list[DtgExample]:
    """Load a dataset file; ``split`` applies to non-canonical formats.

    Order is preserved from the file. Duplicate ids within a split and
    reserved tokens in fields are rejected.
    """
    path = Path(path)
    if format == "canonical":
        examples = _load_canonical(path)
    elif format == "webnlg-triples":
        examples = _load_webnlg(path, split)
    elif format == "wikibio-infobox":
        examples = _load_wikibio(path, split)
    elif format == "e2e-mr":
        examples = _load_e2e(path, split)
    else:
        raise ParseError(f"unknown dataset format {format!r}")

    seen: set[tuple[str, str]] = set()
    for example in examples:
        key = (example.split, example.id)
        if key in seen:
            raise ParseError(f"duplicate example id {example.id!r} in split {example.split!r}")
        seen.add(key)
    return examples


def load_ratings(path: str | os.PathLike) -> list[RatedOutput]:
    """Read a comma-delimited ratings file.

    Header: ``system_id,example_id,hypothesis,<dim1>,<dim2>,...`` with one
    real-valued rating per dimension column.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("ratings file is empty") from None
        if header[:3] != ["system_id", "example_id", "hypothesis"] or len(header) < 4:
            raise ParseError(
                "ratings header must be 'system_id,example_id,hypothesis,<dim>,...'"
            )
        dimensions = header[3:]
        rated = []
        for index, row in enumerate(reader):
            line_no = index + 2
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(row)}", line_no)
            ratings = {}
            for dim, cell in zip(dimensions, row[3:]):
                try:
                    ratings[dim] = float(cell)
                except ValueError:
                    raise ParseError(f"rating {dim}={cell!r} is not numeric", line_no) from None
            rated.append(
                RatedOutput(
                    system_id=row[0], example_id=row[1], hypothesis=row[2], ratings=ratings
                )
            )
    return rated


def load_hypotheses(path: str | os.PathLike) -> list[tuple[str, str, str]]:
    """Read (system_id, example_id, hypothesis) rows; extra columns are ignored.

    A plain ratings file therefore also works as a hypotheses file.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        required = {"system_id", "example_id", "hypothesis"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ParseError("hypotheses header must include system_id, example_id, hypothesis")
        return [(r["system_id"], r["example_id"], r["hypothesis"]) for r in reader]


def check_record_extractive(record: SyntheticQaRecord) -> None:
    if not contains_normalized(record.source_description, record.answer):
        raise InvariantViolation(
            f"answer {record.answer!r} is not a normalized substring of the "
            f"description for record {record.example_id!r} ({record.question!r})"
        )


def write_synthetic_corpus(
    records: Sequence[SyntheticQaRecord],
    path: str | os.PathLike,
    signature: str | None = None,
) -> None:
    """Write records as UTF-8 JSON lines (LF), enforcing the extractive invariant."""
    for record in records:
        check_record_extractive(record)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if signature:
            fh.write(f"# {signature}\n")
        for record in records:
            fh.write(
                json.dumps(
                    {name: getattr(record, name) for name in CORPUS_FIELDS},
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def read_synthetic_corpus(path: str | os.PathLike) -> list[SyntheticQaRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in _skip_header_lines(fh):
            try:
                payload = json.loads(line)
                records.append(SyntheticQaRecord(**{f: payload[f] for f in CORPUS_FIELDS}))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"malformed corpus record: {exc}", line_no) from exc
    return records


def dataset_stats(examples: Sequence[DtgExample]) -> DatasetStats:
    """Input sizes and whitespace-token reference lengths.

    Reference lengths are measured on the first reference; examples
    without references do not contribute to the target-length figures.
    """
    if not examples:
        raise EmptyDataset("cannot compute statistics of an empty dataset")
    sizes = [example.input.size for example in examples]
    target_lens = [len(ex.references[0].split()) for ex in examples if ex.references]
    return DatasetStats(
        table_size_max=max(sizes),
        table_size_mean=sum(sizes) / len(sizes),
        target_len_max=max(target_lens, default=0),
        target_len_mean=sum(target_lens) / len(target_lens) if target_lens else 0.0,
    )
