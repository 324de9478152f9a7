"""Canonical representation of structured inputs and their linearization.

Structured inputs are either RDF-style triple sets or attribute-value
tables. Linearization flattens them into a single string so that text
encoders (and the deterministic oracle backend) can consume them; the
format is reversible, which several property tests rely on.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from dqe.errors import InvalidEntity, InvalidInput

SEP_TOKEN = "[SEP]"
SEP_JOINER = " [SEP] "
TRIPLE_DELIM = " | "
TABLE_DELIM = " : "

_WHITESPACE = re.compile(r"\s+")


def normalize_entity(raw: str) -> str:
    """Reconcile entity spellings between data and text form.

    Underscores become single spaces, whitespace runs collapse to one
    space, and surrounding whitespace is dropped. Casing is preserved.
    """
    if not raw or not raw.strip():
        raise InvalidEntity("entity is empty or whitespace-only")
    normalized = _WHITESPACE.sub(" ", raw.replace("_", " ")).strip()
    if not normalized:
        raise InvalidEntity(f"entity normalizes to empty: {raw!r}")
    return normalized


def _check_field(value: str, what: str, reserved: tuple[str, ...]) -> None:
    if not value or not value.replace("_", " ").strip():
        raise InvalidEntity(f"{what} is empty or normalizes to empty: {value!r}")
    for token in reserved:
        if token in value:
            raise InvalidEntity(f"{what} contains reserved token {token!r}: {value!r}")


@dataclass(frozen=True)
class Triple:
    """One subject / predicate / object entry of a triple set."""

    subject: str
    predicate: str
    object: str

    def __post_init__(self) -> None:
        # "|" is rejected along with "[SEP]" so linearization stays reversible.
        for name in ("subject", "predicate", "object"):
            _check_field(getattr(self, name), f"triple {name}", (SEP_TOKEN, "|"))


@dataclass(frozen=True)
class AttributeValue:
    """One key/value row of an attribute-value table."""

    key: str
    value: str

    def __post_init__(self) -> None:
        _check_field(self.key, "attribute key", (SEP_TOKEN,))
        _check_field(self.value, "attribute value", (SEP_TOKEN,))


@dataclass(frozen=True)
class StructuredInput:
    """An identified triple set or attribute-value table."""

    id: str
    entries: tuple[Triple, ...] | tuple[AttributeValue, ...]

    def __post_init__(self) -> None:
        if not self.id or not self.id.strip():
            raise InvalidEntity("input id is empty")
        if not self.entries:
            raise InvalidInput(f"input {self.id!r} has no entries")
        kinds = {type(e) for e in self.entries}
        if len(kinds) != 1 or not kinds.issubset({Triple, AttributeValue}):
            raise InvalidInput(f"input {self.id!r} mixes entry kinds: {kinds}")

    @property
    def is_table(self) -> bool:
        return isinstance(self.entries[0], AttributeValue)

    @property
    def size(self) -> int:
        """Number of triples or table rows."""
        return len(self.entries)


@dataclass(frozen=True)
class LinearizedInput:
    """The flattened text form of a StructuredInput."""

    text: str
    modality: str
    source_id: str


@dataclass(frozen=True)
class TextPassage:
    """A hypothesis or reference string.

    Empty text is legal only for hypotheses: scoring an empty system
    output is a valid degenerate case.
    """

    text: str
    role: str

    def __post_init__(self) -> None:
        if self.role not in ("hypothesis", "reference"):
            raise InvalidInput(f"unknown passage role {self.role!r}")
        if self.role == "reference" and not self.text.strip():
            raise InvalidInput("reference text must be non-empty")


def linearize(source: StructuredInput) -> LinearizedInput:
    """Render a structured input as a deterministic single string.

    Triples render as "<subject> | <predicate> | <object>" with
    entity-normalized fields; table rows render as "<key> : <value>"
    verbatim. Entries are joined with " [SEP] " in input order.
    """
    if source.is_table:
        parts = [f"{row.key}{TABLE_DELIM}{row.value}" for row in source.entries]
    else:
        parts = [
            TRIPLE_DELIM.join(
                (
                    normalize_entity(t.subject),
                    normalize_entity(t.predicate),
                    normalize_entity(t.object),
                )
            )
            for t in source.entries
        ]
    return LinearizedInput(text=SEP_JOINER.join(parts), modality="data", source_id=source.id)


def split_linearized(text: str) -> list[tuple[str, ...]]:
    """Invert :func:`linearize` on a well-formed linearization.

    Returns (subject, predicate, object) or (key, value) tuples. Raises
    InvalidInput when a segment is neither form.
    """
    if not text.strip():
        raise InvalidInput("empty linearization")
    out: list[tuple[str, ...]] = []
    for segment in text.split(SEP_JOINER):
        if TRIPLE_DELIM in segment:
            fields = tuple(segment.split(TRIPLE_DELIM))
            if len(fields) != 3 or not all(f.strip() for f in fields):
                raise InvalidInput(f"malformed triple segment {segment!r}")
        elif TABLE_DELIM in segment:
            key, _, value = segment.partition(TABLE_DELIM)
            fields = (key, value)
            if not key.strip() or not value.strip():
                raise InvalidInput(f"malformed table segment {segment!r}")
        else:
            raise InvalidInput(f"segment is neither triple nor table row: {segment!r}")
        out.append(fields)
    return out
