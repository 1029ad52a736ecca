"""Text format for n-ary facts.

A fact file is UTF-8 text with LF line endings, one fact per line.  Lines
that are blank or start with ``#`` are ignored.  A fact is a primary tuple
``<<relation, entity, entity, ...>>`` followed by zero or more qualifier
groups, each introduced by ``;`` and holding exactly one ``relation, entity``
pair:

    <<PlayedTogether, Messi, Suarez, Neymar>>; PlayedInTeam, FC Barcelona

Tokens are trimmed of surrounding whitespace; interior whitespace is kept
(``Di Maria``).  The characters ``< > , ; #`` are reserved and may not appear
inside tokens; there is no escape mechanism.  Comparison is exact byte
equality, so vocabularies built from a file are deterministic.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

RESERVED_CHARS = frozenset("<>,;#")

_FORMAT_IDS = ("triple_tsv", "hyperedge_csv", "hyper_relational_statements")


class FactFormatError(Exception):
    """Base class for fact-format failures."""


class GrammarError(FactFormatError):
    """A line does not match the fact grammar."""

    def __init__(self, message: str, line_number: int = 1, column: int = 0):
        super().__init__(f"line {line_number}, column {column}: {message}")
        self.line_number = line_number
        self.column = column


class InvalidToken(FactFormatError):
    """A token contains a reserved delimiter character or is empty."""


class UnknownFormat(FactFormatError):
    """convert_external was asked for an unregistered format id."""


class RowShapeError(FactFormatError):
    """An external row has the wrong number of columns."""

    def __init__(self, message: str, line_number: int = 1):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class IoFailure(FactFormatError):
    """The underlying stream could not be read."""


@dataclass(frozen=True)
class QualifierPair:
    """A (relation, entity) refinement attached to a primary tuple."""

    relation: str
    entity: str


@dataclass(frozen=True)
class FactRecord:
    """One n-ary fact: a relation, its ordered primary entities, qualifiers."""

    relation: str
    primary_entities: tuple[str, ...]
    qualifiers: tuple[QualifierPair, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.primary_entities)

    def all_entities(self) -> Iterator[str]:
        """Primary entities in tuple order, then qualifier entities in order."""
        yield from self.primary_entities
        for pair in self.qualifiers:
            yield pair.entity

    def without_qualifiers(self) -> "FactRecord":
        return FactRecord(self.relation, self.primary_entities)


@dataclass(frozen=True)
class ParseDiagnostic:
    line_number: int
    severity: str  # "error" or "warning"
    message: str


def _check_token(token: str, kind: str) -> str:
    if not token:
        raise InvalidToken(f"empty {kind} token")
    bad = RESERVED_CHARS.intersection(token)
    if bad:
        raise InvalidToken(
            f"{kind} token {token!r} contains reserved character(s) {sorted(bad)}"
        )
    return token


def parse_fact_line(line: str, line_number: int = 1) -> FactRecord:
    """Parse one fact line into a :class:`FactRecord`.

    Raises :class:`GrammarError` (with line/column) on unbalanced ``<<``/``>>``
    markers, empty tokens, or qualifier groups that are not exactly a pair.
    """
    text = line.rstrip("\n")
    stripped = text.strip()
    if not stripped.startswith("<<"):
        raise GrammarError(
            "fact must start with '<<'", line_number, text.index(stripped[0]) if stripped else 0
        )
    open_at = text.index("<<")
    close_at = text.find(">>", open_at + 2)
    if close_at < 0:
        raise GrammarError("missing closing '>>'", line_number, len(text))
    if "<<" in text[open_at + 2 :]:
        raise GrammarError(
            "nested '<<' inside primary tuple", line_number, text.index("<<", open_at + 2)
        )

    head = text[open_at + 2 : close_at]
    head_tokens = [t.strip() for t in head.split(",")]
    if len(head_tokens) < 2:
        raise GrammarError(
            "primary tuple needs a relation and at least one entity", line_number, open_at + 2
        )
    for tok in head_tokens:
        if not tok:
            raise GrammarError("empty token in primary tuple", line_number, open_at + 2)
        if RESERVED_CHARS.intersection(tok):
            raise GrammarError(f"reserved character in token {tok!r}", line_number, open_at + 2)

    tail = text[close_at + 2 :].strip()
    qualifiers: list[QualifierPair] = []
    if tail:
        if not tail.startswith(";"):
            raise GrammarError(
                "qualifier groups must be introduced by ';'", line_number, close_at + 2
            )
        for group in tail[1:].split(";"):
            parts = [t.strip() for t in group.split(",")]
            if len(parts) != 2:
                raise GrammarError(
                    f"qualifier group must be exactly 'relation, entity', got {len(parts)} token(s)",
                    line_number,
                    close_at + 2,
                )
            if not all(parts):
                raise GrammarError("empty token in qualifier group", line_number, close_at + 2)
            for tok in parts:
                if RESERVED_CHARS.intersection(tok):
                    raise GrammarError(
                        f"reserved character in token {tok!r}", line_number, close_at + 2
                    )
            qualifiers.append(QualifierPair(parts[0], parts[1]))

    return FactRecord(head_tokens[0], tuple(head_tokens[1:]), tuple(qualifiers))


def serialize_fact(record: FactRecord) -> str:
    """Render the canonical single-line form; inverse of :func:`parse_fact_line`."""
    _check_token(record.relation, "relation")
    if not record.primary_entities:
        raise InvalidToken("fact needs at least one primary entity")
    for ent in record.primary_entities:
        _check_token(ent, "entity")
    head = ", ".join((record.relation,) + record.primary_entities)
    groups = []
    for pair in record.qualifiers:
        _check_token(pair.relation, "qualifier relation")
        _check_token(pair.entity, "qualifier entity")
        groups.append(f"; {pair.relation}, {pair.entity}")
    return f"<<{head}>>" + "".join(groups)


def parse_dataset(
    lines: Iterable[str],
) -> tuple[list[FactRecord], list[ParseDiagnostic]]:
    """Parse a line stream; malformed lines become error diagnostics.

    Blank lines and ``#`` comments are skipped.  Record order matches input
    order.  Never raises on malformed content; raises :class:`IoFailure` only
    when the stream itself cannot be read.
    """
    records: list[FactRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    lineno = 0
    try:
        for lineno, raw in enumerate(lines, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                records.append(parse_fact_line(raw, lineno))
            except (GrammarError, InvalidToken) as err:
                diagnostics.append(ParseDiagnostic(lineno, "error", str(err)))
    except (OSError, UnicodeDecodeError) as err:
        raise IoFailure(f"cannot read input after line {lineno}: {err}") from err
    return records, diagnostics


def load_dataset(path: str) -> tuple[list[FactRecord], list[ParseDiagnostic]]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return parse_dataset(handle)
    except OSError as err:
        raise IoFailure(f"cannot open {path}: {err}") from err


def save_dataset(records: Iterable[FactRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(serialize_fact(record) + "\n")


def _convert_triple_tsv(row: str, lineno: int) -> FactRecord:
    parts = [t.strip() for t in row.split("\t")]
    if len(parts) < 3:
        raise RowShapeError(f"triple row needs 3 tab-separated columns, got {len(parts)}", lineno)
    if len(parts) > 3:
        raise RowShapeError(f"triple row has {len(parts)} columns, expected 3", lineno)
    head, rel, tail = parts
    return FactRecord(rel, (head, tail))


def _convert_hyperedge_csv(row: str, lineno: int) -> FactRecord:
    parts = [t.strip() for t in row.split(",")]
    if len(parts) < 2:
        raise RowShapeError("hyperedge row needs a relation and at least one entity", lineno)
    return FactRecord(parts[0], tuple(parts[1:]))


def _convert_statements(row: str, lineno: int) -> FactRecord:
    parts = [t.strip() for t in row.split(",")]
    if len(parts) < 3:
        raise RowShapeError("statement row needs at least subject, relation, object", lineno)
    qual_tokens = parts[3:]
    if len(qual_tokens) % 2 != 0:
        raise RowShapeError(
            f"odd qualifier token count ({len(qual_tokens)}) in statement row", lineno
        )
    subject, relation, obj = parts[0], parts[1], parts[2]
    quals = tuple(
        QualifierPair(qual_tokens[i], qual_tokens[i + 1]) for i in range(0, len(qual_tokens), 2)
    )
    return FactRecord(relation, (subject, obj), quals)


_CONVERTERS = {
    "triple_tsv": _convert_triple_tsv,
    "hyperedge_csv": _convert_hyperedge_csv,
    "hyper_relational_statements": _convert_statements,
}


def convert_external(
    format_id: str,
    lines: Iterable[str],
    dedup: bool = False,
    lenient: bool = False,
) -> tuple[list[FactRecord], list[ParseDiagnostic]]:
    """Convert rows from a registered external format into fact records.

    With ``lenient`` a malformed row becomes a warning diagnostic and is
    skipped; otherwise the first bad row raises :class:`RowShapeError`.
    ``dedup`` drops exact repeats while keeping first-occurrence order.
    """
    if format_id not in _CONVERTERS:
        raise UnknownFormat(f"unknown format {format_id!r}; expected one of {_FORMAT_IDS}")
    converter = _CONVERTERS[format_id]
    records: list[FactRecord] = []
    diagnostics: list[ParseDiagnostic] = []
    seen: set[FactRecord] = set()
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            record = converter(raw.rstrip("\n"), lineno)
            for token in (record.relation, *record.all_entities()):
                _check_token(token, "converted")
            for pair in record.qualifiers:
                _check_token(pair.relation, "converted")
        except (RowShapeError, InvalidToken) as err:
            if not lenient:
                raise
            diagnostics.append(ParseDiagnostic(lineno, "warning", str(err)))
            continue
        if dedup:
            if record in seen:
                continue
            seen.add(record)
        records.append(record)
    return records, diagnostics


@dataclass(frozen=True)
class ValidationReport:
    """Summary statistics over a list of fact records."""

    fact_count: int
    entity_count: int
    relation_count: int
    arity_histogram: dict[int, int] = field(default_factory=dict)
    qualifier_ratio: float = 0.0
    duplicate_count: int = 0
    qualifier_only_relation_count: int = 0

    def to_dict(self) -> dict:
        return {
            "fact_count": self.fact_count,
            "entity_count": self.entity_count,
            "relation_count": self.relation_count,
            "arity_histogram": {str(k): v for k, v in sorted(self.arity_histogram.items())},
            "qualifier_ratio": self.qualifier_ratio,
            "duplicate_count": self.duplicate_count,
            "qualifier_only_relation_count": self.qualifier_only_relation_count,
        }

    def to_text(self) -> str:
        lines = [
            f"facts: {self.fact_count}",
            f"entities: {self.entity_count}",
            f"relations: {self.relation_count}",
            "arity_histogram: "
            + " ".join(f"{k}:{v}" for k, v in sorted(self.arity_histogram.items())),
            f"qualifier_ratio: {self.qualifier_ratio:.6g}",
            f"duplicates: {self.duplicate_count}",
            f"qualifier_only_relations: {self.qualifier_only_relation_count}",
        ]
        return "\n".join(lines)


def validate_dataset(records: list[FactRecord]) -> ValidationReport:
    """Report-only dataset statistics; duplicates are counted, never dropped."""
    entities: set[str] = set()
    edge_relations: set[str] = set()
    qual_relations: set[str] = set()
    histogram: Counter[int] = Counter()
    with_quals = 0
    occurrence: Counter[FactRecord] = Counter()
    for record in records:
        entities.update(record.all_entities())
        edge_relations.add(record.relation)
        qual_relations.update(pair.relation for pair in record.qualifiers)
        histogram[record.arity] += 1
        if record.qualifiers:
            with_quals += 1
        occurrence[record] += 1
    duplicates = sum(count - 1 for count in occurrence.values() if count > 1)
    relations = edge_relations | qual_relations
    return ValidationReport(
        fact_count=len(records),
        entity_count=len(entities),
        relation_count=len(relations),
        arity_histogram=dict(histogram),
        qualifier_ratio=(with_quals / len(records)) if records else 0.0,
        duplicate_count=duplicates,
        qualifier_only_relation_count=len(qual_relations - edge_relations),
    )
