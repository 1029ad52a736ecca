"""Grammar, serialization, conversion, and validation of the fact format."""

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hehr.fact_format import (
    FactRecord,
    GrammarError,
    InvalidToken,
    QualifierPair,
    RowShapeError,
    UnknownFormat,
    convert_external,
    parse_dataset,
    parse_fact_line,
    serialize_fact,
    validate_dataset,
)

FACT5 = "<<PlayedTogether, Messi, Suarez, Neymar>>; PlayedInTeam, FC Barcelona"
FACT6 = "<<PlayedTogether, Messi, Di Maria, Martinez>>; PlayedInTeam, Argentina"


class TestParseFactLine:
    def test_primary_tuple_with_qualifier(self):
        record = parse_fact_line(FACT5)
        assert record.relation == "PlayedTogether"
        assert record.primary_entities == ("Messi", "Suarez", "Neymar")
        assert record.qualifiers == (QualifierPair("PlayedInTeam", "FC Barcelona"),)

    def test_zero_qualifier_fact(self):
        record = parse_fact_line("<<BornIn, Messi, Argentina>>")
        assert record == FactRecord("BornIn", ("Messi", "Argentina"))

    def test_interior_whitespace_preserved(self):
        record = parse_fact_line(FACT6)
        assert record.primary_entities == ("Messi", "Di Maria", "Martinez")
        assert record.qualifiers[0].entity == "Argentina"

    def test_multiple_qualifier_groups(self):
        record = parse_fact_line("<<R, a, b>>; Q1, x; Q2, y")
        assert record.qualifiers == (QualifierPair("Q1", "x"), QualifierPair("Q2", "y"))

    def test_arity(self):
        assert parse_fact_line(FACT5).arity == 3
        assert parse_fact_line("<<R, only>>").arity == 1

    @pytest.mark.parametrize(
        "line",
        [
            "no markers at all",
            "<<unclosed, a, b",
            "<<R, a>> trailing junk",
            "<<R, a>>; lonetoken",
            "<<R, a>>; one, two, three",
            "<<R,, a>>",
            "<<R>>",
            "<<R, a<<b>>",
        ],
    )
    def test_grammar_errors(self, line):
        with pytest.raises(GrammarError):
            parse_fact_line(line)

    def test_error_carries_line_number(self):
        with pytest.raises(GrammarError) as exc:
            parse_fact_line("<<broken", line_number=42)
        assert exc.value.line_number == 42
        assert "line 42" in str(exc.value)


class TestSerializeFact:
    def test_zero_qualifier(self):
        record = FactRecord("BornIn", ("Messi", "Argentina"))
        assert serialize_fact(record) == "<<BornIn, Messi, Argentina>>"

    def test_with_qualifier(self):
        record = FactRecord(
            "PlayedTogether",
            ("Messi", "Suarez", "Neymar"),
            (QualifierPair("PlayedInTeam", "FC Barcelona"),),
        )
        assert serialize_fact(record) == FACT5

    def test_reserved_character_rejected(self):
        with pytest.raises(InvalidToken):
            serialize_fact(FactRecord("R", ("a,b",)))
        with pytest.raises(InvalidToken):
            serialize_fact(FactRecord("R", ("a",), (QualifierPair("Q", "x;y"),)))

    def test_empty_token_rejected(self):
        with pytest.raises(InvalidToken):
            serialize_fact(FactRecord("", ("a",)))


_token = st.text(
    alphabet=st.characters(
        blacklist_characters="<>,;#\n\r",
        blacklist_categories=("Cs", "Cc"),
    ),
    min_size=1,
    max_size=12,
).map(str.strip).filter(lambda t: len(t) > 0)

_record = st.builds(
    FactRecord,
    relation=_token,
    primary_entities=st.lists(_token, min_size=1, max_size=5).map(tuple),
    qualifiers=st.lists(
        st.builds(QualifierPair, relation=_token, entity=_token), max_size=3
    ).map(tuple),
)


class TestRoundTrip:
    @given(_record)
    @settings(max_examples=1000, deadline=None)
    def test_parse_inverts_serialize(self, record):
        """Round-trip identity, including entity and qualifier order."""
        assert parse_fact_line(serialize_fact(record)) == record

    @given(st.text(max_size=120))
    @settings(max_examples=500, deadline=None)
    def test_parser_never_panics(self, line):
        """Arbitrary input either parses or raises a structured error."""
        try:
            parse_fact_line(line)
        except (GrammarError, InvalidToken):
            pass


class TestParseDataset:
    def test_two_clean_facts(self):
        records, diags = parse_dataset([FACT5, FACT6])
        assert len(records) == 2
        assert diags == []

    def test_empty_stream(self):
        assert parse_dataset([]) == ([], [])

    def test_comments_and_blanks_skipped(self):
        records, diags = parse_dataset(["# header", "", FACT5, "   "])
        assert len(records) == 1 and not diags

    def test_malformed_line_reported_with_number(self):
        records, diags = parse_dataset([FACT5, "<<broken", FACT6])
        assert len(records) == 2
        assert len(diags) == 1
        assert diags[0].line_number == 2
        assert diags[0].severity == "error"

    def test_order_preserved(self):
        records, _ = parse_dataset([FACT6, FACT5])
        assert records[0].primary_entities[1] == "Di Maria"

    def test_duplicates_kept(self):
        records, _ = parse_dataset([FACT5, FACT5])
        assert len(records) == 2


class TestConvertExternal:
    def test_triple_tsv(self):
        records, _ = convert_external("triple_tsv", ["Messi\tBornIn\tArgentina"])
        assert records == [FactRecord("BornIn", ("Messi", "Argentina"))]

    def test_hyperedge_csv(self):
        records, _ = convert_external("hyperedge_csv", ["PlayedTogether,Messi,Suarez,Neymar"])
        assert records == [FactRecord("PlayedTogether", ("Messi", "Suarez", "Neymar"))]

    def test_statements_with_qualifiers(self):
        row = "Messi,PlayedTogether,Gerard Pique,InClub,FC Barcelona,Period,2008-21"
        records, _ = convert_external("hyper_relational_statements", [row])
        assert records == [
            FactRecord(
                "PlayedTogether",
                ("Messi", "Gerard Pique"),
                (QualifierPair("InClub", "FC Barcelona"), QualifierPair("Period", "2008-21")),
            )
        ]

    def test_unknown_format(self):
        with pytest.raises(UnknownFormat):
            convert_external("rdf_turtle", [])

    def test_odd_qualifier_count(self):
        with pytest.raises(RowShapeError):
            convert_external("hyper_relational_statements", ["s,r,o,qr1"])

    def test_short_triple_row(self):
        with pytest.raises(RowShapeError):
            convert_external("triple_tsv", ["only\ttwo"])

    def test_lenient_skips_bad_rows(self):
        records, diags = convert_external(
            "triple_tsv", ["a\tr\tb", "bad row", "c\tr\td"], lenient=True
        )
        assert len(records) == 2
        assert len(diags) == 1 and diags[0].severity == "warning"

    def test_dedup_flag(self):
        rows = ["a\tr\tb", "a\tr\tb", "c\tr\td"]
        records, _ = convert_external("triple_tsv", rows, dedup=True)
        assert len(records) == 2

    def test_losslessness_token_multiset(self):
        """Every token of the source row survives conversion + serialization."""
        rows = [
            "Messi,PlayedTogether,Gerard Pique,InClub,FC Barcelona,Period,2008-21",
            "s,r,o,q1,v1",
        ]
        records, _ = convert_external("hyper_relational_statements", rows)
        for row, record in zip(rows, records):
            src = sorted(t.strip() for t in row.split(","))
            out = sorted(
                [record.relation, *record.primary_entities]
                + [t for q in record.qualifiers for t in (q.relation, q.entity)]
            )
            assert src == out


class TestValidateDataset:
    def test_two_fact_example(self):
        records, _ = parse_dataset([FACT5, FACT6])
        report = validate_dataset(records)
        assert report.entity_count == 7
        assert report.relation_count == 2
        assert report.arity_histogram == {3: 2}
        assert report.qualifier_ratio == 1.0
        assert report.duplicate_count == 0

    def test_empty_input(self):
        report = validate_dataset([])
        assert report.fact_count == 0
        assert report.entity_count == 0
        assert report.relation_count == 0
        assert report.arity_histogram == {}
        assert report.qualifier_ratio == 0.0

    def test_qualifier_ratio_quarter(self):
        records = [
            FactRecord("R", ("a", "b")),
            FactRecord("R", ("a", "c")),
            FactRecord("R", ("b", "c")),
            FactRecord("R", ("c", "d"), (QualifierPair("Q", "x"),)),
        ]
        assert validate_dataset(records).qualifier_ratio == 0.25

    def test_duplicates_counted(self):
        record = FactRecord("R", ("a", "b"))
        report = validate_dataset([record, record, record])
        assert report.duplicate_count == 2

    def test_text_rendering_is_line_oriented(self):
        records, _ = parse_dataset([FACT5])
        text = validate_dataset(records).to_text()
        assert text.splitlines()[1] == "entities: 4"
