"""TextGrid, frequency list, and pronunciation dictionary parsing."""
from __future__ import annotations

import numpy as np
import pytest

from cf0probe.annotations import (
    AnnotationDoc,
    FrequencyTable,
    Interval,
    IntervalTier,
    Point,
    PointTier,
    TextGridParseError,
    parse_frequency_list,
    parse_pron_dict,
    parse_textgrid,
    serialize_textgrid,
)

LONG_ONE_TIER = """File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 0.9
tiers? <exists>
size = 1
item []:
    item [1]:
        class = "IntervalTier"
        name = "phones"
        xmin = 0
        xmax = 0.9
        intervals: size = 2
        intervals [1]:
            xmin = 0
            xmax = 0.5
            text = "m"
        intervals [2]:
            xmin = 0.5
            xmax = 0.9
            text = "i"
"""

SHORT_ONE_TIER = """File type = "ooTextFile"
Object class = "TextGrid"

0
0.9
<exists>
1
"IntervalTier"
"phones"
0
0.9
2
0
0.5
"m"
0.5
0.9
"i"
"""


def test_parse_long_one_tier():
    doc = parse_textgrid(LONG_ONE_TIER)
    assert doc.xmin == 0.0 and doc.xmax == 0.9
    assert len(doc.tiers) == 1
    tier = doc.tiers[0]
    assert tier.name == "phones"
    assert [iv.label for iv in tier.intervals] == ["m", "i"]
    assert tier.intervals[0].end == pytest.approx(0.5)


def test_parse_short_equals_long():
    assert parse_textgrid(SHORT_ONE_TIER) == parse_textgrid(LONG_ONE_TIER)


def test_round_trip_identity():
    doc = parse_textgrid(LONG_ONE_TIER)
    assert parse_textgrid(serialize_textgrid(doc)) == doc


def test_overlapping_intervals_error_names_interval():
    bad = LONG_ONE_TIER.replace('xmin = 0.5\n            xmax = 0.9',
                                'xmin = 0.3\n            xmax = 0.9')
    with pytest.raises(TextGridParseError) as excinfo:
        parse_textgrid(bad)
    assert "0.3" in str(excinfo.value)
    assert excinfo.value.line is not None


def test_truncated_file_reports_line():
    truncated = "\n".join(LONG_ONE_TIER.splitlines()[:14])
    with pytest.raises(TextGridParseError) as excinfo:
        parse_textgrid(truncated)
    assert "end of file" in str(excinfo.value)


def test_malformed_header():
    with pytest.raises(TextGridParseError):
        parse_textgrid('File type = "ooBinaryFile"\nObject class = "TextGrid"\n')


def test_serialize_empty_doc_round_trips():
    doc = AnnotationDoc(0.0, 0.0, ())
    text = serialize_textgrid(doc)
    assert parse_textgrid(text) == doc


def test_quote_labels_round_trip():
    doc = AnnotationDoc(
        0.0, 1.0,
        (IntervalTier("words", (
            Interval(0.0, 0.4, 'say "hi"'),
            Interval(0.4, 1.0, ""),
        )),),
    )
    text = serialize_textgrid(doc)
    # Praat escapes embedded quotes by doubling them
    assert '"say ""hi"""' in text
    assert parse_textgrid(text) == doc


def test_utf16_with_bom():
    data = LONG_ONE_TIER.encode("utf-16")  # adds the BOM
    assert parse_textgrid(data) == parse_textgrid(LONG_ONE_TIER)


def test_point_tier_parsed_and_preserved():
    doc = AnnotationDoc(
        0.0, 1.0,
        (IntervalTier("phones", (Interval(0.0, 1.0, "a"),)),),
        (PointTier("clicks", (Point(0.25, "x"), Point(0.75, "y"))),),
    )
    text = serialize_textgrid(doc)
    reparsed = parse_textgrid(text)
    assert reparsed == doc
    assert reparsed.point_tiers[0].points[1].time == pytest.approx(0.75)


def test_serialize_refuses_invalid_doc():
    doc = AnnotationDoc(
        0.0, 1.0,
        (IntervalTier("phones", (Interval(0.5, 0.2, "bad"),)),),
    )
    with pytest.raises(ValueError):
        serialize_textgrid(doc)


def test_random_docs_round_trip():
    rng = np.random.default_rng(101)
    labels = ["", "a", "b", 'x "q"', "ɑː", "tʃ"]
    for _ in range(25):
        n_tiers = int(rng.integers(0, 4))
        tiers = []
        total = float(rng.uniform(0.5, 3.0))
        for t in range(n_tiers):
            cuts = np.sort(rng.uniform(0.0, total, size=int(rng.integers(1, 6))))
            bounds = np.concatenate([[0.0], cuts, [total]])
            intervals = tuple(
                Interval(float(a), float(b), labels[int(rng.integers(len(labels)))])
                for a, b in zip(bounds[:-1], bounds[1:])
                if b - a > 1e-4
            )
            # rebuild contiguity after the duration filter
            fixed = []
            prev = 0.0
            for iv in intervals:
                fixed.append(Interval(prev, iv.end, iv.label))
                prev = iv.end
            if fixed:
                fixed[-1] = Interval(fixed[-1].start, total, fixed[-1].label)
                tiers.append(IntervalTier(f"tier{t}", tuple(fixed)))
        doc = AnnotationDoc(0.0, total, tuple(tiers))
        assert parse_textgrid(serialize_textgrid(doc)) == doc


def test_contiguity_within_nanoseconds():
    doc = parse_textgrid(LONG_ONE_TIER)
    for tier in doc.tiers:
        for prev, cur in zip(tier.intervals, tier.intervals[1:]):
            assert abs(cur.start - prev.end) <= 1e-9


# ---------------------------------------------------------------------------
# Frequency lists


def test_frequency_basic_rows():
    table = parse_frequency_list(
        "Word\tFREQcount\nthe\t1501908\nsprocket\t12\n", "Word", "FREQcount"
    )
    assert table.count("the") == 1501908
    assert table.count("sprocket") == 12
    assert len(table) == 2


def test_frequency_case_fold_merge():
    table = parse_frequency_list("Word\tN\nThe\t5\nthe\t3\n", "Word", "N")
    assert table.count("the") == 8
    assert len(table) == 1


def test_frequency_subtlex_style_header():
    # SUBTLEX-US ships extra columns; counts come from the declared column
    text = (
        "Word\tFREQcount\tCDcount\tFREQlow\tSUBTLWF\n"
        "a\t1041179\t8382\t976941\t20415.27\n"
        "abandon\t413\t348\t413\t8.10\n"
        "zygote\t5\t5\t2\t0.10\n"
    )
    table = parse_frequency_list(text, "Word", "FREQcount")
    # hand-checked against the rows above
    assert table.count("a") == 1041179
    assert table.count("abandon") == 413
    assert table.count("zygote") == 5


def test_frequency_comma_delimited():
    table = parse_frequency_list("Word,N\nfoo,2\nbar,7\n", "Word", "N")
    assert table.count("bar") == 7


def test_frequency_missing_column():
    with pytest.raises(ValueError) as excinfo:
        parse_frequency_list("Word\tN\nfoo\t2\n", "Word", "Count")
    assert "Count" in str(excinfo.value)


def test_frequency_non_numeric_count_names_row():
    with pytest.raises(ValueError) as excinfo:
        parse_frequency_list("Word\tN\nfoo\t2\nbar\tmany\n", "Word", "N")
    assert "row 3" in str(excinfo.value)


def test_frequency_permutation_invariant():
    rows = ["foo\t2", "bar\t7", "Baz\t1", "baz\t4"]
    t1 = parse_frequency_list("Word\tN\n" + "\n".join(rows), "Word", "N")
    t2 = parse_frequency_list("Word\tN\n" + "\n".join(reversed(rows)), "Word", "N")
    assert t1 == t2


# ---------------------------------------------------------------------------
# Pronunciation dictionaries


def test_pron_dict_single_entry():
    pd = parse_pron_dict("cat\tkʰ æ t\n")
    assert pd.variants("cat") == (("kʰ", "æ", "t"),)
    assert not pd.unknown_phones


def test_pron_dict_variants_accumulate():
    pd = parse_pron_dict("either\ti ð ə\neither\tɑ ð ə\n")
    assert len(pd.variants("either")) == 2


def test_pron_dict_unknown_phone_flagged():
    pd = parse_pron_dict("qoph\tq ɑ f\n")
    assert pd.variants("qoph") == (("q", "ɑ", "f"),)
    assert "q" in pd.unknown_phones


def test_pron_dict_empty_phones_error_names_line():
    with pytest.raises(ValueError) as excinfo:
        parse_pron_dict("cat\tk æ t\ndog\t\n")
    assert "line 2" in str(excinfo.value)


def test_pron_dict_probability_fields_skipped():
    pd = parse_pron_dict("cat\t0.95\t0.1\tk æ t\n")
    assert pd.variants("cat") == (("k", "æ", "t"),)
