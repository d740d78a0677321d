"""Corpus annotation inputs: Praat TextGrids, frequency lists, pronunciation dictionaries.

TextGrids are accepted in both the long ("verbose") and short syntax and are
always written back in long syntax. Parsed documents are validated: interval
tiers must be time-ordered and contiguous (sub-millisecond aligner jitter is
snapped, anything larger is an error), and every tier span must match the
document span within 1 ms.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

# Aligner output jitters below these; beyond them the file is malformed.
CONTIGUITY_TOLERANCE = 1e-6
SPAN_TOLERANCE = 1e-3


class TextGridParseError(ValueError):
    """Raised for malformed TextGrid input; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Interval:
    start: float
    end: float
    label: str


@dataclass(frozen=True)
class Point:
    time: float
    label: str


@dataclass(frozen=True)
class IntervalTier:
    name: str
    intervals: tuple[Interval, ...]

    @property
    def xmin(self) -> float:
        return self.intervals[0].start if self.intervals else 0.0

    @property
    def xmax(self) -> float:
        return self.intervals[-1].end if self.intervals else 0.0


@dataclass(frozen=True)
class PointTier:
    name: str
    points: tuple[Point, ...]


@dataclass(frozen=True)
class AnnotationDoc:
    xmin: float
    xmax: float
    tiers: tuple[IntervalTier, ...]
    point_tiers: tuple[PointTier, ...] = ()

    def tier(self, name: str) -> IntervalTier:
        for t in self.tiers:
            if t.name == name:
                return t
        raise KeyError(f"no interval tier named {name!r}")

    def validate(self) -> None:
        if self.xmin > self.xmax:
            raise ValueError(f"document span inverted: {self.xmin} > {self.xmax}")
        for t in self.tiers:
            prev_end = None
            for iv in t.intervals:
                if iv.start >= iv.end:
                    raise ValueError(
                        f"tier {t.name!r}: degenerate interval "
                        f"[{iv.start}, {iv.end}] {iv.label!r}"
                    )
                if prev_end is not None and abs(iv.start - prev_end) > CONTIGUITY_TOLERANCE:
                    raise ValueError(
                        f"tier {t.name!r}: interval starting at {iv.start} "
                        f"not contiguous with previous end {prev_end}"
                    )
                prev_end = iv.end
            if t.intervals:
                if abs(t.intervals[0].start - self.xmin) > SPAN_TOLERANCE or abs(
                    t.intervals[-1].end - self.xmax
                ) > SPAN_TOLERANCE:
                    raise ValueError(
                        f"tier {t.name!r} spans [{t.intervals[0].start}, "
                        f"{t.intervals[-1].end}], document spans "
                        f"[{self.xmin}, {self.xmax}]"
                    )


# ---------------------------------------------------------------------------
# TextGrid parsing


class _TokenStream:
    """Sequence of (value, line) tokens shared by the long and short readers.

    Long-syntax decoration (``key = value``, ``item [1]:``, ``intervals:``)
    is stripped so that both syntaxes reduce to the same stream of numbers
    and quoted strings.
    """

    _QUOTED = re.compile(r'"((?:[^"]|"")*)"')
    _BARE = re.compile(r"[^\s\[\]=:]+")

    _INDEX = re.compile(r"\[\s*\d*\s*\]")

    def __init__(self, text: str):
        self.tokens: list[tuple[str, int]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            pos = 0
            while pos < len(line):
                ch = line[pos]
                if ch == "[":
                    # drop "item [3]:"-style indices (never inside quotes)
                    m = self._INDEX.match(line, pos)
                    if m is not None:
                        pos = m.end()
                        continue
                if ch.isspace() or ch in "[]=:":
                    pos += 1
                    continue
                if ch == '"':
                    m = self._QUOTED.match(line, pos)
                    if m is None:
                        raise TextGridParseError("unterminated quoted string", lineno)
                    self.tokens.append(('"' + m.group(1), lineno))
                    pos = m.end()
                    continue
                m = self._BARE.match(line, pos)
                self.tokens.append((m.group(0), lineno))
                pos = m.end()
        self.pos = 0

    def _next(self, what: str) -> tuple[str, int]:
        # Skip long-syntax keywords; anything left is a number, a quoted
        # string, or the bare <exists> flag.
        keywords = {
            "File", "type", "Object", "class", "xmin", "xmax", "tiers?",
            "size", "item", "intervals", "points", "text", "name", "number",
            "mark", "time",
        }
        while self.pos < len(self.tokens):
            tok, line = self.tokens[self.pos]
            self.pos += 1
            if tok in keywords:
                continue
            return tok, line
        last_line = self.tokens[-1][1] if self.tokens else 1
        raise TextGridParseError(f"unexpected end of file while reading {what}", last_line)

    def number(self, what: str) -> tuple[float, int]:
        tok, line = self._next(what)
        if tok.startswith('"'):
            raise TextGridParseError(f"expected number for {what}, got string {tok[1:]!r}", line)
        try:
            return float(tok), line
        except ValueError:
            raise TextGridParseError(f"expected number for {what}, got {tok!r}", line) from None

    def integer(self, what: str) -> tuple[int, int]:
        value, line = self.number(what)
        if value != int(value):
            raise TextGridParseError(f"expected integer for {what}, got {value}", line)
        return int(value), line

    def string(self, what: str) -> tuple[str, int]:
        tok, line = self._next(what)
        if not tok.startswith('"'):
            raise TextGridParseError(f"expected string for {what}, got {tok!r}", line)
        return tok[1:].replace('""', '"'), line

    def flag(self) -> tuple[str, int]:
        return self._next("tiers flag")


def decode_textgrid_bytes(data: bytes) -> str:
    """Decode TextGrid bytes: UTF-8, or UTF-16 with a byte-order mark."""
    if data.startswith(b"\xff\xfe") or data.startswith(b"\xfe\xff"):
        return data.decode("utf-16")
    return data.decode("utf-8-sig")


def parse_textgrid(text: str | bytes) -> AnnotationDoc:
    """Parse long- or short-syntax TextGrid text into an AnnotationDoc.

    Raises TextGridParseError (with line number) for malformed headers,
    non-monotone or overlapping interval times, and truncated files.
    """
    if isinstance(text, bytes):
        text = decode_textgrid_bytes(text)
    stream = _TokenStream(text)

    ftype, line = stream.string("file type")
    if ftype != "ooTextFile":
        raise TextGridParseError(f"not a Praat text file (File type {ftype!r})", line)
    oclass, line = stream.string("object class")
    if oclass != "TextGrid":
        raise TextGridParseError(f"not a TextGrid (Object class {oclass!r})", line)

    xmin, _ = stream.number("document xmin")
    xmax, line = stream.number("document xmax")
    if xmin > xmax:
        raise TextGridParseError(f"document xmin {xmin} exceeds xmax {xmax}", line)
    flag, _ = stream.flag()
    if flag != "<exists>":
        raise TextGridParseError(f"expected <exists> tier flag, got {flag!r}", line)
    n_tiers, _ = stream.integer("tier count")

    interval_tiers: list[IntervalTier] = []
    point_tiers: list[PointTier] = []
    for _ in range(n_tiers):
        tclass, tline = stream.string("tier class")
        name, _ = stream.string("tier name")
        t_xmin, _ = stream.number("tier xmin")
        t_xmax, _ = stream.number("tier xmax")
        count, _ = stream.integer("tier size")
        if tclass == "IntervalTier":
            intervals: list[Interval] = []
            prev_end: float | None = None
            for _ in range(count):
                ivmin, l1 = stream.number("interval xmin")
                ivmax, _ = stream.number("interval xmax")
                label, _ = stream.string("interval text")
                if ivmin >= ivmax:
                    raise TextGridParseError(
                        f"tier {name!r}: interval [{ivmin}, {ivmax}] {label!r} "
                        f"has non-increasing times", l1,
                    )
                if prev_end is not None:
                    if ivmin < prev_end - CONTIGUITY_TOLERANCE:
                        raise TextGridParseError(
                            f"tier {name!r}: interval [{ivmin}, {ivmax}] {label!r} "
                            f"starts before previous interval ends ({prev_end})", l1,
                        )
                    if ivmin > prev_end + SPAN_TOLERANCE:
                        raise TextGridParseError(
                            f"tier {name!r}: gap between {prev_end} and interval "
                            f"[{ivmin}, {ivmax}] {label!r}", l1,
                        )
                    ivmin = prev_end  # snap sub-tolerance jitter
                prev_end = ivmax
                intervals.append(Interval(ivmin, ivmax, label))
            if intervals:
                lo, hi = intervals[0].start, intervals[-1].end
                if abs(lo - t_xmin) > SPAN_TOLERANCE or abs(hi - t_xmax) > SPAN_TOLERANCE:
                    raise TextGridParseError(
                        f"tier {name!r} declares span [{t_xmin}, {t_xmax}] but its "
                        f"intervals span [{lo}, {hi}]", tline,
                    )
                if abs(lo - xmin) > SPAN_TOLERANCE or abs(hi - xmax) > SPAN_TOLERANCE:
                    raise TextGridParseError(
                        f"tier {name!r} span [{lo}, {hi}] does not match document "
                        f"span [{xmin}, {xmax}]", tline,
                    )
            interval_tiers.append(IntervalTier(name, tuple(intervals)))
        elif tclass == "TextTier":
            points: list[Point] = []
            for _ in range(count):
                t, l1 = stream.number("point time")
                label, _ = stream.string("point mark")
                if points and t < points[-1].time:
                    raise TextGridParseError(
                        f"tier {name!r}: point at {t} before previous point", l1,
                    )
                points.append(Point(t, label))
            point_tiers.append(PointTier(name, tuple(points)))
        else:
            raise TextGridParseError(f"unknown tier class {tclass!r}", tline)

    doc = AnnotationDoc(xmin, xmax, tuple(interval_tiers), tuple(point_tiers))
    doc.validate()
    return doc


def read_textgrid(path: str | Path) -> AnnotationDoc:
    return parse_textgrid(Path(path).read_bytes())


def _q(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def _num(x: float) -> str:
    return repr(float(x))


def serialize_textgrid(doc: AnnotationDoc) -> str:
    """Serialize to long-syntax TextGrid text.

    Refuses documents violating the AnnotationDoc invariants. The output
    re-parses to a structurally identical document.
    """
    doc.validate()
    out = io.StringIO()
    w = out.write
    w('File type = "ooTextFile"\n')
    w('Object class = "TextGrid"\n\n')
    w(f"xmin = {_num(doc.xmin)}\n")
    w(f"xmax = {_num(doc.xmax)}\n")
    total = len(doc.tiers) + len(doc.point_tiers)
    if total == 0:
        w("tiers? <exists>\n")
        w("size = 0\n")
        w("item []:\n")
        return out.getvalue()
    w("tiers? <exists>\n")
    w(f"size = {total}\n")
    w("item []:\n")
    idx = 0
    for tier in doc.tiers:
        idx += 1
        w(f"    item [{idx}]:\n")
        w('        class = "IntervalTier"\n')
        w(f"        name = {_q(tier.name)}\n")
        w(f"        xmin = {_num(tier.intervals[0].start if tier.intervals else doc.xmin)}\n")
        w(f"        xmax = {_num(tier.intervals[-1].end if tier.intervals else doc.xmax)}\n")
        w(f"        intervals: size = {len(tier.intervals)}\n")
        for i, iv in enumerate(tier.intervals, start=1):
            w(f"        intervals [{i}]:\n")
            w(f"            xmin = {_num(iv.start)}\n")
            w(f"            xmax = {_num(iv.end)}\n")
            w(f"            text = {_q(iv.label)}\n")
    for tier in doc.point_tiers:
        idx += 1
        w(f"    item [{idx}]:\n")
        w('        class = "TextTier"\n')
        w(f"        name = {_q(tier.name)}\n")
        w(f"        xmin = {_num(doc.xmin)}\n")
        w(f"        xmax = {_num(doc.xmax)}\n")
        w(f"        points: size = {len(tier.points)}\n")
        for i, pt in enumerate(tier.points, start=1):
            w(f"        points [{i}]:\n")
            w(f"            number = {_num(pt.time)}\n")
            w(f"            mark = {_q(pt.label)}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Frequency lists


@dataclass(frozen=True)
class FrequencyTable:
    """Word frequency counts, case-folded; duplicate spellings sum."""

    counts: dict[str, int] = field(default_factory=dict)

    def count(self, word: str) -> int:
        return self.counts.get(word.lower(), 0)

    def __len__(self) -> int:
        return len(self.counts)


def parse_frequency_list(text: str, word_column: str, count_column: str) -> FrequencyTable:
    """Parse a delimited (tab or comma) frequency list with a header row.

    Counts must be non-negative integers; duplicate words after lowercasing
    have their counts summed. Errors name the offending row.
    """
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty frequency list")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delimiter)
    header = next(reader)
    header = [h.strip() for h in header]
    for col in (word_column, count_column):
        if col not in header:
            raise ValueError(f"frequency list is missing column {col!r} (header: {header})")
    wi, ci = header.index(word_column), header.index(count_column)
    counts: dict[str, int] = {}
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) <= max(wi, ci):
            raise ValueError(f"frequency list row {rowno}: too few columns")
        word = row[wi].strip().lower()
        raw = row[ci].strip()
        try:
            value = float(raw)
        except ValueError:
            raise ValueError(f"frequency list row {rowno}: non-numeric count {raw!r}") from None
        if value < 0 or value != int(value):
            raise ValueError(f"frequency list row {rowno}: count must be a non-negative integer, got {raw!r}")
        counts[word] = counts.get(word, 0) + int(value)
    return FrequencyTable(counts)


def read_frequency_list(path: str | Path, word_column: str, count_column: str) -> FrequencyTable:
    return parse_frequency_list(Path(path).read_text(encoding="utf-8-sig"), word_column, count_column)


# ---------------------------------------------------------------------------
# Pronunciation dictionaries


@dataclass(frozen=True)
class PronDict:
    """Word pronunciations; multiple lines per word accumulate as variants.

    ``unknown_phones`` collects labels that fall outside the segment
    inventory; entries containing them are retained.
    """

    entries: dict[str, tuple[tuple[str, ...], ...]]
    unknown_phones: frozenset[str] = frozenset()

    def variants(self, word: str) -> tuple[tuple[str, ...], ...]:
        return self.entries.get(word.lower(), ())


def parse_pron_dict(text: str, inventory=None) -> PronDict:
    """Parse an MFA-style pronunciation dictionary.

    Lines are ``word<TAB>phone phone ...``; numeric fields between the word
    and the phones (pronunciation probabilities) are ignored. A missing phone
    sequence is an error naming the line.
    """
    from .segments import DEFAULT_INVENTORY

    inv = inventory if inventory is not None else DEFAULT_INVENTORY
    entries: dict[str, list[tuple[str, ...]]] = {}
    unknown: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" in line:
            fields = line.split("\t")
            word = fields[0].strip()
            phones = fields[-1].split()
        else:
            parts = line.split()
            word, phones = parts[0], parts[1:]
        # drop leading probability fields that survived the split
        while phones and _is_number(phones[0]) and not inv.is_known(phones[0]):
            phones = phones[1:]
        if not word:
            raise ValueError(f"pronunciation dictionary line {lineno}: missing word")
        if not phones:
            raise ValueError(f"pronunciation dictionary line {lineno}: empty phone sequence for {word!r}")
        for p in phones:
            if not inv.is_known(p):
                unknown.add(p)
        entries.setdefault(word.lower(), []).append(tuple(phones))
    return PronDict({w: tuple(v) for w, v in entries.items()}, frozenset(unknown))


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def read_pron_dict(path: str | Path, inventory=None) -> PronDict:
    return parse_pron_dict(Path(path).read_text(encoding="utf-8-sig"), inventory)
