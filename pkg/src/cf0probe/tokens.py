"""Build vowel tokens: onset+vowel candidates, exclusion rules, time
normalization to 21 points, per-speaker z-scoring, and the long-format token
table consumed by the model engine.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .annotations import AnnotationDoc, Interval
from .pitch import PitchContour
from .segments import DEFAULT_INVENTORY, OnsetClass, SegmentInventory, VowelHeight

N_POINTS = 21
MIN_DURATION_S = 0.050
MAX_UNVOICED_FRACTION = 0.5
MAX_POINT_JUMP_SEMITONES = 8.0
TIME_PROPS = np.arange(N_POINTS) / (N_POINTS - 1)


class ExclusionReason(Enum):
    UNVOICED_MAJORITY = "UnvoicedMajority"
    TOO_SHORT = "TooShort"
    ALIGNMENT_SUSPECT = "AlignmentSuspect"
    NO_ONSET = "NoOnset"


@dataclass
class ExclusionReport:
    counts: dict[ExclusionReason, int] = field(
        default_factory=lambda: {r: 0 for r in ExclusionReason}
    )
    candidates: int = 0
    kept: int = 0

    def add(self, reason: ExclusionReason) -> None:
        self.counts[reason] += 1

    def merge(self, other: "ExclusionReport") -> None:
        for reason, count in other.counts.items():
            self.counts[reason] += count
        self.candidates += other.candidates
        self.kept += other.kept

    def validate(self) -> None:
        if sum(self.counts.values()) != self.candidates - self.kept:
            raise ValueError("exclusion counts do not reconcile with candidates/kept")

    def to_text(self) -> str:
        out = io.StringIO()
        out.write("reason\tcount\n")
        out.write(f"candidates\t{self.candidates}\n")
        out.write(f"kept\t{self.kept}\n")
        for reason in ExclusionReason:
            out.write(f"{reason.value}\t{self.counts[reason]}\n")
        return out.getvalue()


@dataclass(frozen=True)
class Candidate:
    consonant: Interval
    vowel: Interval
    word: str
    speaker: str
    source: str = ""
    onset_class: OnsetClass = OnsetClass.OTHER
    vowel_height: VowelHeight | None = None


@dataclass
class VowelToken:
    token_id: str
    source: str
    speaker: str
    word: str
    consonant: str
    onset_class: OnsetClass
    vowel: str
    vowel_height: VowelHeight
    duration: float
    f0_norm: np.ndarray  # 21 Hz values
    zf0: np.ndarray | None = None
    seen: bool | None = None
    freq_band: str | None = None


def find_candidates(
    doc: AnnotationDoc,
    phones_tier: str = "phones",
    words_tier: str = "words",
    speaker: str = "",
    source: str = "",
    inventory: SegmentInventory = DEFAULT_INVENTORY,
    word_initial_only: bool = False,
) -> tuple[list[Candidate], int]:
    """Locate onset-consonant + vowel pairs within words.

    Every target vowel whose immediately preceding phone is an inventory
    consonant inside the same word yields a candidate; with
    ``word_initial_only`` the consonant must open its word. Returns the
    candidates plus the count of target vowels with no qualifying onset.
    """
    phones = doc.tier(phones_tier)
    words = doc.tier(words_tier)

    word_spans = [
        (iv.start, iv.end, iv.label) for iv in words.intervals if iv.label.strip()
    ]

    def word_at(interval: Interval) -> str | None:
        mid = 0.5 * (interval.start + interval.end)
        for start, end, label in word_spans:
            if start - 1e-9 <= interval.start and interval.end <= end + 1e-9 and start <= mid <= end:
                return label
        return None

    candidates: list[Candidate] = []
    no_onset = 0
    intervals = phones.intervals
    for i, vowel_iv in enumerate(intervals):
        vinfo = inventory.classify_vowel(vowel_iv.label)
        if not vinfo.is_vowel:
            continue
        vowel_word = word_at(vowel_iv)
        if vowel_word is None:
            no_onset += 1
            continue
        onset_iv = intervals[i - 1] if i > 0 else None
        if onset_iv is not None and not onset_iv.label.strip():
            onset_iv = None
        onset_class = (
            inventory.classify_onset(onset_iv.label) if onset_iv is not None else OnsetClass.OTHER
        )
        if (
            onset_iv is None
            or onset_class is OnsetClass.OTHER
            or word_at(onset_iv) != vowel_word
        ):
            no_onset += 1
            continue
        if word_initial_only:
            word_start = next(s for s, e, w in word_spans if w == vowel_word and s <= onset_iv.start + 1e-9 <= e)
            if abs(onset_iv.start - word_start) > 1e-6:
                no_onset += 1
                continue
        candidates.append(
            Candidate(
                onset_iv, vowel_iv, vowel_word, speaker, source,
                onset_class, vinfo.height,
            )
        )
    return candidates, no_onset


def time_normalize(
    frame_times: np.ndarray,
    frame_f0: np.ndarray,
    frame_voiced: np.ndarray,
    start: float,
    end: float,
) -> np.ndarray:
    """Sample F0 at 21 equidistant proportions of [start, end].

    Voiced frames are linearly interpolated; interior unvoiced gaps fall on
    the line between their voiced neighbours, and leading/trailing gaps take
    the nearest voiced value.
    """
    voiced_t = np.asarray(frame_times)[frame_voiced]
    voiced_f0 = np.asarray(frame_f0)[frame_voiced]
    if voiced_t.size == 0:
        raise ValueError("no voiced frames to normalize")
    targets = start + TIME_PROPS * (end - start)
    return np.interp(targets, voiced_t, voiced_f0)


def apply_exclusions(
    candidate: Candidate, contour: PitchContour, token_id: str = ""
) -> VowelToken | ExclusionReason:
    """Keep or reject one candidate against its pitch contour.

    Rejections: duration below 50 ms; no pitch frames covering the vowel;
    more than half of the in-vowel frames unvoiced; an adjacent
    normalized-point jump above 8 semitones (suspect alignment).
    """
    vowel = candidate.vowel
    duration = vowel.end - vowel.start
    if duration < MIN_DURATION_S:
        return ExclusionReason.TOO_SHORT
    inside = (contour.times >= vowel.start - 1e-9) & (contour.times <= vowel.end + 1e-9)
    n_inside = int(inside.sum())
    if n_inside == 0:
        return ExclusionReason.ALIGNMENT_SUSPECT
    unvoiced_fraction = 1.0 - float(contour.voiced[inside].sum()) / n_inside
    if unvoiced_fraction > MAX_UNVOICED_FRACTION:
        return ExclusionReason.UNVOICED_MAJORITY
    f0_norm = time_normalize(
        contour.times[inside], contour.f0[inside], contour.voiced[inside],
        vowel.start, vowel.end,
    )
    jumps = 12.0 * np.abs(np.log2(f0_norm[1:] / f0_norm[:-1]))
    if np.any(jumps > MAX_POINT_JUMP_SEMITONES):
        return ExclusionReason.ALIGNMENT_SUSPECT
    assert candidate.vowel_height is not None
    return VowelToken(
        token_id=token_id,
        source=candidate.source,
        speaker=candidate.speaker,
        word=candidate.word.lower(),
        consonant=candidate.consonant.label,
        onset_class=candidate.onset_class,
        vowel=vowel.label,
        vowel_height=candidate.vowel_height,
        duration=duration,
        f0_norm=f0_norm,
    )


def zscore_by_speaker(tokens: list[VowelToken]) -> list[VowelToken]:
    """Fill zf0 by z-scoring Hz values against each speaker's pooled
    mean and population standard deviation (pooled over all of that
    speaker's normalized points)."""
    by_speaker: dict[str, list[VowelToken]] = {}
    for tok in tokens:
        by_speaker.setdefault(tok.speaker, []).append(tok)
    for speaker, group in by_speaker.items():
        if len(group) < 2:
            raise ValueError(f"speaker {speaker!r} has {len(group)} token(s); need at least 2 to z-score")
        pooled = np.concatenate([t.f0_norm for t in group])
        mean = pooled.mean()
        sd = pooled.std()  # population formula
        if sd <= 0:
            raise ValueError(f"speaker {speaker!r} has zero pooled F0 variance; cannot z-score")
        for tok in group:
            tok.zf0 = (tok.f0_norm - mean) / sd
    return tokens


# ---------------------------------------------------------------------------
# Long-format token table (one row per token x time point)

TABLE_COLUMNS = (
    "token_id", "source", "speaker", "word", "consonant", "onset_class",
    "vowel", "height", "point_index", "time_prop", "f0_hz", "zf0",
    "seen", "freq_band",
)


def _bool_str(value: bool | None) -> str:
    if value is None:
        return ""
    return "true" if value else "false"


def write_token_table(tokens: list[VowelToken], extra: dict[str, dict[str, str]] | None = None) -> str:
    """Serialize tokens to tab-separated long format.

    ``extra`` optionally maps column name -> (token_id -> value) for
    appended per-token columns such as the sampling cell.
    """
    extra = extra or {}
    header = list(TABLE_COLUMNS) + sorted(extra)
    out = io.StringIO()
    out.write("\t".join(header) + "\n")
    for tok in tokens:
        zf0 = tok.zf0 if tok.zf0 is not None else [None] * N_POINTS
        base_tail = [_bool_str(tok.seen), tok.freq_band or ""]
        extra_vals = [extra[c].get(tok.token_id, "") for c in sorted(extra)]
        for j in range(N_POINTS):
            row = [
                tok.token_id, tok.source, tok.speaker, tok.word,
                tok.consonant, tok.onset_class.value, tok.vowel,
                tok.vowel_height.value, str(j), repr(float(TIME_PROPS[j])),
                repr(float(tok.f0_norm[j])),
                repr(float(zf0[j])) if zf0[j] is not None else "",
                *base_tail, *extra_vals,
            ]
            out.write("\t".join(row) + "\n")
    return out.getvalue()


def parse_token_table(text: str) -> tuple[list[VowelToken], dict[str, dict[str, str]]]:
    """Read tokens back from long format; inverse of write_token_table."""
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty token table")
    header = lines[0].split("\t")
    missing = [c for c in TABLE_COLUMNS if c not in header]
    if missing:
        raise ValueError(f"token table is missing columns {missing}")
    idx = {c: header.index(c) for c in header}
    extra_cols = [c for c in header if c not in TABLE_COLUMNS]

    tokens: list[VowelToken] = []
    extra: dict[str, dict[str, str]] = {c: {} for c in extra_cols}
    current: VowelToken | None = None
    onset_by_value = {c.value: c for c in OnsetClass}
    height_by_value = {h.value: h for h in VowelHeight}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != len(header):
            raise ValueError(f"token table line {lineno}: expected {len(header)} fields")
        point = int(fields[idx["point_index"]])
        token_id = fields[idx["token_id"]]
        if point == 0:
            current = VowelToken(
                token_id=token_id,
                source=fields[idx["source"]],
                speaker=fields[idx["speaker"]],
                word=fields[idx["word"]],
                consonant=fields[idx["consonant"]],
                onset_class=onset_by_value[fields[idx["onset_class"]]],
                vowel=fields[idx["vowel"]],
                vowel_height=height_by_value[fields[idx["height"]]],
                duration=0.0,
                f0_norm=np.full(N_POINTS, np.nan),
                zf0=np.full(N_POINTS, np.nan) if fields[idx["zf0"]] else None,
                seen={"": None, "true": True, "false": False}[fields[idx["seen"]]],
                freq_band=fields[idx["freq_band"]] or None,
            )
            tokens.append(current)
            for c in extra_cols:
                if fields[idx[c]]:
                    extra[c][token_id] = fields[idx[c]]
        if current is None or current.token_id != token_id:
            raise ValueError(f"token table line {lineno}: rows of token {token_id!r} are not contiguous")
        current.f0_norm[point] = float(fields[idx["f0_hz"]])
        if current.zf0 is not None and fields[idx["zf0"]]:
            current.zf0[point] = float(fields[idx["zf0"]])
    return tokens, extra


def long_columns(tokens: list[VowelToken], cell: dict[str, str] | None = None) -> dict[str, np.ndarray]:
    """Column arrays in long format for the model engine.

    Adds the derived ``time`` (= time proportion) and ``start`` (first row of
    each token's trajectory) columns the model spec references.
    """
    n = len(tokens) * N_POINTS
    cols: dict[str, list] = {c: [] for c in TABLE_COLUMNS}
    cols["start"] = []
    if cell is not None:
        cols["cell"] = []
    for tok in tokens:
        zf0 = tok.zf0
        for j in range(N_POINTS):
            cols["token_id"].append(tok.token_id)
            cols["source"].append(tok.source)
            cols["speaker"].append(tok.speaker)
            cols["word"].append(tok.word)
            cols["consonant"].append(tok.consonant)
            cols["onset_class"].append(tok.onset_class.value)
            cols["vowel"].append(tok.vowel)
            cols["height"].append(tok.vowel_height.value)
            cols["point_index"].append(j)
            cols["time_prop"].append(float(TIME_PROPS[j]))
            cols["f0_hz"].append(float(tok.f0_norm[j]))
            cols["zf0"].append(float(zf0[j]) if zf0 is not None else np.nan)
            cols["seen"].append(_bool_str(tok.seen))
            cols["freq_band"].append(tok.freq_band or "")
            cols["start"].append(j == 0)
            if cell is not None:
                cols["cell"].append(cell.get(tok.token_id, ""))
    out: dict[str, np.ndarray] = {}
    for name, values in cols.items():
        if name in ("point_index",):
            out[name] = np.asarray(values, dtype=np.int64)
        elif name in ("time_prop", "f0_hz", "zf0"):
            out[name] = np.asarray(values, dtype=np.float64)
        elif name == "start":
            out[name] = np.asarray(values, dtype=bool)
        else:
            out[name] = np.asarray(values, dtype=object)
    out["time"] = out["time_prop"]
    assert len(out["token_id"]) == n
    return out
