"""Lexical stratification: frequency split, training-corpus overlap,
seen/unseen labels, and balanced per-cell sampling."""
from __future__ import annotations

import io
import re
from dataclasses import dataclass, field

import numpy as np

from .annotations import FrequencyTable
from .tokens import VowelToken

BAND_HIGH = "high"
BAND_LOW = "low"


@dataclass(frozen=True)
class StrataConfig:
    n_per_cell: int = 1000
    seed: int = 1
    split: str = "median_frequency"  # or "seen_unseen"

    def __post_init__(self):
        if self.n_per_cell < 1:
            raise ValueError("n_per_cell must be at least 1")
        if self.split not in ("median_frequency", "seen_unseen"):
            raise ValueError(f"unknown split {self.split!r}")


@dataclass
class OverlapReport:
    vocab_size: int
    training_vocab_size: int
    overlap_fraction: dict[str, float] = field(default_factory=dict)

    def to_text(self) -> str:
        out = io.StringIO()
        out.write("key\tvalue\n")
        out.write(f"vocab_size\t{self.vocab_size}\n")
        out.write(f"training_vocab_size\t{self.training_vocab_size}\n")
        for stratum in sorted(self.overlap_fraction):
            out.write(f"overlap[{stratum}]\t{self.overlap_fraction[stratum]!r}\n")
        return out.getvalue()


def split_by_frequency(words: set[str], freq: FrequencyTable) -> dict[str, str]:
    """Median split of a word set by descending frequency.

    The top half ranks high, the bottom half (plus the extra word when the
    count is odd) low; ties at the boundary break lexicographically, the
    earlier word going high. Words absent from the table count as zero.
    """
    if not words:
        raise ValueError("cannot split an empty word set")
    folded = sorted({w.lower() for w in words})
    ranked = sorted(folded, key=lambda w: (-freq.count(w), w))
    n_high = len(ranked) // 2
    bands = {w: BAND_HIGH for w in ranked[:n_high]}
    bands.update({w: BAND_LOW for w in ranked[n_high:]})
    return bands


_PUNCT = re.compile(r"[^\w']+", flags=re.UNICODE)
_EDGE_APOSTROPHES = re.compile(r"^'+|'+$")


def tokenize_transcript(text: str) -> list[str]:
    """Whitespace tokenization after case folding and punctuation stripping;
    word-internal apostrophes survive."""
    words = []
    for raw in _PUNCT.split(text.lower()):
        w = _EDGE_APOSTROPHES.sub("", raw)
        if w and any(ch.isalnum() for ch in w):
            words.append(w)
    return words


def training_vocabulary(transcripts: str) -> set[str]:
    """Vocabulary of a training-transcript corpus, one utterance per line.

    Lines in LJ Speech metadata style (``id|raw|normalized``) contribute the
    normalized column; plain lines contribute fully.
    """
    vocab: set[str] = set()
    found_text = False
    for line in transcripts.splitlines():
        if not line.strip():
            continue
        if "|" in line:
            line = line.split("|")[-1]
        tokens = tokenize_transcript(line)
        if tokens:
            found_text = True
            vocab.update(tokens)
    if not found_text:
        raise ValueError("training transcripts contain no tokenizable text")
    return vocab


def compute_overlap(word_sets: dict[str, set[str]], transcripts: str) -> OverlapReport:
    """Fraction of each stratum's words present in the training vocabulary."""
    vocab = training_vocabulary(transcripts)
    report = OverlapReport(
        vocab_size=len(set().union(*word_sets.values())) if word_sets else 0,
        training_vocab_size=len(vocab),
    )
    for stratum, words in word_sets.items():
        folded = {w.lower() for w in words}
        if not folded:
            report.overlap_fraction[stratum] = 0.0
            continue
        present = sum(1 for w in folded if w in vocab)
        report.overlap_fraction[stratum] = present / len(folded)
    return report


def label_seen_unseen(tokens: list[VowelToken], training_vocab: set[str]) -> list[VowelToken]:
    """Fill each token's ``seen`` flag by case-folded vocabulary membership."""
    if not training_vocab:
        raise ValueError("training vocabulary is empty")
    folded = {w.lower() for w in training_vocab}
    for tok in tokens:
        tok.seen = tok.word.lower() in folded
    return tokens


def label_frequency_bands(tokens: list[VowelToken], freq: FrequencyTable) -> list[VowelToken]:
    """Fill freq_band from a median split over the tokens' word types."""
    words = {tok.word for tok in tokens}
    bands = split_by_frequency(words, freq)
    for tok in tokens:
        tok.freq_band = bands[tok.word.lower()]
    return tokens


def token_stratum(token: VowelToken, split: str) -> str:
    if split == "seen_unseen":
        if token.seen is None:
            raise ValueError(f"token {token.token_id!r} has no seen label")
        return "seen" if token.seen else "unseen"
    if token.freq_band is None:
        raise ValueError(f"token {token.token_id!r} has no frequency band")
    return token.freq_band


class UnderfilledCell(ValueError):
    def __init__(self, cell: tuple[str, str, str], available: int, needed: int):
        self.cell = cell
        self.available = available
        super().__init__(
            f"cell (source={cell[0]}, stratum={cell[1]}, onset={cell[2]}) has "
            f"{available} tokens, need {needed}"
        )


def balanced_sample(
    tokens: list[VowelToken],
    cfg: StrataConfig,
    cells: list[tuple[str, str, str]] | None = None,
) -> tuple[list[VowelToken], dict[str, str]]:
    """Draw exactly n_per_cell tokens per (source, stratum, onset class) cell.

    Sampling is without replacement from a generator seeded by cfg.seed, so
    identical inputs and seed give identical samples. Returns the sampled
    tokens (cell-sorted, stable within cells) and a token_id -> cell label
    map. Raises UnderfilledCell naming any cell below n_per_cell.
    """
    pools: dict[tuple[str, str, str], list[VowelToken]] = {}
    for tok in tokens:
        key = (tok.source, token_stratum(tok, cfg.split), tok.onset_class.value)
        pools.setdefault(key, []).append(tok)
    if cells is None:
        cells = sorted(pools)
    rng = np.random.default_rng(cfg.seed)
    sampled: list[VowelToken] = []
    cell_of: dict[str, str] = {}
    for key in sorted(cells):
        pool = pools.get(tuple(key), [])
        if len(pool) < cfg.n_per_cell:
            raise UnderfilledCell(tuple(key), len(pool), cfg.n_per_cell)
        chosen_idx = rng.choice(len(pool), size=cfg.n_per_cell, replace=False)
        label = ":".join(key)
        for i in sorted(chosen_idx):
            sampled.append(pool[i])
            cell_of[pool[i].token_id] = label
    return sampled, cell_of
