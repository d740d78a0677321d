"""Synthetic data generation for self-verification.

Two generators share one specification:

- a token-table generator producing trajectories directly (baseline declining
  contour + per-onset-class effect decaying linearly to zero + word and
  speaker random curves + AR(1) noise), used by the null and power
  simulations;
- a miniature audio corpus generator (WAV + TextGrid + dictionary +
  frequency list + ready-to-run config) that exercises the full pipeline from
  pitch extraction onward.

Both are fully deterministic per seed.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gam.basis import SplineBasis
from .segments import DEFAULT_INVENTORY, OnsetClass, VowelHeight, classify_vowel
from .tokens import N_POINTS, TIME_PROPS, VowelToken

ONSET_ORDER = (
    OnsetClass.VOICED_OBSTRUENT,
    OnsetClass.VOICELESS_OBSTRUENT,
    OnsetClass.SONORANT,
)
_HEIGHT_OFFSET = {VowelHeight.HIGH: 0.15, VowelHeight.MID: 0.0, VowelHeight.LOW: -0.15}
_BASELINE_START, _BASELINE_END = 0.4, -0.4
_HZ_CENTER, _HZ_PER_Z = 200.0, 30.0


@dataclass(frozen=True)
class SynthSpec:
    n_per_cell: int = 300
    offsets: dict[str, float] = field(
        default_factory=lambda: {c.value: 0.0 for c in ONSET_ORDER}
    )
    decays: dict[str, float] = field(
        default_factory=lambda: {c.value: 0.5 for c in ONSET_ORDER}
    )
    noise_sd: float = 0.35
    rho: float = 0.6
    word_sd: float = 0.06
    speaker_sd: float = 0.0
    n_words: int = 16  # word types per onset class per band
    n_speakers: int = 1
    seed: int = 1
    sources: tuple[tuple[str, float], ...] = (("synthetic", 1.0),)
    band: str = "high"

    def __post_init__(self):
        if self.n_per_cell < 1:
            raise ValueError("n_per_cell must be positive")
        if self.noise_sd <= 0:
            raise ValueError("noise sd must be positive")
        for cls, d in self.decays.items():
            if not (0.0 < d <= 1.0):
                raise ValueError(f"decay for {cls} must lie in (0, 1], got {d}")
        if not (-1.0 < self.rho < 1.0):
            raise ValueError("|rho| must be below 1")


def _effect(offset: float, decay: float) -> np.ndarray:
    return offset * np.clip(1.0 - TIME_PROPS / decay, 0.0, None)


def _smooth_curve(rng: np.random.Generator, basis_values: np.ndarray, sd: float) -> np.ndarray:
    if sd <= 0:
        return np.zeros(N_POINTS)
    return basis_values @ rng.normal(scale=sd, size=basis_values.shape[1])


def _ar1_noise(rng: np.random.Generator, sd: float, rho: float) -> np.ndarray:
    eps = np.empty(N_POINTS)
    eps[0] = rng.normal(scale=sd)
    innov_sd = sd * np.sqrt(1.0 - rho * rho)
    for t in range(1, N_POINTS):
        eps[t] = rho * eps[t - 1] + rng.normal(scale=innov_sd)
    return eps


def generate_tokens(spec: SynthSpec) -> list[VowelToken]:
    """Generate the synthetic token list for one band.

    Words are nested within onset class (a word keeps its onset) and shared
    across sources, mirroring corpora where every system renders the same
    items. Token order and all draws are fixed by the seed.
    """
    rng = np.random.default_rng(spec.seed)
    basis_values = SplineBasis(5).design(TIME_PROPS)
    vowels = list(DEFAULT_INVENTORY.vowel_labels)

    # word inventory per onset class, with per-word fixed attributes
    words: dict[str, list[dict]] = {}
    for onset in ONSET_ORDER:
        consonants = DEFAULT_INVENTORY.consonants_of_class(onset)
        entries = []
        for w in range(spec.n_words):
            entries.append({
                "word": f"{spec.band}_{onset.value.split('_')[0]}_{w:03d}",
                "consonant": consonants[int(rng.integers(len(consonants)))],
                "vowel": vowels[int(rng.integers(len(vowels)))],
                "curve": _smooth_curve(rng, basis_values, spec.word_sd),
            })
        words[onset.value] = entries

    speaker_curves = [
        _smooth_curve(rng, basis_values, spec.speaker_sd) for _ in range(spec.n_speakers)
    ]

    baseline = _BASELINE_START + (_BASELINE_END - _BASELINE_START) * TIME_PROPS
    tokens: list[VowelToken] = []
    for source, effect_scale in spec.sources:
        for onset in ONSET_ORDER:
            shape = _effect(
                spec.offsets.get(onset.value, 0.0), spec.decays.get(onset.value, 0.5)
            )
            for i in range(spec.n_per_cell):
                entry = words[onset.value][int(rng.integers(spec.n_words))]
                spk = int(rng.integers(spec.n_speakers))
                z = (
                    baseline
                    + _HEIGHT_OFFSET[classify_vowel(entry["vowel"]).height]
                    + effect_scale * shape
                    + entry["curve"]
                    + speaker_curves[spk]
                    + _ar1_noise(rng, spec.noise_sd, spec.rho)
                )
                token = VowelToken(
                    token_id=f"{source}-{spec.band}-{onset.value}-{i:05d}",
                    source=source,
                    speaker=f"spk{spk}",
                    word=entry["word"],
                    consonant=entry["consonant"],
                    onset_class=onset,
                    vowel=entry["vowel"],
                    vowel_height=classify_vowel(entry["vowel"]).height,
                    duration=0.12,
                    f0_norm=_HZ_CENTER + _HZ_PER_Z * z,
                    zf0=z,
                    seen=spec.band == "seen" if spec.band in ("seen", "unseen") else None,
                    freq_band=spec.band if spec.band in ("high", "low") else None,
                )
                tokens.append(token)
    return tokens


def load_synth_spec(path: str | Path) -> tuple[SynthSpec, str]:
    """Read a synth spec file (INI). Returns (spec, kind) with kind 'table'
    or 'corpus'."""
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise FileNotFoundError(f"cannot read synth spec {path}")
    sec = parser["synth"] if parser.has_section("synth") else parser["DEFAULT"]
    kind = sec.get("kind", "table")
    offsets = {c.value: 0.0 for c in ONSET_ORDER}
    decays = {c.value: 0.5 for c in ONSET_ORDER}
    if parser.has_section("offsets"):
        for key, value in parser["offsets"].items():
            offsets[key] = float(value)
    if parser.has_section("decays"):
        for key, value in parser["decays"].items():
            decays[key] = float(value)
    sources: list[tuple[str, float]] = []
    if parser.has_section("sources"):
        for name, scale in parser["sources"].items():
            sources.append((name, float(scale)))
    if not sources:
        sources = [("synthetic", 1.0)]
    spec = SynthSpec(
        n_per_cell=sec.getint("n_per_cell", 300),
        offsets=offsets,
        decays=decays,
        noise_sd=sec.getfloat("noise_sd", 0.35),
        rho=sec.getfloat("rho", 0.6),
        word_sd=sec.getfloat("word_sd", 0.25),
        speaker_sd=sec.getfloat("speaker_sd", 0.2),
        n_words=sec.getint("n_words", 12),
        n_speakers=sec.getint("n_speakers", 3),
        seed=sec.getint("seed", 1),
        sources=tuple(sources),
        band=sec.get("band", "low"),
    )
    return spec, kind


# ---------------------------------------------------------------------------
# Miniature audio corpus (WAV + TextGrid) for end-to-end pipeline runs


_ASCII_WORD = {  # readable word spellings for the mini corpus
    OnsetClass.VOICED_OBSTRUENT: ("ba", "do", "gu", "zee", "vo", "za"),
    OnsetClass.VOICELESS_OBSTRUENT: ("pa", "to", "ku", "see", "fo", "sha"),
    OnsetClass.SONORANT: ("ma", "no", "lu", "mee", "wo", "ja"),
}
_IPA_OF_WORD = {
    "ba": ("b", "ɑ"), "do": ("d", "ɔ"), "gu": ("g", "u"), "zee": ("z", "i"),
    "vo": ("v", "ɔ"), "za": ("z", "æ"),
    "pa": ("p", "ɑ"), "to": ("t", "ɔ"), "ku": ("k", "u"), "see": ("s", "i"),
    "fo": ("f", "ɔ"), "sha": ("ʃ", "æ"),
    "ma": ("m", "ɑ"), "no": ("n", "ɔ"), "lu": ("l", "u"), "mee": ("m", "i"),
    "wo": ("w", "ɔ"), "ja": ("j", "æ"),
}


def _harmonic_tone(f0_curve: np.ndarray, sample_rate: float, n_harmonics: int = 8) -> np.ndarray:
    phase = 2.0 * np.pi * np.cumsum(f0_curve) / sample_rate
    wave = np.zeros_like(phase)
    for h in range(1, n_harmonics + 1):
        wave += np.sin(h * phase) / h
    return wave / np.abs(wave).max()


def synth_wave_corpus(
    spec: SynthSpec,
    outdir: str | Path,
    files_per_source: int = 10,
    words_per_file: int = 6,
    sample_rate: int = 16000,
) -> Path:
    """Write a miniature corpus: WAVs, TextGrids, dictionary, frequency list,
    training transcripts, and a ready config.ini. Returns the config path.

    Sources share word sets; odd-ranked words get high frequency counts so
    the median split lands half of each onset class in each band. Vowels
    carry harmonic tones whose F0 encodes a declining contour plus a
    voiceless-onset rise scaled by each source's effect multiplier.
    """
    from .annotations import AnnotationDoc, Interval, IntervalTier, serialize_textgrid

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    words = []
    for onset in ONSET_ORDER:
        for w in _ASCII_WORD[onset]:
            words.append((w, onset))
    # frequency list: alternate words into high/low counts within each class
    freq_rows = []
    for rank, (w, _) in enumerate(words):
        count = 5000 - 100 * rank if rank % 2 == 0 else 40 - rank
        freq_rows.append((w, max(count, 1)))
    (out / "frequency.tsv").write_text(
        "Word\tFREQcount\n" + "".join(f"{w}\t{c}\n" for w, c in freq_rows),
        encoding="utf-8",
    )
    (out / "dictionary.txt").write_text(
        "".join(f"{w}\t{c} {v}\n" for w, (c, v) in
                ((w, _IPA_OF_WORD[w]) for w, _ in words)),
        encoding="utf-8",
    )
    # high-count words are "in training"
    training = [w for w, c in freq_rows if c > 100]
    (out / "training.txt").write_text(
        "".join(f"utt{i:03d}|{w} {w}|{w} {w}\n" for i, w in enumerate(training)),
        encoding="utf-8",
    )

    speaker_base = [200.0 * (1.0 + 0.12 * (s - (spec.n_speakers - 1) / 2.0))
                    for s in range(spec.n_speakers)]

    for source, effect_scale in spec.sources:
        wav_dir = out / source / "wav"
        tg_dir = out / source / "textgrid"
        wav_dir.mkdir(parents=True, exist_ok=True)
        tg_dir.mkdir(parents=True, exist_ok=True)
        for f in range(files_per_source):
            spk = f % spec.n_speakers
            base_hz = speaker_base[spk]
            chosen = [words[int(rng.integers(len(words)))] for _ in range(words_per_file)]
            t = 0.25
            phone_ivs: list[Interval] = [Interval(0.0, t, "")]
            word_ivs: list[Interval] = [Interval(0.0, t, "")]
            segments: list[tuple[float, float, str, OnsetClass | None, float]] = []
            for w, onset in chosen:
                c_label, v_label = _IPA_OF_WORD[w]
                c_dur = 0.08
                v_dur = 0.14 + 0.04 * float(rng.random())
                phone_ivs.append(Interval(t, t + c_dur, c_label))
                segments.append((t, t + c_dur, "cons", onset, base_hz))
                phone_ivs.append(Interval(t + c_dur, t + c_dur + v_dur, v_label))
                segments.append((t + c_dur, t + c_dur + v_dur, "vowel", onset,
                                 base_hz))
                word_ivs.append(Interval(t, t + c_dur + v_dur, w))
                t += c_dur + v_dur
                phone_ivs.append(Interval(t, t + 0.12, ""))
                word_ivs.append(Interval(t, t + 0.12, ""))
                t += 0.12
            total = t + 0.13
            phone_ivs.append(Interval(t, total, ""))
            word_ivs.append(Interval(t, total, ""))

            n = int(round(total * sample_rate))
            samples = 0.002 * rng.standard_normal(n)
            times = np.arange(n) / sample_rate
            for seg_start, seg_end, seg_kind, onset, hz in segments:
                i0, i1 = int(seg_start * sample_rate), int(seg_end * sample_rate)
                seg_t = times[i0:i1] - seg_start
                dur = seg_end - seg_start
                if seg_kind == "vowel":
                    prop = seg_t / dur
                    f0 = hz * (1.0 - 0.08 * prop)
                    if onset is OnsetClass.VOICELESS_OBSTRUENT:
                        f0 = f0 + effect_scale * 30.0 * np.clip(1.0 - prop / 0.5, 0.0, None)
                    tone = _harmonic_tone(f0, sample_rate)
                    samples[i0:i1] += 0.5 * tone * np.hanning(i1 - i0) ** 0.25
                elif onset is OnsetClass.SONORANT:
                    samples[i0:i1] += 0.25 * np.sin(2 * np.pi * hz * seg_t)
                elif onset is OnsetClass.VOICED_OBSTRUENT:
                    samples[i0:i1] += 0.12 * np.sin(2 * np.pi * hz * 0.9 * seg_t)
                else:
                    samples[i0:i1] += 0.08 * rng.standard_normal(i1 - i0)

            stem = f"spk{spk}_{source}_{f:03d}"
            from .pitch import write_wav

            write_wav(wav_dir / f"{stem}.wav", samples, sample_rate)
            doc = AnnotationDoc(
                0.0, total,
                (IntervalTier("phones", tuple(phone_ivs)),
                 IntervalTier("words", tuple(word_ivs))),
            )
            (tg_dir / f"{stem}.TextGrid").write_text(
                serialize_textgrid(doc), encoding="utf-8"
            )

    config = configparser.ConfigParser()
    config["run"] = {
        "mode": "multi_speaker_z",
        "split": "median_frequency",
        "output_dir": str(out / "output"),
        "n_per_cell": "3",
        "seed": str(spec.seed),
        "workers": "1",
    }
    config["pitch"] = {
        "floor": "75", "ceiling": "600", "time_step": "0.01",
        "voicing_threshold": "0.45", "window_factor": "3",
    }
    config["paths"] = {
        "dictionary": str(out / "dictionary.txt"),
        "frequency_list": str(out / "frequency.tsv"),
        "word_column": "Word",
        "count_column": "FREQcount",
        "training_transcripts": str(out / "training.txt"),
    }
    for source, _ in spec.sources:
        config[f"source.{source}"] = {
            "audio_dir": str(out / source / "wav"),
            "textgrid_dir": str(out / source / "textgrid"),
            "speaker_rule": "filename_prefix:_",
        }
    config_path = out / "config.ini"
    with open(config_path, "w", encoding="utf-8") as fh:
        config.write(fh)
    return config_path
