"""End-to-end corpus runs: discovery, pitch, tokens, strata, probe, reports.

A run is driven by one INI config (see load_run_config). Sources are
processed independently; a failing source is reported and skipped while the
others complete (exit code 2). Output files carry no timestamps, so a rerun
with the same config and seed reproduces the output tree byte for byte.
"""
from __future__ import annotations

import configparser
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .annotations import read_frequency_list, read_pron_dict, read_textgrid
from .figures import render_figures
from .gam.design import spec_to_text
from .pitch import (
    PitchConfig,
    PitchContour,
    extract_f0,
    read_contour,
    read_wav,
    speaker_range,
    TooFewVoicedFrames,
)
from .probe import (
    MODE_MULTI_SPEAKER_Z,
    MODE_SINGLE_SPEAKER_HZ,
    ProbeMode,
    ProbeReport,
    build_probe_spec,
    differences_table,
    metadata_table,
    run_probe,
    smooths_table,
)
from .strata import (
    StrataConfig,
    compute_overlap,
    label_frequency_bands,
    label_seen_unseen,
    split_by_frequency,
    training_vocabulary,
    balanced_sample,
)
from .tokens import (
    ExclusionReason,
    ExclusionReport,
    VowelToken,
    apply_exclusions,
    find_candidates,
    long_columns,
    write_token_table,
    zscore_by_speaker,
)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    name: str
    textgrid_dir: Path
    audio_dir: Path | None = None
    contour_dir: Path | None = None
    speaker_rule: str = "filename_stem"

    def speaker_of(self, stem: str) -> str:
        rule = self.speaker_rule
        if rule == "filename_stem":
            return stem
        if rule.startswith("filename_prefix:"):
            sep = rule.split(":", 1)[1] or "_"
            return stem.split(sep)[0]
        if rule.startswith("constant:"):
            return rule.split(":", 1)[1]
        raise ConfigError(f"unknown speaker rule {rule!r}")


@dataclass(frozen=True)
class RunConfig:
    sources: tuple[SourceConfig, ...]
    frequency_list: Path
    word_column: str
    count_column: str
    output_dir: Path
    dictionary: Path | None = None
    training_transcripts: Path | None = None
    mode_kind: str = MODE_MULTI_SPEAKER_Z
    split: str = "median_frequency"
    strata: StrataConfig = field(default_factory=StrataConfig)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    phones_tier: str = "phones"
    words_tier: str = "words"
    word_initial_only: bool = False
    workers: int = 1


def load_run_config(path: str | Path, seed_override: int | None = None,
                    word_initial_only: bool | None = None,
                    workers_override: int | None = None) -> RunConfig:
    parser = configparser.ConfigParser()
    if not parser.read(str(path)):
        raise ConfigError(f"cannot read config file {path}")
    if not parser.has_section("run"):
        raise ConfigError("config needs a [run] section")
    run = parser["run"]
    paths = parser["paths"] if parser.has_section("paths") else {}

    sources = []
    for section in parser.sections():
        if not section.startswith("source."):
            continue
        sec = parser[section]
        name = section.split(".", 1)[1]
        if "textgrid_dir" not in sec:
            raise ConfigError(f"[{section}] needs textgrid_dir")
        sources.append(SourceConfig(
            name=name,
            textgrid_dir=Path(sec["textgrid_dir"]),
            audio_dir=Path(sec["audio_dir"]) if "audio_dir" in sec else None,
            contour_dir=Path(sec["contour_dir"]) if "contour_dir" in sec else None,
            speaker_rule=sec.get("speaker_rule", "filename_stem"),
        ))
    if not sources:
        raise ConfigError("config defines no [source.<name>] sections")
    names = [s.name for s in sources]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate source names: {names}")
    if "frequency_list" not in paths:
        raise ConfigError("[paths] needs frequency_list")

    pitch_sec = parser["pitch"] if parser.has_section("pitch") else {}
    pitch = PitchConfig(
        floor=float(pitch_sec.get("floor", 75.0)),
        ceiling=float(pitch_sec.get("ceiling", 600.0)),
        time_step=float(pitch_sec.get("time_step", 0.01)),
        voicing_threshold=float(pitch_sec.get("voicing_threshold", 0.45)),
        window_factor=float(pitch_sec.get("window_factor", 3.0)),
    )
    seed = seed_override if seed_override is not None else int(run.get("seed", 1))
    strata = StrataConfig(
        n_per_cell=int(run.get("n_per_cell", 1000)),
        seed=seed,
        split=run.get("split", "median_frequency"),
    )
    wio = run.getboolean("word_initial_only", fallback=False)
    if word_initial_only is not None:
        wio = word_initial_only
    workers = int(run.get("workers", 1))
    if workers_override is not None:
        workers = workers_override
    return RunConfig(
        sources=tuple(sources),
        frequency_list=Path(paths["frequency_list"]),
        word_column=paths.get("word_column", "Word"),
        count_column=paths.get("count_column", "FREQcount"),
        output_dir=Path(run.get("output_dir", "probe_output")),
        dictionary=Path(paths["dictionary"]) if "dictionary" in paths else None,
        training_transcripts=(
            Path(paths["training_transcripts"]) if "training_transcripts" in paths else None
        ),
        mode_kind=run.get("mode", MODE_MULTI_SPEAKER_Z),
        split=run.get("split", "median_frequency"),
        strata=strata,
        pitch=pitch,
        phones_tier=run.get("phones_tier", "phones"),
        words_tier=run.get("words_tier", "words"),
        word_initial_only=wio,
        workers=max(1, workers),
    )


@dataclass
class SourceResult:
    name: str
    tokens: list[VowelToken] = field(default_factory=list)
    exclusions: ExclusionReport = field(default_factory=ExclusionReport)
    warnings: list[str] = field(default_factory=list)
    error: str | None = None


def _discover_files(source: SourceConfig) -> list[tuple[str, Path, Path]]:
    """(stem, textgrid, audio-or-contour) triples, sorted by stem."""
    if not source.textgrid_dir.is_dir():
        raise FileNotFoundError(f"textgrid directory not found: {source.textgrid_dir}")
    data_dir = source.audio_dir if source.audio_dir is not None else source.contour_dir
    if data_dir is None:
        raise ConfigError(f"source {source.name!r} needs audio_dir or contour_dir")
    if not data_dir.is_dir():
        raise FileNotFoundError(f"data directory not found: {data_dir}")
    by_stem: dict[str, Path] = {}
    for p in sorted(data_dir.iterdir()):
        if p.is_file():
            by_stem.setdefault(p.stem, p)
    triples = []
    for tg in sorted(source.textgrid_dir.iterdir()):
        if tg.suffix.lower() != ".textgrid":
            continue
        data = by_stem.get(tg.stem)
        if data is None:
            continue
        triples.append((tg.stem, tg, data))
    if not triples:
        raise FileNotFoundError(
            f"source {source.name!r}: no TextGrid/data pairs found under "
            f"{source.textgrid_dir} and {data_dir}"
        )
    return triples


def _source_contours(
    source: SourceConfig, triples, cfg: RunConfig
) -> tuple[dict[str, PitchContour], list[str]]:
    """Pitch contour per stem, via import or (two-pass) extraction."""
    warnings: list[str] = []
    contours: dict[str, PitchContour] = {}
    if source.contour_dir is not None:
        for stem, _, data in triples:
            contours[stem] = read_contour(data)
        return contours, warnings

    audio: dict[str, tuple[np.ndarray, float]] = {}
    for stem, _, wav in triples:
        audio[stem] = read_wav(wav)
    if cfg.mode_kind == MODE_SINGLE_SPEAKER_HZ:
        # deliberately no speaker adaptation in the single-speaker setting
        for stem, (samples, sr) in audio.items():
            contours[stem] = extract_f0(samples, sr, cfg.pitch)
        return contours, warnings

    by_speaker: dict[str, list[str]] = {}
    for stem, _, _ in triples:
        by_speaker.setdefault(source.speaker_of(stem), []).append(stem)
    for speaker, stems in sorted(by_speaker.items()):
        first = {stem: extract_f0(*audio[stem], cfg.pitch) for stem in stems}
        pitch_cfg = cfg.pitch
        try:
            rng = speaker_range(list(first.values()), speaker)
            pitch_cfg = PitchConfig(
                floor=rng.floor, ceiling=rng.ceiling,
                time_step=cfg.pitch.time_step,
                voicing_threshold=cfg.pitch.voicing_threshold,
                window_factor=cfg.pitch.window_factor,
            )
        except TooFewVoicedFrames as exc:
            warnings.append(str(exc))
            contours.update(first)
            continue
        for stem in stems:
            contours[stem] = extract_f0(*audio[stem], pitch_cfg)
    return contours, warnings


def process_source(source: SourceConfig, cfg: RunConfig) -> SourceResult:
    result = SourceResult(source.name)
    try:
        triples = _discover_files(source)
        contours, warnings = _source_contours(source, triples, cfg)
        result.warnings.extend(warnings)
        counter = 0
        for stem, tg_path, _ in triples:
            doc = read_textgrid(tg_path)
            speaker = source.speaker_of(stem)
            candidates, no_onset = find_candidates(
                doc, cfg.phones_tier, cfg.words_tier, speaker, source.name,
                word_initial_only=cfg.word_initial_only,
            )
            result.exclusions.candidates += len(candidates) + no_onset
            result.exclusions.counts[ExclusionReason.NO_ONSET] += no_onset
            contour = contours[stem]
            for cand in candidates:
                token_id = f"{source.name}/{stem}/{counter:05d}"
                outcome = apply_exclusions(cand, contour, token_id)
                if isinstance(outcome, ExclusionReason):
                    result.exclusions.add(outcome)
                else:
                    result.tokens.append(outcome)
                    result.exclusions.kept += 1
                counter += 1
        if cfg.mode_kind == MODE_MULTI_SPEAKER_Z:
            by_speaker: dict[str, int] = {}
            for tok in result.tokens:
                by_speaker[tok.speaker] = by_speaker.get(tok.speaker, 0) + 1
            thin = {s for s, n in by_speaker.items() if n < 2}
            if thin:
                result.warnings.append(
                    f"dropping speakers with fewer than 2 tokens: {sorted(thin)}"
                )
                dropped = sum(1 for t in result.tokens if t.speaker in thin)
                result.tokens = [t for t in result.tokens if t.speaker not in thin]
                result.exclusions.kept -= dropped
                result.exclusions.counts[ExclusionReason.ALIGNMENT_SUSPECT] += dropped
            zscore_by_speaker(result.tokens)
    except Exception as exc:  # noqa: BLE001 - isolate the source
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_probe_outputs(report: ProbeReport, outdir: Path, mode: ProbeMode) -> None:
    _write(outdir / "model_spec.txt", spec_to_text(build_probe_spec(mode)))
    for name in sorted(report.sources):
        probe = report.sources[name]
        safe = name.replace(":", "_").replace("/", "_")
        _write(outdir / f"{safe}_smooths.tsv", smooths_table(probe))
        _write(outdir / f"{safe}_differences.tsv", differences_table(probe))
        _write(outdir / f"{safe}_model.tsv", metadata_table(probe))
    if report.failures:
        lines = ["source\terror"]
        lines += [f"{name}\t{msg}" for name, msg in sorted(report.failures.items())]
        _write(outdir / "failures.tsv", "\n".join(lines) + "\n")
    if report.sources:
        render_figures(report, outdir / "figures")


def run(cfg: RunConfig, log=print) -> int:
    """Execute the full pipeline; returns the process exit code."""
    try:
        freq = read_frequency_list(cfg.frequency_list, cfg.word_column, cfg.count_column)
        if cfg.dictionary is not None:
            pron = read_pron_dict(cfg.dictionary)
            if pron.unknown_phones:
                log(f"note: dictionary contains {len(pron.unknown_phones)} "
                    f"phone labels outside the inventory")
        transcripts = (
            cfg.training_transcripts.read_text(encoding="utf-8-sig")
            if cfg.training_transcripts is not None else None
        )
    except Exception as exc:  # noqa: BLE001
        log(f"fatal: {exc}")
        return EXIT_FATAL

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda s: process_source(s, cfg), cfg.sources))
    else:
        results = [process_source(s, cfg) for s in cfg.sources]

    failed = [r for r in results if r.error]
    good = [r for r in results if not r.error]
    for r in failed:
        log(f"source {r.name} failed: {r.error}")
    if not good:
        log("fatal: every source failed")
        return EXIT_FATAL

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    tokens: list[VowelToken] = []
    exclusions = ExclusionReport()
    for r in good:
        tokens.extend(r.tokens)
        exclusions.merge(r.exclusions)
        for w in r.warnings:
            log(f"[{r.name}] {w}")
    if not tokens:
        log("fatal: no tokens survived exclusion")
        return EXIT_FATAL

    label_frequency_bands(tokens, freq)
    if transcripts is not None:
        vocab = training_vocabulary(transcripts)
        label_seen_unseen(tokens, vocab)
        words_by_band: dict[str, set[str]] = {}
        for tok in tokens:
            words_by_band.setdefault(tok.freq_band, set()).add(tok.word)
        overlap = compute_overlap(words_by_band, transcripts)
        _write(out / "overlap.tsv", overlap.to_text())
    elif cfg.split == "seen_unseen":
        log("fatal: split = seen_unseen requires training_transcripts")
        return EXIT_FATAL

    exclusions.validate()
    _write(out / "exclusions.tsv", exclusions.to_text())

    try:
        sampled, cell_of = balanced_sample(tokens, cfg.strata)
    except Exception as exc:  # noqa: BLE001
        log(f"fatal: sampling failed: {exc}")
        return EXIT_FATAL
    _write(out / "tokens.tsv", write_token_table(tokens))
    _write(out / "sample.tsv", write_token_table(sampled, {"cell": cell_of}))

    columns = long_columns(sampled, cell_of)
    if cfg.split == "seen_unseen":
        bands = ["seen_unseen"]
    else:
        bands = ["high", "low"]
    probe_failures: dict[str, str] = {}
    for band in bands:
        mode = ProbeMode(cfg.mode_kind, band)
        if band in ("high", "low"):
            keep = columns["freq_band"] == band
            subset = {k: v[keep] for k, v in columns.items()}
        else:
            subset = columns
        report = run_probe(subset, mode)
        probe_failures.update({f"{band}/{k}": v for k, v in report.failures.items()})
        _write_probe_outputs(report, out / band, mode)

    manifest = [
        "key\tvalue",
        f"version\t{__version__}",
        f"config_hash\t{_config_hash(cfg)}",
        f"seed\t{cfg.strata.seed}",
        f"mode\t{cfg.mode_kind}",
        f"split\t{cfg.split}",
        f"n_per_cell\t{cfg.strata.n_per_cell}",
        f"sources\t{','.join(s.name for s in cfg.sources)}",
        f"failed_sources\t{','.join(r.name for r in failed)}",
        f"probe_failures\t{','.join(sorted(probe_failures))}",
    ]
    _write(out / "manifest.tsv", "\n".join(manifest) + "\n")

    for name, msg in probe_failures.items():
        log(f"probe failure [{name}]: {msg}")
    if failed:
        return EXIT_PARTIAL
    return EXIT_OK


def _config_hash(cfg: RunConfig) -> str:
    digest = hashlib.sha256(repr(cfg).encode("utf-8")).hexdigest()
    return digest[:16]
