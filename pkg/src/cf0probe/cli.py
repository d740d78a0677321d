"""Command line interface.

Subcommands:
  probe run <config>                      full pipeline from an INI config
  probe synth <spec> [--out DIR]          synthetic token table or mini corpus
  probe overlap <wordlist> <transcripts>  training-corpus overlap report
  probe pitch <wav> [--import FILE]       extract or import one pitch contour
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probe",
        description="Measure consonant-induced F0 perturbation in speech corpora.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline from a config file")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--word-initial-only", action="store_true", default=None,
                       help="only count word-initial onsets")
    p_run.add_argument("--workers", type=int, default=None,
                       help="parallel source workers (default: config or PROBE_WORKERS)")

    p_synth = sub.add_parser("synth", help="generate synthetic data for self-verification")
    p_synth.add_argument("spec", type=Path, help="synth spec file (INI)")
    p_synth.add_argument("--out", type=Path, default=Path("synth_output"))
    p_synth.add_argument("--seed", type=int, default=None, help="override the spec seed")

    p_overlap = sub.add_parser("overlap", help="word-list overlap against training transcripts")
    p_overlap.add_argument("wordlist", type=Path, help="one word per line")
    p_overlap.add_argument("transcripts", type=Path, help="training transcripts")
    p_overlap.add_argument("--freq", type=Path, default=None,
                           help="frequency list for a high/low median split")
    p_overlap.add_argument("--word-column", default="Word")
    p_overlap.add_argument("--count-column", default="FREQcount")
    p_overlap.add_argument("--out", type=Path, default=None, help="write report here")

    p_pitch = sub.add_parser("pitch", help="extract or import a pitch contour")
    p_pitch.add_argument("wav", type=Path)
    p_pitch.add_argument("--import", dest="import_path", type=Path, default=None,
                         help="import a precomputed contour instead of extracting")
    p_pitch.add_argument("--floor", type=float, default=75.0)
    p_pitch.add_argument("--ceiling", type=float, default=600.0)
    p_pitch.add_argument("--time-step", type=float, default=0.01)
    p_pitch.add_argument("--voicing-threshold", type=float, default=0.45)
    p_pitch.add_argument("--out", type=Path, default=None,
                         help="write the contour here (default: stdout)")
    return parser


def _cmd_run(args) -> int:
    from .pipeline import ConfigError, load_run_config, run

    workers = args.workers
    if workers is None and os.environ.get("PROBE_WORKERS"):
        workers = int(os.environ["PROBE_WORKERS"])
    try:
        cfg = load_run_config(
            args.config, seed_override=args.seed,
            word_initial_only=args.word_initial_only,
            workers_override=workers,
        )
    except (ConfigError, FileNotFoundError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


def _cmd_synth(args) -> int:
    from dataclasses import replace

    from .synth import generate_tokens, load_synth_spec, synth_wave_corpus
    from .tokens import write_token_table

    try:
        spec, kind = load_synth_spec(args.spec)
    except (FileNotFoundError, KeyError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    if kind == "corpus":
        config_path = synth_wave_corpus(spec, args.out)
        print(f"wrote corpus with config {config_path}")
    else:
        tokens = generate_tokens(spec)
        table_path = args.out / "tokens.tsv"
        table_path.write_text(write_token_table(tokens), encoding="utf-8")
        print(f"wrote {len(tokens)} tokens to {table_path}")
    return 0


def _cmd_overlap(args) -> int:
    from .annotations import read_frequency_list
    from .strata import compute_overlap, split_by_frequency

    try:
        words = {
            w.strip().lower()
            for w in args.wordlist.read_text(encoding="utf-8-sig").splitlines()
            if w.strip()
        }
        if not words:
            print("fatal: word list is empty", file=sys.stderr)
            return 1
        transcripts = args.transcripts.read_text(encoding="utf-8-sig")
        if args.freq is not None:
            freq = read_frequency_list(args.freq, args.word_column, args.count_column)
            bands = split_by_frequency(words, freq)
            word_sets: dict[str, set[str]] = {"high": set(), "low": set()}
            for w, band in bands.items():
                word_sets[band].add(w)
        else:
            word_sets = {"all": words}
        report = compute_overlap(word_sets, transcripts)
    except (FileNotFoundError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1
    text = report.to_text()
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_pitch(args) -> int:
    from .pitch import (
        PitchConfig,
        PitchInputError,
        extract_f0,
        read_contour,
        read_wav,
        serialize_contour,
    )

    try:
        if args.import_path is not None:
            contour = read_contour(args.import_path)
        else:
            samples, sr = read_wav(args.wav)
            cfg = PitchConfig(
                floor=args.floor, ceiling=args.ceiling,
                time_step=args.time_step,
                voicing_threshold=args.voicing_threshold,
            )
            contour = extract_f0(samples, sr, cfg)
    except (FileNotFoundError, PitchInputError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1
    text = serialize_contour(contour)
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "synth": _cmd_synth,
        "overlap": _cmd_overlap,
        "pitch": _cmd_pitch,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
