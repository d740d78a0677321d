"""Assemble, fit, and summarize the onset-perturbation models.

One model per speech source: a parametric onset-class contrast, a shared
time smooth, by-onset time smooths, factor smooths for word and vowel height
(speaker terms in the multi-speaker setting), a consonant random effect, and
AR(1) residuals with rho estimated from a preliminary fit. Difference
smooths between onset classes combine the parametric contrast and the
by-onset smooth deviation while excluding factor smooths and random effects,
with pointwise 95% bands; significance intervals are the maximal grid-cell
runs where the band excludes zero.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .gam import (
    FittedModel,
    ModelSpec,
    TermKind,
    TermSpec,
    contrast_interval,
    fit_model,
    predict_with_ci,
)
from .segments import OnsetClass

ONSET_REFERENCE = OnsetClass.SONORANT.value
ONSET_LEVELS = (
    OnsetClass.VOICED_OBSTRUENT.value,
    OnsetClass.VOICELESS_OBSTRUENT.value,
    OnsetClass.SONORANT.value,
)
DIFFERENCE_PAIRS = (
    (OnsetClass.VOICELESS_OBSTRUENT.value, OnsetClass.SONORANT.value),
    (OnsetClass.VOICED_OBSTRUENT.value, OnsetClass.SONORANT.value),
    (OnsetClass.VOICELESS_OBSTRUENT.value, OnsetClass.VOICED_OBSTRUENT.value),
)
DEFAULT_GRID_N = 100
SPEAKER_ONSET_COLUMN = "speaker_onset"

MODE_SINGLE_SPEAKER_HZ = "single_speaker_hz"
MODE_MULTI_SPEAKER_Z = "multi_speaker_z"
BANDS = ("high", "low", "seen_unseen")


@dataclass(frozen=True)
class ProbeMode:
    kind: str = MODE_MULTI_SPEAKER_Z
    band: str = "high"

    def __post_init__(self):
        if self.kind not in (MODE_SINGLE_SPEAKER_HZ, MODE_MULTI_SPEAKER_Z):
            raise ValueError(f"unknown probe kind {self.kind!r}")
        if self.band not in BANDS:
            raise ValueError(f"unknown band {self.band!r}; expected one of {BANDS}")

    @property
    def response(self) -> str:
        return "f0_hz" if self.kind == MODE_SINGLE_SPEAKER_HZ else "zf0"


def build_probe_spec(mode: ProbeMode) -> ModelSpec:
    """The model specification for a probe mode.

    High-frequency data model word effects as factor smooths; low-frequency
    and unseen strata use a word random effect instead, since most of their
    words contribute only a token or two. The multi-speaker setting adds a
    speaker factor smooth and a by-onset speaker factor smooth (realized
    over the speaker x onset interaction column).
    """
    word_as_fs = mode.band == "high"
    # order-1 penalty on the by-onset deviations keeps them identifiable
    # against the shared time smooth (the centered order-1 penalty has no
    # null space, so the replicated blocks cannot absorb the main smooth)
    terms: list[TermSpec] = [
        TermSpec(TermKind.PARAMETRIC_FACTOR, "onset_class", ref_level=ONSET_REFERENCE),
        TermSpec(TermKind.SMOOTH, "time", k=5, penalty_order=2),
        TermSpec(TermKind.BY_FACTOR_SMOOTH, "time", "onset_class", k=5, penalty_order=1),
    ]
    if mode.kind == MODE_MULTI_SPEAKER_Z:
        terms.append(TermSpec(TermKind.FACTOR_SMOOTH, "time", "speaker", k=5, penalty_order=1))
        terms.append(TermSpec(TermKind.FACTOR_SMOOTH, "time", SPEAKER_ONSET_COLUMN, k=5, penalty_order=1))
    terms.append(TermSpec(TermKind.FACTOR_SMOOTH, "time", "height", k=5, penalty_order=1))
    if word_as_fs:
        terms.append(TermSpec(TermKind.FACTOR_SMOOTH, "time", "word", k=5, penalty_order=1))
    else:
        terms.append(TermSpec(TermKind.RANDOM_EFFECT, "word"))
    terms.append(TermSpec(TermKind.RANDOM_EFFECT, "consonant"))
    return ModelSpec(mode.response, tuple(terms), ar1="estimate", series_start="start")


@dataclass(frozen=True)
class DifferenceCurve:
    pair: tuple[str, str]
    grid: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    se: np.ndarray
    significant_intervals: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class SmoothCurve:
    onset: str
    grid: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass
class SourceProbe:
    source: str
    n_tokens: int
    rho: float
    lambdas: dict[str, float]
    edf: dict[str, float]
    reml_score: float
    smooths: dict[str, SmoothCurve]
    differences: tuple[DifferenceCurve, ...]


@dataclass
class ProbeReport:
    mode: ProbeMode
    sources: dict[str, SourceProbe] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)


def significant_runs(mask: np.ndarray, grid: np.ndarray) -> tuple[tuple[float, float], ...]:
    """Merge adjacent significant grid points into maximal intervals.

    Each significant point covers its half-open grid cell, so an isolated
    point still yields an interval of one cell width; bounds clip to the
    grid span.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.size != grid.size:
        raise ValueError("mask and grid lengths differ")
    if mask.size < 2:
        raise ValueError("grid must have at least two points")
    half = 0.5 * float(grid[1] - grid[0])
    runs: list[tuple[float, float]] = []
    i = 0
    while i < mask.size:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < mask.size and mask[j + 1]:
            j += 1
        runs.append((
            max(float(grid[0]), float(grid[i]) - half),
            min(float(grid[-1]), float(grid[j]) + half),
        ))
        i = j + 1
    return tuple(runs)


def _onset_contrast_terms(model: FittedModel) -> set[str]:
    """Terms entering onset predictions: everything except factor smooths and
    random effects (and implicitly the intercept for differences)."""
    include = {"intercept"}
    assert model.design is not None
    for block in model.design.blocks:
        if block.spec is None:
            continue
        if block.spec.kind in (TermKind.FACTOR_SMOOTH, TermKind.RANDOM_EFFECT):
            continue
        include.add(block.name)
    return include


def difference_smooth(
    model: FittedModel,
    pair: tuple[str, str],
    grid_n: int = DEFAULT_GRID_N,
    level: float = 0.95,
) -> DifferenceCurve:
    """Estimated difference between two onset-class smooths over time.

    The contrast rows subtract the full onset prediction (parametric contrast
    plus by-onset smooth) of the second class from the first; factor smooths
    and random effects are excluded. Significance holds where the pointwise
    band excludes zero.
    """
    a, b = pair
    design = model.design
    onset_block = design.block("factor(onset_class)")
    for lv in pair:
        if lv not in onset_block.levels:
            raise KeyError(f"onset level {lv!r} not in model (levels: {onset_block.levels})")
    grid = np.linspace(0.0, 1.0, grid_n)
    include = _onset_contrast_terms(model)
    rows_a = design.matrix_for(_grid_data(grid, a), include)
    rows_b = design.matrix_for(_grid_data(grid, b), include)
    curve = contrast_interval(model, rows_a - rows_b, level)
    mask = (curve.lower > 0.0) | (curve.upper < 0.0)
    return DifferenceCurve(
        pair=(a, b),
        grid=grid,
        estimate=curve.estimate,
        lower=curve.lower,
        upper=curve.upper,
        se=curve.se,
        significant_intervals=significant_runs(mask, grid),
    )


def _grid_data(grid: np.ndarray, onset: str) -> dict[str, np.ndarray]:
    return {
        "time": grid,
        "onset_class": np.asarray([onset] * grid.size, dtype=object),
    }


def onset_smooth(
    model: FittedModel, onset: str, grid_n: int = DEFAULT_GRID_N, level: float = 0.95
) -> SmoothCurve:
    """Predicted trajectory for one onset class, excluding factor smooths and
    random effects."""
    grid = np.linspace(0.0, 1.0, grid_n)
    include = _onset_contrast_terms(model)
    curve = predict_with_ci(model, _grid_data(grid, onset), include, level)
    return SmoothCurve(onset, grid, curve.estimate, curve.lower, curve.upper)


def fit_probe_model(dataset: dict[str, np.ndarray], mode: ProbeMode, budget: int = 2000) -> FittedModel:
    """Fit the probe model for one source's long-format data.

    A smoothing search that exhausts its budget falls back to the best
    lambdas found (flagged in the fit info) rather than failing the source.
    """
    data = dict(dataset)
    if mode.kind == MODE_MULTI_SPEAKER_Z and SPEAKER_ONSET_COLUMN not in data:
        data[SPEAKER_ONSET_COLUMN] = np.asarray(
            [f"{s}:{o}" for s, o in zip(data["speaker"], data["onset_class"])],
            dtype=object,
        )
    spec = build_probe_spec(mode)
    return fit_model(data, spec, budget=budget, allow_partial=True)


def run_probe(
    dataset: dict[str, np.ndarray],
    mode: ProbeMode,
    grid_n: int = DEFAULT_GRID_N,
    budget: int = 2000,
) -> ProbeReport:
    """Fit one model per speech source and collect smooths and differences.

    With band = seen_unseen each (source, seen-label) pair is analyzed as its
    own panel named ``source:seen`` / ``source:unseen``. Per-source failures
    are recorded without aborting the other sources.
    """
    report = ProbeReport(mode)
    for name, rows in _panels(dataset, mode):
        panel = {col: values[rows] for col, values in dataset.items()}
        try:
            model = fit_probe_model(panel, mode, budget=budget)
            smooths = {
                onset: onset_smooth(model, onset, grid_n) for onset in ONSET_LEVELS
                if onset in model.design.block("factor(onset_class)").levels
            }
            differences = tuple(
                difference_smooth(model, pair, grid_n) for pair in DIFFERENCE_PAIRS
            )
            report.sources[name] = SourceProbe(
                source=name,
                n_tokens=int(np.asarray(panel["start"], dtype=bool).sum()),
                rho=model.rho,
                lambdas=model.lambdas,
                edf=model.edf,
                reml_score=model.reml_score,
                smooths=smooths,
                differences=differences,
            )
        except Exception as exc:  # noqa: BLE001 - isolate per-source failures
            report.failures[name] = f"{type(exc).__name__}: {exc}"
    return report


def _panels(dataset: dict[str, np.ndarray], mode: ProbeMode):
    sources = np.asarray([str(s) for s in dataset["source"]], dtype=object)
    if mode.band == "seen_unseen":
        seen = np.asarray([str(s) for s in dataset["seen"]], dtype=object)
        for src in sorted(set(sources)):
            for label in ("seen", "unseen"):
                rows = (sources == src) & (seen == ("true" if label == "seen" else "false"))
                if rows.any():
                    yield f"{src}:{label}", rows
    else:
        for src in sorted(set(sources)):
            yield src, sources == src


# ---------------------------------------------------------------------------
# Report serialization


def smooths_table(probe: SourceProbe) -> str:
    out = io.StringIO()
    out.write("grid\tonset\test\tlo\thi\n")
    for onset in sorted(probe.smooths):
        c = probe.smooths[onset]
        for g, e, lo, hi in zip(c.grid, c.estimate, c.lower, c.upper):
            out.write(f"{g!r}\t{onset}\t{e!r}\t{lo!r}\t{hi!r}\n")
    return out.getvalue()


def differences_table(probe: SourceProbe) -> str:
    out = io.StringIO()
    out.write("grid\tpair\test\tlo\thi\tsignificant\n")
    for c in probe.differences:
        pair = f"{c.pair[0]}-{c.pair[1]}"
        sig = np.zeros(c.grid.size, dtype=bool)
        for lo_t, hi_t in c.significant_intervals:
            sig |= (c.grid >= lo_t) & (c.grid <= hi_t)
        for g, e, lo, hi, s in zip(c.grid, c.estimate, c.lower, c.upper, sig):
            out.write(f"{g!r}\t{pair}\t{e!r}\t{lo!r}\t{hi!r}\t{int(s)}\n")
    return out.getvalue()


def metadata_table(probe: SourceProbe) -> str:
    out = io.StringIO()
    out.write("key\tvalue\n")
    out.write(f"source\t{probe.source}\n")
    out.write(f"n_tokens\t{probe.n_tokens}\n")
    out.write(f"rho\t{probe.rho!r}\n")
    out.write(f"reml_score\t{probe.reml_score!r}\n")
    for label in sorted(probe.lambdas):
        out.write(f"lambda[{label}]\t{probe.lambdas[label]!r}\n")
    for label in sorted(probe.edf):
        out.write(f"edf[{label}]\t{probe.edf[label]!r}\n")
    return out.getvalue()
