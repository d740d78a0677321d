"""Render probe reports to SVG figures.

Figures are pure views of the report data (no recomputation) and render to
byte-identical SVG for identical input: the Agg backend, a fixed hash salt
for element ids, and no embedded timestamps.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "cf0probe"
matplotlib.rcParams["svg.fonttype"] = "path"

import matplotlib.pyplot as plt

from .probe import ProbeReport, SourceProbe

_ONSET_COLORS = {
    "voiceless_obstruent": "#c44e52",
    "voiced_obstruent": "#4c72b0",
    "sonorant": "#55a868",
}
_ONSET_SHORT = {
    "voiceless_obstruent": "voiceless",
    "voiced_obstruent": "voiced",
    "sonorant": "sonorant",
}
_SIG_SHADE = "#bbbbbb"


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_source_smooths(probe: SourceProbe, path: Path, ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(4.2, 3.2), dpi=100)
    for onset in sorted(probe.smooths):
        curve = probe.smooths[onset]
        color = _ONSET_COLORS.get(onset, "#333333")
        ax.fill_between(curve.grid, curve.lower, curve.upper, color=color, alpha=0.18, lw=0)
        ax.plot(curve.grid, curve.estimate, color=color, lw=1.6,
                label=_ONSET_SHORT.get(onset, onset))
    ax.set_xlabel("vowel time (proportion)")
    ax.set_ylabel(ylabel)
    ax.set_title(f"{probe.source}: onset smooths")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def render_source_differences(probe: SourceProbe, path: Path, ylabel: str) -> None:
    n = len(probe.differences)
    fig, axes = plt.subplots(1, n, figsize=(3.4 * n, 3.2), dpi=100, sharex=True)
    if n == 1:
        axes = [axes]
    for ax, curve in zip(axes, probe.differences):
        for lo_t, hi_t in curve.significant_intervals:
            ax.axvspan(lo_t, hi_t, color=_SIG_SHADE, alpha=0.5, lw=0)
        ax.fill_between(curve.grid, curve.lower, curve.upper, color="#4c72b0", alpha=0.2, lw=0)
        ax.plot(curve.grid, curve.estimate, color="#4c72b0", lw=1.6)
        ax.axhline(0.0, color="#444444", lw=0.8, ls="--")
        a, b = curve.pair
        ax.set_title(f"{_ONSET_SHORT.get(a, a)} - {_ONSET_SHORT.get(b, b)}", fontsize=9)
        ax.set_xlabel("vowel time (proportion)")
    axes[0].set_ylabel(f"difference ({ylabel})")
    fig.suptitle(f"{probe.source}: difference smooths", fontsize=10)
    fig.tight_layout(rect=(0, 0, 1, 0.94))
    _save(fig, path)


def render_figures(report: ProbeReport, outdir: str | Path) -> list[Path]:
    """Write one smooth figure and one difference figure per source.

    Together they form the four panels per source (onset smooths plus three
    pairwise differences, shaded where significant).
    """
    if not report.sources:
        raise ValueError("report has no fitted sources to render")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ylabel = "F0 (Hz)" if report.mode.response == "f0_hz" else "F0 (z)"
    written: list[Path] = []
    for name in sorted(report.sources):
        probe = report.sources[name]
        safe = name.replace(":", "_").replace("/", "_")
        smooth_path = outdir / f"{safe}_smooths.svg"
        diff_path = outdir / f"{safe}_differences.svg"
        render_source_smooths(probe, smooth_path, ylabel)
        render_source_differences(probe, diff_path, ylabel)
        written.extend([smooth_path, diff_path])
    return written
