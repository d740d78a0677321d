"""F0 estimation by short-time normalized autocorrelation.

Single-pass extraction plus the two-pass per-speaker range adaptation used
for multi-speaker corpora: a first pass with default limits pools voiced
frames per speaker, quartile-based limits (0.75*Q1, 2.5*Q3, clamped to
[50, 800] Hz) are derived, and a second pass re-extracts with those limits.

The tracker picks the strongest autocorrelation peak per frame with
parabolic interpolation; there is no cross-frame path search, so it is meant
for clean or near-clean speech. Externally extracted contours can be
imported instead (see parse_contour).
"""
from __future__ import annotations

import io
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

MIN_VOICED_FRAMES_FOR_RANGE = 50
RANGE_FLOOR_FACTOR = 0.75
RANGE_CEILING_FACTOR = 2.5
RANGE_CLAMP_HZ = (50.0, 800.0)

# Per-candidate bias toward shorter lags; breaks the exact tie between a
# period and its multiples on perfectly periodic signals. This is the
# stationary candidate cost, not a cross-frame path search.
OCTAVE_COST = 0.01


class PitchInputError(ValueError):
    pass


class TooFewVoicedFrames(ValueError):
    """Not enough voiced frames to derive a speaker range; fall back to defaults."""


@dataclass(frozen=True)
class PitchConfig:
    floor: float = 75.0
    ceiling: float = 600.0
    time_step: float = 0.01
    voicing_threshold: float = 0.45
    window_factor: float = 3.0  # analysis window = this many periods of the floor

    def __post_init__(self):
        if not (0 < self.floor < self.ceiling):
            raise ValueError(f"need 0 < floor < ceiling, got {self.floor}, {self.ceiling}")
        if self.time_step <= 0:
            raise ValueError("time_step must be positive")
        if not (0 < self.voicing_threshold < 1):
            raise ValueError("voicing_threshold must lie in (0, 1)")

    @property
    def window_seconds(self) -> float:
        return self.window_factor / self.floor


@dataclass(frozen=True)
class SpeakerRange:
    speaker: str
    floor: float
    ceiling: float

    def __post_init__(self):
        if self.floor >= self.ceiling:
            raise ValueError(f"speaker {self.speaker}: floor {self.floor} >= ceiling {self.ceiling}")


@dataclass(frozen=True)
class PitchContour:
    """Frame-wise F0 track. f0 is NaN exactly where voiced is False."""

    times: np.ndarray
    f0: np.ndarray
    voiced: np.ndarray
    strength: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.f0) == len(self.voiced) == len(self.strength) == n):
            raise ValueError("contour arrays must have equal length")

    def __len__(self) -> int:
        return len(self.times)

    def voiced_f0(self) -> np.ndarray:
        return self.f0[self.voiced]

    def frames(self):
        for i in range(len(self.times)):
            f0 = float(self.f0[i]) if self.voiced[i] else None
            yield float(self.times[i]), f0, bool(self.voiced[i]), float(self.strength[i])


def extract_f0(samples: np.ndarray, sample_rate: float, cfg: PitchConfig = PitchConfig()) -> PitchContour:
    """Estimate an F0 contour from mono audio.

    One frame per ``cfg.time_step``; each frame searches normalized
    autocorrelation peaks in the lag band [1/ceiling, 1/floor] and is voiced
    iff the strongest peak reaches ``cfg.voicing_threshold``. Normalization
    divides out the analysis-window autocorrelation, so estimates are
    invariant to amplitude scaling.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise PitchInputError(f"expected mono audio, got shape {samples.shape}")
    if samples.size == 0:
        raise PitchInputError("empty signal")
    if not np.all(np.isfinite(samples)):
        raise PitchInputError("signal contains non-finite samples")
    if sample_rate < 8000:
        raise PitchInputError(f"sample rate {sample_rate} Hz below 8 kHz minimum")

    win_n = int(round(cfg.window_seconds * sample_rate))
    duration = samples.size / sample_rate
    n_frames = int(np.floor((duration - cfg.window_seconds) / cfg.time_step + 1e-9)) + 1
    if win_n < 8 or n_frames < 1:
        raise PitchInputError(
            f"signal of {duration:.3f} s shorter than one analysis window "
            f"({cfg.window_seconds:.3f} s)"
        )

    starts = np.round(np.arange(n_frames) * cfg.time_step * sample_rate).astype(int)
    starts = np.minimum(starts, samples.size - win_n)
    frames = np.stack([samples[s:s + win_n] for s in starts])
    frames = frames - frames.mean(axis=1, keepdims=True)
    window = np.hanning(win_n)
    frames = frames * window

    # normalized ACF of the windowed frames, corrected by the window ACF
    nfft = 1 << int(np.ceil(np.log2(2 * win_n)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    acf = np.fft.irfft(spec.real**2 + spec.imag**2, nfft, axis=1)[:, :win_n]
    wspec = np.fft.rfft(window, nfft)
    wacf = np.fft.irfft(wspec.real**2 + wspec.imag**2, nfft)[:win_n]
    wacf_norm = wacf / wacf[0]

    lag_min = int(np.ceil(sample_rate / cfg.ceiling))
    lag_max = int(np.floor(sample_rate / cfg.floor))
    lag_max = min(lag_max, win_n - 2)
    if lag_min < 2 or lag_min >= lag_max:
        raise PitchInputError("lag band is empty; check floor/ceiling against the sample rate")

    times = cfg.window_seconds / 2 + np.arange(n_frames) * cfg.time_step
    f0 = np.full(n_frames, np.nan)
    voiced = np.zeros(n_frames, dtype=bool)
    strength = np.zeros(n_frames)

    for i in range(n_frames):
        r0 = acf[i, 0]
        if not np.isfinite(r0) or r0 <= 0:
            continue
        r = (acf[i] / r0) / wacf_norm
        seg = r[lag_min:lag_max + 1]
        left = r[lag_min - 1:lag_max]
        right = r[lag_min + 1:lag_max + 2]
        peaks = np.nonzero((seg > left) & (seg >= right))[0] + lag_min
        if peaks.size == 0:
            continue
        # parabolic interpolation around each candidate peak
        y0 = r[peaks]
        ym = r[peaks - 1]
        yp = r[peaks + 1]
        denom = ym - 2 * y0 + yp
        shift = np.where(np.abs(denom) > 1e-12, 0.5 * (ym - yp) / denom, 0.0)
        shift = np.clip(shift, -0.5, 0.5)
        height = y0 - 0.25 * (ym - yp) * shift
        biased = height - OCTAVE_COST * np.log2(cfg.floor * peaks / sample_rate)
        best = int(np.argmax(biased))
        strength[i] = float(height[best])
        if height[best] >= cfg.voicing_threshold:
            lag = peaks[best] + shift[best]
            est = sample_rate / lag
            f0[i] = float(np.clip(est, cfg.floor, cfg.ceiling))
            voiced[i] = True

    return PitchContour(times, f0, voiced, strength)


def speaker_range(first_pass: list[PitchContour], speaker: str = "") -> SpeakerRange:
    """Derive per-speaker pitch limits from first-pass contours.

    floor = 0.75 * Q1, ceiling = 2.5 * Q3 of the pooled voiced F0 values,
    clamped to [50, 800] Hz. Raises TooFewVoicedFrames below 50 pooled voiced
    frames, in which case callers should keep the defaults.
    """
    pooled = np.concatenate([c.voiced_f0() for c in first_pass]) if first_pass else np.empty(0)
    if pooled.size < MIN_VOICED_FRAMES_FOR_RANGE:
        raise TooFewVoicedFrames(
            f"speaker {speaker or '<unnamed>'}: only {pooled.size} voiced frames "
            f"(need {MIN_VOICED_FRAMES_FOR_RANGE}); fall back to default pitch limits"
        )
    q1, q3 = np.percentile(pooled, [25.0, 75.0])
    lo, hi = RANGE_CLAMP_HZ
    floor = float(np.clip(RANGE_FLOOR_FACTOR * q1, lo, hi))
    ceiling = float(np.clip(RANGE_CEILING_FACTOR * q3, lo, hi))
    return SpeakerRange(speaker, floor, ceiling)


@dataclass
class TwoPassResult:
    contours: dict[str, list[PitchContour]]
    ranges: dict[str, SpeakerRange]
    warnings: list[str]


def two_pass_extract(
    audio_by_speaker: dict[str, list[tuple[np.ndarray, float]]],
    defaults: PitchConfig = PitchConfig(),
) -> TwoPassResult:
    """Speaker-adapted extraction: default pass, per-speaker ranges, re-extraction.

    Per-file extraction errors are recorded as warnings without aborting the
    other files or speakers; speakers with too few voiced frames keep the
    default limits.
    """
    result = TwoPassResult({}, {}, [])
    for speaker, files in audio_by_speaker.items():
        first: list[PitchContour | None] = []
        for idx, (samples, sr) in enumerate(files):
            try:
                first.append(extract_f0(samples, sr, defaults))
            except PitchInputError as exc:
                result.warnings.append(f"{speaker} file {idx}: {exc}")
                first.append(None)
        usable = [c for c in first if c is not None]
        cfg = defaults
        try:
            rng = speaker_range(usable, speaker)
            result.ranges[speaker] = rng
            cfg = replace(defaults, floor=rng.floor, ceiling=rng.ceiling)
        except TooFewVoicedFrames as exc:
            result.warnings.append(str(exc))
        second: list[PitchContour] = []
        for idx, (samples, sr) in enumerate(files):
            if first[idx] is None:
                continue
            if cfg is defaults:
                second.append(first[idx])
            else:
                try:
                    second.append(extract_f0(samples, sr, cfg))
                except PitchInputError as exc:
                    result.warnings.append(f"{speaker} file {idx} (second pass): {exc}")
                    second.append(first[idx])
        result.contours[speaker] = second
    return result


# ---------------------------------------------------------------------------
# Audio and contour I/O


def read_wav(path: str | Path) -> tuple[np.ndarray, float]:
    """Read a WAV file as float64 mono in [-1, 1]; stereo is averaged."""
    from scipy.io import wavfile

    sr, data = wavfile.read(str(path))
    data = np.asarray(data)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise PitchInputError(f"unsupported WAV sample format {data.dtype}")
    return samples, float(sr)


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    from scipy.io import wavfile

    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    wavfile.write(str(path), int(sample_rate), (clipped * 32767.0).astype(np.int16))


def serialize_contour(contour: PitchContour) -> str:
    """Contour as delimited text: time_s, f0_hz (empty when unvoiced), voiced."""
    out = io.StringIO()
    out.write("time_s\tf0_hz\tvoiced\n")
    for t, f0, v, _ in contour.frames():
        f0_str = repr(f0) if v else ""
        out.write(f"{t!r}\t{f0_str}\t{int(v)}\n")
    return out.getvalue()


def parse_contour(text: str) -> PitchContour:
    """Parse an imported contour (time_s, f0_hz, voiced) with a header row."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise PitchInputError("empty contour file")
    delimiter = "\t" if "\t" in lines[0] else ","
    header = [h.strip().lower() for h in lines[0].split(delimiter)]
    try:
        ti, fi, vi = header.index("time_s"), header.index("f0_hz"), header.index("voiced")
    except ValueError:
        raise PitchInputError(f"contour header must name time_s, f0_hz, voiced; got {header}") from None
    times, f0, voiced = [], [], []
    for rowno, line in enumerate(lines[1:], start=2):
        fields = [f.strip() for f in line.split(delimiter)]
        try:
            t = float(fields[ti])
            raw_v = fields[vi].lower()
            v = raw_v in ("1", "true", "yes")
            raw_f0 = fields[fi]
            value = float(raw_f0) if raw_f0 not in ("", "nan", "--undefined--", "0") else np.nan
        except (ValueError, IndexError):
            raise PitchInputError(f"contour row {rowno}: cannot parse {line!r}") from None
        if v and not np.isfinite(value):
            raise PitchInputError(f"contour row {rowno}: voiced frame without an f0 value")
        times.append(t)
        f0.append(value if v else np.nan)
        voiced.append(v)
    times_arr = np.asarray(times)
    if np.any(np.diff(times_arr) < 0):
        raise PitchInputError("contour times must be non-decreasing")
    n = len(times)
    return PitchContour(
        times_arr,
        np.asarray(f0),
        np.asarray(voiced, dtype=bool),
        np.where(np.asarray(voiced, dtype=bool), 1.0, 0.0),
    )


def read_contour(path: str | Path) -> PitchContour:
    return parse_contour(Path(path).read_text(encoding="utf-8-sig"))
