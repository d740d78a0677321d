"""Pitch tracker tests with analytic signals."""
from __future__ import annotations

import numpy as np
import pytest

from cf0probe.pitch import (
    PitchConfig,
    PitchContour,
    PitchInputError,
    TooFewVoicedFrames,
    extract_f0,
    parse_contour,
    serialize_contour,
    speaker_range,
    two_pass_extract,
)

SR = 16000.0


def sine(f0: float, duration: float = 1.0, sr: float = SR, amplitude: float = 0.5):
    t = np.arange(int(duration * sr)) / sr
    return amplitude * np.sin(2.0 * np.pi * f0 * t)


def sawtooth(f0: float, duration: float = 1.0, sr: float = SR, n_harmonics: int = 12):
    t = np.arange(int(duration * sr)) / sr
    wave = np.zeros_like(t)
    for h in range(1, n_harmonics + 1):
        wave += np.sin(2.0 * np.pi * h * f0 * t) / h
    return 0.5 * wave / np.abs(wave).max()


def voiced_f0(contour: PitchContour) -> np.ndarray:
    return contour.voiced_f0()


def test_pure_sine_200hz():
    contour = extract_f0(sine(200.0), SR)
    interior = contour.voiced[3:-3]
    assert interior.all()
    np.testing.assert_allclose(contour.f0[3:-3], 200.0, atol=1.0)


def test_silence_fully_unvoiced():
    contour = extract_f0(np.zeros(int(SR)), SR)
    assert not contour.voiced.any()
    assert np.isnan(contour.f0).all()


def test_sawtooth_110hz_no_octave_error():
    contour = extract_f0(sawtooth(110.0), SR)
    voiced = voiced_f0(contour)
    assert voiced.size > 50
    median = np.median(voiced)
    assert abs(median - 110.0) < 1.0
    # no frame jumps to the 220 Hz octave
    assert not ((voiced > 200.0) & (voiced < 240.0)).any()


@pytest.mark.parametrize("f0", [80.0, 150.0, 287.0, 400.0])
def test_harmonic_accuracy_half_percent(f0):
    contour = extract_f0(sawtooth(f0), SR)
    voiced = voiced_f0(contour)
    assert voiced.size > 40
    err = np.median(np.abs(voiced - f0)) / f0
    assert err < 0.005


def test_amplitude_scaling_invariance():
    base = extract_f0(sine(180.0, amplitude=0.1), SR)
    scaled = extract_f0(sine(180.0, amplitude=0.9), SR)
    np.testing.assert_array_equal(base.voiced, scaled.voiced)
    np.testing.assert_allclose(base.f0[base.voiced], scaled.f0[scaled.voiced], atol=1e-9)


def test_reported_f0_within_band():
    cfg = PitchConfig(floor=100.0, ceiling=300.0)
    contour = extract_f0(sawtooth(110.0), SR, cfg)
    voiced = voiced_f0(contour)
    assert np.all(voiced >= cfg.floor) and np.all(voiced <= cfg.ceiling)


def test_frame_count_formula():
    cfg = PitchConfig()
    duration = 0.737
    contour = extract_f0(sine(200.0, duration=duration), SR, cfg)
    expected = int(np.floor((duration - cfg.window_seconds) / cfg.time_step + 1e-9)) + 1
    assert len(contour) == expected


def test_input_validation():
    with pytest.raises(PitchInputError):
        extract_f0(np.array([]), SR)
    with pytest.raises(PitchInputError):
        extract_f0(np.array([0.0, np.nan]), SR)
    with pytest.raises(PitchInputError):
        extract_f0(sine(200.0), 4000.0)
    with pytest.raises(PitchInputError):
        extract_f0(sine(200.0, duration=0.02), SR)  # shorter than one window


# ---------------------------------------------------------------------------
# Speaker ranges


def _flat_contour(f0_values):
    f0 = np.asarray(f0_values, dtype=float)
    return PitchContour(
        times=np.arange(f0.size) * 0.01,
        f0=f0,
        voiced=np.ones(f0.size, dtype=bool),
        strength=np.ones(f0.size),
    )


def brute_force_quartiles(values):
    """Oracle: sorted-array quartiles with linear interpolation."""
    v = np.sort(np.asarray(values, dtype=float))
    out = []
    for q in (0.25, 0.75):
        pos = q * (v.size - 1)
        lo = int(np.floor(pos))
        hi = int(np.ceil(pos))
        out.append(v[lo] + (pos - lo) * (v[hi] - v[lo]))
    return out


def test_constant_200hz_range():
    rng = speaker_range([_flat_contour([200.0] * 60)], "s")
    assert rng.floor == pytest.approx(150.0)
    assert rng.ceiling == pytest.approx(500.0)


def test_uniform_sample_range_matches_brute_force():
    rng_gen = np.random.default_rng(71)
    values = rng_gen.uniform(180.0, 260.0, size=400)
    q1, q3 = brute_force_quartiles(values)
    rng = speaker_range([_flat_contour(values)], "s")
    assert rng.floor == pytest.approx(0.75 * q1)
    assert rng.ceiling == pytest.approx(2.5 * q3)
    # sanity against the analytic uniform quartiles
    assert abs(rng.floor - 150.0) < 5.0
    assert abs(rng.ceiling - 600.0) < 12.0


def test_too_few_voiced_frames():
    with pytest.raises(TooFewVoicedFrames):
        speaker_range([_flat_contour([200.0] * 10)], "s")


def test_range_clamped():
    rng = speaker_range([_flat_contour([560.0] * 60)], "s")
    assert rng.ceiling == 800.0


# ---------------------------------------------------------------------------
# Two-pass extraction


def test_two_pass_stationary_signal_stable():
    audio = {"spk": [(sine(200.0, duration=2.0), SR)]}
    result = two_pass_extract(audio)
    first = extract_f0(sine(200.0, duration=2.0), SR)
    second = result.contours["spk"][0]
    a = first.f0[first.voiced]
    b = second.f0[second.voiced]
    assert abs(np.median(a) - np.median(b)) < 1.0


def test_two_pass_keeps_low_pitch_voiced():
    # true f0 ~ 90 Hz: the narrowed second-pass range must keep it voiced
    # (frame counts differ slightly because the window tracks the floor)
    audio = {"low": [(sawtooth(90.0, duration=2.0), SR)]}
    result = two_pass_extract(audio)
    contour = result.contours["low"][0]
    first = extract_f0(sawtooth(90.0, duration=2.0), SR)
    frac_1 = first.voiced.mean()
    frac_2 = contour.voiced.mean()
    assert frac_2 >= frac_1 - 0.01
    assert abs(np.median(contour.voiced_f0()) - 90.0) < 1.0
    assert result.ranges["low"].floor < 90.0 < result.ranges["low"].ceiling


def test_two_pass_fallback_on_sparse_voicing():
    audio = {"quiet": [(np.zeros(int(SR)), SR)], "ok": [(sine(220.0, duration=2.0), SR)]}
    result = two_pass_extract(audio)
    assert "quiet" not in result.ranges
    assert any("quiet" in w for w in result.warnings)
    assert "ok" in result.ranges  # other speakers unaffected


def test_two_pass_isolates_file_errors():
    audio = {"spk": [(np.array([np.nan]), SR), (sine(200.0, duration=2.0), SR)]}
    result = two_pass_extract(audio)
    assert len(result.contours["spk"]) == 1
    assert any("file 0" in w for w in result.warnings)


# ---------------------------------------------------------------------------
# Contour import/export


def test_contour_round_trip():
    contour = extract_f0(sine(210.0), SR)
    text = serialize_contour(contour)
    back = parse_contour(text)
    np.testing.assert_allclose(back.times, contour.times, atol=1e-12)
    np.testing.assert_array_equal(back.voiced, contour.voiced)
    np.testing.assert_allclose(
        back.f0[back.voiced], contour.f0[contour.voiced], atol=1e-12
    )


def test_contour_parse_errors():
    with pytest.raises(PitchInputError):
        parse_contour("")
    with pytest.raises(PitchInputError):
        parse_contour("a\tb\tc\n1\t2\t3\n")
    with pytest.raises(PitchInputError):
        parse_contour("time_s\tf0_hz\tvoiced\n0.0\t\t1\n")  # voiced without f0
