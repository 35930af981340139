"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from melsine import pipeline
from melsine.cli import main
from melsine.config import PipelineConfig
from melsine.dsp import AudioBuffer, dft, idft, power_spectrogram, stft_with
from melsine.evaluation import griffin_lim, mel_pseudo_inverse
from melsine.mel import hz_to_mel, log_mel, mel_to_hz
from melsine.pitch import PitchTrack, enforce_continuity, track_pitch
from melsine.sinres import _median_estimate, accumulate_phase, calibrate, reference_tone, wrap_phase
from melsine.wav import write_wav

from conftest import SR, harmonic_tone, tone

pytestmark = pytest.mark.acceptance

TWO_PI = 2 * math.pi
AMPS = (0.5, 0.3, 0.2, 0.1, 0.05)


def angle_diff(a, b):
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def test_criterion_01_mel_scale(verdict):
    start = time.perf_counter()
    m700 = float(hz_to_mel(700.0))
    f = np.linspace(0.0, 8000.0, 100001)
    back = mel_to_hz(hz_to_mel(f))
    rel = np.abs(back - f) / np.maximum(f, 1.0)
    elapsed = time.perf_counter() - start
    ok = abs(m700 - 781.177) <= 0.001 and rel.max() <= 1e-6 and elapsed < 1.0
    verdict(
        1,
        "mel-scale exactness",
        ok,
        f"hz_to_mel(700)={m700:.6f} (stated 781.177 +- 0.001), "
        f"max roundtrip rel err {rel.max():.2e}, {elapsed:.3f} s",
    )


def naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * j * k / n)) for j in range(n)])


def test_criterion_02_dft_oracle(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    fwd = inv = 0.0
    for n in (8, 16, 32, 64):
        for _ in range(5):
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            fwd = max(fwd, np.max(np.abs(dft(x, n) - naive_dft(x))))
            inv = max(inv, np.max(np.abs(idft(dft(x, n)) - x)))
    elapsed = time.perf_counter() - start
    ok = fwd <= 1e-9 and inv <= 1e-9 and elapsed < 5.0
    verdict(2, "DFT oracle", ok, f"max |dft-naive| {fwd:.1e}, max |idft(dft)-x| {inv:.1e}, {elapsed:.2f} s")


def test_criterion_03_yin_accuracy(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    freqs = np.concatenate([[88.0, 2700.0], rng.uniform(88.0, 2700.0, 18)])
    hits = 0
    worst = 0.0
    for f in freqs:
        track = track_pitch(tone(f, seconds=0.5, phases=[rng.uniform(0, TWO_PI)]))
        voiced = track.f0_hz[track.voiced]
        if voiced.size * 2 <= len(track):
            continue
        err = abs(float(np.median(voiced)) - f) / f
        worst = max(worst, err)
        hits += err <= 0.01
    silence = track_pitch(AudioBuffer(np.zeros(SR // 2), SR))
    silent_ok = not np.any(silence.voiced)
    elapsed = time.perf_counter() - start
    ok = hits >= 19 and silent_ok and elapsed < 10.0
    verdict(
        3,
        "YIN accuracy",
        ok,
        f"{hits}/20 majority estimates within 1% (worst {worst:.2e}), "
        f"silence unvoiced={silent_ok}, {elapsed:.2f} s",
    )


def random_track(rng):
    n = int(rng.integers(0, 120))
    steps = rng.normal(0.0, 0.05, n)
    jumps = rng.random(n) < 0.1
    steps[jumps] = rng.normal(0.0, 0.6, jumps.sum())
    f0 = np.clip(rng.uniform(100, 2000) * np.exp(np.cumsum(steps)), 80.0, 3000.0)
    f0[rng.random(n) < 0.2] = np.nan
    return PitchTrack(f0, 256, 1024, SR)


def test_criterion_04_continuity(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    violations = not_idempotent = replaced = 0
    for _ in range(1000):
        track = random_track(rng)
        once = enforce_continuity(track, 0.06)
        twice = enforce_continuity(once, 0.06)
        voiced = once.f0_hz[once.voiced]
        if voiced.size > 1:
            violations += int(np.any(np.abs(np.diff(voiced)) / voiced[:-1] > 0.06))
        not_idempotent += not np.array_equal(once.f0_hz, twice.f0_hz, equal_nan=True)
        replaced += int(np.sum(once.f0_hz[track.voiced] != track.f0_hz[track.voiced]))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and not_idempotent == 0 and elapsed < 5.0
    verdict(
        4,
        "continuity rule",
        ok,
        f"1000 tracks, {violations} bound violations, {not_idempotent} non-idempotent, "
        f"{replaced} frames replaced, {elapsed:.2f} s",
    )


def test_criterion_05_phase_recursion(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        f = rng.uniform(20.0, 8000.0)
        T = rng.uniform(1e-4, 0.064)
        n = int(rng.integers(0, 1001))
        theta0 = rng.uniform(0.0, TWO_PI)
        theta = theta0
        for _ in range(n):
            theta = accumulate_phase(theta, f, f, T)
        worst = max(worst, angle_diff(theta, wrap_phase(theta0 + TWO_PI * f * n * T)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 1.0
    verdict(5, "phase recursion", ok, f"worst angular error {worst:.2e} rad, {elapsed:.3f} s")


def test_criterion_06_calibration_fixed_point(verdict, fb80, default_params):
    start = time.perf_counter()
    window = default_params.window()
    calib = calibrate(fb80, default_params)
    ref_freq = fb80.center(fb80.num_mels // 2)
    unit = _median_estimate(
        reference_tone(ref_freq, default_params, SR), ref_freq, fb80, default_params, window, calib
    )
    other = fb80.center(30)
    half_tone = AudioBuffer(0.5 * reference_tone(other, default_params, SR).samples, SR)
    half = _median_estimate(half_tone, other, fb80, default_params, window, calib)
    elapsed = time.perf_counter() - start
    ok = abs(unit - 1.0) <= 1e-6 and abs(half - 0.5) <= 0.025 and elapsed < 5.0
    verdict(
        6,
        "amplitude calibration",
        ok,
        f"unit at {ref_freq:.1f} Hz -> {unit:.9f}, 0.5 at {other:.1f} Hz -> {half:.4f}, "
        f"{elapsed:.2f} s",
    )


def test_criterion_07_end_to_end(verdict, tmp_path):
    start = time.perf_counter()
    cfg = PipelineConfig()
    results = []
    for f0 in (440.0, 100.0, 2000.0):
        wav = tmp_path / f"tone{int(f0)}.wav"
        write_wav(wav, harmonic_tone(f0, AMPS), "float32")
        out = pipeline.roundtrip(wav, tmp_path / "out", cfg)
        results.append(
            (f0, out.sin_report.spectral_convergence, out.gl_report.spectral_convergence)
        )
    elapsed = time.perf_counter() - start
    ok = all(sin < 0.15 and sin < gl for _, sin, gl in results) and elapsed < 30.0
    detail = ", ".join(f"f0 {f:.0f}: SC {s:.4f} vs GL {g:.4f}" for f, s, g in results)
    verdict(7, "end-to-end roundtrip", ok, f"{detail}, {elapsed:.2f} s")


def test_criterion_08_griffin_lim_monotone(verdict, fb80, default_params):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    increases = 0
    for i in range(5):
        f0 = rng.uniform(80.0, 2100.0)
        audio = tone(f0 * np.arange(1, 9), rng.uniform(0.05, 0.5, 8), phases=rng.uniform(0, TWO_PI, 8))
        logmel = log_mel(power_spectrogram(stft_with(audio, default_params)), fb80)
        trace = []
        griffin_lim(mel_pseudo_inverse(logmel, fb80), default_params, 32, seed=i, trace=trace)
        increases += int(np.sum(np.diff(trace) > 0))
    elapsed = time.perf_counter() - start
    ok = increases == 0 and elapsed < 30.0
    verdict(8, "Griffin-Lim monotonicity", ok, f"{increases} increases in 5 x 32 steps, {elapsed:.2f} s")


def test_criterion_09_performance(verdict):
    cfg = PipelineConfig()
    audio = harmonic_tone(330.0, AMPS, seconds=4.0)
    logmel, track = pipeline.analyze(audio, cfg)
    start = time.perf_counter()
    out = pipeline.invert(logmel, track, cfg)
    elapsed = time.perf_counter() - start
    ok = elapsed < 2.0 and len(out) > 0
    verdict(9, "performance", ok, f"4 s note inverted in {elapsed:.3f} s ({logmel.num_frames} frames)")


def test_criterion_10_determinism(verdict, tmp_path):
    wav = tmp_path / "note.wav"
    write_wav(wav, harmonic_tone(262.0, AMPS), "float32")
    a, b = tmp_path / "a", tmp_path / "b"
    codes = (main(["roundtrip", str(wav), "-o", str(a)]), main(["roundtrip", str(wav), "-o", str(b)]))
    names = sorted(p.name for p in a.iterdir())
    differing = [n for n in names if (a / n).read_bytes() != (b / n).read_bytes()]
    ok = codes == (0, 0) and len(names) == 5 and not differing
    verdict(10, "determinism", ok, f"{len(names)} files compared, differing: {differing or 'none'}")
