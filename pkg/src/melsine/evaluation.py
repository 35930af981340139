"""Reconstruction metrics and the Griffin-Lim baseline.

The metric pipeline is: align the candidate to the reference by
cross-correlation, trim both to their common length, scale the candidate
so its total spectrogram power matches the reference, then score the pair
of power spectrograms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .dsp import (
    AudioBuffer,
    ComplexSpectrogram,
    PowerSpectrogram,
    StftParams,
    istft,
    power_spectrogram,
    stft,
    stft_with,
)
from .errors import DegenerateCandidate, InvalidArgument, NumericFailure
from .mel import LogMelSpectrogram, MelFilterbank

METRIC_PARAMS = StftParams(1024, 256, 1024, window_kind="hann", normalized=True)
DEFAULT_MAX_LAG = 1024
RIDGE = 1e-8


@dataclass(frozen=True)
class EvalReport:
    spectral_convergence: float
    alignment_lag: int
    energy_scale: float
    stft_params: StftParams
    relative_sc: float = math.nan

    def __post_init__(self):
        if not (math.isfinite(self.spectral_convergence) and self.spectral_convergence >= 0):
            raise InvalidArgument("spectral convergence must be finite and >= 0")
        if not (math.isfinite(self.energy_scale) and self.energy_scale > 0):
            raise InvalidArgument("energy scale must be finite and > 0")

    def csv_row(self, ref_path="", cand_path="") -> str:
        return (
            f"{ref_path},{cand_path},{self.spectral_convergence!r},{self.relative_sc!r},"
            f"{self.alignment_lag},{self.energy_scale!r}"
        )


CSV_HEADER = "ref_path,cand_path,sc_eq5,sc_relative,lag_samples,energy_scale"


def align(reference: AudioBuffer, candidate: AudioBuffer, max_lag: int = DEFAULT_MAX_LAG) -> int:
    """Lag (samples) by which ``candidate`` trails ``reference``.

    Maximises |normalised cross-correlation| over ``[-max_lag, max_lag]``;
    ties go to the smaller |lag|, then to the negative lag.
    """
    if reference.sample_rate != candidate.sample_rate:
        raise InvalidArgument(
            f"sample rates differ: {reference.sample_rate} vs {candidate.sample_rate}"
        )
    if len(reference) == 0 or len(candidate) == 0:
        raise InvalidArgument("cannot align an empty signal")
    if max_lag < 0:
        raise InvalidArgument("max_lag must be >= 0")
    x, y = reference.samples, candidate.samples
    norm = np.linalg.norm(x) * np.linalg.norm(y)
    if norm == 0:
        return 0
    # corr[k] = sum_n x[n] * y[n + lag] with lag = k - (len(x) - 1)
    corr = signal.correlate(y, x, mode="full", method="auto")
    lags = signal.correlation_lags(len(y), len(x), mode="full")
    keep = np.abs(lags) <= max_lag
    lags, score = lags[keep], np.abs(corr[keep]) / norm
    best = score.max()
    ties = lags[score >= best - 1e-12 * max(best, 1.0)]
    return int(min(ties, key=lambda lag: (abs(lag), lag > 0)))


def apply_lag(
    reference: AudioBuffer, candidate: AudioBuffer, lag: int
) -> tuple[AudioBuffer, AudioBuffer]:
    """Shift the candidate by ``-lag`` and trim both to the common length."""
    x, y = reference.samples, candidate.samples
    if lag >= 0:
        y = y[lag:]
    else:
        x = x[-lag:]
    n = min(len(x), len(y))
    return AudioBuffer(x[:n], reference.sample_rate), AudioBuffer(y[:n], candidate.sample_rate)


def _check_same_shape(a: PowerSpectrogram, b: PowerSpectrogram):
    if a.frames.shape != b.frames.shape:
        raise InvalidArgument(f"spectrogram shapes differ: {a.frames.shape} vs {b.frames.shape}")


def energy_normalize(ref_power: PowerSpectrogram, cand_power: PowerSpectrogram) -> float:
    """Amplitude factor that gives the candidate the reference's total power."""
    _check_same_shape(ref_power, cand_power)
    cand_total = cand_power.total_energy()
    if not cand_total > 0:
        raise DegenerateCandidate("candidate has zero spectrogram energy")
    return math.sqrt(ref_power.total_energy() / cand_total)


def spectral_convergence(ref_power: PowerSpectrogram, cand_power: PowerSpectrogram) -> float:
    """``sqrt(sum |S - S_hat| / (n + m))`` for m frames by n bins."""
    _check_same_shape(ref_power, cand_power)
    m, n = ref_power.frames.shape
    diff = np.abs(ref_power.frames - cand_power.frames).sum()
    return math.sqrt(diff / (n + m))


def relative_spectral_convergence(
    ref_power: PowerSpectrogram, cand_power: PowerSpectrogram
) -> float:
    """Frobenius-norm magnitude error relative to the reference magnitude."""
    _check_same_shape(ref_power, cand_power)
    ref_mag = np.sqrt(ref_power.frames)
    denom = np.linalg.norm(ref_mag)
    if denom == 0:
        return math.nan
    return float(np.linalg.norm(ref_mag - np.sqrt(cand_power.frames)) / denom)


def evaluate(
    reference: AudioBuffer,
    candidate: AudioBuffer,
    params: StftParams = METRIC_PARAMS,
    max_lag: int = DEFAULT_MAX_LAG,
) -> EvalReport:
    lag = align(reference, candidate, max_lag)
    ref, cand = apply_lag(reference, candidate, lag)
    if len(ref) < params.window_length:
        raise InvalidArgument(
            f"aligned overlap of {len(ref)} samples is shorter than one metric window"
        )
    ref_power = power_spectrogram(stft_with(ref, params))
    scale = energy_normalize(ref_power, power_spectrogram(stft_with(cand, params)))
    cand = AudioBuffer(cand.samples * scale, cand.sample_rate)
    cand_power = power_spectrogram(stft_with(cand, params))
    return EvalReport(
        spectral_convergence(ref_power, cand_power),
        lag,
        scale,
        params,
        relative_spectral_convergence(ref_power, cand_power),
    )


def mel_pseudo_inverse(
    logmel: LogMelSpectrogram, fb: MelFilterbank, ridge: float = RIDGE
) -> np.ndarray:
    """Linear-frequency magnitude estimate (frames x bins) from log-mel.

    Ridge-regularised minimum-norm solution of ``W @ p = e`` per frame,
    clamped at zero.
    """
    if logmel.num_mels != fb.num_mels:
        raise InvalidArgument(f"log-mel has {logmel.num_mels} bands, filterbank {fb.num_mels}")
    if logmel.fft_size != fb.fft_size or logmel.sample_rate != fb.sample_rate:
        raise InvalidArgument("log-mel and filterbank disagree on fft_size/sample_rate")
    W = fb.weights
    gram = W @ W.T + ridge * np.eye(fb.num_mels)
    try:
        coeffs = np.linalg.solve(gram, logmel.mel_power().T)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"mel Gram matrix is singular: {exc}") from exc
    power = (W.T @ coeffs).T
    if not np.all(np.isfinite(power)):
        raise NumericFailure("mel pseudo-inverse produced non-finite values")
    return np.sqrt(np.maximum(power, 0.0))


def magnitude_distance(spec: ComplexSpectrogram, target: np.ndarray) -> float:
    return float(np.linalg.norm(np.abs(spec.frames) - target))


def griffin_lim(
    magnitude,
    params: StftParams,
    iterations: int = 32,
    seed: int = 0,
    sample_rate: int = 16000,
    trace: list | None = None,
) -> AudioBuffer:
    """Classic Griffin-Lim with least-squares overlap-add resynthesis.

    If ``trace`` is a list, the magnitude distance of every iterate is
    appended to it (non-increasing by construction).
    """
    if iterations < 1:
        raise InvalidArgument(f"iterations must be >= 1, got {iterations}")
    target = np.asarray(magnitude, dtype=np.float64)
    if target.ndim != 2 or target.shape[1] != params.fft_size // 2 + 1:
        raise InvalidArgument(f"magnitude must have {params.fft_size // 2 + 1} columns")
    if np.any(target < 0) or not np.all(np.isfinite(target)):
        raise InvalidArgument("magnitude must be finite and >= 0")
    window = params.window()
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=target.shape)

    def rebuild(frames):
        spec = ComplexSpectrogram(
            frames, params.fft_size, params.hop_size, params.window_length, sample_rate
        )
        return istft(spec, window)

    audio = rebuild(target * np.exp(1j * phase))
    for _ in range(iterations):
        spec = stft(audio, window, params.hop_size, params.fft_size)
        if trace is not None:
            trace.append(magnitude_distance(spec, target))
        mag = np.abs(spec.frames)
        unit = np.where(mag > 0, spec.frames / np.where(mag > 0, mag, 1.0), 1.0)
        audio = rebuild(target * unit)
    return audio


def griffin_lim_from_logmel(
    logmel: LogMelSpectrogram,
    fb: MelFilterbank,
    params: StftParams,
    iterations: int = 32,
    seed: int = 0,
) -> AudioBuffer:
    """Baseline reconstruction that consumes the same input as ``invert_mel``."""
    magnitude = mel_pseudo_inverse(logmel, fb)
    return griffin_lim(magnitude, params, iterations, seed, logmel.sample_rate)
