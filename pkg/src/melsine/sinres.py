"""Harmonic sinusoidal resynthesis from a log-mel-spectrogram and a pitch track.

Partial frequencies are integer multiples of the frame's f0, amplitudes are
read back out of the mel bands through a rectangular approximation of each
filter, and phases are accumulated across frames with the trapezoidal rule
so the oscillators never jump.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .dsp import AudioBuffer, StftParams, WindowVector, make_window, power_spectrogram, stft
from .errors import CalibrationFailure, InvalidArgument
from .mel import LogMelSpectrogram, MelFilterbank, log_mel
from .pitch import DEFAULT_TOLERANCE, PitchTrack, enforce_continuity

TWO_PI = 2.0 * math.pi
PEAK_LIMIT = 0.99


def wrap_phase(phase):
    """Wrap to ``[0, 2*pi)``."""
    out = np.mod(phase, TWO_PI)
    # np.mod can round up to exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HarmonicFrame:
    f0_hz: float | None
    partial_freqs_hz: np.ndarray
    partial_amps: np.ndarray
    partial_phases_rad: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.partial_freqs_hz, dtype=np.float64)
        amps = np.asarray(self.partial_amps, dtype=np.float64)
        phases = np.asarray(self.partial_phases_rad, dtype=np.float64)
        if not freqs.shape == amps.shape == phases.shape or freqs.ndim != 1:
            raise InvalidArgument("partial frequency/amplitude/phase lengths differ")
        if not np.all(np.isfinite(amps)) or np.any(amps < 0):
            raise InvalidArgument("partial amplitudes must be finite and >= 0")
        if self.f0_hz is None and freqs.size:
            raise InvalidArgument("an unvoiced frame cannot carry partials")
        for name, arr in (("partial_freqs_hz", freqs), ("partial_amps", amps),
                          ("partial_phases_rad", phases)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_partials(self) -> int:
        return self.partial_freqs_hz.shape[0]


@dataclass(frozen=True)
class HarmonicFrameSet:
    frames: tuple
    hop_size: int
    sample_rate: int

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise InvalidArgument("a frame set needs at least one frame")
        nyquist = self.sample_rate / 2
        for n, fr in enumerate(frames):
            if fr.num_partials and fr.partial_freqs_hz.max() >= nyquist:
                raise InvalidArgument(f"frame {n} has a partial at or above Nyquist")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)

    @property
    def max_partials(self) -> int:
        return max(fr.num_partials for fr in self.frames)


@dataclass(frozen=True)
class AmplitudeCalibration:
    """Linear amplitude per square root of mel power."""

    scale: float

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise InvalidArgument(f"calibration scale must be finite and > 0, got {self.scale}")


UNIT_CALIBRATION = AmplitudeCalibration(1.0)


def harmonic_frequencies(f0: float, sample_rate: int) -> np.ndarray:
    """``[f0, 2*f0, ...]`` strictly below Nyquist."""
    nyquist = sample_rate / 2
    if not 0 < f0 < nyquist:
        raise InvalidArgument(f"f0 must lie in (0, {nyquist}) Hz, got {f0}")
    count = math.floor(nyquist / f0)
    if count * f0 >= nyquist:
        count -= 1
    return f0 * np.arange(1, count + 1, dtype=np.float64)


def containing_bands(fb: MelFilterbank, freqs) -> np.ndarray:
    """Boolean matrix (bands x freqs): band's rectangular support holds freq."""
    freqs = np.asarray(freqs, dtype=np.float64)
    lo = fb.band_edges_hz[:-2, None]
    hi = fb.band_edges_hz[2:, None]
    return (freqs[None, :] >= lo) & (freqs[None, :] < hi)


def estimate_amplitudes(
    logmel_frame,
    fb: MelFilterbank,
    partial_freqs,
    calib: AmplitudeCalibration = UNIT_CALIBRATION,
) -> np.ndarray:
    """Per-partial linear amplitudes from one log-mel frame.

    A band's power is split evenly among the partials inside its
    rectangular support; a partial's amplitude is the mean of the
    per-band estimates over every band that contains it.
    """
    logmel_frame = np.asarray(logmel_frame, dtype=np.float64)
    partial_freqs = np.asarray(partial_freqs, dtype=np.float64)
    if logmel_frame.shape != (fb.num_mels,):
        raise InvalidArgument(
            f"log-mel frame has {logmel_frame.shape} bands, filterbank has {fb.num_mels}"
        )
    if partial_freqs.size == 0:
        return np.zeros(0)
    if np.any(partial_freqs >= fb.sample_rate / 2):
        raise InvalidArgument("partial frequencies must lie below Nyquist")

    member = containing_bands(fb, partial_freqs)
    k = member.sum(axis=1)
    band_power = 10.0 ** (logmel_frame / 10.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_partial = np.where(k > 0, band_power / np.maximum(k, 1), 0.0)
    band_amp = calib.scale * np.sqrt(per_partial)
    hits = member.sum(axis=0)
    total = band_amp @ member
    return np.where(hits > 0, total / np.maximum(hits, 1), 0.0)


def reference_tone(freq: float, params: StftParams, sample_rate: int, num_frames: int = 16):
    n = params.signal_length(num_frames)
    t = np.arange(n) / sample_rate
    return AudioBuffer(np.cos(TWO_PI * freq * t), sample_rate)


def _median_estimate(
    audio: AudioBuffer,
    freq: float,
    fb: MelFilterbank,
    params: StftParams,
    window: WindowVector,
    calib: AmplitudeCalibration,
    log_floor_db: float = -100.0,
) -> float:
    spec = log_mel(
        power_spectrogram(stft(audio, window, params.hop_size, params.fft_size)),
        fb,
        log_floor_db,
    )
    estimates = np.array(
        [estimate_amplitudes(row, fb, [freq], calib)[0] for row in spec.frames]
    )
    interior = estimates[2:-2] if estimates.size > 4 else estimates
    return float(np.median(interior))


def calibrate(
    fb: MelFilterbank,
    params: StftParams | None = None,
    window: WindowVector | None = None,
    reference_band: int | None = None,
) -> AmplitudeCalibration:
    """Pin the mel-power to amplitude scale with a unit-amplitude reference
    cosine at the centre of a mid-range band."""
    if params is None:
        params = StftParams(fft_size=fb.fft_size)
    if window is None:
        window = params.window()
    if params.fft_size != fb.fft_size:
        raise InvalidArgument("filterbank and STFT parameters disagree on fft_size")
    band = fb.num_mels // 2 if reference_band is None else reference_band
    freq = fb.center(band)
    if not 0 < freq < fb.sample_rate / 2:
        raise CalibrationFailure(f"reference band {band} has unusable centre {freq} Hz")
    tone = reference_tone(freq, params, fb.sample_rate)
    est = _median_estimate(tone, freq, fb, params, window, UNIT_CALIBRATION)
    if not (math.isfinite(est) and est > 0):
        raise CalibrationFailure(f"reference tone at {freq:.1f} Hz re-estimated to {est}")
    return AmplitudeCalibration(1.0 / est)


def accumulate_phase(prev_phase, f_prev, f_cur, hop_seconds: float):
    """Advance a phase by the trapezoidal integral of frequency over one hop.

    Works elementwise on arrays of partials as well as on scalars.
    """
    return wrap_phase(prev_phase + TWO_PI * hop_seconds * (f_prev + f_cur) / 2.0)


def build_frames(
    logmel: LogMelSpectrogram,
    pitch: PitchTrack,
    fb: MelFilterbank,
    calib: AmplitudeCalibration,
) -> HarmonicFrameSet:
    if logmel.num_frames != len(pitch):
        raise InvalidArgument(
            f"log-mel has {logmel.num_frames} frames but the pitch track has {len(pitch)}"
        )
    if (logmel.hop_size, logmel.window_length, logmel.sample_rate) != (
        pitch.hop_size,
        pitch.window_length,
        pitch.sample_rate,
    ):
        raise InvalidArgument("log-mel and pitch track framing metadata differ")
    if logmel.num_mels != fb.num_mels or logmel.sample_rate != fb.sample_rate:
        raise InvalidArgument("log-mel does not match the filterbank")

    sr = logmel.sample_rate
    hop_seconds = logmel.hop_size / sr
    frames = []
    prev_freqs = np.zeros(0)
    prev_phases = np.zeros(0)
    for n, f0 in enumerate(pitch.f0_hz):
        if np.isnan(f0):
            freqs = np.zeros(0)
            amps = np.zeros(0)
            phases = np.zeros(0)
            frames.append(HarmonicFrame(None, freqs, amps, phases))
        else:
            freqs = harmonic_frequencies(float(f0), sr)
            amps = estimate_amplitudes(logmel.frames[n], fb, freqs, calib)
            phases = np.zeros(freqs.shape[0])
            # partials alive in the previous frame keep integrating; new ones start at 0
            carried = min(prev_freqs.shape[0], freqs.shape[0])
            if carried:
                phases[:carried] = accumulate_phase(
                    prev_phases[:carried], prev_freqs[:carried], freqs[:carried], hop_seconds
                )
            frames.append(HarmonicFrame(float(f0), freqs, amps, phases))
        prev_freqs, prev_phases = freqs, phases
    return HarmonicFrameSet(tuple(frames), logmel.hop_size, sr)


def _partial_table(frames: HarmonicFrameSet):
    """Dense (frames x partials) tables with NaN frequency where absent."""
    T, P = len(frames), frames.max_partials
    freq = np.full((T, P), np.nan)
    amp = np.zeros((T, P))
    phase = np.zeros((T, P))
    for n, fr in enumerate(frames.frames):
        k = fr.num_partials
        freq[n, :k] = fr.partial_freqs_hz
        amp[n, :k] = fr.partial_amps
        phase[n, :k] = fr.partial_phases_rad
    return freq, amp, phase


def synthesize(frames: HarmonicFrameSet) -> AudioBuffer:
    """Render a frame set as a sum of cosines, ``hop_size`` samples per frame.

    Frequency and amplitude move linearly from one frame to the next, the
    phase is the exact integral of that frequency ramp, and partials fade
    in over their first frame and out over their last one.
    """
    T, hop, sr = len(frames), frames.hop_size, frames.sample_rate
    out = np.zeros((T, hop))
    P = frames.max_partials
    if P == 0:
        return AudioBuffer(out.reshape(-1), sr)

    freq, amp, phase = _partial_table(frames)
    present = ~np.isnan(freq)
    nxt_present = np.zeros_like(present)
    nxt_present[:-1] = present[1:]
    prv_present = np.zeros_like(present)
    prv_present[1:] = present[:-1]
    last = np.zeros_like(present)
    last[-1] = True

    f0 = np.where(present, freq, 0.0)
    f1 = np.empty_like(f0)
    f1[:-1] = np.where(nxt_present[:-1], f0[1:], f0[:-1])
    f1[-1] = f0[-1]

    a0 = np.where(present & prv_present, amp, 0.0)
    a1 = np.zeros_like(a0)
    a1[:-1] = np.where(nxt_present[:-1], amp[1:], 0.0)
    a1 = np.where(last & present, amp, a1)

    j = np.arange(hop) / hop
    for p in range(P):
        rows = np.flatnonzero(present[:, p])
        if rows.size == 0:
            continue
        fa, fb_ = f0[rows, p, None], f1[rows, p, None]
        inst_phase = phase[rows, p, None] + TWO_PI * hop / sr * (
            fa * j + (fb_ - fa) * j * j / 2.0
        )
        env = a0[rows, p, None] + (a1[rows, p, None] - a0[rows, p, None]) * j
        out[rows] += env * np.cos(inst_phase)

    samples = out.reshape(-1)
    peak = np.max(np.abs(samples))
    if peak > 1.0:
        samples = samples * (PEAK_LIMIT / peak)
    return AudioBuffer(samples, sr)


def invert_mel(
    logmel: LogMelSpectrogram,
    pitch: PitchTrack,
    fb: MelFilterbank,
    window: WindowVector | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> AudioBuffer:
    """calibrate -> continuity repair -> harmonic frames -> synthesis."""
    params = StftParams(logmel.window_length, logmel.hop_size, logmel.fft_size)
    if window is None:
        window = make_window("blackman", logmel.window_length, normalized=True)
    calib = calibrate(fb, params, window)
    track = enforce_continuity(pitch, tolerance)
    return synthesize(build_frames(logmel, track, fb, calib))


def dump_frames_csv(frames: HarmonicFrameSet) -> str:
    out = io.StringIO()
    out.write("frame,partial_index,freq_hz,amp,phase_rad\n")
    for n, fr in enumerate(frames.frames):
        for i in range(fr.num_partials):
            out.write(
                f"{n},{i},{float(fr.partial_freqs_hz[i])!r},{float(fr.partial_amps[i])!r},"
                f"{float(fr.partial_phases_rad[i])!r}\n"
            )
    return out.getvalue()
