"""YIN pitch tracking aligned to STFT framing, plus the inter-frame
continuity repair used before harmonic synthesis."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .dsp import AudioBuffer, frame_signal
from .errors import InvalidArgument, ParseError

DEFAULT_FMIN = 80.0
DEFAULT_FMAX = 3000.0
DEFAULT_THRESHOLD = 0.1
DEFAULT_TOLERANCE = 0.06


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame f0 in Hz; ``nan`` marks an unvoiced frame."""

    f0_hz: np.ndarray
    hop_size: int
    window_length: int
    sample_rate: int
    search_min_hz: float = DEFAULT_FMIN
    search_max_hz: float = DEFAULT_FMAX

    def __post_init__(self):
        f0 = np.array(self.f0_hz, dtype=np.float64).reshape(-1)
        voiced = ~np.isnan(f0)
        # a tiny slack absorbs the float error of sr / tau at the lag limits
        lo = self.search_min_hz * (1 - 1e-9)
        hi = self.search_max_hz * (1 + 1e-9)
        if np.any((f0[voiced] < lo) | (f0[voiced] > hi)):
            raise InvalidArgument(
                f"voiced f0 outside [{self.search_min_hz}, {self.search_max_hz}] Hz"
            )
        f0.setflags(write=False)
        object.__setattr__(self, "f0_hz", f0)

    def __len__(self):
        return self.f0_hz.shape[0]

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0_hz)

    def replace_f0(self, f0_hz) -> "PitchTrack":
        return PitchTrack(
            f0_hz,
            self.hop_size,
            self.window_length,
            self.sample_rate,
            self.search_min_hz,
            self.search_max_hz,
        )


def _check_search_range(sample_rate, fmin, fmax):
    if not 0 < fmin < fmax:
        raise InvalidArgument(f"need 0 < fmin < fmax, got fmin={fmin} fmax={fmax}")
    if fmax > sample_rate / 2:
        raise InvalidArgument(f"fmax {fmax} Hz exceeds Nyquist {sample_rate / 2} Hz")


def difference_function(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """YIN difference d(tau) for tau in [0, max_lag] over a fixed
    integration window of ``len(frame) - max_lag`` samples."""
    W = frame.shape[0] - max_lag
    base = frame[:W]
    shifted = np.lib.stride_tricks.sliding_window_view(frame, W)[: max_lag + 1]
    diff = shifted - base
    return np.einsum("ij,ij->i", diff, diff)


def cumulative_mean_normalized(d: np.ndarray) -> np.ndarray:
    out = np.ones_like(d)
    csum = np.cumsum(d[1:])
    tau = np.arange(1, d.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = d[1:] * tau / csum
    out[1:] = np.where(csum > 0, ratio, 1.0)
    return out


def _parabolic_offset(d: np.ndarray, tau: int) -> float:
    if tau <= 0 or tau >= d.shape[0] - 1:
        return 0.0
    a, b, c = d[tau - 1], d[tau], d[tau + 1]
    denom = a - 2.0 * b + c
    if denom <= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def yin_frame(
    frame,
    sample_rate: int,
    fmin: float = DEFAULT_FMIN,
    fmax: float = DEFAULT_FMAX,
    threshold: float = DEFAULT_THRESHOLD,
) -> float | None:
    """Estimate f0 of one frame; returns ``None`` when unvoiced."""
    _check_search_range(sample_rate, fmin, fmax)
    frame = np.asarray(frame, dtype=np.float64)
    tau_lo = max(2, math.ceil(sample_rate / fmax))
    tau_hi = math.floor(sample_rate / fmin)
    if frame.shape[0] < tau_hi + 2:
        raise InvalidArgument(
            f"frame of {frame.shape[0]} samples is too short for fmin={fmin} Hz "
            f"(needs at least {tau_hi + 2})"
        )
    if not np.any(frame):
        return None

    d = difference_function(frame, tau_hi + 1)
    cmnd = cumulative_mean_normalized(d)

    tau = None
    below = np.flatnonzero(cmnd[tau_lo : tau_hi + 1] < threshold)
    if below.size:
        tau = tau_lo + int(below[0])
        # walk down to the bottom of the dip
        while tau < tau_hi and cmnd[tau + 1] < cmnd[tau]:
            tau += 1
    else:
        best = tau_lo + int(np.argmin(cmnd[tau_lo : tau_hi + 1]))
        if cmnd[best] < 2.0 * threshold:
            tau = best
    if tau is None:
        return None

    refined = tau + _parabolic_offset(d, tau)
    refined = min(max(refined, sample_rate / fmax), sample_rate / fmin)
    return sample_rate / refined


def track_pitch(
    audio: AudioBuffer,
    window_length: int = 1024,
    hop_size: int = 256,
    fmin: float = DEFAULT_FMIN,
    fmax: float = DEFAULT_FMAX,
    threshold: float = DEFAULT_THRESHOLD,
) -> PitchTrack:
    """Run :func:`yin_frame` on exactly the frames ``stft`` would produce."""
    _check_search_range(audio.sample_rate, fmin, fmax)
    if not 0 < hop_size <= window_length:
        raise InvalidArgument(f"need 0 < hop_size <= window_length, got {hop_size}, {window_length}")
    frames = frame_signal(audio.samples, window_length, hop_size)
    f0 = np.full(frames.shape[0], np.nan)
    for t, frame in enumerate(frames):
        est = yin_frame(frame, audio.sample_rate, fmin, fmax, threshold)
        if est is not None:
            f0[t] = est
    return PitchTrack(f0, hop_size, window_length, audio.sample_rate, fmin, fmax)


def enforce_continuity(track: PitchTrack, tolerance: float = DEFAULT_TOLERANCE) -> PitchTrack:
    """Replace voiced frames that jump more than ``tolerance`` (relative)
    away from the last accepted voiced value with that value."""
    if not tolerance > 0:
        raise InvalidArgument(f"tolerance must be > 0, got {tolerance}")
    out = np.array(track.f0_hz, copy=True)
    prev = None
    for i, f in enumerate(out):
        if np.isnan(f):
            continue
        if prev is not None and abs(f - prev) / prev > tolerance:
            out[i] = prev
        else:
            prev = f
    return track.replace_f0(out)


# --- serialization ---------------------------------------------------------


def to_csv(track: PitchTrack) -> str:
    out = io.StringIO()
    out.write(
        f"#pitch v1 hop={track.hop_size} win={track.window_length} sr={track.sample_rate}\n"
    )
    out.write("frame_index,f0_hz\n")
    for i, f in enumerate(track.f0_hz):
        out.write(f"{i},{'' if np.isnan(f) else repr(float(f))}\n")
    return out.getvalue()


def from_csv(text: str, fmin: float = DEFAULT_FMIN, fmax: float = DEFAULT_FMAX) -> PitchTrack:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#pitch v1"):
        raise ParseError("missing '#pitch v1' header line")
    meta = dict(tok.partition("=")[::2] for tok in lines[0].split()[2:])
    f0 = []
    try:
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip() or line.startswith("frame_index"):
                continue
            index, _, value = line.partition(",")
            if int(index) != len(f0):
                raise ParseError(f"line {lineno}: frame index {index} out of sequence")
            f0.append(float(value) if value.strip() else math.nan)
        return PitchTrack(
            np.array(f0), int(meta["hop"]), int(meta["win"]), int(meta["sr"]), fmin, fmax
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed pitch CSV: {exc}") from exc


def write_pitch(path, track: PitchTrack) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_csv(track))


def read_pitch(path, fmin: float = DEFAULT_FMIN, fmax: float = DEFAULT_FMAX) -> PitchTrack:
    with open(path, encoding="utf-8") as fh:
        return from_csv(fh.read(), fmin, fmax)
