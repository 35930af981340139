"""Windows, DFT helpers, and STFT / ISTFT primitives.

Frames start at sample 0 (no centre padding): frame ``t`` covers samples
``[t * hop, t * hop + window_length)`` and its centre sits at
``t * hop + window_length / 2``.  Spectra are stored one-sided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

WINDOW_KINDS = ("blackman", "hann", "rectangular")

# exact Blackman cosine-sum coefficients
_BLACKMAN = (0.42, 0.5, 0.08)


def _frozen(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono signal plus its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = _frozen(self.samples, np.float64)
        if samples.ndim != 1:
            raise InvalidArgument("audio must be a 1-D mono sample sequence")
        if int(self.sample_rate) <= 0:
            raise InvalidArgument(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgument("audio contains NaN or Inf samples")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class WindowVector:
    coefficients: np.ndarray
    kind: str
    normalized: bool

    def __post_init__(self):
        coefficients = _frozen(self.coefficients, np.float64)
        if coefficients.ndim != 1 or coefficients.size < 1:
            raise InvalidArgument("window must have at least one coefficient")
        if not np.all(np.isfinite(coefficients)) or np.any(coefficients < 0):
            raise InvalidArgument("window coefficients must be finite and non-negative")
        object.__setattr__(self, "coefficients", coefficients)

    def __len__(self):
        return self.coefficients.shape[0]


def make_window(kind: str, length: int, normalized: bool = False) -> WindowVector:
    """Build a symmetric window (denominator ``length - 1``).

    With ``normalized=True`` the coefficients are divided by their sum.
    """
    if kind not in WINDOW_KINDS:
        raise InvalidArgument(f"unknown window kind {kind!r}")
    if length < 1:
        raise InvalidArgument(f"window length must be >= 1, got {length}")
    if length == 1 or kind == "rectangular":
        w = np.ones(length)
    else:
        # length 2 is all zeros in symmetric form; use the periodic one there
        denom = length - 1 if length > 2 else length
        phase = 2.0 * np.pi * np.arange(length) / denom
        if kind == "hann":
            w = 0.5 - 0.5 * np.cos(phase)
        else:
            a0, a1, a2 = _BLACKMAN
            w = a0 - a1 * np.cos(phase) + a2 * np.cos(2.0 * phase)
        # the Blackman endpoints evaluate to about -1e-17
        w = np.maximum(w, 0.0)
    if normalized:
        w = w / w.sum()
    return WindowVector(w, kind, normalized)


@dataclass(frozen=True)
class StftParams:
    """Framing parameters plus the analysis window recipe."""

    window_length: int = 1024
    hop_size: int = 256
    fft_size: int = 1024
    window_kind: str = "blackman"
    normalized: bool = True

    def __post_init__(self):
        if not 0 < self.hop_size <= self.window_length <= self.fft_size:
            raise InvalidArgument(
                "need 0 < hop_size <= window_length <= fft_size, got "
                f"hop_size={self.hop_size} window_length={self.window_length} "
                f"fft_size={self.fft_size}"
            )
        if not is_power_of_two(self.fft_size):
            raise InvalidArgument(f"fft_size must be a power of two, got {self.fft_size}")
        if self.window_kind not in WINDOW_KINDS:
            raise InvalidArgument(f"unknown window kind {self.window_kind!r}")

    def window(self) -> WindowVector:
        return make_window(self.window_kind, self.window_length, self.normalized)

    def num_frames(self, num_samples: int) -> int:
        if num_samples < self.window_length:
            return 0
        return 1 + (num_samples - self.window_length) // self.hop_size

    def signal_length(self, num_frames: int) -> int:
        """Shortest signal length that yields ``num_frames`` frames."""
        return (num_frames - 1) * self.hop_size + self.window_length


@dataclass(frozen=True)
class ComplexSpectrogram:
    frames: np.ndarray
    fft_size: int
    hop_size: int
    window_length: int
    sample_rate: int

    def __post_init__(self):
        frames = _frozen(self.frames, np.complex128)
        _check_frame_shape(frames, self.fft_size, self.hop_size, self.window_length)
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class PowerSpectrogram:
    frames: np.ndarray
    fft_size: int
    hop_size: int
    window_length: int
    sample_rate: int

    def __post_init__(self):
        frames = _frozen(self.frames, np.float64)
        _check_frame_shape(frames, self.fft_size, self.hop_size, self.window_length)
        if not np.all(np.isfinite(frames)) or np.any(frames < 0):
            raise InvalidArgument("power spectrogram entries must be finite and >= 0")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]

    def total_energy(self) -> float:
        return float(self.frames.sum())


def _check_frame_shape(frames, fft_size, hop_size, window_length):
    if not 0 < hop_size <= window_length <= fft_size:
        raise InvalidArgument("need 0 < hop_size <= window_length <= fft_size")
    if frames.ndim != 2 or frames.shape[1] != fft_size // 2 + 1:
        raise InvalidArgument(
            f"expected frames of shape (T, {fft_size // 2 + 1}), got {frames.shape}"
        )


def dft(frame, fft_size: int) -> np.ndarray:
    """Full complex spectrum of ``frame`` zero-padded to ``fft_size``."""
    frame = np.asarray(frame)
    if not is_power_of_two(fft_size):
        raise InvalidArgument(f"fft_size must be a power of two, got {fft_size}")
    if frame.ndim != 1 or frame.shape[0] > fft_size:
        raise InvalidArgument("frame must be 1-D and no longer than fft_size")
    return np.fft.fft(frame, n=fft_size)


def idft(spectrum) -> np.ndarray:
    """Inverse of :func:`dft`; returns a complex sequence."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    if not is_power_of_two(spectrum.shape[0]):
        raise InvalidArgument(f"size must be a power of two, got {spectrum.shape[0]}")
    return np.fft.ifft(spectrum)


def frame_signal(samples: np.ndarray, window_length: int, hop_size: int) -> np.ndarray:
    """Strided view of shape ``(num_frames, window_length)``."""
    if samples.shape[0] < window_length:
        raise InvalidArgument(
            f"audio has {samples.shape[0]} samples, shorter than one window ({window_length})"
        )
    windows = np.lib.stride_tricks.sliding_window_view(samples, window_length)
    return windows[::hop_size]


def stft(
    audio: AudioBuffer, window: WindowVector, hop_size: int, fft_size: int
) -> ComplexSpectrogram:
    L = len(window)
    if L > fft_size:
        raise InvalidArgument(f"window length {L} exceeds fft_size {fft_size}")
    if not is_power_of_two(fft_size):
        raise InvalidArgument(f"fft_size must be a power of two, got {fft_size}")
    if not 0 < hop_size <= L:
        raise InvalidArgument(f"hop_size must be in [1, {L}], got {hop_size}")
    frames = frame_signal(audio.samples, L, hop_size) * window.coefficients
    spec = np.fft.rfft(frames, n=fft_size, axis=1)
    return ComplexSpectrogram(spec, fft_size, hop_size, L, audio.sample_rate)


def stft_with(audio: AudioBuffer, params: StftParams) -> ComplexSpectrogram:
    return stft(audio, params.window(), params.hop_size, params.fft_size)


def istft(spec: ComplexSpectrogram, window: WindowVector) -> AudioBuffer:
    """Least-squares overlap-add inverse (window-squared normalisation).

    Samples no frame can see (sum of squared windows ~ 0) come out as 0.
    """
    L = spec.window_length
    if len(window) != L:
        raise InvalidArgument("window length does not match the spectrogram")
    w = window.coefficients
    T = spec.num_frames
    n = (T - 1) * spec.hop_size + L
    frames = np.fft.irfft(spec.frames, n=spec.fft_size, axis=1)[:, :L] * w
    out = np.zeros(n)
    norm = np.zeros(n)
    w2 = w * w
    for t in range(T):
        start = t * spec.hop_size
        out[start : start + L] += frames[t]
        norm[start : start + L] += w2
    tiny = np.finfo(float).tiny * 1e3 + 1e-12 * w2.max()
    nz = norm > tiny
    out[nz] /= norm[nz]
    out[~nz] = 0.0
    return AudioBuffer(out, spec.sample_rate)


def power_spectrogram(spec: ComplexSpectrogram) -> PowerSpectrogram:
    frames = spec.frames.real ** 2 + spec.frames.imag ** 2
    return PowerSpectrogram(
        frames, spec.fft_size, spec.hop_size, spec.window_length, spec.sample_rate
    )


def bin_frequencies(fft_size: int, sample_rate: int) -> np.ndarray:
    return np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
