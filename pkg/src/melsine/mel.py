"""Mel scale, mel filterbanks and the log-mel-spectrogram."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .dsp import PowerSpectrogram, _frozen, bin_frequencies, is_power_of_two
from .errors import DegenerateFilterbank, InvalidArgument, ParseError

DEFAULT_LOG_FLOOR_DB = -100.0
FILTER_SHAPES = ("triangular", "rectangular")


def hz_to_mel(f):
    """``2595 * log10(1 + f / 700)``; accepts scalars or arrays."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise InvalidArgument("frequency must be >= 0 Hz")
    m = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(m) if m.ndim == 0 else m


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise InvalidArgument("mel value must be >= 0")
    f = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(f) if f.ndim == 0 else f


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray
    band_edges_hz: np.ndarray
    shape: str
    fmin_hz: float
    fmax_hz: float
    sample_rate: int
    fft_size: int

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights, np.float64))
        object.__setattr__(self, "band_edges_hz", _frozen(self.band_edges_hz, np.float64))
        if self.weights.shape != (self.num_mels, self.fft_size // 2 + 1):
            raise InvalidArgument("weights shape does not match band edges / fft_size")

    @property
    def num_mels(self) -> int:
        return self.band_edges_hz.shape[0] - 2

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def support(self, band: int) -> tuple[float, float]:
        """Half-open rectangular support ``[edge_b, edge_{b+2})`` of a band."""
        return float(self.band_edges_hz[band]), float(self.band_edges_hz[band + 2])

    def center(self, band: int) -> float:
        return float(self.band_edges_hz[band + 1])


def build_filterbank(
    num_mels: int = 80,
    fft_size: int = 1024,
    sample_rate: int = 16000,
    fmin: float = 0.0,
    fmax: float | None = None,
    shape: str = "triangular",
) -> MelFilterbank:
    nyquist = sample_rate / 2.0
    if fmax is None:
        fmax = nyquist
    if num_mels < 1:
        raise InvalidArgument(f"num_mels must be >= 1, got {num_mels}")
    if not is_power_of_two(fft_size):
        raise InvalidArgument(f"fft_size must be a power of two, got {fft_size}")
    if shape not in FILTER_SHAPES:
        raise InvalidArgument(f"unknown filter shape {shape!r}")
    if fmax > nyquist:
        raise InvalidArgument(f"fmax {fmax} Hz exceeds Nyquist {nyquist} Hz")
    if not 0 <= fmin < fmax:
        raise InvalidArgument(f"need 0 <= fmin < fmax, got fmin={fmin} fmax={fmax}")

    mels = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), num_mels + 2)
    edges = mel_to_hz(mels)
    # pin the end points exactly
    edges[0], edges[-1] = fmin, fmax
    freqs = bin_frequencies(fft_size, sample_rate)

    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    if shape == "triangular":
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        weights = np.maximum(0.0, np.minimum(rising, falling))
    else:
        weights = ((freqs >= lo) & (freqs < hi)).astype(np.float64)

    empty = np.flatnonzero(weights.max(axis=1) <= 0)
    if empty.size:
        raise DegenerateFilterbank(int(empty[0]))
    return MelFilterbank(weights, edges, shape, float(fmin), float(fmax), sample_rate, fft_size)


@dataclass(frozen=True)
class LogMelSpectrogram:
    frames: np.ndarray
    hop_size: int
    window_length: int
    fft_size: int
    sample_rate: int
    log_floor_db: float = DEFAULT_LOG_FLOOR_DB

    def __post_init__(self):
        frames = _frozen(self.frames, np.float64)
        if frames.ndim != 2:
            raise InvalidArgument("log-mel frames must be a 2-D matrix")
        if not np.all(np.isfinite(frames)):
            raise InvalidArgument("log-mel frames contain NaN or Inf")
        if np.any(frames < self.log_floor_db):
            raise InvalidArgument("log-mel values below log_floor_db")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_mels(self) -> int:
        return self.frames.shape[1]

    def mel_power(self) -> np.ndarray:
        return 10.0 ** (self.frames / 10.0)


def log_mel(
    power: PowerSpectrogram, fb: MelFilterbank, log_floor_db: float = DEFAULT_LOG_FLOOR_DB
) -> LogMelSpectrogram:
    if power.num_bins != fb.num_bins:
        raise InvalidArgument(
            f"power spectrogram has {power.num_bins} bins, filterbank expects {fb.num_bins}"
        )
    if power.sample_rate != fb.sample_rate or power.fft_size != fb.fft_size:
        raise InvalidArgument("power spectrogram and filterbank disagree on sample_rate/fft_size")
    energy = power.frames @ fb.weights.T
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(energy)
    db = np.maximum(db, log_floor_db)
    return LogMelSpectrogram(
        db, power.hop_size, power.window_length, power.fft_size, power.sample_rate, log_floor_db
    )


# --- serialization ---------------------------------------------------------

_MAGIC = b"MELS"
_HEADER = struct.Struct("<4sIIIIIIIf")


def _csv_header(spec: LogMelSpectrogram) -> str:
    return (
        f"#melspec v1 num_mels={spec.num_mels} hop={spec.hop_size} "
        f"win={spec.window_length} fft={spec.fft_size} sr={spec.sample_rate} "
        f"floor_db={spec.log_floor_db!r}"
    )


def to_csv(spec: LogMelSpectrogram) -> str:
    out = io.StringIO()
    out.write(_csv_header(spec) + "\n")
    for row in spec.frames:
        out.write(",".join(repr(float(v)) for v in row) + "\n")
    return out.getvalue()


def from_csv(text: str) -> LogMelSpectrogram:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#melspec v1"):
        raise ParseError("missing '#melspec v1' header line")
    meta = {}
    for token in lines[0].split()[2:]:
        key, _, value = token.partition("=")
        meta[key] = value
    try:
        num_mels = int(meta["num_mels"])
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
        frames = np.array(rows, dtype=np.float64).reshape(len(rows), num_mels)
        return LogMelSpectrogram(
            frames,
            hop_size=int(meta["hop"]),
            window_length=int(meta["win"]),
            fft_size=int(meta["fft"]),
            sample_rate=int(meta["sr"]),
            log_floor_db=float(meta["floor_db"]),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed melspec CSV: {exc}") from exc


def to_bytes(spec: LogMelSpectrogram) -> bytes:
    header = _HEADER.pack(
        _MAGIC,
        1,
        spec.num_frames,
        spec.num_mels,
        spec.sample_rate,
        spec.hop_size,
        spec.window_length,
        spec.fft_size,
        spec.log_floor_db,
    )
    return header + spec.frames.astype("<f4").tobytes()


def from_bytes(data: bytes) -> LogMelSpectrogram:
    if len(data) < _HEADER.size:
        raise ParseError("melspec file shorter than its header", offset=len(data))
    magic, version, rows, cols, sr, hop, win, fft, floor_db = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ParseError(f"bad magic {magic!r}", offset=0)
    if version != 1:
        raise ParseError(f"unsupported melspec version {version}", offset=4)
    expected = _HEADER.size + 4 * rows * cols
    if len(data) != expected:
        raise ParseError(f"expected {expected} bytes, found {len(data)}", offset=_HEADER.size)
    frames = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    # floor_db itself went through f32; keep the clamp consistent with it
    frames = np.maximum(frames.astype(np.float64), float(floor_db))
    return LogMelSpectrogram(frames, hop, win, fft, sr, float(floor_db))


def write_melspec(path, spec: LogMelSpectrogram) -> None:
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(to_csv(spec))
    else:
        with open(path, "wb") as fh:
            fh.write(to_bytes(spec))


def read_melspec(path) -> LogMelSpectrogram:
    path = str(path)
    if path.endswith(".csv"):
        with open(path, encoding="utf-8") as fh:
            return from_csv(fh.read())
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
