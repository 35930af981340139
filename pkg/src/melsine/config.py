"""Pipeline configuration: defaults, file loading and cross-field checks."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dsp import StftParams, WindowVector, is_power_of_two, make_window
from .errors import InvalidArgument


@dataclass(frozen=True)
class PipelineConfig:
    sample_rate: int = 16000
    num_mels: int = 80
    window_length: int = 1024
    hop_size: int = 256
    fft_size: int = 1024
    analysis_window: str = "blackman"
    f0_min: float = 80.0
    f0_max: float = 3000.0
    yin_threshold: float = 0.1
    continuity_tolerance: float = 0.06
    log_floor_db: float = -100.0
    griffinlim_iterations: int = 32
    griffinlim_seed: int = 0
    align_max_lag: int = 1024

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, first, second, detail):
            if not cond:
                raise InvalidArgument(f"{first} / {second}: {detail}")

        need(self.sample_rate > 0, "sample_rate", "sample_rate", "must be positive")
        need(self.num_mels >= 1, "num_mels", "num_mels", "must be >= 1")
        need(self.hop_size > 0, "hop_size", "hop_size", "must be positive")
        need(
            self.hop_size <= self.window_length,
            "hop_size",
            "window_length",
            f"hop_size ({self.hop_size}) must not exceed window_length ({self.window_length})",
        )
        need(
            self.window_length <= self.fft_size,
            "window_length",
            "fft_size",
            f"window_length ({self.window_length}) must not exceed fft_size ({self.fft_size})",
        )
        need(is_power_of_two(self.fft_size), "fft_size", "fft_size", "must be a power of two")
        need(
            self.analysis_window in ("blackman", "hann", "rectangular"),
            "analysis_window",
            "analysis_window",
            f"unknown window {self.analysis_window!r}",
        )
        need(
            0 < self.f0_min < self.f0_max,
            "f0_min",
            "f0_max",
            f"need 0 < f0_min ({self.f0_min}) < f0_max ({self.f0_max})",
        )
        need(
            self.f0_max <= self.sample_rate / 2,
            "f0_max",
            "sample_rate",
            f"f0_max ({self.f0_max}) exceeds Nyquist of sample_rate ({self.sample_rate})",
        )
        need(
            self.window_length >= self.sample_rate / self.f0_min + 2,
            "window_length",
            "f0_min",
            f"window_length ({self.window_length}) too short for f0_min ({self.f0_min} Hz)",
        )
        need(self.yin_threshold > 0, "yin_threshold", "yin_threshold", "must be positive")
        need(
            self.continuity_tolerance > 0,
            "continuity_tolerance",
            "continuity_tolerance",
            "must be positive",
        )
        need(
            self.griffinlim_iterations >= 1,
            "griffinlim_iterations",
            "griffinlim_iterations",
            "must be >= 1",
        )
        need(self.align_max_lag >= 0, "align_max_lag", "align_max_lag", "must be >= 0")

    @property
    def stft_params(self) -> StftParams:
        return StftParams(
            self.window_length, self.hop_size, self.fft_size, self.analysis_window, True
        )

    def window(self) -> WindowVector:
        return make_window(self.analysis_window, self.window_length, normalized=True)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def field_names() -> list[str]:
    return [f.name for f in fields(PipelineConfig)]


def _coerce(name: str, value):
    target = {f.name: f.type for f in fields(PipelineConfig)}[name]
    try:
        if target == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"{value} is not an integer")
            return int(value)
        if target == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise InvalidArgument(f"{name}: {exc}") from exc


def parse_config_text(text: str) -> dict:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidArgument(f"config file: {exc}") from exc
    known = set(field_names())
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InvalidArgument(f"unknown config keys: {', '.join(unknown)}")
    return {k: _coerce(k, v) for k, v in raw.items()}


def load_config(path=None, **overrides) -> PipelineConfig:
    """Defaults, then the key=value file at ``path``, then ``overrides``."""
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    values.update({k: _coerce(k, v) for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)
