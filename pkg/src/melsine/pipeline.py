"""End-to-end pipeline stages shared by the CLI and library users."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import mel, pitch
from .config import PipelineConfig
from .dsp import AudioBuffer, power_spectrogram, stft_with
from .errors import InvalidArgument
from .evaluation import CSV_HEADER, EvalReport, evaluate, griffin_lim_from_logmel
from .mel import LogMelSpectrogram, MelFilterbank, build_filterbank
from .pitch import PitchTrack
from .sinres import invert_mel
from .wav import read_wav, write_wav


def filterbank_for(cfg: PipelineConfig, sample_rate: int | None = None) -> MelFilterbank:
    return build_filterbank(cfg.num_mels, cfg.fft_size, sample_rate or cfg.sample_rate)


def check_rate(audio: AudioBuffer, cfg: PipelineConfig) -> None:
    if audio.sample_rate != cfg.sample_rate:
        raise InvalidArgument(
            f"audio is {audio.sample_rate} Hz but sample_rate is configured as "
            f"{cfg.sample_rate} Hz (no resampling is performed)"
        )


def analyze(audio: AudioBuffer, cfg: PipelineConfig) -> tuple[LogMelSpectrogram, PitchTrack]:
    check_rate(audio, cfg)
    fb = filterbank_for(cfg)
    logmel = mel.log_mel(power_spectrogram(stft_with(audio, cfg.stft_params)), fb, cfg.log_floor_db)
    track = pitch.track_pitch(
        audio, cfg.window_length, cfg.hop_size, cfg.f0_min, cfg.f0_max, cfg.yin_threshold
    )
    return logmel, track


def _check_logmel(logmel: LogMelSpectrogram, cfg: PipelineConfig) -> None:
    expected = (cfg.num_mels, cfg.hop_size, cfg.window_length, cfg.fft_size, cfg.sample_rate)
    found = (
        logmel.num_mels,
        logmel.hop_size,
        logmel.window_length,
        logmel.fft_size,
        logmel.sample_rate,
    )
    if found != expected:
        raise InvalidArgument(
            "melspec (num_mels, hop, win, fft, sr) = "
            f"{found} does not match the configuration {expected}"
        )


def invert(logmel: LogMelSpectrogram, track: PitchTrack, cfg: PipelineConfig) -> AudioBuffer:
    _check_logmel(logmel, cfg)
    return invert_mel(logmel, track, filterbank_for(cfg), cfg.window(), cfg.continuity_tolerance)


def baseline(logmel: LogMelSpectrogram, cfg: PipelineConfig) -> AudioBuffer:
    _check_logmel(logmel, cfg)
    return griffin_lim_from_logmel(
        logmel,
        filterbank_for(cfg),
        cfg.stft_params,
        cfg.griffinlim_iterations,
        cfg.griffinlim_seed,
    )


def score(reference: AudioBuffer, candidate: AudioBuffer, cfg: PipelineConfig) -> EvalReport:
    return evaluate(reference, candidate, max_lag=cfg.align_max_lag)


@dataclass
class RoundtripOutputs:
    melspec: Path
    pitch: Path
    sinusoidal: Path
    griffin_lim: Path
    eval_csv: Path
    sin_report: EvalReport
    gl_report: EvalReport


def roundtrip(in_wav, out_dir, cfg: PipelineConfig, wav_format: str = "float32") -> RoundtripOutputs:
    """Analyse, write the artifacts, then reconstruct from the artifacts as
    written so the result matches ``analyze`` followed by ``invert``."""
    in_wav, out_dir = Path(in_wav), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = in_wav.stem
    paths = {
        "melspec": out_dir / f"{stem}.melspec",
        "pitch": out_dir / f"{stem}.pitch.csv",
        "sin": out_dir / f"{stem}.sin.wav",
        "gl": out_dir / f"{stem}.gl.wav",
        "eval": out_dir / f"{stem}.eval.csv",
    }
    audio = read_wav(in_wav)
    logmel, track = analyze(audio, cfg)
    mel.write_melspec(paths["melspec"], logmel)
    pitch.write_pitch(paths["pitch"], track)

    logmel = mel.read_melspec(paths["melspec"])
    track = pitch.read_pitch(paths["pitch"], cfg.f0_min, cfg.f0_max)
    sin_audio = invert(logmel, track, cfg)
    gl_audio = baseline(logmel, cfg)
    write_wav(paths["sin"], sin_audio, wav_format)
    write_wav(paths["gl"], gl_audio, wav_format)

    # score what was actually written to disk
    sin_report = score(audio, read_wav(paths["sin"]), cfg)
    gl_report = score(audio, read_wav(paths["gl"]), cfg)
    with open(paths["eval"], "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write(sin_report.csv_row(in_wav.name, paths["sin"].name) + "\n")
        fh.write(gl_report.csv_row(in_wav.name, paths["gl"].name) + "\n")
    return RoundtripOutputs(
        paths["melspec"],
        paths["pitch"],
        paths["sin"],
        paths["gl"],
        paths["eval"],
        sin_report,
        gl_report,
    )
