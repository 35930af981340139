"""Command-line entry point: ``melsine <subcommand> ...``.

Exit codes: 0 success, 2 usage, 3 input format, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import mel, pitch, pipeline
from .config import PipelineConfig, field_names, load_config
from .errors import (
    CalibrationFailure,
    DegenerateCandidate,
    DegenerateFilterbank,
    InvalidArgument,
    NumericFailure,
    ParseError,
    UnsupportedFormat,
)
from .evaluation import CSV_HEADER
from .wav import FORMATS, read_wav, write_wav

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


class StageError(Exception):
    """A processing failure tagged with the stage name and exit code."""

    def __init__(self, message, code):
        super().__init__(message, code)
        self.code = code

    def __str__(self):
        return self.args[0]


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (NumericFailure, CalibrationFailure, DegenerateCandidate, DegenerateFilterbank)):
        return EXIT_NUMERIC
    if isinstance(exc, (ParseError, UnsupportedFormat, InvalidArgument, OSError)):
        return EXIT_INPUT
    return EXIT_NUMERIC


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ArithmeticError, ValueError, OSError, ParseError, UnsupportedFormat) as exc:
        raise StageError(f"{name}: {exc}", _exit_code(exc)) from exc


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("pipeline configuration")
    group.add_argument("--config", metavar="FILE", help="key = value file with defaults")
    defaults = PipelineConfig()
    for name in field_names():
        value = getattr(defaults, name)
        group.add_argument(
            "--" + name.replace("_", "-"),
            dest=name,
            type=type(value),
            default=None,
            metavar=type(value).__name__.upper(),
            help=f"default {value}",
        )


def _config(args) -> PipelineConfig:
    overrides = {name: getattr(args, name) for name in field_names()}
    return load_config(args.config, **overrides)


def cmd_analyze(args, cfg):
    out_dir = Path(args.output)
    _stage("write", out_dir.mkdir, parents=True, exist_ok=True)
    stem = Path(args.input).stem
    audio = _stage("read", read_wav, args.input)
    logmel, track = _stage("analyze", pipeline.analyze, audio, cfg)
    _stage("write", mel.write_melspec, out_dir / f"{stem}.melspec", logmel)
    _stage("write", pitch.write_pitch, out_dir / f"{stem}.pitch.csv", track)


def cmd_invert(args, cfg):
    logmel = _stage("read melspec", mel.read_melspec, args.melspec)
    track = _stage("read pitch", pitch.read_pitch, args.pitch, cfg.f0_min, cfg.f0_max)
    audio = _stage("invert", pipeline.invert, logmel, track, cfg)
    _stage("write", write_wav, args.output, audio, args.format)


def cmd_baseline(args, cfg):
    logmel = _stage("read melspec", mel.read_melspec, args.melspec)
    audio = _stage("griffin-lim", pipeline.baseline, logmel, cfg)
    _stage("write", write_wav, args.output, audio, args.format)


def _roundtrip_one(in_wav, out_dir, cfg, wav_format):
    result = _stage("roundtrip", pipeline.roundtrip, in_wav, out_dir, cfg, wav_format)
    return (
        f"{in_wav}: sc_eq5 sinusoidal={result.sin_report.spectral_convergence:.6g} "
        f"griffin-lim={result.gl_report.spectral_convergence:.6g}"
    )


def cmd_roundtrip(args, cfg):
    jobs = max(1, args.jobs)
    if jobs == 1 or len(args.inputs) == 1:
        for path in args.inputs:
            print(_roundtrip_one(path, args.output, cfg, args.format))
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(_roundtrip_one, path, args.output, cfg, args.format) for path in args.inputs
        ]
        for fut in futures:
            print(fut.result())


def cmd_evaluate(args, cfg):
    ref = _stage("read reference", read_wav, args.reference)
    cand = _stage("read candidate", read_wav, args.candidate)
    report = _stage("evaluate", pipeline.score, ref, cand, cfg)
    if args.header:
        print(CSV_HEADER)
    print(report.csv_row(args.reference, args.candidate))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melsine",
        description="Harmonic sinusoidal inversion of log-mel-spectrograms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="WAV -> .melspec + .pitch.csv")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, metavar="DIR")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("invert", help="sinusoidal reconstruction")
    p.add_argument("melspec")
    p.add_argument("pitch")
    p.add_argument("-o", "--output", required=True, metavar="WAV")
    p.add_argument("--format", choices=FORMATS, default="float32")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("baseline", help="Griffin-Lim reconstruction")
    p.add_argument("melspec")
    p.add_argument("-o", "--output", required=True, metavar="WAV")
    p.add_argument("--format", choices=FORMATS, default="float32")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("roundtrip", help="analyze, invert, baseline and evaluate")
    p.add_argument("inputs", nargs="+", metavar="input")
    p.add_argument("-o", "--output", required=True, metavar="DIR")
    p.add_argument("--format", choices=FORMATS, default="float32")
    p.add_argument("--jobs", type=int, default=1, help="files processed in parallel")
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("evaluate", help="print an EvalReport CSV row")
    p.add_argument("reference")
    p.add_argument("candidate")
    p.add_argument("--header", action="store_true", help="print the CSV header first")
    p.set_defaults(func=cmd_evaluate)

    for name in ("analyze", "invert", "baseline", "roundtrip", "evaluate"):
        _add_config_flags(sub.choices[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
    except (InvalidArgument, OSError) as exc:
        parser.error(f"configuration: {exc}")
    try:
        args.func(args, cfg)
    except StageError as exc:
        print(f"melsine: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
