import csv

import numpy as np
import pytest

from melsine.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main
from melsine.config import PipelineConfig, load_config, parse_config_text
from melsine.dsp import AudioBuffer
from melsine.errors import InvalidArgument
from melsine.wav import write_wav

from conftest import SR, harmonic_tone


# --- configuration -----------------------------------------------------------


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.sample_rate, cfg.num_mels, cfg.window_length, cfg.hop_size, cfg.fft_size) == (
        16000, 80, 1024, 256, 1024,
    )
    assert cfg.analysis_window == "blackman"
    assert (cfg.f0_min, cfg.f0_max, cfg.yin_threshold) == (80.0, 3000.0, 0.1)
    assert (cfg.continuity_tolerance, cfg.log_floor_db) == (0.06, -100.0)
    assert (cfg.griffinlim_iterations, cfg.griffinlim_seed) == (32, 0)


@pytest.mark.parametrize(
    "changes,first,second",
    [
        ({"hop_size": 2048}, "hop_size", "window_length"),
        ({"window_length": 2048}, "window_length", "fft_size"),
        ({"f0_min": 500.0, "f0_max": 400.0}, "f0_min", "f0_max"),
        ({"f0_max": 9000.0}, "f0_max", "sample_rate"),
        ({"f0_min": 10.0}, "window_length", "f0_min"),
    ],
)
def test_cross_field_errors_name_both_fields(changes, first, second):
    with pytest.raises(InvalidArgument) as info:
        PipelineConfig(**changes)
    assert first in str(info.value) and second in str(info.value)


def test_fft_must_be_power_of_two():
    with pytest.raises(InvalidArgument, match="fft_size"):
        PipelineConfig(fft_size=1000, window_length=1000, hop_size=250)


def test_config_file_then_overrides(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text("hop_size = 128\nyin_threshold = 0.15\nanalysis_window = \"hann\"\n")
    cfg = load_config(path, hop_size=512, griffinlim_seed=None)
    assert cfg.hop_size == 512
    assert cfg.yin_threshold == 0.15
    assert cfg.analysis_window == "hann"
    assert cfg.griffinlim_seed == 0


def test_config_file_rejects_unknown_key():
    with pytest.raises(InvalidArgument, match="hop"):
        parse_config_text("hop = 3\n")


def test_config_file_rejects_fractional_int():
    with pytest.raises(InvalidArgument, match="hop_size"):
        parse_config_text("hop_size = 2.5\n")


def test_config_file_syntax_error():
    with pytest.raises(InvalidArgument):
        parse_config_text("hop_size = = 3\n")


def test_stft_params_follow_config():
    p = PipelineConfig(hop_size=128).stft_params
    assert (p.window_length, p.hop_size, p.fft_size, p.window_kind) == (1024, 128, 1024, "blackman")


# --- CLI ------------------------------------------------------------------------


@pytest.fixture
def note_wav(tmp_path):
    path = tmp_path / "note.wav"
    write_wav(path, harmonic_tone(220, seconds=1.0), "float32")
    return path


def test_roundtrip_writes_all_artifacts(note_wav, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["roundtrip", str(note_wav), "-o", str(out)]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted(
        ["note.melspec", "note.pitch.csv", "note.sin.wav", "note.gl.wav", "note.eval.csv"]
    )
    rows = list(csv.DictReader(open(out / "note.eval.csv")))
    assert [r["cand_path"] for r in rows] == ["note.sin.wav", "note.gl.wav"]
    sin_sc, gl_sc = (float(r["sc_eq5"]) for r in rows)
    assert sin_sc < gl_sc
    assert "sinusoidal=" in capsys.readouterr().out


def test_analyze_then_invert_matches_roundtrip(note_wav, tmp_path):
    rt, step = tmp_path / "rt", tmp_path / "step"
    assert main(["roundtrip", str(note_wav), "-o", str(rt)]) == EXIT_OK
    assert main(["analyze", str(note_wav), "-o", str(step)]) == EXIT_OK
    assert (step / "note.melspec").read_bytes() == (rt / "note.melspec").read_bytes()
    out = step / "note.sin.wav"
    args = ["invert", str(step / "note.melspec"), str(step / "note.pitch.csv"), "-o", str(out)]
    assert main(args) == EXIT_OK
    assert out.read_bytes() == (rt / "note.sin.wav").read_bytes()


def test_baseline_matches_roundtrip(note_wav, tmp_path):
    rt = tmp_path / "rt"
    assert main(["roundtrip", str(note_wav), "-o", str(rt)]) == EXIT_OK
    out = tmp_path / "gl.wav"
    assert main(["baseline", str(rt / "note.melspec"), "-o", str(out)]) == EXIT_OK
    assert out.read_bytes() == (rt / "note.gl.wav").read_bytes()


def test_roundtrip_is_deterministic(note_wav, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["roundtrip", str(note_wav), "-o", str(a)]) == EXIT_OK
    assert main(["roundtrip", str(note_wav), "-o", str(b)]) == EXIT_OK
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name


def test_roundtrip_parallel_jobs(tmp_path, capsys):
    inputs = []
    for f0 in (150, 300):
        path = tmp_path / f"n{f0}.wav"
        write_wav(path, harmonic_tone(f0, seconds=0.5), "float32")
        inputs.append(str(path))
    serial, parallel = tmp_path / "s", tmp_path / "p"
    assert main(["roundtrip", *inputs, "-o", str(serial)]) == EXIT_OK
    assert main(["roundtrip", *inputs, "-o", str(parallel), "--jobs", "2"]) == EXIT_OK
    for p in serial.iterdir():
        assert p.read_bytes() == (parallel / p.name).read_bytes()


def test_evaluate_self_is_zero(note_wav, capsys):
    assert main(["evaluate", str(note_wav), str(note_wav), "--header"]) == EXIT_OK
    header, row = capsys.readouterr().out.strip().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert float(rec["sc_eq5"]) == 0.0
    assert int(rec["lag_samples"]) == 0
    assert float(rec["energy_scale"]) == 1.0


def test_pcm16_output(note_wav, tmp_path):
    out = tmp_path / "o"
    assert main(["roundtrip", str(note_wav), "-o", str(out), "--format", "pcm16"]) == EXIT_OK
    assert (out / "note.sin.wav").read_bytes()[20:22] == b"\x01\x00"


def test_config_flag_overrides_file(note_wav, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("hop_size = 128\n")
    out = tmp_path / "o"
    assert main(["analyze", str(note_wav), "-o", str(out), "--config", str(cfg), "--hop-size", "512"]) == 0
    assert "hop=512" in (out / "note.pitch.csv").read_text().splitlines()[0]


def test_exit_usage_on_bad_config(note_wav, tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["analyze", str(note_wav), "-o", str(tmp_path), "--hop-size", "4096"])
    assert info.value.code == 2
    err = capsys.readouterr().err
    assert "hop_size" in err and "window_length" in err


def test_exit_usage_on_unknown_flag(note_wav, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["analyze", str(note_wav), "-o", str(tmp_path), "--bogus"])
    assert info.value.code == 2


def test_exit_input_on_missing_file(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope.wav"), "-o", str(tmp_path)]) == EXIT_INPUT
    assert "read" in capsys.readouterr().err


def test_exit_input_on_garbage_wav(tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF\x00\x00")
    assert main(["analyze", str(bad), "-o", str(tmp_path)]) == EXIT_INPUT


def test_exit_input_on_rate_mismatch(tmp_path):
    path = tmp_path / "x.wav"
    write_wav(path, AudioBuffer(np.zeros(8000), 8000), "float32")
    assert main(["analyze", str(path), "-o", str(tmp_path)]) == EXIT_INPUT


def test_exit_numeric_on_silent_candidate(note_wav, tmp_path):
    silent = tmp_path / "silent.wav"
    write_wav(silent, AudioBuffer(np.zeros(SR), SR), "float32")
    assert main(["evaluate", str(note_wav), str(silent)]) == EXIT_NUMERIC
