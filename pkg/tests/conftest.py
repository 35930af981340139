import numpy as np
import pytest

from melsine.dsp import AudioBuffer, StftParams
from melsine.mel import build_filterbank

SR = 16000


def tone(freqs, amps=None, seconds=1.0, sr=SR, phases=None):
    """Sum of cosines; partials at or above Nyquist are dropped."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    amps = np.ones_like(freqs) if amps is None else np.asarray(amps, dtype=float)
    phases = np.zeros_like(freqs) if phases is None else np.asarray(phases, dtype=float)
    t = np.arange(int(round(seconds * sr))) / sr
    x = np.zeros_like(t)
    for f, a, p in zip(freqs, amps, phases):
        if f < sr / 2:
            x += a * np.cos(2 * np.pi * f * t + p)
    return AudioBuffer(x, sr)


def harmonic_tone(f0, amps=(0.5, 0.3, 0.2, 0.1, 0.05), seconds=1.0, sr=SR):
    return tone([f0 * (i + 1) for i in range(len(amps))], amps, seconds, sr)


@pytest.fixture(scope="session")
def default_params():
    return StftParams(1024, 256, 1024, "blackman", True)


@pytest.fixture(scope="session")
def fb80():
    return build_filterbank(80, 1024, SR, 0.0, SR / 2, "triangular")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
