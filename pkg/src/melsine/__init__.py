"""Reconstruct pitched audio from a log-mel-spectrogram with a harmonic
sinusoidal model, with a Griffin-Lim baseline and spectral-convergence
evaluation."""

from .config import PipelineConfig, load_config
from .dsp import (
    AudioBuffer,
    ComplexSpectrogram,
    PowerSpectrogram,
    StftParams,
    WindowVector,
    dft,
    idft,
    istft,
    make_window,
    power_spectrogram,
    stft,
)
from .errors import (
    CalibrationFailure,
    DegenerateCandidate,
    DegenerateFilterbank,
    InvalidArgument,
    MelsineError,
    NumericFailure,
    ParseError,
    UnsupportedFormat,
)
from .evaluation import (
    EvalReport,
    align,
    energy_normalize,
    evaluate,
    griffin_lim,
    mel_pseudo_inverse,
    spectral_convergence,
)
from .mel import LogMelSpectrogram, MelFilterbank, build_filterbank, hz_to_mel, log_mel, mel_to_hz
from .pitch import PitchTrack, enforce_continuity, track_pitch, yin_frame
from .sinres import (
    AmplitudeCalibration,
    HarmonicFrame,
    HarmonicFrameSet,
    accumulate_phase,
    build_frames,
    calibrate,
    estimate_amplitudes,
    harmonic_frequencies,
    invert_mel,
    synthesize,
)
from .wav import read_wav, write_wav

__version__ = "0.1.0"
