"""Python access to the rtpc phase-contrast flow pipeline.

Series are numpy arrays shaped (frames, rows, cols) in cm/s; configs are
plain dicts with the same layout as the JSON config files.
"""

import json

import numpy as np

from . import _rtpc
from ._rtpc import Error, __version__, config_hash as _config_hash, wrap_velocity

__all__ = [
    "Error",
    "__version__",
    "defaults",
    "config_hash",
    "read_portable",
    "write_portable",
    "load_series",
    "simulate",
    "oracle_flow",
    "wrap_velocity",
    "run_pipeline",
    "segment_cardiac_frequency",
    "compute_flow",
    "dice",
    "fft_magnitude",
    "lowpass",
    "estimate_fundamental_hz",
    "detect_peaks",
    "run_cli",
]


def _dump(config):
    return "" if not config else json.dumps(config)


def defaults():
    """The checked-in default configuration as a dict."""
    return json.loads(_rtpc.defaults_json())


def config_hash(config):
    """Canonical 16-hex-digit hash of a config dict."""
    return _config_hash(json.dumps(config))


def _geometry(header):
    spacing = tuple(header.get("pixel_spacing_mm", (1.0, 1.0)))
    return float(header["frame_duration_ms"]), float(header["venc_cm_s"]), spacing


def read_portable(path):
    """Reads a .rtp file into {"header", "velocity", "magnitude"}."""
    return _rtpc.read_portable(str(path))


def write_portable(path, velocity, magnitude, header):
    frame_ms, venc, spacing = _geometry(header)
    _rtpc.write_portable(str(path), velocity, magnitude, frame_ms, venc, spacing)


def load_series(path, config=None):
    """Loads a .rtp file or a DICOM file, directory or DICOMDIR."""
    return _rtpc.load_series(str(path), _dump(config))


def simulate(config=None):
    """Generates the synthetic phantom; `config` uses the "phantom" section layout."""
    return _rtpc.simulate(_dump(config))


def oracle_flow(config=None):
    return _rtpc.oracle_flow(_dump(config))


def run_pipeline(series, belt=None, belt_dt_s=0.01, belt_t0_s=0.0, config=None):
    """Runs every stage on an in-memory series dict (as returned by
    read_portable or simulate). `belt` holds belt samples every belt_dt_s."""
    frame_ms, venc, spacing = _geometry(series["header"])
    b = None if belt is None else np.asarray(belt, dtype=float)
    return _rtpc.run_pipeline(series["velocity"], series["magnitude"], frame_ms, venc, spacing, b, belt_dt_s,
                              belt_t0_s, _dump(config))


def segment_cardiac_frequency(velocity, header, band=(0.5, 2.5), threshold=0.3, min_component_px=4):
    frame_ms, venc, spacing = _geometry(header)
    return _rtpc.segment_cardiac_frequency(velocity, frame_ms, venc, spacing, tuple(band), threshold, min_component_px)


def compute_flow(velocity, mask, header):
    frame_ms, venc, spacing = _geometry(header)
    return _rtpc.compute_flow(velocity, mask, frame_ms, venc, spacing)


def dice(a, b):
    return _rtpc.dice(a, b)


def fft_magnitude(x, dt_s):
    """Returns (bin amplitudes, bin width in Hz, Parseval energy)."""
    return _rtpc.fft_magnitude(np.asarray(x, dtype=float), dt_s)


def lowpass(x, dt_s, cutoff_hz, n_taps=31):
    return _rtpc.lowpass(np.asarray(x, dtype=float), dt_s, cutoff_hz, n_taps)


def estimate_fundamental_hz(x, dt_s, band=(0.5, 2.5)):
    return _rtpc.estimate_fundamental_hz(np.asarray(x, dtype=float), dt_s, tuple(band))


def detect_peaks(x, dt_s, min_separation_s, prominence_fraction):
    return _rtpc.detect_peaks(np.asarray(x, dtype=float), dt_s, min_separation_s, prominence_fraction)


def run_cli(args):
    """Runs the rtpc command line in-process; returns (status, stdout, stderr)."""
    return _rtpc.run_cli([str(a) for a in args])
