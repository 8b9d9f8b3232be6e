"""Frame-level and segment-level feature extraction.

Two feature paths share the framing/batching machinery:

* a 60-dimensional frame vector (16 log-frequency filterbank coefficients,
  their first and second derivatives, zero-crossing rate, short-time energy,
  4 subband energies, 4 per-subband spectral flux values, spectral centroid
  and bandwidth) pooled into 120-dim mean/std segment descriptors, and
* 12 mel-cepstral coefficients (c1..c12) for the recognizer-style detector.

All spectra use a Hamming window and a zero-padded FFT so outputs are
bit-reproducible for identical input.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .corpus import SAMPLE_RATE, AudioSignal
from .errors import EmptyInputError

LOG_FLOOR = 1e-10
N_LFB = 16
N_SUBBANDS = 4
FREQ_LO = 100.0
FREQ_HI = 8000.0
DELTA_WINDOW = 2
N_MEL = 26
N_MFCC = 12

FRAME_DIM = 60
SEGMENT_DIM = 120


@dataclass(frozen=True)
class FrameSpec:
    frame_len: float
    hop: float
    fft_size: int

    def __post_init__(self):
        if not 0 < self.hop <= self.frame_len:
            raise ValueError(f"need 0 < hop <= frame_len, got {self.hop}, {self.frame_len}")
        if self.fft_size < self.frame_len * SAMPLE_RATE:
            raise ValueError(f"fft_size {self.fft_size} < frame samples")

    @property
    def frame_samples(self) -> int:
        return int(round(self.frame_len * SAMPLE_RATE))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop * SAMPLE_RATE))


# 25 ms frames with 50% overlap for the 60-dim set; 20 ms / 10 ms for MFCCs
DETECTOR_SPEC = FrameSpec(frame_len=0.025, hop=0.0125, fft_size=512)
ASR_SPEC = FrameSpec(frame_len=0.020, hop=0.010, fft_size=512)


def frame_count(n_samples: int, spec: FrameSpec) -> int:
    if n_samples < spec.frame_samples:
        raise EmptyInputError(
            f"signal of {n_samples} samples shorter than one {spec.frame_samples}-sample frame"
        )
    return 1 + (n_samples - spec.frame_samples) // spec.hop_samples


def _frame_matrix(samples: np.ndarray, spec: FrameSpec) -> np.ndarray:
    """(T, frame_samples) view of hop-spaced frames."""
    n_frames = frame_count(len(samples), spec)
    idx = np.arange(n_frames)[:, None] * spec.hop_samples + np.arange(spec.frame_samples)
    return samples[idx]


def _triangle_bank(edges: np.ndarray, freqs: np.ndarray, unit_area: bool) -> np.ndarray:
    """Triangular filters over FFT bin frequencies; edges has n_filters + 2 points."""
    n_filt = len(edges) - 2
    bank = np.zeros((n_filt, len(freqs)))
    for j in range(n_filt):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        rise = (freqs - lo) / (mid - lo)
        fall = (hi - freqs) / (hi - mid)
        tri = np.clip(np.minimum(rise, fall), 0.0, None)
        if unit_area:
            tri *= 2.0 / (hi - lo)
        bank[j] = tri
    return bank


def _lfb_bank(spec: FrameSpec) -> np.ndarray:
    freqs = np.arange(spec.fft_size // 2 + 1) * (SAMPLE_RATE / spec.fft_size)
    edges = FREQ_LO * (FREQ_HI / FREQ_LO) ** (np.arange(N_LFB + 2) / (N_LFB + 1))
    return _triangle_bank(edges, freqs, unit_area=True)


def _subband_masks(spec: FrameSpec) -> np.ndarray:
    freqs = np.arange(spec.fft_size // 2 + 1) * (SAMPLE_RATE / spec.fft_size)
    edges = FREQ_LO * (FREQ_HI / FREQ_LO) ** (np.arange(N_SUBBANDS + 1) / N_SUBBANDS)
    masks = np.zeros((N_SUBBANDS, len(freqs)))
    for j in range(N_SUBBANDS):
        hi_ok = freqs <= edges[j + 1] if j == N_SUBBANDS - 1 else freqs < edges[j + 1]
        masks[j] = ((freqs >= edges[j]) & hi_ok).astype(float)
    return masks


def _features60_tensor(frames: np.ndarray, spec: FrameSpec) -> np.ndarray:
    """(B, T, frame_samples) raw frames -> (B, T, 60) feature tensor."""
    b, t, length = frames.shape
    window = np.hamming(length)
    z = np.fft.rfft(frames * window, n=spec.fft_size, axis=-1)
    power = (z.real**2 + z.imag**2)
    mag = np.sqrt(power)
    freqs = np.arange(spec.fft_size // 2 + 1) * (SAMPLE_RATE / spec.fft_size)

    lfb = np.log(np.maximum(power @ _lfb_bank(spec).T, LOG_FLOOR))

    pad = np.pad(lfb, ((0, 0), (DELTA_WINDOW, DELTA_WINDOW), (0, 0)), mode="edge")
    denom = 2.0 * sum(n * n for n in range(1, DELTA_WINDOW + 1))
    d_lfb = (pad[:, 3:-1] - pad[:, 1:-3] + 2.0 * (pad[:, 4:] - pad[:, :-4])) / denom
    pad2 = np.pad(d_lfb, ((0, 0), (DELTA_WINDOW, DELTA_WINDOW), (0, 0)), mode="edge")
    dd_lfb = (pad2[:, 3:-1] - pad2[:, 1:-3] + 2.0 * (pad2[:, 4:] - pad2[:, :-4])) / denom

    zcr = np.sum(frames[..., :-1] * frames[..., 1:] < 0, axis=-1) / (length - 1)
    energy = np.mean(frames**2, axis=-1)

    band_energy = power @ _subband_masks(spec).T

    norms = np.linalg.norm(mag, axis=-1, keepdims=True)
    nmag = np.divide(mag, norms, out=np.zeros_like(mag), where=norms > 0)
    rise = np.maximum(nmag[:, 1:] - nmag[:, :-1], 0.0)
    flux = np.zeros((b, t, N_SUBBANDS))
    flux[:, 1:] = rise @ _subband_masks(spec).T  # first frame's flux is 0 by definition

    mag_sum = np.sum(mag, axis=-1)
    centroid = np.divide(
        mag @ freqs, mag_sum, out=np.zeros_like(mag_sum), where=mag_sum > 0
    )
    sq_dev = np.sum(mag * (freqs[None, None, :] - centroid[..., None]) ** 2, axis=-1)
    bandwidth = np.sqrt(
        np.divide(sq_dev, mag_sum, out=np.zeros_like(mag_sum), where=mag_sum > 0)
    )

    out = np.concatenate(
        [
            lfb,
            d_lfb,
            dd_lfb,
            zcr[..., None],
            energy[..., None],
            band_energy,
            flux,
            centroid[..., None],
            bandwidth[..., None],
        ],
        axis=-1,
    )
    return out


def extract_frames60(signal: AudioSignal, spec: FrameSpec = DETECTOR_SPEC) -> np.ndarray:
    """Per-frame 60-dim features; derivatives span the whole sequence."""
    frames = _frame_matrix(signal.samples, spec)
    return _features60_tensor(frames[None, :, :], spec)[0]


def segment_descriptor(frames: np.ndarray) -> np.ndarray:
    """Mean then population standard deviation over a frame block -> 120 values."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise EmptyInputError("need at least one frame")
    return np.concatenate([frames.mean(axis=0), frames.std(axis=0)])


def span_descriptors(
    signal: AudioSignal,
    start_samples: np.ndarray,
    span_samples: int,
    spec: FrameSpec = DETECTOR_SPEC,
) -> np.ndarray:
    """120-dim descriptor per fixed-length span, batched.

    Each span is framed independently (derivatives replicate at the span's
    own edges), so a descriptor depends only on the span's samples.
    """
    starts = np.asarray(start_samples, dtype=np.int64)
    if span_samples < spec.frame_samples:
        raise EmptyInputError("span shorter than one frame")
    n_frames = 1 + (span_samples - spec.frame_samples) // spec.hop_samples
    offsets = np.arange(n_frames) * spec.hop_samples
    within = np.arange(spec.frame_samples)
    # cap the staging tensor at ~5M elements (~40 MB)
    chunk = max(1, int(5_000_000 / (n_frames * spec.frame_samples)))
    out = np.empty((len(starts), SEGMENT_DIM))
    for i in range(0, len(starts), chunk):
        sl = starts[i : i + chunk]
        idx = sl[:, None, None] + offsets[None, :, None] + within[None, None, :]
        feats = _features60_tensor(signal.samples[idx], spec)
        out[i : i + chunk, :FRAME_DIM] = feats.mean(axis=1)
        out[i : i + chunk, FRAME_DIM:] = feats.std(axis=1)
    return out


def _mel(f: np.ndarray) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + f / 700.0)


def _mel_inv(m: np.ndarray) -> np.ndarray:
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def _mel_bank(spec: FrameSpec) -> np.ndarray:
    freqs = np.arange(spec.fft_size // 2 + 1) * (SAMPLE_RATE / spec.fft_size)
    mel_pts = np.linspace(_mel(np.array(0.0)), _mel(np.array(FREQ_HI)), N_MEL + 2)
    return _triangle_bank(_mel_inv(mel_pts), freqs, unit_area=False)


def extract_mfcc(signal: AudioSignal, spec: FrameSpec = ASR_SPEC) -> np.ndarray:
    """12 cepstral coefficients (c1..c12) per frame, c0 excluded.

    26 mel filters on the power spectrum, natural log with floor 1e-10,
    orthonormal type-II cosine transform.
    """
    frames = _frame_matrix(signal.samples, spec)
    window = np.hamming(spec.frame_samples)
    z = np.fft.rfft(frames * window, n=spec.fft_size, axis=-1)
    power = z.real**2 + z.imag**2
    mel_log = np.log(np.maximum(power @ _mel_bank(spec).T, LOG_FLOOR))
    ceps = dct(mel_log, type=2, norm="ortho", axis=-1)
    return ceps[:, 1 : N_MFCC + 1]


@dataclass
class Scaler:
    """Per-dimension z-scoring; mixed-unit descriptors need it before
    Euclidean/RBF geometry (constant dimensions pass through unscaled)."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        X = np.asarray(X, dtype=np.float64)
        std = X.std(axis=0)
        return cls(mean=X.mean(axis=0), std=np.where(std > 0, std, 1.0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


def write_feature_dump(path, matrix: np.ndarray) -> None:
    """Binary little-endian f32 matrix with an 8-byte (rows, dim) header."""
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise ValueError("feature dump expects a 2-D matrix")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", m.shape[0], m.shape[1]))
        fh.write(m.tobytes())


def read_feature_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, dim = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(rows * dim * 4), dtype="<f4")
    if data.size != rows * dim:
        raise ValueError(f"{path}: truncated feature dump")
    return data.reshape(rows, dim).astype(np.float64)
