"""WAV ingestion and writing.

Everything downstream assumes mono float samples in [-1, 1] at 16 kHz, so
loading always resamples and takes the first channel. The RIFF parser is
hand-rolled because the stdlib ``wave`` module rejects IEEE-float files.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import resample_poly

from ..errors import AudioReadError, UnsupportedEncodingError

SAMPLE_RATE = 16000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioSignal:
    """Mono 16 kHz signal with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    session_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _read_chunks(raw: bytes) -> dict[bytes, bytes]:
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioReadError("not a RIFF/WAVE file")
    chunks: dict[bytes, bytes] = {}
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if cid not in chunks:
            chunks[cid] = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    return chunks


def _decode_pcm(data: bytes, fmt_tag: int, bits: int, channels: int) -> np.ndarray:
    """First channel only, scaled by integer full scale (float passes through)."""
    if fmt_tag == _WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncodingError(f"unsupported float width: {bits} bits")
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
        return x[::channels].copy()
    if fmt_tag != _WAVE_FORMAT_PCM:
        raise UnsupportedEncodingError(f"non-PCM format tag 0x{fmt_tag:04x}")
    if bits == 8:
        # 8-bit WAV is unsigned with midpoint 128
        x = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
        return (x[::channels] - 128.0) / 128.0
    if bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64)
        return x[::channels] / 32768.0
    if bits == 24:
        b = np.frombuffer(data, dtype=np.uint8)
        n = len(b) // 3
        b = b[: n * 3].reshape(n, 3).astype(np.int64)
        vals = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals).astype(np.float64)
        return vals[::channels] / float(1 << 23)
    raise UnsupportedEncodingError(f"unsupported PCM width: {bits} bits")


def load_audio(path, session_id: str | None = None) -> AudioSignal:
    """Load a PCM WAV file as a mono 16 kHz AudioSignal.

    Accepts 8/16/24-bit integer and 32-bit float encodings at any sample
    rate; multichannel files contribute their first channel. Raises
    AudioReadError for unreadable files and UnsupportedEncodingError for
    non-PCM encodings.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise AudioReadError(f"cannot read {path}: {exc}") from exc
    chunks = _read_chunks(raw)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise AudioReadError(f"{path}: missing fmt or data chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise AudioReadError(f"{path}: truncated fmt chunk")
    fmt_tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if fmt_tag == _WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 26:
        (fmt_tag,) = struct.unpack_from("<H", fmt, 24)  # SubFormat GUID leads with tag
    if channels < 1 or rate < 1:
        raise AudioReadError(f"{path}: invalid fmt fields")
    samples = _decode_pcm(chunks[b"data"], fmt_tag, bits, channels)
    if not np.all(np.isfinite(samples)):
        raise AudioReadError(f"{path}: non-finite samples")
    if rate != SAMPLE_RATE:
        samples = resample(samples, rate, SAMPLE_RATE)
    samples = np.clip(samples, -1.0, 1.0)
    sid = session_id if session_id is not None else _stem(path)
    return AudioSignal(samples=samples, sample_rate=SAMPLE_RATE, session_id=sid)


def _stem(path) -> str:
    name = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    return name.rsplit(".", 1)[0]


def resample(samples: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Windowed-sinc polyphase resampling (reproducible across input rates)."""
    if rate_in == rate_out:
        return np.asarray(samples, dtype=np.float64)
    g = math.gcd(rate_in, rate_out)
    return resample_poly(np.asarray(samples, dtype=np.float64), rate_out // g, rate_in // g)


def write_wav(path, signal: AudioSignal) -> None:
    """Write as 16-bit PCM WAV at the signal's rate."""
    x = np.clip(signal.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2")
    data = pcm.tobytes()
    rate = signal.sample_rate
    hdr = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, _WAVE_FORMAT_PCM, 1, rate, rate * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", len(data))
    with open(path, "wb") as fh:
        fh.write(hdr + data)
