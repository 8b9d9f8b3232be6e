import struct
import wave

import numpy as np
import pytest

from sedpipe.corpus import (
    MIN_GAP,
    AudioSignal,
    EventAnnotation,
    SynthConfig,
    load_annotations,
    load_audio,
    save_annotations,
    synth_corpus,
    write_wav,
)
from sedpipe.errors import (
    AnnotationParseError,
    AudioReadError,
    ConfigError,
    UnsupportedEncodingError,
)


def _write_pcm16(path, samples: np.ndarray, rate: int):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(samples.astype("<i2").tobytes())


def test_load_silence_16k(tmp_path):
    path = tmp_path / "silence.wav"
    _write_pcm16(path, np.zeros(16000, dtype=np.int16), 16000)
    sig = load_audio(path)
    assert sig.sample_rate == 16000
    assert len(sig.samples) == 16000
    assert np.all(sig.samples == 0.0)
    assert sig.session_id == "silence"


def test_load_32k_decimates_to_16000_samples(tmp_path):
    path = tmp_path / "a.wav"
    _write_pcm16(path, np.zeros(32000, dtype=np.int16), 32000)
    sig = load_audio(path)
    assert len(sig.samples) == 16000


def test_load_fullscale_square_wave_scaling(tmp_path):
    # int16 full scale divides by 32768: +32767 -> 32767/32768, -32768 -> -1.0
    square = np.tile(np.array([32767, -32768], dtype=np.int16), 100)
    path = tmp_path / "sq.wav"
    _write_pcm16(path, square, 16000)
    sig = load_audio(path)
    assert sig.samples.max() == pytest.approx(32767.0 / 32768.0, abs=0)
    assert sig.samples.min() == -1.0


def test_load_float32_and_first_channel(tmp_path):
    rate, n = 16000, 400
    left = np.linspace(-0.5, 0.5, n, dtype="<f4")
    right = np.zeros(n, dtype="<f4")
    inter = np.empty(2 * n, dtype="<f4")
    inter[0::2], inter[1::2] = left, right
    data = inter.tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 3, 2, rate, rate * 8, 8, 32)
    hdr += b"data" + struct.pack("<I", len(data))
    path = tmp_path / "f32.wav"
    path.write_bytes(hdr + data)
    sig = load_audio(path)
    assert np.allclose(sig.samples, left.astype(np.float64))


def test_load_24bit(tmp_path):
    rate = 16000
    vals = np.array([1 << 22, -(1 << 22), 0], dtype=np.int64)
    raw = b"".join(int(v & 0xFFFFFF).to_bytes(3, "little") for v in vals)
    hdr = b"RIFF" + struct.pack("<I", 36 + len(raw)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 3, 3, 24)
    hdr += b"data" + struct.pack("<I", len(raw))
    path = tmp_path / "p24.wav"
    path.write_bytes(hdr + raw)
    sig = load_audio(path)
    assert np.allclose(sig.samples, [0.5, -0.5, 0.0])


def test_load_missing_file_raises_read_error(tmp_path):
    with pytest.raises(AudioReadError):
        load_audio(tmp_path / "nope.wav")


def test_load_nonfinite_float_raises(tmp_path):
    rate, n = 16000, 100
    data = np.full(n, np.nan, dtype="<f4").tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 3, 1, rate, rate * 4, 4, 32)
    hdr += b"data" + struct.pack("<I", len(data))
    path = tmp_path / "nan.wav"
    path.write_bytes(hdr + data)
    with pytest.raises(AudioReadError, match="non-finite"):
        load_audio(path)


def test_load_non_pcm_raises_unsupported(tmp_path):
    # format tag 0x0055 (MP3) inside a valid RIFF container
    data = b"\x00" * 8
    hdr = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 0x55, 1, 16000, 32000, 2, 16)
    hdr += b"data" + struct.pack("<I", len(data))
    path = tmp_path / "mp3ish.wav"
    path.write_bytes(hdr + data)
    with pytest.raises(UnsupportedEncodingError):
        load_audio(path)


def test_write_wav_round_trip(tmp_path):
    t = np.arange(8000) / 16000.0
    sig = AudioSignal(0.25 * np.sin(2 * np.pi * 440 * t), session_id="rt")
    path = tmp_path / "rt.wav"
    write_wav(path, sig)
    back = load_audio(path)
    assert len(back.samples) == len(sig.samples)
    assert np.max(np.abs(back.samples - sig.samples)) < 1.0 / 32768.0


def test_annotations_header_only(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("onset\toffset\tlabel\n")
    assert load_annotations(path) == []


def test_annotations_sorted_by_onset(tmp_path):
    path = tmp_path / "a.tsv"
    path.write_text("onset\toffset\tlabel\n0.5\t1.0\tkn\n0.2\t0.4\tds\n")
    events = load_annotations(path)
    assert [e.label for e in events] == ["ds", "kn"]


def test_annotations_invalid_interval_names_line(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("onset\toffset\tlabel\n1.0\t0.5\tkn\n")
    with pytest.raises(AnnotationParseError, match="line 2"):
        load_annotations(path)


def test_annotations_non_numeric_names_line(tmp_path):
    path = tmp_path / "bad2.tsv"
    path.write_text("onset\toffset\tlabel\n0.1\t0.2\tkn\nx\t0.5\tds\n")
    with pytest.raises(AnnotationParseError, match="line 3"):
        load_annotations(path)


def test_annotations_out_of_inventory_dropped_with_warning(tmp_path, caplog):
    path = tmp_path / "inv.tsv"
    path.write_text("onset\toffset\tlabel\n0.1\t0.2\tkn\n0.3\t0.4\tzz\n")
    with caplog.at_level("WARNING"):
        events = load_annotations(path, inventory=["kn"])
    assert [e.label for e in events] == ["kn"]
    assert "dropped 1" in caplog.text


def test_annotations_round_trip(tmp_path):
    events = [
        EventAnnotation(onset=0.123456789, offset=1.0000000001, label="kn"),
        EventAnnotation(onset=2.5, offset=3.25, label="ds"),
    ]
    path = tmp_path / "rt.tsv"
    save_annotations(path, events)
    assert load_annotations(path) == events


def test_synth_zero_events_gives_background_only():
    cfg = SynthConfig(classes=["tone_burst", "chirp"], sessions=1, events_per_class=0)
    ((signal, events),) = synth_corpus(cfg, seed=3)
    assert events == []
    assert len(signal.samples) == int(cfg.session_duration * 16000)
    assert np.max(np.abs(signal.samples)) < 0.1


def test_synth_deterministic():
    cfg = SynthConfig(
        classes=["tone_burst", "click_train"], sessions=2, events_per_class=3,
        session_duration=12.0,
    )
    a = synth_corpus(cfg, seed=9)
    b = synth_corpus(cfg, seed=9)
    for (sa, ea), (sb, eb) in zip(a, b):
        assert np.array_equal(sa.samples, sb.samples)
        assert ea == eb


def test_synth_annotation_bookkeeping():
    cfg = SynthConfig(
        classes=list(SynthConfig().classes), sessions=6, events_per_class=10,
        session_duration=80.0,
    )
    sessions = synth_corpus(cfg, seed=7)
    all_events = [e for _, events in sessions for e in events]
    assert len(all_events) == 5 * 10 * 6
    for cls in cfg.classes:
        assert sum(1 for e in all_events if e.label == cls) == 60


def test_synth_events_gapped_and_inside_session():
    cfg = SynthConfig(
        classes=["chirp", "noise_burst"], sessions=2, events_per_class=5,
        session_duration=20.0,
    )
    for signal, events in synth_corpus(cfg, seed=21):
        assert all(e.onset >= 0 and e.offset <= signal.duration for e in events)
        for prev, nxt in zip(events, events[1:]):
            assert nxt.onset - prev.offset >= MIN_GAP - 1e-12


def test_synth_infeasible_packing_raises():
    cfg = SynthConfig(
        classes=["tone_burst", "chirp"], sessions=1, events_per_class=30,
        session_duration=5.0,
    )
    with pytest.raises(ConfigError):
        synth_corpus(cfg, seed=1)


def test_synth_unknown_class_raises():
    cfg = SynthConfig(classes=["tone_burst", "kazoo"], sessions=1, events_per_class=1)
    with pytest.raises(ConfigError, match="kazoo"):
        synth_corpus(cfg, seed=1)
