import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from quartersampling.errors import DimensionError, FormatError
from quartersampling.frame_io import (Frame, Mask, SampledFrame, quantize, read_frame, read_mask,
                                      read_sequence, write_frame, write_mask, write_sequence)


def _p5(path, w, h, payload, maxval=255, magic=b"P5"):
    path.write_bytes(magic + b"\n%d %d\n%d\n" % (w, h, maxval) + bytes(payload))
    return path


def test_read_p5_bytes(tmp_path):
    f = read_frame(_p5(tmp_path / "a.pgm", 2, 2, [0, 255, 128, 64]))
    assert (f.width, f.height) == (2, 2)
    assert f.data.tolist() == [[0, 255], [128, 64]]


def test_header_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n3 1 # width height\n255\n" + bytes([1, 2, 3]))
    assert read_frame(p).data.tolist() == [[1, 2, 3]]


def test_ascii_pgm_rejected(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P2\n2 1\n255\n0 255\n")
    with pytest.raises(FormatError):
        read_frame(p)


def test_16bit_rejected(tmp_path):
    p = _p5(tmp_path / "a.pgm", 1, 1, [0, 0], maxval=65535)
    with pytest.raises(FormatError, match="maxval"):
        read_frame(p)


def test_truncated_payload(tmp_path):
    with pytest.raises(FormatError):
        read_frame(_p5(tmp_path / "a.pgm", 4, 4, [1, 2, 3]))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_frame(tmp_path / "nope.pgm")


def test_write_rounding(tmp_path):
    write_frame(Frame(np.array([[0.4, 254.6]])), tmp_path / "r.pgm")
    assert read_frame(tmp_path / "r.pgm").data.tolist() == [[0, 255]]
    write_frame(Frame(np.array([[127.5]])), tmp_path / "h.pgm")
    assert read_frame(tmp_path / "h.pgm").data.tolist() == [[128]]


def test_quantize_half_away_from_zero():
    assert quantize(np.array([0.5, 1.5, 2.5, 254.5, 255.0])).tolist() == [1, 2, 3, 255, 255]


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_round_trip_integer_frames(tmp_path_factory, pixels):
    path = tmp_path_factory.mktemp("rt") / "f.pgm"
    f = Frame(pixels.astype(float))
    write_frame(f, path)
    assert np.array_equal(read_frame(path).data, f.data)


def test_frame_invariants():
    with pytest.raises(ValueError):
        Frame(np.array([[256.0]]))
    with pytest.raises(ValueError):
        Frame(np.array([[np.nan]]))
    with pytest.raises(DimensionError):
        Frame(np.zeros(4))
    f = Frame(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        f.data[0, 0] = 1.0  # read-only


def test_mask_round_trip(tmp_path):
    p = _p5(tmp_path / "m.pgm", 2, 2, [255, 0, 0, 255])
    m = read_mask(p)
    assert m.bits.tolist() == [[1, 0], [0, 1]]
    write_mask(m, tmp_path / "m2.pgm")
    assert np.array_equal(read_mask(tmp_path / "m2.pgm").bits, m.bits)


def test_mask_bad_byte(tmp_path):
    with pytest.raises(FormatError):
        read_mask(_p5(tmp_path / "m.pgm", 2, 1, [255, 128]))


def test_sampled_frame_checks():
    m = Mask(np.array([[1, 0]]))
    with pytest.raises(ValueError):
        SampledFrame(Frame(np.array([[5.0, 6.0]])), m)
    with pytest.raises(DimensionError):
        SampledFrame(Frame(np.zeros((2, 2))), m)


def test_sequence(tmp_path):
    frames = [Frame(np.full((4, 4), 10.0 * t)) for t in range(5)]
    write_sequence(frames, tmp_path)
    back = read_sequence(tmp_path)
    assert [f.t for f in back] == list(range(5))
    assert all(np.array_equal(a.data, b.data) for a, b in zip(frames, back))


def test_sequence_gap(tmp_path):
    write_frame(Frame(np.zeros((2, 2))), tmp_path / "frame0000.pgm")
    write_frame(Frame(np.zeros((2, 2))), tmp_path / "frame0002.pgm")
    with pytest.raises(FormatError, match="gap"):
        read_sequence(tmp_path)


def test_sequence_mixed_sizes(tmp_path):
    write_frame(Frame(np.zeros((64, 64))), tmp_path / "frame0000.pgm")
    write_frame(Frame(np.zeros((32, 32))), tmp_path / "frame0001.pgm")
    with pytest.raises(DimensionError):
        read_sequence(tmp_path)
