"""Grayscale frames, binary masks and their PGM (P5) containers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError

DEFAULT_PATTERN = "frame%04d.pgm"


@dataclass(frozen=True)
class Frame:
    """A single luma image on the high-resolution grid.

    ``data`` is a float64 array of shape (height, width); element ``[m, n]`` is
    row m, column n.  Values stay real-valued until written to disk.
    """

    data: np.ndarray
    t: int = 0

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"frame data must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("frame data contains non-finite values")
        if arr.size and (arr.min() < 0.0 or arr.max() > 255.0):
            raise ValueError("frame data outside [0, 255]")
        if self.t < 0:
            raise ValueError("frame index t must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class Mask:
    """Binary per-pixel measurement indicator (1 = measured)."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise DimensionError(f"mask must be 2-D, got shape {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("mask entries must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def ones(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class SampledFrame:
    """Sensor output: frame values where the mask is 1, zero elsewhere."""

    frame: Frame
    mask: Mask

    def __post_init__(self):
        if self.frame.shape != self.mask.shape:
            raise DimensionError(
                f"frame {self.frame.shape} and mask {self.mask.shape} differ in size"
            )
        if np.any(self.frame.data[self.mask.bits == 0] != 0.0):
            raise ValueError("sampled frame has non-zero values at unmeasured positions")

    @property
    def shape(self) -> tuple[int, int]:
        return self.frame.shape

    @property
    def values(self) -> np.ndarray:
        return self.frame.data

    @property
    def bits(self) -> np.ndarray:
        return self.mask.bits


def quantize(data: np.ndarray) -> np.ndarray:
    """Round half away from zero, clamp to [0, 255], return uint8."""
    data = np.asarray(data, dtype=np.float64)
    rounded = np.sign(data) * np.floor(np.abs(data) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_p5(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    raw = path.read_bytes()

    fields = []
    pos = 0
    for name in ("magic", "width", "height", "maxval"):
        match = _TOKEN.match(raw, pos)
        if match is None:
            raise FormatError(f"{path}: truncated header, missing {name}")
        fields.append(match.group(1))
        pos = match.end()
    magic, width, height, maxval = fields
    if magic != b"P5":
        raise FormatError(f"{path}: magic {magic!r} is not P5 (binary graymap)")
    try:
        w, h, mx = int(width), int(height), int(maxval)
    except ValueError:
        raise FormatError(f"{path}: non-numeric width/height/maxval") from None
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: invalid width/height {w}x{h}")
    if mx != 255:
        raise FormatError(f"{path}: maxval {mx} unsupported (only 255)")
    # exactly one whitespace byte separates header and raster
    if pos >= len(raw) or raw[pos : pos + 1] not in (b" ", b"\n", b"\r", b"\t"):
        raise FormatError(f"{path}: missing whitespace after maxval")
    pos += 1
    payload = raw[pos : pos + w * h]
    if len(payload) != w * h:
        raise FormatError(f"{path}: raster has {len(payload)} bytes, expected {w * h}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w)


def _write_p5(pixels: np.ndarray, path) -> None:
    h, w = pixels.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())


def read_frame(path, t: int = 0) -> Frame:
    return Frame(_read_p5(path).astype(np.float64), t=t)


def write_frame(frame: Frame, path) -> None:
    _write_p5(quantize(frame.data), path)


def read_mask(path) -> Mask:
    pixels = _read_p5(path)
    bad = (pixels != 0) & (pixels != 255)
    if bad.any():
        m, n = np.argwhere(bad)[0]
        raise FormatError(
            f"{path}: mask byte {pixels[m, n]} at ({m}, {n}) is neither 0 nor 255"
        )
    return Mask((pixels == 255).astype(np.uint8))


def write_mask(mask: Mask, path) -> None:
    _write_p5(mask.bits.astype(np.uint8) * 255, path)


def read_sequence(directory, pattern: str = DEFAULT_PATTERN) -> list[Frame]:
    """Read ``pattern % 0``, ``pattern % 1``, ... from ``directory``.

    Indices must be consecutive from 0; any file matching the pattern beyond a
    missing index is reported as a gap.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    regex = _pattern_regex(pattern)
    indices = sorted(
        int(m.group(1)) for p in directory.iterdir() if (m := regex.fullmatch(p.name))
    )
    if not indices:
        raise FileNotFoundError(f"{directory}: no files match {pattern!r}")
    for expected, found in enumerate(indices):
        if found != expected:
            raise FormatError(
                f"{directory}: gap in frame indices, {pattern % expected} missing"
            )

    frames = []
    for t in indices:
        frame = read_frame(directory / (pattern % t), t=t)
        if frames and frame.shape != frames[0].shape:
            raise DimensionError(
                f"{pattern % t}: size {frame.width}x{frame.height} differs from "
                f"{frames[0].width}x{frames[0].height}"
            )
        frames.append(frame)
    return frames


def write_sequence(frames, directory, pattern: str = DEFAULT_PATTERN) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        write_frame(frame, directory / (pattern % t))


def _pattern_regex(pattern: str) -> re.Pattern:
    match = re.search(r"%0?(\d*)d", pattern)
    if match is None:
        raise ValueError(f"pattern {pattern!r} has no %d field")
    head = re.escape(pattern[: match.start()])
    tail = re.escape(pattern[match.end() :])
    return re.compile(f"{head}(\\d+){tail}")
