"""Quarter-sampling masks and sensor simulation.

Each 2x2 block of the high-resolution grid holds exactly one measured pixel
per frame.  A fixed schedule reuses one mask forever; a dynamic schedule
cycles through four masks so that every position of every block is read
exactly once per period.

The per-block choice comes from a stateless SplitMix64 hash of
``(mode, seed, block_row, block_col)``, so masks are reproducible on any
platform without carrying RNG state around.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .frame_io import Frame, Mask, SampledFrame, read_mask, write_mask

_U64 = np.uint64
_MODE_SALT = {"fixed": 0x0F1C3D, "dynamic": 0xD1A4A1}
# lexicographic order of the 24 permutations of the four quadrants
_PERMS = np.array(list(permutations(range(4))), dtype=np.int64)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    x = np.asarray(x, dtype=_U64)
    with np.errstate(over="ignore"):
        z = x + _U64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))


def block_hash(rows: int, cols: int, seed: int, mode: str) -> np.ndarray:
    """uint64 hash per 2x2 block, shape (rows, cols)."""
    key = splitmix64(np.array((seed % 2**64) ^ _MODE_SALT[mode], dtype=_U64))
    i = np.arange(rows, dtype=_U64)[:, None]
    j = np.arange(cols, dtype=_U64)[None, :]
    return splitmix64(key ^ ((i << _U64(32)) | j))


@dataclass(frozen=True)
class MaskSchedule:
    mode: str
    masks: tuple
    seed: int = 0

    def __post_init__(self):
        if not self.masks:
            raise ValueError("a schedule needs at least one mask")
        shape = self.masks[0].shape
        if any(m.shape != shape for m in self.masks):
            raise DimensionError("all masks of a schedule must share one size")

    @property
    def period(self) -> int:
        return len(self.masks)

    @property
    def shape(self) -> tuple[int, int]:
        return self.masks[0].shape

    def mask_for(self, t: int) -> Mask:
        return self.masks[t % self.period]

    def is_quarter(self) -> bool:
        """Every 2x2 block of every mask holds exactly one measured pixel."""
        for m in self.masks:
            if m.height % 2 or m.width % 2 or np.any(_block_sums(m.bits) != 1):
                return False
        return True

    def covers_once(self) -> bool:
        """Sum over one period is the all-ones image."""
        total = sum(m.bits.astype(np.int64) for m in self.masks)
        return bool(np.all(total == 1))


def _block_sums(bits: np.ndarray) -> np.ndarray:
    h, w = bits.shape
    return bits.reshape(h // 2, 2, w // 2, 2).sum(axis=(1, 3))


def _check_dims(width: int, height: int) -> None:
    if width <= 0 or height <= 0 or width % 2 or height % 2:
        raise DimensionError(f"quarter sampling needs even dimensions, got {width}x{height}")


def _quadrant_mask(quadrant: np.ndarray) -> Mask:
    rows, cols = quadrant.shape
    bits = np.zeros((rows, 2, cols, 2), dtype=np.uint8)
    for q in range(4):
        bits[:, q // 2, :, q % 2] = quadrant == q
    return Mask(bits.reshape(2 * rows, 2 * cols))


def generate_fixed_mask(width: int, height: int, seed: int = 0) -> MaskSchedule:
    _check_dims(width, height)
    h = block_hash(height // 2, width // 2, seed, "fixed")
    quadrant = (h % _U64(4)).astype(np.int64)
    return MaskSchedule("fixed", (_quadrant_mask(quadrant),), seed)


def generate_dynamic_mask(width: int, height: int, seed: int = 0) -> MaskSchedule:
    _check_dims(width, height)
    h = block_hash(height // 2, width // 2, seed, "dynamic")
    perm = _PERMS[(h % _U64(24)).astype(np.int64)]
    masks = tuple(_quadrant_mask(perm[..., phase]) for phase in range(4))
    return MaskSchedule("dynamic", masks, seed)


def generate_schedule(mode: str, width: int, height: int, seed: int = 0) -> MaskSchedule:
    if mode == "fixed":
        return generate_fixed_mask(width, height, seed)
    if mode == "dynamic":
        return generate_dynamic_mask(width, height, seed)
    raise ValueError(f"unknown mask mode {mode!r}")


def load_schedule(paths) -> MaskSchedule:
    """Schedule from externally defined mask files (period = number of files)."""
    masks = tuple(read_mask(p) for p in paths)
    return MaskSchedule("file", masks, 0)


def save_schedule(schedule: MaskSchedule, directory, stem: str = "mask") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for phase, m in enumerate(schedule.masks):
        path = directory / f"{stem}{phase}.pgm"
        write_mask(m, path)
        paths.append(path)
    return paths


def apply_mask(frame: Frame, mask: Mask) -> SampledFrame:
    if frame.shape != mask.shape:
        raise DimensionError(f"frame {frame.shape} and mask {mask.shape} differ in size")
    return SampledFrame(Frame(frame.data * mask.bits, t=frame.t), mask)
