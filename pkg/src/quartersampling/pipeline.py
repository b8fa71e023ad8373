"""Causal recursive reconstruction of a quarter-sampled sequence.

Frame t is sampled with the schedule's mask, motion is estimated against
each of the last R reconstructions, the configured check filters the
vectors, the surviving vectors carry raw past measurements into a shared
projection buffer, and FSR fills in the rest.  Nothing from frames after t
is ever touched.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field as dc_field

import numpy as np

from .consistency import CheckMode, CheckStats, apply_check
from .errors import DimensionError
from .frame_io import Frame, SampledFrame
from .fsr import FsrParams, reconstruct_frame
from .mask import MaskSchedule, apply_mask
from .motion import MatchContext, MotionParams, estimate
from .projection import ProjectionBuffer, project

VARIANTS = ("single_fsr", "rfsr", "dfsr")


@dataclass(frozen=True)
class PipelineConfig:
    mask_schedule: MaskSchedule
    fsr: FsrParams = FsrParams()
    motion: MotionParams = MotionParams()
    check: CheckMode = CheckMode()
    refs: int = 3
    variant: str = "dfsr"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.refs < 0:
            raise ValueError("refs must be >= 0")
        self.check.validate(self.motion)

    @property
    def recursive(self) -> bool:
        return self.variant != "single_fsr" and self.refs > 0


@dataclass
class StageTimings:
    """Wall-clock seconds per stage (ME, CC, PR, FSR) and in total."""

    me: float = 0.0
    cc: float = 0.0
    pr: float = 0.0
    fsr: float = 0.0
    total: float = 0.0

    def add(self, other: "StageTimings") -> None:
        self.me += other.me
        self.cc += other.cc
        self.pr += other.pr
        self.fsr += other.fsr
        self.total += other.total


@dataclass
class FrameRecord:
    t: int
    timings: StageTimings
    stats: CheckStats
    references: int
    projected: int  # missing pixels that received at least one projection


class History:
    """The last R reconstructions together with their original measurements."""

    def __init__(self, refs: int):
        self.refs = refs
        self._items: deque = deque(maxlen=max(refs, 1))

    def __len__(self) -> int:
        return len(self._items) if self.refs > 0 else 0

    def push(self, reconstruction: Frame, sampled: SampledFrame) -> None:
        self._items.appendleft((reconstruction, sampled))

    def reference(self, d: int) -> tuple[Frame, SampledFrame]:
        """(reconstruction, measurements) of the frame d steps back (d >= 1)."""
        return self._items[d - 1]


@dataclass
class RunResult:
    reconstructions: list
    timings: StageTimings
    stats: CheckStats
    frames: list = dc_field(default_factory=list)


def build_projection(history: History, sampled: SampledFrame, config: PipelineConfig,
                     timings: StageTimings | None = None,
                     stats: CheckStats | None = None) -> ProjectionBuffer:
    """Motion-compensated projection of the referenced past measurements."""
    timings = timings if timings is not None else StageTimings()
    buffer = ProjectionBuffer(*sampled.shape)
    if not config.recursive:
        return buffer
    missing = sampled.bits == 0
    for d in range(1, min(config.refs, len(history)) + 1):
        recon, past_sampled = history.reference(d)
        t0 = time.perf_counter()
        ctx = MatchContext(sampled, recon, config.motion)
        field = estimate(sampled, recon, config.motion, targets=missing, ref_offset=d,
                         context=ctx)
        t1 = time.perf_counter()
        field = apply_check(config.check, field, ctx, stats)
        t2 = time.perf_counter()
        buffer = project(field, past_sampled, buffer)
        t3 = time.perf_counter()
        timings.me += t1 - t0
        timings.cc += t2 - t1
        timings.pr += t3 - t2
    return buffer


def _step(history, sampled, config, timings, stats):
    start = time.perf_counter()
    buffer = build_projection(history, sampled, config, timings, stats)
    t0 = time.perf_counter()
    out = reconstruct_frame(sampled, buffer, config.fsr,
                            overwrite_projected=config.variant == "rfsr")
    timings.fsr += time.perf_counter() - t0
    timings.total += time.perf_counter() - start
    history.push(out, sampled)
    return out, buffer


def reconstruct_next(history: History, sampled: SampledFrame, config: PipelineConfig,
                     timings: StageTimings | None = None,
                     stats: CheckStats | None = None) -> Frame:
    """Reconstruct one frame from its measurements and the history, then record it."""
    timings = timings if timings is not None else StageTimings()
    return _step(history, sampled, config, timings, stats)[0]


def sample_sequence(truth, schedule: MaskSchedule) -> list[SampledFrame]:
    return [apply_mask(f, schedule.mask_for(t)) for t, f in enumerate(truth)]


def run_sequence(truth, config: PipelineConfig) -> RunResult:
    """Reconstruct every frame of ``truth`` in order."""
    truth = list(truth)
    if not truth:
        raise ValueError("run_sequence needs at least one frame")
    shape = truth[0].shape
    if any(f.shape != shape for f in truth):
        raise DimensionError("all frames of a sequence must share one size")
    if config.mask_schedule.shape != shape:
        raise DimensionError(
            f"mask schedule {config.mask_schedule.shape} does not match frames {shape}"
        )
    history = History(config.refs)
    total = StageTimings()
    stats = CheckStats()
    recons, records = [], []
    for t, frame in enumerate(truth):
        # only frame t's own measurements enter from the ground truth
        sampled = apply_mask(frame, config.mask_schedule.mask_for(t))
        ft, fs = StageTimings(), CheckStats()
        refs = min(config.refs, len(history)) if config.recursive else 0
        out, buffer = _step(history, sampled, config, ft, fs)
        recons.append(Frame(out.data, t=t))
        records.append(FrameRecord(t, ft, fs, refs, int(np.count_nonzero(buffer.count))))
        total.add(ft)
        stats.add(fs)
    return RunResult(recons, total, stats, records)
