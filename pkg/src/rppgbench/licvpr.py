"""Green-channel pulse extraction with illumination and motion cleanup.

Pipeline order: adaptive illumination rectification against a background
trace, elimination of high-variance temporal segments, smoothness-priors
detrending, moving average, band-pass. The output is shorter than the input
when segments were discarded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .io import FrameSequence, RoiBox, RoiTrack
from .signals import (
    BandHz,
    PulseSignal,
    Signal1D,
    bandpass,
    detrend_smoothness_priors,
    moving_average,
    nlms_rectify,
)

__all__ = ["LiParams", "background_trace", "eliminate_motion_segments", "licvpr_pulse"]

log = logging.getLogger(__name__)

#: Seconds of signal averaged on each side of a gap when levels are re-matched.
REJOIN_MATCH_S = 0.25


@dataclass(frozen=True)
class LiParams:
    """Tunables of the green-channel extractor."""

    mu: float = 1.0
    order: int = 1
    rectify: bool = True
    segment_s: float = 1.0
    discard_percentile: float = 95.0
    detrend_lambda: float = 300.0
    ma_window: int = 5
    band: BandHz = BandHz(0.67, 4.0)
    background_margin: int = 10
    strategy: str = "mask"
    skin_tau: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.mu <= 2.0:
            raise ValueError(f"mu must lie in (0, 2], got {self.mu}")
        if self.order < 1:
            raise ValueError(f"order must be a positive integer, got {self.order}")
        if self.segment_s <= 0:
            raise ValueError(f"segment_s must be positive, got {self.segment_s}")
        # 100 is allowed and means "discard nothing": no SD exceeds the max.
        if not 0.0 < self.discard_percentile <= 100.0:
            raise ValueError(
                f"discard_percentile must lie in (0, 100], got {self.discard_percentile}"
            )
        if self.detrend_lambda < 0:
            raise ValueError(f"detrend_lambda must be non-negative, got {self.detrend_lambda}")
        if self.ma_window < 1 or self.ma_window % 2 == 0:
            raise ValueError(f"ma_window must be a positive odd integer, got {self.ma_window}")
        if self.background_margin < 0:
            raise ValueError(f"background_margin must be non-negative, got {self.background_margin}")
        if not 0.0 < self.skin_tau < 1.0:
            raise ValueError(f"skin_tau must lie in (0, 1), got {self.skin_tau}")


def background_trace(seq: FrameSequence, roi: RoiTrack, margin: int = 10) -> Signal1D:
    """Mean green value of everything outside the ROI box grown by ``margin``.

    Raises ValueError when the grown box swallows the whole frame on some
    frame (no background pixels remain).
    """
    if margin < 0:
        raise ValueError(f"margin must be non-negative, got {margin}")
    if not roi.covers(seq.n_frames):
        raise ValueError("ROI track must cover the sequence from frame 0")
    out = np.empty(seq.n_frames)
    for i in range(seq.n_frames):
        box = roi.entry_for(i).bbox()
        x0 = max(box.x - margin, 0)
        y0 = max(box.y - margin, 0)
        x1 = min(box.x + box.w + margin, seq.width)
        y1 = min(box.y + box.h + margin, seq.height)
        green = seq.frames[i, :, :, 1].astype(np.float64)
        total = green.sum()
        inner = green[y0:y1, x0:x1].sum()
        n_outside = seq.width * seq.height - (x1 - x0) * (y1 - y0)
        if n_outside <= 0:
            raise ValueError(
                f"no background pixels left at frame {i}: the ROI grown by {margin} px covers the frame"
            )
        out[i] = (total - inner) / n_outside
    return Signal1D(out, seq.fps_float)


def eliminate_motion_segments(s: Signal1D, segment_s: float, p: float) -> tuple[Signal1D, tuple[int, ...]]:
    """Drop segments whose SD exceeds the p-th percentile of all segment SDs.

    The signal is cut into consecutive segments of ``segment_s`` seconds (the
    last one may be shorter). Discarding uses a strict comparison, so ``p=100``
    keeps everything. Survivors separated by a gap are level-shifted so their
    head mean continues the predecessor's tail mean.

    Returns the concatenated survivors and the indices of dropped segments.
    """
    if segment_s <= 0:
        raise ValueError(f"segment_s must be positive, got {segment_s}")
    if not 0.0 < p <= 100.0:
        raise ValueError(f"percentile must lie in (0, 100], got {p}")
    seg_len = max(1, int(round(segment_s * s.fs)))
    n = len(s)
    bounds = list(range(0, n, seg_len))
    segments = [s.samples[b:b + seg_len] for b in bounds]
    if len(segments) < 2:
        raise ValueError(
            f"need at least 2 segments, got {len(segments)} "
            f"({segment_s} s segments over {n / s.fs:.2f} s)"
        )
    sds = np.array([seg.std() for seg in segments])
    threshold = np.percentile(sds, p)
    match_len = max(1, int(round(REJOIN_MATCH_S * s.fs)))
    kept: list[np.ndarray] = []
    discarded: list[int] = []
    previous_kept_idx = None
    for idx, segment in enumerate(segments):
        if sds[idx] > threshold:
            discarded.append(idx)
            continue
        if kept and previous_kept_idx != idx - 1:
            tail = kept[-1][-match_len:].mean()
            head = segment[:match_len].mean()
            segment = segment + (tail - head)
        kept.append(segment)
        previous_kept_idx = idx
    out = np.concatenate(kept)
    return Signal1D(out, s.fs), tuple(discarded)


def licvpr_pulse(green: Signal1D, background_green: Signal1D, params: LiParams = LiParams()) -> PulseSignal:
    """Extract the pulse from a skin green trace and a background green trace.

    The two traces must be frame-aligned. With ``rectify=False`` the
    background is ignored. Output length equals the post-elimination length.
    """
    if len(green) != len(background_green):
        raise ValueError("green and background traces must be frame-aligned (equal length)")
    if green.fs != background_green.fs:
        raise ValueError("green and background traces must share a frame rate")
    x = green
    if params.rectify:
        x = nlms_rectify(green, background_green, mu=params.mu, order=params.order)
    seg_len = max(1, int(round(params.segment_s * green.fs)))
    n_segments = int(np.ceil(len(green) / seg_len))
    x, discarded = eliminate_motion_segments(x, params.segment_s, params.discard_percentile)
    x = detrend_smoothness_priors(x, params.detrend_lambda)
    x = moving_average(x, params.ma_window)
    x = bandpass(x, params.band)
    samples = x.samples - x.samples.mean()
    if discarded:
        log.info("discarded %d/%d segments", len(discarded), n_segments)
    return PulseSignal(
        samples=samples,
        fs=green.fs,
        method="licvpr",
        discarded_fraction=len(discarded) / n_segments,
    )
