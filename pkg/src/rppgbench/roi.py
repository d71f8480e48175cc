"""Skin-pixel selection: chromaticity skin model, polygon masks, RGB traces."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .io import FrameSequence, RoiBox, RoiPolygon, RoiTrack

__all__ = [
    "SkinModel",
    "RgbTrace",
    "STRATEGIES",
    "fit_skin_model",
    "skin_mask",
    "lower_face_mask",
    "mean_rgb_trace",
    "iter_roi_pixels",
]

log = logging.getLogger(__name__)

STRATEGIES = ("bbox", "skin", "mask")

#: Ridge added to a degenerate chromaticity covariance.
COV_RIDGE = 1e-6
_COV_EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class SkinModel:
    """A Gaussian skin model in normalized (r, g) chromaticity space.

    ``regularized`` records that the fitted covariance was degenerate and a
    ridge of ``COV_RIDGE`` was added to make it invertible.
    """

    mean: np.ndarray
    cov: np.ndarray
    tau: float
    regularized: bool = False

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        cov = np.array(self.cov, dtype=np.float64)
        if mean.shape != (2,) or cov.shape != (2, 2):
            raise ValueError("mean must be shaped (2,) and cov (2, 2)")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("model parameters must be finite")
        tau = float(self.tau)
        if not 0.0 < tau < 1.0:
            raise ValueError(f"tau must lie strictly inside (0, 1), got {tau}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "tau", tau)

    def mahalanobis_limit(self) -> float:
        """Boundary squared distance: pixels with d^2 <= -2 ln(tau) are kept."""
        return -2.0 * float(np.log(self.tau))


@dataclass(frozen=True)
class RgbTrace:
    """Per-frame mean RGB over the selected pixels, at the video frame rate."""

    means: np.ndarray
    fs: float
    pixel_counts: np.ndarray
    fallback_frames: tuple[int, ...] = ()

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64)
        counts = np.array(self.pixel_counts, dtype=np.int64)
        if means.ndim != 2 or means.shape[1] != 3 or means.shape[0] == 0:
            raise ValueError("means must be shaped (n_frames, 3) with n_frames >= 1")
        if counts.shape != (means.shape[0],):
            raise ValueError("pixel_counts must hold one count per frame")
        if np.any(counts < 1):
            raise ValueError("every frame must contribute at least one pixel")
        if not np.all(np.isfinite(means)):
            raise ValueError("trace means must be finite")
        if means.min() < 0.0 or means.max() > 255.0:
            raise ValueError("trace means must stay within [0, 255]")
        fs = float(self.fs)
        if not np.isfinite(fs) or fs <= 0:
            raise ValueError(f"frame rate must be finite and positive, got {self.fs!r}")
        means.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "pixel_counts", counts)
        object.__setattr__(self, "fs", fs)
        object.__setattr__(self, "fallback_frames", tuple(int(i) for i in self.fallback_frames))

    def __len__(self) -> int:
        return int(self.means.shape[0])

    @property
    def fallback_fraction(self) -> float:
        return len(self.fallback_frames) / self.means.shape[0]

    def channel(self, idx: int) -> np.ndarray:
        return self.means[:, idx]


def _chromaticity(pixels: np.ndarray) -> np.ndarray:
    """Map (..., 3) RGB values to (..., 2) normalized (r, g) chromaticity.

    Pixels with zero intensity get the achromatic point (1/3, 1/3).
    """
    rgb = np.asarray(pixels, dtype=np.float64)
    total = rgb.sum(axis=-1)
    safe = np.where(total > 0, total, 1.0)
    r = np.where(total > 0, rgb[..., 0] / safe, 1.0 / 3.0)
    g = np.where(total > 0, rgb[..., 1] / safe, 1.0 / 3.0)
    return np.stack([r, g], axis=-1)


def _box_pixels(frame: np.ndarray, box: RoiBox) -> np.ndarray:
    sub = frame[box.y:box.y + box.h, box.x:box.x + box.w]
    return sub.reshape(-1, 3)


def fit_skin_model(frame: np.ndarray, roi, tau: float) -> SkinModel:
    """Fit the chromaticity Gaussian on the central quarter of a ROI.

    Parameters
    ----------
    frame : (h, w, 3) image.
    roi : RoiBox or RoiPolygon locating the face; at least 100 pixels.
    tau : relative likelihood threshold in (0, 1).

    The seed region is the centered sub-rectangle with half the width and
    half the height of the ROI (a quarter of its area), which reliably sits
    on skin when the ROI is a face box.
    """
    box = roi.bbox() if isinstance(roi, (RoiBox, RoiPolygon)) else RoiBox(*roi)
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError("frame must be shaped (h, w, 3)")
    if box.w * box.h < 100:
        raise ValueError(f"ROI must contain at least 100 pixels, got {box.w * box.h}")
    seed_w = max(1, box.w // 2)
    seed_h = max(1, box.h // 2)
    seed = RoiBox(box.x + (box.w - seed_w) // 2, box.y + (box.h - seed_h) // 2, seed_w, seed_h)
    chrom = _chromaticity(_box_pixels(frame, seed))
    mean = chrom.mean(axis=0)
    if chrom.shape[0] > 1:
        cov = np.cov(chrom, rowvar=False, ddof=1)
    else:
        cov = np.zeros((2, 2))
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    regularized = False
    if np.linalg.eigvalsh(cov).min() < _COV_EIG_FLOOR:
        cov = cov + COV_RIDGE * np.eye(2)
        regularized = True
    return SkinModel(mean=mean, cov=cov, tau=tau, regularized=regularized)


def skin_mask(frame: np.ndarray, model: SkinModel) -> np.ndarray:
    """Boolean mask of pixels whose peak-normalized skin likelihood >= tau.

    Normalizing the Gaussian to its peak turns the threshold into a squared
    Mahalanobis limit of -2 ln(tau); the boundary is kept.
    """
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError("frame must be shaped (h, w, 3)")
    chrom = _chromaticity(frame)
    delta = chrom - model.mean
    inv_cov = np.linalg.inv(model.cov)
    d2 = np.einsum("...i,ij,...j->...", delta, inv_cov, delta)
    return d2 <= model.mahalanobis_limit()


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    for d, a, b, c in ((d1, p3, p4, p1), (d2, p3, p4, p2), (d3, p1, p2, p3), (d4, p1, p2, p4)):
        if d == 0 and on_segment(a, b, c):
            return True
    return False


def _check_simple_polygon(points) -> None:
    k = len(points)
    for i in range(k):
        a1 = points[i]
        a2 = points[(i + 1) % k]
        for j in range(i + 1, k):
            # Skip edges sharing a vertex (consecutive, or first/last pair).
            if j == i or (j + 1) % k == i or (i + 1) % k == j:
                continue
            b1 = points[j]
            b2 = points[(j + 1) % k]
            if _segments_properly_intersect(a1, a2, b1, b2):
                raise ValueError("landmark polygon must be simple (non self-intersecting)")


def lower_face_mask(landmarks, frame_width: int, frame_height: int) -> np.ndarray:
    """Rasterize a landmark polygon into a boolean mask.

    A pixel belongs to the mask when its center satisfies the even-odd rule,
    with centers that fall exactly on an edge counted inside. The polygon must
    be simple and have at least four vertices.
    """
    if isinstance(landmarks, RoiPolygon):
        points = landmarks.points
    else:
        points = tuple((float(x), float(y)) for x, y in landmarks)
    if len(points) < 4:
        raise ValueError(f"a landmark polygon needs at least 4 points, got {len(points)}")
    if frame_width <= 0 or frame_height <= 0:
        raise ValueError("frame dimensions must be positive")
    _check_simple_polygon(points)
    cx = np.arange(frame_width) + 0.5
    cy = np.arange(frame_height) + 0.5
    gx, gy = np.meshgrid(cx, cy)
    inside = np.zeros((frame_height, frame_width), dtype=bool)
    on_edge = np.zeros_like(inside)
    k = len(points)
    for i in range(k):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % k]
        crosses = (y1 > gy) != (y2 > gy)
        if np.any(crosses):
            x_int = x1 + (gy - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (gx < x_int)
        # Boundary inclusion: distance of the center to the edge segment.
        ex, ey = x2 - x1, y2 - y1
        seg_len2 = ex * ex + ey * ey
        if seg_len2 == 0:
            continue
        t = ((gx - x1) * ex + (gy - y1) * ey) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        dist2 = (gx - (x1 + t * ex)) ** 2 + (gy - (y1 + t * ey)) ** 2
        on_edge |= dist2 <= 1e-18
    return inside | on_edge


def _frame_mask_pixels(frame: np.ndarray, entry, strategy: str, model, mask_cache: dict):
    """Pixels (N, 3) for one frame plus whether the full-box fallback fired."""
    box = entry.bbox()
    if strategy == "bbox":
        return _box_pixels(frame, box), False
    if strategy == "skin":
        if model is None:
            raise ValueError("strategy 'skin' requires a fitted SkinModel")
        sub = frame[box.y:box.y + box.h, box.x:box.x + box.w]
        mask = skin_mask(sub, model)
        if not mask.any():
            return _box_pixels(frame, box), True
        return sub[mask].reshape(-1, 3), False
    if strategy == "mask":
        if not isinstance(entry, RoiPolygon):
            raise ValueError("strategy 'mask' requires landmark ROI entries")
        key = id(entry)
        mask = mask_cache.get(key)
        if mask is None:
            mask = lower_face_mask(entry, frame.shape[1], frame.shape[0])
            mask_cache[key] = mask
        if not mask.any():
            return _box_pixels(frame, box), True
        return frame[mask].reshape(-1, 3), False
    raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")


def iter_roi_pixels(seq: FrameSequence, roi: RoiTrack, strategy: str = "bbox", model: SkinModel | None = None):
    """Yield ``(pixels, fallback)`` per frame, selecting pixels per strategy.

    ``pixels`` is a float64 array of shape (N, 3); ``fallback`` is True when
    the skin or polygon selection came up empty and the full box was used.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    if not roi.covers(seq.n_frames):
        raise ValueError("ROI track must cover the sequence from frame 0")
    mask_cache: dict = {}
    for i in range(seq.n_frames):
        entry = roi.entry_for(i)
        box = entry.bbox()
        if box.x < 0 or box.y < 0 or box.x + box.w > seq.width or box.y + box.h > seq.height:
            raise ValueError(f"ROI for frame {i} exceeds the frame bounds")
        pixels, fallback = _frame_mask_pixels(seq.frames[i], entry, strategy, model, mask_cache)
        if pixels.shape[0] == 0:
            raise ValueError(f"empty ROI at frame {i}")
        yield pixels.astype(np.float64, copy=False), fallback


def mean_rgb_trace(seq: FrameSequence, roi: RoiTrack, strategy: str = "bbox", model: SkinModel | None = None) -> RgbTrace:
    """Average the selected pixels of every frame into an RGB trace."""
    means = np.empty((seq.n_frames, 3))
    counts = np.empty(seq.n_frames, dtype=np.int64)
    fallbacks: list[int] = []
    for i, (pixels, fallback) in enumerate(iter_roi_pixels(seq, roi, strategy, model)):
        means[i] = pixels.mean(axis=0)
        counts[i] = pixels.shape[0]
        if fallback:
            fallbacks.append(i)
    if fallbacks:
        log.info("ROI fallback on %d/%d frames", len(fallbacks), seq.n_frames)
    return RgbTrace(
        means=means,
        fs=seq.fps_float,
        pixel_counts=counts,
        fallback_frames=tuple(fallbacks),
    )
