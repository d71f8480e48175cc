"""Pulse extraction by tracking the rotation of the skin-pixel subspace.

Each frame's skin pixels define a 3x3 correlation matrix whose leading
eigenvector follows the momentary skin color. Projecting it onto the two
minor eigenvectors of an anchor frame measures the rotation accumulated over
a short window; the scaled projections are recombined into a pulse sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSubspaceError, NumericDegeneracyError
from .signals import PulseSignal, hann_overlap_add

__all__ = ["SsrParams", "FrameEigen", "frame_eigen", "canonical_eigenvector_signs", "ssr_pulse"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SsrParams:
    """Tunables of the subspace-rotation extractor."""

    window_l: int | None = None  # frames; None means one second, rounded even
    strategy: str = "skin"
    skin_tau: float = 0.3
    degeneracy_eps: float = 1e-12

    def __post_init__(self):
        if self.window_l is not None and self.window_l < 2:
            raise ValueError(f"window_l must be at least 2 frames, got {self.window_l}")
        if not 0.0 < self.skin_tau < 1.0:
            raise ValueError(f"skin_tau must lie in (0, 1), got {self.skin_tau}")
        if self.degeneracy_eps <= 0:
            raise ValueError(f"degeneracy_eps must be positive, got {self.degeneracy_eps}")


@dataclass(frozen=True)
class FrameEigen:
    """Eigen-decomposition of one frame's pixel correlation matrix.

    ``eigenvalues`` are sorted descending; ``eigenvectors`` holds the matching
    orthonormal vectors as columns, each flipped so its first nonzero
    component is positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=np.float64)
        vec = np.array(self.eigenvectors, dtype=np.float64)
        if lam.shape != (3,) or vec.shape != (3, 3):
            raise ValueError("expected 3 eigenvalues and a 3x3 eigenvector matrix")
        lam.setflags(write=False)
        vec.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vec)


def canonical_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so each first nonzero component is positive.

    This removes the solver's sign ambiguity and makes the decomposition
    deterministic for identical input.
    """
    vectors = np.array(vectors, dtype=np.float64)
    for col in range(vectors.shape[1]):
        column = vectors[:, col]
        nonzero = np.nonzero(column)[0]
        if nonzero.size and column[nonzero[0]] < 0:
            vectors[:, col] = -column
    return vectors


def frame_eigen(pixels) -> FrameEigen:
    """Eigen-decompose ``C = V'V / N`` for one frame's skin pixels (N, 3)."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[1] != 3:
        raise ValueError("pixels must be shaped (N, 3)")
    if pixels.shape[0] < 3:
        raise ValueError(f"need at least 3 pixels, got {pixels.shape[0]}")
    corr = pixels.T @ pixels / pixels.shape[0]
    lam, vec = np.linalg.eigh(corr)
    lam = lam[::-1]
    vec = vec[:, ::-1]
    if lam[0] <= 0:
        raise NumericDegeneracyError("pixel correlation matrix has no positive eigenvalue")
    lam = np.maximum(lam, 0.0)  # clamp eigh round-off on a PSD matrix
    return FrameEigen(eigenvalues=lam, eigenvectors=canonical_eigenvector_signs(vec))


def _default_window(fps: float) -> int:
    length = int(round(fps))
    if length % 2 == 1:
        length += 1
    return max(length, 2)


def ssr_pulse(pixel_sets, params: SsrParams = SsrParams(), fps: float = None, fallback_fraction: float = 0.0) -> PulseSignal:
    """Extract the pulse from per-frame skin pixel sets.

    Parameters
    ----------
    pixel_sets : iterable of (N_i, 3) arrays, one per frame.
    params : extractor tunables.
    fps : video frame rate.
    fallback_fraction : forwarded into the resulting PulseSignal.

    Windows whose anchor frame has a second or third eigenvalue at or below
    ``degeneracy_eps`` times the first are skipped and logged; if every window
    is degenerate, :class:`DegenerateSubspaceError` is raised.
    """
    if fps is None or not np.isfinite(fps) or fps <= 0:
        raise ValueError(f"fps must be finite and positive, got {fps!r}")
    eigens = [frame_eigen(p) for p in pixel_sets]
    n = len(eigens)
    if n < 2:
        raise ValueError(f"need at least 2 frames, got {n}")
    length = params.window_l if params.window_l is not None else _default_window(fps)
    if length % 2 == 1:
        raise ValueError(f"window_l must be even for 50% overlap, got {length}")
    if length > n:
        raise ValueError(f"window of {length} frames exceeds the {n}-frame sequence")
    lams = np.stack([e.eigenvalues for e in eigens])  # (n, 3)
    u1 = np.stack([e.eigenvectors[:, 0] for e in eigens])  # (n, 3)

    hop = length // 2
    starts = list(range(0, n - length + 1, hop))
    if starts[-1] + length < n:
        starts.append(n - length)
    blocks = []
    offsets = []
    skipped = 0
    for start in starts:
        lam_anchor = lams[start]
        if min(lam_anchor[1], lam_anchor[2]) <= params.degeneracy_eps * lam_anchor[0]:
            skipped += 1
            continue
        u2a = eigens[start].eigenvectors[:, 1]
        u3a = eigens[start].eigenvectors[:, 2]
        lam_t = lams[start:start + length]
        u1_t = u1[start:start + length]
        r1 = u1_t @ u2a
        r2 = u1_t @ u3a
        s1 = np.sqrt(lam_t[:, 0] / lam_anchor[1]) * r1
        s2 = np.sqrt(lam_t[:, 0] / lam_anchor[2]) * r2
        sr = s1[:, None] * u2a[None, :] + s2[:, None] * u3a[None, :]  # (length, 3)
        sd1 = sr[:, 0].std()
        sd2 = sr[:, 1].std()
        pulse = sr[:, 0] - (sd1 / sd2) * sr[:, 1] if sd2 > 0 else sr[:, 0]
        blocks.append(pulse - pulse.mean())
        offsets.append(start)
    if not blocks:
        raise DegenerateSubspaceError(
            f"all {len(starts)} windows have a degenerate anchor subspace"
        )
    if skipped:
        log.warning("skipped %d/%d degenerate windows", skipped, len(starts))
    assembled = hann_overlap_add(blocks, fps, offsets=offsets).samples
    out = np.zeros(n)
    out[:assembled.size] = assembled
    out -= out.mean()
    return PulseSignal(
        samples=out,
        fs=float(fps),
        method="ssr",
        fallback_fraction=fallback_fraction,
    )
