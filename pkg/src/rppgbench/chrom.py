"""Chrominance-projection pulse extraction from an RGB trace.

Works on short overlapping windows: channels are normalized by their window
mean, projected onto two fixed chrominance axes, band-limited, and combined
with a ratio of standard deviations that cancels specular distortions. The
windows are Hann-weighted and overlap-added back into one waveform.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NumericDegeneracyError
from .roi import RgbTrace
from .signals import BandHz, PulseSignal, Signal1D, bandpass, hann_overlap_add

__all__ = ["ChromParams", "chrom_pulse", "window_starts"]


@dataclass(frozen=True)
class ChromParams:
    """Tunables of the chrominance extractor."""

    window_s: float = 1.6
    band: BandHz = BandHz(0.67, 4.0)
    strategy: str = "skin"
    skin_tau: float = 0.3
    numtaps: int = 127

    def __post_init__(self):
        if self.window_s <= 0:
            raise ValueError(f"window_s must be positive, got {self.window_s}")
        if not 0.0 < self.skin_tau < 1.0:
            raise ValueError(f"skin_tau must lie in (0, 1), got {self.skin_tau}")


def _window_len(window_s: float, fs: float, n: int) -> int:
    length = int(round(window_s * fs))
    if length % 2 == 1:
        length += 1
    if length < 8:
        raise ValueError(f"window of {window_s} s at {fs} fps is shorter than 8 frames")
    if length > n:
        raise ValueError(f"window of {length} frames exceeds the {n}-frame trace")
    return length


def window_starts(n: int, length: int) -> list[int]:
    """Start indices at 50% hop plus, if needed, a final window anchored at the end."""
    hop = length // 2
    starts = list(range(0, n - length + 1, hop))
    if starts[-1] + length < n:
        starts.append(n - length)
    return starts


def chrom_pulse(trace: RgbTrace, params: ChromParams = ChromParams()) -> PulseSignal:
    """Extract the pulse waveform from an RGB trace.

    Raises :class:`NumericDegeneracyError` when a window has a zero channel
    mean (the normalization would divide by zero). Output has zero mean, one
    sample per frame, and is invariant to uniform scaling of the trace.
    """
    n = len(trace)
    fs = trace.fs
    length = _window_len(params.window_s, fs, n)
    # The FIR must fit the analysis window; keep taps odd for an integer delay.
    numtaps = min(params.numtaps, length - 1)
    if numtaps % 2 == 0:
        numtaps -= 1
    starts = window_starts(n, length)
    blocks = []
    for w_idx, start in enumerate(starts):
        window = trace.means[start:start + length]
        mu = window.mean(axis=0)
        if (mu == 0).any():
            raise NumericDegeneracyError(
                f"zero channel mean in window {w_idx} (frames {start}..{start + length - 1})"
            )
        rn = window[:, 0] / mu[0]
        gn = window[:, 1] / mu[1]
        bn = window[:, 2] / mu[2]
        x_chrom = 3.0 * rn - 2.0 * gn
        y_chrom = 1.5 * rn + gn - 1.5 * bn
        x_f = bandpass(Signal1D(x_chrom, fs), params.band, numtaps=numtaps).samples
        y_f = bandpass(Signal1D(y_chrom, fs), params.band, numtaps=numtaps).samples
        sy = y_f.std()
        combined = x_f - (x_f.std() / sy) * y_f if sy > 0 else x_f
        blocks.append(combined - combined.mean())
    assembled = hann_overlap_add(blocks, fs, offsets=starts).samples
    assembled = assembled - assembled.mean()
    return PulseSignal(
        samples=assembled,
        fs=fs,
        method="chrom",
        fallback_fraction=trace.fallback_fraction,
    )
