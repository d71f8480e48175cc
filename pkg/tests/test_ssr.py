"""Subspace-rotation extractor: eigen-decomposition against a Jacobi oracle,
degeneracy handling, and the invariances the pulse output must satisfy."""

import math

import numpy as np
import pytest

from rppgbench.errors import DegenerateSubspaceError, NumericDegeneracyError
from rppgbench.hr import estimate_hr_spectral
from rppgbench.roi import iter_roi_pixels
from rppgbench.signals import BandHz
from rppgbench.synth import SynthConfig, generate
from rppgbench.ssr import (
    FrameEigen,
    SsrParams,
    canonical_eigenvector_signs,
    frame_eigen,
    ssr_pulse,
)


# ---------------------------------------------------------------------------
# oracle: cyclic Jacobi rotations, no library eigensolver involved
# ---------------------------------------------------------------------------

def jacobi_eigh(matrix, max_sweeps=60, tol=1e-14):
    """Diagonalise a small symmetric matrix by explicit plane rotations."""
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[p, q] ** 2 for p in range(n) for q in range(n) if p != q))
        if off < tol * max(1.0, np.abs(np.diag(a)).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = 0.5 * math.atan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = math.cos(theta), math.sin(theta)
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    lam = np.diag(a).copy()
    order = np.argsort(lam)[::-1]
    return lam[order], v[:, order]


def correlation(pixels):
    pixels = np.asarray(pixels, dtype=np.float64)
    return pixels.T @ pixels / pixels.shape[0]


def random_pixels(rng, n=100):
    return rng.uniform(0.0, 255.0, size=(n, 3))


# ---------------------------------------------------------------------------
# frame_eigen
# ---------------------------------------------------------------------------

def test_uniform_color_is_rank_one():
    c = 120.0
    pixels = np.full((50, 3), c)
    eig = frame_eigen(pixels)
    assert eig.eigenvalues == pytest.approx([3 * c * c, 0.0, 0.0], abs=1e-9 * 3 * c * c)
    u1 = eig.eigenvectors[:, 0]
    assert u1 == pytest.approx(np.full(3, 1 / math.sqrt(3)), abs=1e-12)


def test_isotropic_pixels_have_equal_eigenvalues():
    a = 30.0
    pixels = a * np.eye(3)  # one pure-channel pixel each
    eig = frame_eigen(pixels)
    assert eig.eigenvalues == pytest.approx(np.full(3, a * a / 3), rel=1e-12)
    assert eig.eigenvectors.T @ eig.eigenvectors == pytest.approx(np.eye(3), abs=1e-12)


def test_frame_eigen_matches_jacobi_oracle():
    rng = np.random.default_rng(42)
    for _ in range(200):
        pixels = random_pixels(rng)
        corr = correlation(pixels)
        eig = frame_eigen(pixels)
        lam_o, vec_o = jacobi_eigh(corr)
        scale = lam_o[0]
        assert eig.eigenvalues == pytest.approx(lam_o, abs=1e-9 * scale)
        assert eig.eigenvalues[0] >= eig.eigenvalues[1] >= eig.eigenvalues[2] >= 0
        # Basis-independent checks: orthonormality and exact reconstruction.
        v = eig.eigenvectors
        assert v.T @ v == pytest.approx(np.eye(3), abs=1e-12)
        recon = v @ np.diag(eig.eigenvalues) @ v.T
        assert recon == pytest.approx(corr, abs=1e-9 * scale)
        # Where the spectrum is well separated the vectors must align too.
        gaps = np.diff(lam_o[::-1]) / scale
        for col in range(3):
            near = (col > 0 and gaps[2 - col] < 1e-6) or (col < 2 and gaps[1 - col] < 1e-6)
            if not near:
                assert abs(v[:, col] @ vec_o[:, col]) == pytest.approx(1.0, abs=1e-9)


def test_all_zero_pixels_rejected():
    with pytest.raises(NumericDegeneracyError):
        frame_eigen(np.zeros((10, 3)))


def test_pixel_shape_validation():
    with pytest.raises(ValueError, match=r"\(N, 3\)"):
        frame_eigen(np.ones((10, 2)))
    with pytest.raises(ValueError, match="at least 3"):
        frame_eigen(np.ones((2, 3)))


def test_sign_canonicalisation_flips_negative_leads():
    vectors = np.array([
        [0.0, -3.0, 0.0],
        [-2.0, 1.0, 0.0],
        [5.0, 2.0, 0.0],
    ])
    fixed = canonical_eigenvector_signs(vectors)
    assert np.array_equal(fixed[:, 0], [0.0, 2.0, -5.0])
    assert np.array_equal(fixed[:, 1], [3.0, -1.0, -2.0])
    assert np.array_equal(fixed[:, 2], [0.0, 0.0, 0.0])


def test_frame_eigen_is_deterministic():
    rng = np.random.default_rng(7)
    pixels = random_pixels(rng)
    a = frame_eigen(pixels)
    b = frame_eigen(pixels.copy())
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_frame_eigen_result_is_read_only():
    eig = frame_eigen(random_pixels(np.random.default_rng(0)))
    with pytest.raises(ValueError):
        eig.eigenvalues[0] = 0.0
    with pytest.raises(ValueError):
        FrameEigen(eigenvalues=np.ones(2), eigenvectors=np.eye(3))


# ---------------------------------------------------------------------------
# ssr_pulse
# ---------------------------------------------------------------------------

def make_frames(rng, n_frames, pulse=None, n_pixels=120):
    """Skin-toned pixel clouds; optional per-frame green modulation."""
    base = np.array([140.0, 110.0, 90.0])
    frames = []
    for i in range(n_frames):
        pix = base + rng.normal(0.0, 4.0, size=(n_pixels, 3))
        if pulse is not None:
            pix[:, 1] += pulse[i]
        frames.append(pix)
    return frames


def test_identical_frames_give_flat_pulse():
    rng = np.random.default_rng(11)
    frame = make_frames(rng, 1)[0]
    pulse = ssr_pulse([frame] * 40, SsrParams(window_l=20), fps=20.0)
    assert len(pulse) == 40
    assert pulse.fs == 20.0
    assert pulse.method == "ssr"
    assert np.abs(pulse.samples).max() <= 1e-9


def test_rank_one_frames_raise_degenerate_subspace():
    frames = [np.full((10, 3), 100.0 + i) for i in range(20)]
    with pytest.raises(DegenerateSubspaceError, match="degenerate"):
        ssr_pulse(frames, SsrParams(window_l=10), fps=10.0)


def test_pixel_order_invariance():
    rng = np.random.default_rng(13)
    frames = make_frames(rng, 30)
    shuffled = []
    perm_rng = np.random.default_rng(99)
    for f in frames:
        shuffled.append(f[perm_rng.permutation(len(f))])
    a = ssr_pulse(frames, SsrParams(window_l=10), fps=10.0)
    b = ssr_pulse(shuffled, SsrParams(window_l=10), fps=10.0)
    scale = max(1.0, np.abs(a.samples).max())
    assert b.samples == pytest.approx(a.samples, abs=1e-9 * scale)


def test_global_intensity_scale_invariance():
    rng = np.random.default_rng(17)
    t = np.arange(60) / 20.0
    frames = make_frames(rng, 60, pulse=1.5 * np.sin(2 * np.pi * 1.2 * t))
    a = ssr_pulse(frames, fps=20.0)
    b = ssr_pulse([0.4 * f for f in frames], fps=20.0)
    scale = max(1.0, np.abs(a.samples).max())
    assert b.samples == pytest.approx(a.samples, abs=1e-9 * scale)


def test_output_length_covers_awkward_frame_counts():
    rng = np.random.default_rng(19)
    frames = make_frames(rng, 53, n_pixels=40)
    pulse = ssr_pulse(frames, SsrParams(window_l=20), fps=20.0)
    assert len(pulse) == 53
    assert pulse.samples.mean() == pytest.approx(0.0, abs=1e-9)


def test_recovers_modulation_frequency():
    rng = np.random.default_rng(23)
    fps = 20.0
    t = np.arange(600) / fps
    frames = make_frames(rng, 600, pulse=2.0 * np.sin(2 * np.pi * 1.2 * t))
    pulse = ssr_pulse(frames, fps=fps)
    est = estimate_hr_spectral(pulse, BandHz(0.67, 4.0))
    assert est.bpm == pytest.approx(72.0, abs=0.6)


def test_noise_free_frames_are_degenerate(clean_sequence):
    # Without spatial noise every frame is a single color: the minor
    # eigenvalues vanish and there is no subspace to track rotation against.
    seq, _, roi, _ = clean_sequence
    frames = [p for p, _ in iter_roi_pixels(seq, roi, "bbox")]
    with pytest.raises(DegenerateSubspaceError):
        ssr_pulse(frames, fps=seq.fps_float)


def test_end_to_end_on_synthetic_sequence():
    seq, _, roi, gt = generate(SynthConfig(duration_s=30.0, seed=3))
    frames = [p for p, _ in iter_roi_pixels(seq, roi, "bbox")]
    pulse = ssr_pulse(frames, fps=seq.fps_float)
    est = estimate_hr_spectral(pulse, BandHz(0.67, 4.0))
    assert est.bpm == pytest.approx(gt.bpm, abs=0.6)


def test_fallback_fraction_passthrough():
    rng = np.random.default_rng(29)
    frames = make_frames(rng, 20)
    pulse = ssr_pulse(frames, SsrParams(window_l=10), fps=10.0, fallback_fraction=0.25)
    assert pulse.fallback_fraction == 0.25


def test_input_validation():
    rng = np.random.default_rng(31)
    frames = make_frames(rng, 12)
    with pytest.raises(ValueError, match="fps"):
        ssr_pulse(frames, fps=0.0)
    with pytest.raises(ValueError, match="fps"):
        ssr_pulse(frames, fps=None)
    with pytest.raises(ValueError, match="even"):
        ssr_pulse(frames, SsrParams(window_l=5), fps=10.0)
    with pytest.raises(ValueError, match="exceeds"):
        ssr_pulse(frames, SsrParams(window_l=20), fps=10.0)
    with pytest.raises(ValueError, match="at least 2 frames"):
        ssr_pulse(frames[:1], fps=10.0)


def test_params_validation():
    with pytest.raises(ValueError, match="window_l"):
        SsrParams(window_l=1)
    with pytest.raises(ValueError, match="skin_tau"):
        SsrParams(skin_tau=0.0)
    with pytest.raises(ValueError, match="degeneracy_eps"):
        SsrParams(degeneracy_eps=0.0)
