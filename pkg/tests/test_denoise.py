from pathlib import Path
import logging
import math
import sys

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from sepdl.denoise import (
    assemble_patches,
    denoise,
    extract_patches,
    grid_origins,
    log_grid,
    psnr,
    sparse_code,
    sweep_lambda,
)
from sepdl.descent import DescentConfig
from sepdl.errors import ParameterError, ShapeError
from sepdl.certificate import CertConfig
from sepdl.objective import Model, objective
from sepdl.solver import SolverConfig, solve


TIGHT = DescentConfig(nesterov=False, rel_tol=1e-12, max_iters=5000)


def smooth_image(g=8, width=12, height=12):
    profile = np.exp(-0.5 * ((np.arange(g) - g / 3) / 2.0) ** 2)
    profile /= np.linalg.norm(profile)
    xs, ys = np.meshgrid(np.arange(width), np.arange(height), indexing="ij")
    field = 1.0 + 0.5 * np.sin(xs / 3.0) * np.cos(ys / 4.0)
    return profile, profile[:, None, None] * field[None, :, :]


@pytest.mark.imported
def test_extract_patches_shapes_and_counts():
    rng = np.random.default_rng(0)
    img = rng.standard_normal((64, 24, 24))
    ps = extract_patches(img, 12, 100, seed=1)
    assert ps.patches.shape == (64, 144, 100)
    assert ps.angular_examples == 14400
    assert ps.spatial_examples == 6400
    assert not ps.with_replacement
    assert len(set(ps.origins)) == 100


@pytest.mark.imported
def test_patch_columns_are_column_major_pixels():
    rng = np.random.default_rng(2)
    img = rng.standard_normal((3, 7, 6))
    ps = extract_patches(img, 3, 5, seed=0)
    for k, (x, y) in enumerate(ps.origins):
        for col in range(9):
            dx, dy = col % 3, col // 3
            np.testing.assert_array_equal(ps.patches[:, col, k], img[:, x + dx, y + dy])


@pytest.mark.imported
def test_extract_patches_is_seeded():
    img = np.random.default_rng(3).standard_normal((2, 10, 10))
    assert extract_patches(img, 3, 8, seed=4).origins == extract_patches(img, 3, 8, seed=4).origins


@pytest.mark.imported
def test_extract_patches_falls_back_to_replacement(caplog):
    img = np.ones((2, 4, 4))
    with caplog.at_level(logging.WARNING, logger="sepdl.denoise"):
        ps = extract_patches(img, 3, 10)
    assert ps.with_replacement
    assert ps.patches.shape[2] == 10
    assert "sampling with replacement" in caplog.text


@pytest.mark.imported
def test_extract_patches_rejects_bad_sizes():
    img = np.ones((2, 4, 5))
    with pytest.raises(ShapeError):
        extract_patches(img, 5, 1)
    with pytest.raises(ParameterError):
        extract_patches(img, 2, 0)


@pytest.mark.imported
def test_grid_origins_cover_every_pixel():
    origins = grid_origins(12, 10, 4, 3)
    xs = sorted({x for x, _ in origins})
    ys = sorted({y for _, y in origins})
    assert xs == [0, 3, 6, 8]
    assert ys == [0, 3, 6]
    _, weights = assemble_patches(np.zeros((1, 16, len(origins))), origins, (1, 12, 10))
    assert weights.min() >= 1


@pytest.mark.imported
def test_grid_with_stride_equal_to_patch_tiles_exactly():
    origins = grid_origins(8, 12, 4, 4)
    assert len(origins) == 6
    _, weights = assemble_patches(np.zeros((2, 16, 6)), origins, (2, 8, 12))
    np.testing.assert_array_equal(weights, 1.0)


@pytest.mark.imported
def test_grid_origins_reject_bad_arguments():
    with pytest.raises(ParameterError):
        grid_origins(8, 8, 4, 0)
    with pytest.raises(ShapeError):
        grid_origins(8, 3, 4, 1)


@pytest.mark.imported
def test_assembling_grid_patches_restores_image():
    rng = np.random.default_rng(5)
    img = rng.standard_normal((3, 9, 7))
    origins = grid_origins(9, 7, 4, 2)
    patches = np.stack(
        [img[:, x:x + 4, y:y + 4].reshape(3, 16, order="F") for x, y in origins], axis=2
    )
    restored, _ = assemble_patches(patches, origins, img.shape)
    np.testing.assert_allclose(restored, img, rtol=1e-14, atol=1e-15)


@pytest.mark.imported
def test_assemble_patches_shape_errors():
    with pytest.raises(ShapeError):
        assemble_patches(np.zeros((2, 15, 1)), [(0, 0)], (2, 4, 4))
    with pytest.raises(ShapeError):
        assemble_patches(np.zeros((2, 16, 2)), [(0, 0)], (2, 4, 4))


@pytest.mark.imported
def test_sparse_code_rank_one_dictionaries_is_scalar_lasso():
    gamma = np.array([[0.6], [0.8]])
    psi = np.array([[0.0], [1.0], [0.0]])
    amplitudes = np.array([3.0, -0.5, -2.0, 0.0])
    s = np.stack([a * np.outer(gamma[:, 0], psi[:, 0]) for a in amplitudes], axis=2)
    coef = sparse_code(s, gamma, psi, 1.0)
    np.testing.assert_allclose(coef[0, 0], [2.0, 0.0, -1.0, 0.0], atol=1e-12)


@pytest.mark.imported
def test_sparse_code_threshold_kills_small_signals():
    rng = np.random.default_rng(6)
    gamma = np.linalg.qr(rng.standard_normal((4, 2)))[0]
    psi = np.linalg.qr(rng.standard_normal((5, 3)))[0]
    s = 0.01 * rng.standard_normal((4, 5, 3))
    np.testing.assert_array_equal(sparse_code(s, gamma, psi, 10.0), 0.0)


@pytest.mark.imported
def test_sparse_code_never_raises_slice_objective():
    rng = np.random.default_rng(7)
    gamma = rng.standard_normal((4, 3))
    psi = rng.standard_normal((6, 2))
    s = rng.standard_normal((4, 6, 5))
    coef = sparse_code(s, gamma, psi, 0.3)
    for t in range(5):
        before = 0.5 * np.sum(s[:, :, t] ** 2)
        after = objective(s[:, :, t:t + 1], Model(gamma, psi, coef[:, :, t:t + 1]), 0.3)
        assert after <= before + 1e-12


@pytest.mark.imported
def test_sparse_code_rejects_zero_dictionary():
    with pytest.raises(ParameterError):
        sparse_code(np.ones((2, 3, 1)), np.zeros((2, 1)), np.ones((3, 1)), 1.0)


@pytest.mark.imported
def test_tiny_lambda_with_identity_dictionaries_is_identity():
    rng = np.random.default_rng(8)
    img = rng.uniform(0.5, 1.5, size=(3, 6, 6))
    out = denoise(img, np.eye(3), np.eye(4), 1e-10, p=2, stride=1, cfg=TIGHT)
    np.testing.assert_allclose(out, img, atol=1e-6)


@pytest.mark.imported
def test_denoise_rejects_mismatched_dictionaries():
    img = np.ones((3, 6, 6))
    with pytest.raises(ShapeError):
        denoise(img, np.eye(2), np.eye(4), 0.1, p=2, stride=1)
    with pytest.raises(ShapeError):
        denoise(img, np.eye(3), np.eye(9), 0.1, p=2, stride=1)


@pytest.mark.imported
def test_denoise_with_true_angular_profile_gains_psnr():
    profile, clean = smooth_image()
    noisy = clean + np.random.default_rng(9).normal(0.0, 0.05, size=clean.shape)
    cfg = DescentConfig(nesterov=False, rel_tol=1e-10, max_iters=5000)
    out = denoise(noisy, profile[:, None], np.eye(16), 1e-3, p=4, stride=2, cfg=cfg)
    assert psnr(clean, out) > psnr(clean, noisy) + 5.0


@pytest.mark.slow
@pytest.mark.imported
def test_dictionaries_learned_on_clean_patches_denoise_at_best_lambda():
    _, clean = smooth_image(g=8, width=16, height=16)
    training = extract_patches(clean, 4, 60, seed=11)
    cfg = SolverConfig(
        lam=0.05,
        init_r1=2,
        init_r2=2,
        descent=DescentConfig(rel_tol=1e-8, max_iters=5000),
        cert=CertConfig(cert_tol=1e-3),
        max_outer_rounds=30,
        prune_dead_atoms=True,
    )
    model, _ = solve(training.patches, cfg)

    # 10 dB SNR
    sigma = math.sqrt(float(np.mean(clean**2)) / 10.0)
    noisy = clean + np.random.default_rng(12).normal(0.0, sigma, size=clean.shape)
    coding = DescentConfig(nesterov=False, rel_tol=1e-8, max_iters=5000)
    scores = sweep_lambda(
        noisy, clean, model.gamma, model.psi, log_grid(1e-3, 1.0, 7), p=4, stride=2, cfg=coding
    )
    best = max(score for _, score in scores)
    assert best >= psnr(clean, noisy) + 1.0


@pytest.mark.imported
def test_psnr_cases():
    ref = np.ones((2, 3, 3))
    assert psnr(ref, ref) == math.inf
    assert psnr(ref, ref + 0.1) == pytest.approx(20.0)
    with pytest.raises(ParameterError):
        psnr(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(ShapeError):
        psnr(ref, np.ones((2, 3, 2)))


@pytest.mark.imported
def test_psnr_uses_signed_reference_maximum():
    ref = np.full((2, 3, 3), 2.0)
    assert psnr(ref, ref + 0.2) == pytest.approx(20.0)
    negative = -np.ones((2, 3, 3))
    assert psnr(negative, negative + 0.1) == pytest.approx(20.0)
    mixed = np.array([[0.0, -1.0], [-2.0, 0.0]])
    assert psnr(mixed, mixed + 0.1) == -math.inf


@pytest.mark.imported
def test_log_grid():
    np.testing.assert_allclose(log_grid(1e-3, 1e-1, 3), [1e-3, 1e-2, 1e-1])
    np.testing.assert_allclose(log_grid(0.5, 0.5, 1), [0.5])
    with pytest.raises(ParameterError):
        log_grid(0.0, 1.0, 3)
    with pytest.raises(ParameterError):
        log_grid(1.0, 0.1, 3)
    with pytest.raises(ParameterError):
        log_grid(0.1, 1.0, 0)


@pytest.mark.imported
def test_sweep_lambda_scores_each_value():
    profile, clean = smooth_image(g=4, width=8, height=8)
    noisy = clean + np.random.default_rng(10).normal(0.0, 0.05, size=clean.shape)
    lambdas = log_grid(1e-3, 1e-1, 3)
    results = sweep_lambda(noisy, clean, profile[:, None], np.eye(16), lambdas, p=4, stride=4)
    assert [lam for lam, _ in results] == pytest.approx(list(lambdas))
    assert all(math.isfinite(score) for _, score in results)
