# Copyright (c) 2025 sepdl developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Patch-based training sets and sparse-coding denoising with fixed dictionaries.

An image is a ``(g, width, height)`` array: ``g`` measurements per pixel.  A
``p x p`` patch at origin ``(x, y)`` becomes the ``g x p^2`` matrix
``img[:, x:x+p, y:y+p]`` vectorized column-major in ``(x, y)``.
"""

from dataclasses import dataclass
import logging
import math
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .descent import DescentConfig, descend
from .errors import ParameterError, ShapeError
from .objective import Model
from .tensor import as_matrix, as_tensor3, mode_product

logger = logging.getLogger(__name__)


@dataclass
class PatchSet:
    p: int
    patches: np.ndarray
    origins: list[tuple[int, int]]
    with_replacement: bool = False

    @property
    def angular_examples(self) -> int:
        return self.p * self.p * self.patches.shape[2]

    @property
    def spatial_examples(self) -> int:
        return self.patches.shape[0] * self.patches.shape[2]


def _check_patch_size(img: np.ndarray, p: int) -> None:
    _, width, height = img.shape
    if not 1 <= p <= min(width, height):
        raise ShapeError(f"patch size {p} does not fit a {width}x{height} image")


def _patch_matrix(block: np.ndarray) -> np.ndarray:
    g, p, _ = block.shape
    return block.reshape(g, p * p, order="F")


def extract_patches(img: np.ndarray, p: int, n: int, seed: int = 0) -> PatchSet:
    """Draw ``n`` random in-bounds patches, without replacement when possible."""
    img = as_tensor3(img, "image")
    _check_patch_size(img, p)
    if n < 1:
        raise ParameterError(f"patch count must be >= 1, got {n}")
    _, width, height = img.shape
    nx, ny = width - p + 1, height - p + 1

    rng = np.random.default_rng(seed)
    replace = n > nx * ny
    if replace:
        logger.warning(
            "%d patches requested but only %d distinct origins exist, "
            "sampling with replacement",
            n, nx * ny,
        )
    picks = rng.choice(nx * ny, size=n, replace=replace)
    origins = [(int(k % nx), int(k // nx)) for k in picks]

    windows = sliding_window_view(img, (p, p), axis=(1, 2))
    patches = np.stack(
        [_patch_matrix(windows[:, x, y]) for x, y in origins], axis=2
    )
    return PatchSet(p=p, patches=patches, origins=origins, with_replacement=replace)


def _axis_origins(size: int, p: int, stride: int) -> list[int]:
    starts = list(range(0, size - p + 1, stride))
    if starts[-1] != size - p:
        starts.append(size - p)
    return starts


def grid_origins(width: int, height: int, p: int, stride: int) -> list[tuple[int, int]]:
    """Stride grid plus edge-flush origins, so every pixel is covered."""
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    if not 1 <= p <= min(width, height):
        raise ShapeError(f"patch size {p} does not fit a {width}x{height} image")
    return [
        (x, y)
        for y in _axis_origins(height, p, stride)
        for x in _axis_origins(width, p, stride)
    ]


def assemble_patches(
    patches: np.ndarray, origins: Sequence[tuple[int, int]], shape: tuple[int, int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Average patches back into an image; returns the image and per-pixel weights."""
    g, width, height = shape
    p = math.isqrt(patches.shape[1])
    if p * p != patches.shape[1] or patches.shape[0] != g:
        raise ShapeError(f"patches of shape {patches.shape} do not fit image {shape}")
    if patches.shape[2] != len(origins):
        raise ShapeError(f"{patches.shape[2]} patches but {len(origins)} origins")

    total = np.zeros(shape)
    weights = np.zeros((width, height))
    for k, (x, y) in enumerate(origins):
        total[:, x:x + p, y:y + p] += patches[:, :, k].reshape(g, p, p, order="F")
        weights[x:x + p, y:y + p] += 1.0
    covered = weights > 0
    total[:, covered] /= weights[covered]
    return total, weights


def sparse_code(
    s: np.ndarray,
    gamma: np.ndarray,
    psi: np.ndarray,
    lam: float,
    cfg: Optional[DescentConfig] = None,
) -> np.ndarray:
    """Coefficients minimizing the objective over ``C`` alone, starting from zero.

    The default configuration uses plain proximal gradient steps, which
    never raise any single slice's objective.
    """
    s = as_tensor3(s, "signals")
    gamma = as_matrix(gamma, "gamma")
    psi = as_matrix(psi, "psi")
    if not np.any(gamma) or not np.any(psi):
        raise ParameterError("sparse coding needs nonzero dictionaries")
    cfg = cfg or DescentConfig(nesterov=False)
    m0 = Model(gamma, psi, np.zeros((gamma.shape[1], psi.shape[1], s.shape[2])))
    model, _ = descend(s, m0, lam, cfg, update_dictionaries=False)
    return model.coef


def denoise(
    img: np.ndarray,
    gamma: np.ndarray,
    psi: np.ndarray,
    lam: float,
    p: int,
    stride: int,
    cfg: Optional[DescentConfig] = None,
) -> np.ndarray:
    img = as_tensor3(img, "image")
    gamma = as_matrix(gamma, "gamma")
    psi = as_matrix(psi, "psi")
    g, width, height = img.shape
    if gamma.shape[0] != g:
        raise ShapeError(f"gamma has {gamma.shape[0]} rows, image has g={g}")
    if psi.shape[0] != p * p:
        raise ShapeError(f"psi has {psi.shape[0]} rows, patch size {p} needs {p * p}")

    origins = grid_origins(width, height, p, stride)
    windows = sliding_window_view(img, (p, p), axis=(1, 2))
    patches = np.stack([_patch_matrix(windows[:, x, y]) for x, y in origins], axis=2)
    coef = sparse_code(patches, gamma, psi, lam, cfg)
    denoised, _ = assemble_patches(mode_product(coef, gamma, psi), origins, img.shape)
    return denoised


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    """``10 log10(max(reference)^2 / MSE)``; ``inf`` for identical inputs.

    The peak is the signed maximum of ``reference``, so an all-negative
    reference uses its largest (least negative) value and a zero maximum
    gives ``-inf``.
    """
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ShapeError(f"shape mismatch: {reference.shape} vs {test.shape}")
    if not np.any(reference):
        raise ParameterError("reference is identically zero")
    peak = float(reference.max())
    mse = float(np.mean((reference - test) ** 2))
    if mse == 0.0:
        return math.inf
    if peak == 0.0:
        return -math.inf
    return 10.0 * math.log10(peak**2 / mse)


def log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    if not 0 < lo <= hi:
        raise ParameterError(f"need 0 < lo <= hi, got {lo}, {hi}")
    if n < 1:
        raise ParameterError(f"grid size must be >= 1, got {n}")
    return np.geomspace(lo, hi, n)


def sweep_lambda(
    noisy: np.ndarray,
    reference: np.ndarray,
    gamma: np.ndarray,
    psi: np.ndarray,
    lambdas: Sequence[float],
    p: int,
    stride: int,
    cfg: Optional[DescentConfig] = None,
) -> list[tuple[float, float]]:
    """PSNR of the denoised image against ``reference`` for each lambda."""
    results = []
    for lam in lambdas:
        score = psnr(reference, denoise(noisy, gamma, psi, lam, p, stride, cfg))
        logger.info("lambda %.6g: PSNR %.4f dB", lam, score)
        results.append((float(lam), score))
    return results
