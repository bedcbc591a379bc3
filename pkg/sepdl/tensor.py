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

"""Dense 3-tensor and matrix helpers.

A tensor is a float64 ``numpy.ndarray`` of shape ``(G, V, T)``; slice ``t`` is
the ``G x V`` matrix ``x[:, :, t]``.  Matrices are plain 2-D float64 arrays.
On disk the layout is slice-major and column-major inside a slice, i.e. the
Fortran order of the ``(G, V, T)`` array (see :mod:`sepdl.io`).
"""

from concurrent.futures import ThreadPoolExecutor
import os
from typing import Callable, Iterable, Optional, TypeVar

import numpy as np

from .errors import ParameterError, ShapeError, SliceIndexError

_T = TypeVar("_T")
_R = TypeVar("_R")


def as_tensor3(x, name: str = "tensor") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ShapeError(f"{name} must be a non-empty 3-tensor, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise ShapeError(f"{name} must be a non-empty matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def slice_t(x: np.ndarray, t: int) -> np.ndarray:
    """Return the read-only ``G x V`` slice ``t`` of ``x``."""
    n_slices = x.shape[2]
    if not 0 <= t < n_slices:
        raise SliceIndexError(f"slice index {t} out of range [0, {n_slices})")
    view = x[:, :, t]
    view.flags.writeable = False
    return view


def mode_product(c: np.ndarray, gamma: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Multiply ``c`` by ``gamma`` along mode 1 and ``psi`` along mode 2.

    Slice ``t`` of the result is ``gamma @ c[:, :, t] @ psi.T``.
    """
    if c.ndim != 3 or gamma.ndim != 2 or psi.ndim != 2:
        raise ShapeError("mode_product expects a 3-tensor and two matrices")
    if gamma.shape[1] != c.shape[0] or psi.shape[1] != c.shape[1]:
        raise ShapeError(
            f"inner dimensions disagree: core {c.shape}, "
            f"gamma {gamma.shape}, psi {psi.shape}"
        )
    slices = gamma @ np.moveaxis(c, 2, 0) @ psi.T
    return np.moveaxis(slices, 0, 2)


def frobenius_inner(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.vdot(a, b))


def _worker_count(threads: Optional[int]) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise ParameterError("threads must be >= 1")
    return threads


def slice_map(
    fn: Callable[[_T], _R], items: Iterable[_T], threads: Optional[int] = None
) -> list[_R]:
    """Apply ``fn`` to every item, in input order.

    Results come back in the order of ``items`` whatever the worker count, so
    reductions over them stay reproducible.
    """
    items = list(items)
    workers = min(_worker_count(threads), max(len(items), 1))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
