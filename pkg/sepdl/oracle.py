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

"""Closed-form global optimum by slice-wise singular value shrinkage.

For this regularizer the convex envelope of the factorized problem is the sum
of slice nuclear norms, so each optimal slice is ``D_lambda(S_t)`` and an
optimal factorization is assembled from the slice SVDs.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .constants import RANK_REL_THRESHOLD
from .errors import ParameterError
from .io import format_float
from .objective import Model, _check_lambda
from .tensor import as_matrix, as_tensor3, slice_map

SUMMARY_HEADER = ("t", "rank", "objective")


@dataclass
class OracleSolution:
    shrunk: np.ndarray
    objective_star: float
    ranks: np.ndarray
    slice_objectives: np.ndarray
    lam: float

    @property
    def r_tilde(self) -> int:
        return int(self.ranks.sum())

    def summary_comment(self) -> str:
        return (
            f"objective_star={format_float(self.objective_star)} "
            f"r_tilde={self.r_tilde}"
        )

    def summary_rows(self) -> list[list[str]]:
        return [
            [str(t), str(int(rank)), format_float(obj)]
            for t, (rank, obj) in enumerate(zip(self.ranks, self.slice_objectives))
        ]


def _shrink_svd(y: np.ndarray, lam: float):
    u, sv, vt = scipy.linalg.svd(y, full_matrices=False)
    return u, sv, np.maximum(sv - lam, 0.0), vt


def _count_rank(shrunk_sv: np.ndarray) -> int:
    top = shrunk_sv.max(initial=0.0)
    if top == 0.0:
        return 0
    return int(np.count_nonzero(shrunk_sv > RANK_REL_THRESHOLD * top))


def sv_shrink(y: np.ndarray, lam: float) -> np.ndarray:
    """Singular value soft-thresholding ``U diag((sigma - lam)_+) V^T``."""
    if lam < 0:
        raise ParameterError(f"lambda must be non-negative, got {lam}")
    u, _, shrunk, vt = _shrink_svd(as_matrix(y, "y"), lam)
    return (u * shrunk) @ vt


def nuclear_norm(y: np.ndarray) -> float:
    return float(scipy.linalg.svdvals(as_matrix(y, "y")).sum())


def gauge(x: np.ndarray) -> float:
    """Sum of slice nuclear norms."""
    x = as_tensor3(x, "x")
    return float(sum(nuclear_norm(x[:, :, t]) for t in range(x.shape[2])))


def convex_objective(s: np.ndarray, x: np.ndarray, lam: float) -> float:
    lam = _check_lambda(lam)
    s = as_tensor3(s, "data")
    x = as_tensor3(x, "x")
    diff = s - x
    return 0.5 * float(np.vdot(diff, diff)) + lam * gauge(x)


def _slice_parts(s: np.ndarray, lam: float, threads: Optional[int]):
    return slice_map(lambda t: _shrink_svd(s[:, :, t], lam), range(s.shape[2]), threads)


def global_optimum(
    s: np.ndarray, lam: float, threads: Optional[int] = None
) -> OracleSolution:
    lam = _check_lambda(lam)
    s = as_tensor3(s, "data")
    shrunk = np.zeros_like(s)
    ranks = np.zeros(s.shape[2], dtype=int)
    slice_objectives = np.zeros(s.shape[2])
    for t, (u, _, sv, vt) in enumerate(_slice_parts(s, lam, threads)):
        x_t = (u * sv) @ vt
        diff = s[:, :, t] - x_t
        shrunk[:, :, t] = x_t
        ranks[t] = _count_rank(sv)
        slice_objectives[t] = 0.5 * float(np.vdot(diff, diff)) + lam * float(sv.sum())
    return OracleSolution(
        shrunk=shrunk,
        objective_star=float(slice_objectives.sum()),
        ranks=ranks,
        slice_objectives=slice_objectives,
        lam=lam,
    )


def explicit_factorization(
    s: np.ndarray, lam: float, compact: bool = True, threads: Optional[int] = None
) -> Model:
    """Optimal factorization ``Γ = [U_1 .. U_T]``, ``Ψ = [V_1 .. V_T]`` with
    block-diagonal coefficients.

    ``compact`` keeps only the singular pairs that survive the shrinkage, so
    both dictionaries have ``r_tilde`` atoms; with nothing left the model has
    a single zero atom per mode.
    """
    lam = _check_lambda(lam)
    s = as_tensor3(s, "data")
    g, v, n_slices = s.shape

    blocks = []
    for t, (u, _, sv, vt) in enumerate(_slice_parts(s, lam, threads)):
        keep = np.arange(sv.size)
        if compact:
            keep = keep[: _count_rank(sv)]
        blocks.append((t, u[:, keep], vt[keep].T, sv[keep]))

    total = sum(block[3].size for block in blocks)
    if total == 0:
        return Model(np.zeros((g, 1)), np.zeros((v, 1)), np.zeros((1, 1, n_slices)))

    gamma = np.column_stack([block[1] for block in blocks if block[3].size])
    psi = np.column_stack([block[2] for block in blocks if block[3].size])
    coef = np.zeros((total, total, n_slices))
    offset = 0
    for t, _, _, sv in blocks:
        k = sv.size
        coef[offset:offset + k, offset:offset + k, t] = np.diag(sv)
        offset += k
    return Model(gamma, psi, coef)
