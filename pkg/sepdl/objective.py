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

"""Regularized separable factorization objective.

The objective of a model (Γ, Ψ, C) on data S is::

    f = 1/2 sum_t ||Γ C_t Ψ^T - S_t||_F^2
        + λ sum_i sum_j ||Γ_i||_2 ||Ψ_j||_2 ||C_ij||_1

where Γ_i and Ψ_j are dictionary columns and C_ij is the coefficient fibre
``coef[i, j, :]``.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .constants import LIPSCHITZ_FLOOR
from .errors import ParameterError, ShapeError
from .tensor import as_matrix, as_tensor3, mode_product


@dataclass
class Model:
    """Factorization state: dictionaries ``gamma`` (G x r1), ``psi`` (V x r2)
    and coefficients ``coef`` (r1 x r2 x T)."""

    gamma: np.ndarray
    psi: np.ndarray
    coef: np.ndarray

    def __post_init__(self) -> None:
        self.gamma = as_matrix(self.gamma, "gamma")
        self.psi = as_matrix(self.psi, "psi")
        self.coef = as_tensor3(self.coef, "coef")
        if self.coef.shape[:2] != (self.gamma.shape[1], self.psi.shape[1]):
            raise ShapeError(
                f"coef shape {self.coef.shape} does not match "
                f"r1={self.gamma.shape[1]}, r2={self.psi.shape[1]}"
            )

    @property
    def r1(self) -> int:
        return self.gamma.shape[1]

    @property
    def r2(self) -> int:
        return self.psi.shape[1]

    @property
    def data_shape(self) -> tuple[int, int, int]:
        return self.gamma.shape[0], self.psi.shape[0], self.coef.shape[2]

    def copy(self) -> "Model":
        return Model(self.gamma.copy(), self.psi.copy(), self.coef.copy())


@dataclass
class StepConstants:
    l_gamma: float
    l_psi: float
    l_c: float
    xi: np.ndarray
    kappa: np.ndarray
    pi: np.ndarray

    @property
    def skip_gamma(self) -> bool:
        return self.l_gamma < LIPSCHITZ_FLOOR

    @property
    def skip_psi(self) -> bool:
        return self.l_psi < LIPSCHITZ_FLOOR

    @property
    def skip_coef(self) -> bool:
        return self.l_c < LIPSCHITZ_FLOOR


def _check_lambda(lam: float) -> float:
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    return float(lam)


def check_compatible(s: np.ndarray, m: Model) -> None:
    if s.shape != m.data_shape:
        raise ShapeError(f"data shape {s.shape} does not match model {m.data_shape}")


def reconstruct(m: Model) -> np.ndarray:
    return mode_product(m.coef, m.gamma, m.psi)


def residual(s: np.ndarray, m: Model) -> np.ndarray:
    """Return ``X - S`` where ``X`` is the model reconstruction."""
    check_compatible(s, m)
    return reconstruct(m) - s


def loss(s: np.ndarray, m: Model) -> float:
    r = residual(s, m)
    return 0.5 * float(np.vdot(r, r))


def regularizer(m: Model) -> float:
    gamma_norms = np.linalg.norm(m.gamma, axis=0)
    psi_norms = np.linalg.norm(m.psi, axis=0)
    fibre_l1 = np.abs(m.coef).sum(axis=2)
    return float(gamma_norms @ fibre_l1 @ psi_norms)


def objective(s: np.ndarray, m: Model, lam: float) -> float:
    lam = _check_lambda(lam)
    return loss(s, m) + lam * regularizer(m)


def _slices(x: np.ndarray) -> np.ndarray:
    return np.moveaxis(x, 2, 0)


def grad_gamma(s: np.ndarray, m: Model, resid: Optional[np.ndarray] = None) -> np.ndarray:
    r = residual(s, m) if resid is None else resid
    c = _slices(m.coef)
    return (_slices(r) @ m.psi @ c.transpose(0, 2, 1)).sum(axis=0)


def grad_psi(s: np.ndarray, m: Model, resid: Optional[np.ndarray] = None) -> np.ndarray:
    r = residual(s, m) if resid is None else resid
    c = _slices(m.coef)
    return (_slices(r).transpose(0, 2, 1) @ m.gamma @ c).sum(axis=0)


def grad_coef(s: np.ndarray, m: Model, resid: Optional[np.ndarray] = None) -> np.ndarray:
    r = residual(s, m) if resid is None else resid
    return np.moveaxis(m.gamma.T @ _slices(r) @ m.psi, 0, 2)


def prox_l2(x: np.ndarray, tau: float) -> np.ndarray:
    """Block soft-thresholding, the proximal operator of ``tau * ||.||_2``."""
    if tau < 0:
        raise ParameterError(f"tau must be non-negative, got {tau}")
    x = np.asarray(x, dtype=np.float64)
    norm = float(np.linalg.norm(x))
    if norm <= tau or norm == 0.0:
        return np.zeros_like(x)
    return (1.0 - tau / norm) * x


def prox_columns(a: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Apply :func:`prox_l2` to every column of ``a`` with its own threshold."""
    norms = np.linalg.norm(a, axis=0)
    scale = np.zeros_like(norms)
    keep = norms > taus
    scale[keep] = 1.0 - taus[keep] / norms[keep]
    return a * scale


def prox_abs(
    a: Union[float, np.ndarray], tau: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """Scalar soft-thresholding; works elementwise on arrays."""
    if np.any(np.asarray(tau) < 0):
        raise ParameterError("tau must be non-negative")
    out = np.maximum(0.0, a - tau) - np.maximum(0.0, -a - tau)
    return float(out) if np.ndim(out) == 0 else out


def lipschitz_gamma(m: Model) -> float:
    gram = m.psi.T @ m.psi
    c = _slices(m.coef)
    return float(np.linalg.norm((c @ gram @ c.transpose(0, 2, 1)).sum(axis=0)))


def lipschitz_psi(m: Model) -> float:
    gram = m.gamma.T @ m.gamma
    c = _slices(m.coef)
    return float(np.linalg.norm((c.transpose(0, 2, 1) @ gram @ c).sum(axis=0)))


def lipschitz_coef(m: Model) -> float:
    return float(
        np.linalg.norm(m.gamma.T @ m.gamma) * np.linalg.norm(m.psi.T @ m.psi)
    )


def _scaled(weight: np.ndarray, lipschitz: float) -> np.ndarray:
    if lipschitz < LIPSCHITZ_FLOOR:
        return np.zeros_like(weight)
    return weight / lipschitz


def gamma_thresholds(m: Model, lam: float, l_gamma: float) -> np.ndarray:
    psi_norms = np.linalg.norm(m.psi, axis=0)
    return _scaled(lam * (np.abs(m.coef).sum(axis=2) @ psi_norms), l_gamma)


def psi_thresholds(m: Model, lam: float, l_psi: float) -> np.ndarray:
    gamma_norms = np.linalg.norm(m.gamma, axis=0)
    return _scaled(lam * (gamma_norms @ np.abs(m.coef).sum(axis=2)), l_psi)


def coef_thresholds(m: Model, lam: float, l_c: float) -> np.ndarray:
    gamma_norms = np.linalg.norm(m.gamma, axis=0)
    psi_norms = np.linalg.norm(m.psi, axis=0)
    return _scaled(lam * np.outer(gamma_norms, psi_norms), l_c)


def step_constants(m: Model, lam: float) -> StepConstants:
    """Lipschitz bounds of the three block gradients and the prox thresholds.

    Thresholds of a block whose Lipschitz bound falls below
    ``LIPSCHITZ_FLOOR`` are zero; that block is not updated.
    """
    lam = _check_lambda(lam)
    l_gamma = lipschitz_gamma(m)
    l_psi = lipschitz_psi(m)
    l_c = lipschitz_coef(m)
    return StepConstants(
        l_gamma=l_gamma,
        l_psi=l_psi,
        l_c=l_c,
        xi=gamma_thresholds(m, lam, l_gamma),
        kappa=coef_thresholds(m, lam, l_c),
        pi=psi_thresholds(m, lam, l_psi),
    )
