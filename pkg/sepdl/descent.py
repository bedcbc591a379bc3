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

"""Block proximal gradient descent to a stationary point, with optional
Nesterov extrapolation and restart.

One sweep updates Γ, then C, then Ψ.  Every block step is a proximal gradient
step with step size ``1/L`` for the block's Lipschitz bound ``L`` (computed
from the freshest values of the other blocks) followed by the block's
shrinkage: column-wise block soft-thresholding by ξ_i / π_j for the
dictionaries and entrywise soft-thresholding by κ_ij for the coefficients.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Optional

import numpy as np

from .constants import DEFAULT_MAX_ITERS, DEFAULT_REL_TOL, LIPSCHITZ_FLOOR
from .errors import NumericalError, ParameterError
from .objective import (
    Model,
    StepConstants,
    _check_lambda,
    check_compatible,
    coef_thresholds,
    gamma_thresholds,
    grad_coef,
    grad_gamma,
    grad_psi,
    lipschitz_coef,
    lipschitz_gamma,
    lipschitz_psi,
    prox_abs,
    prox_columns,
    psi_thresholds,
    regularizer,
    residual,
    step_constants,
)
from .tensor import as_tensor3

logger = logging.getLogger(__name__)


@dataclass
class DescentConfig:
    max_iters: int = DEFAULT_MAX_ITERS
    rel_tol: float = DEFAULT_REL_TOL
    nesterov: bool = True
    restart_on_increase: bool = True

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.rel_tol > 0:
            raise ParameterError(f"rel_tol must be positive, got {self.rel_tol}")


@dataclass
class DescentTrace:
    initial_objective: float
    objectives: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    restarts: int = 0

    @property
    def final_objective(self) -> float:
        return self.objectives[-1] if self.objectives else self.initial_objective


@dataclass
class NesterovState:
    """Momentum bookkeeping.

    ``lookahead`` is the extrapolated point the next sweep starts from;
    ``restarted`` is True when the last step was rejected.
    """

    s: float
    lookahead: Model
    extrapolated: bool = False
    restarted: bool = False


def _momentum(mu: float, l_prev: float, l_now: float) -> float:
    if l_now < LIPSCHITZ_FLOOR:
        return mu
    return min(mu, math.sqrt(l_prev / l_now))


def nesterov_step(
    state: NesterovState,
    current: Model,
    previous: Model,
    f_now: float,
    f_prev: float,
    lc: StepConstants,
    lc_prev: StepConstants,
    restart: bool = True,
) -> NesterovState:
    if f_now < f_prev or not restart:
        s_next = (1.0 + math.sqrt(1.0 + 4.0 * state.s**2)) / 2.0
        mu = (state.s - 1.0) / 2.0
        mu_gamma = _momentum(mu, lc_prev.l_gamma, lc.l_gamma)
        mu_coef = _momentum(mu, lc_prev.l_c, lc.l_c)
        mu_psi = _momentum(mu, lc_prev.l_psi, lc.l_psi)
        lookahead = Model(
            gamma=current.gamma + mu_gamma * (current.gamma - previous.gamma),
            psi=current.psi + mu_psi * (current.psi - previous.psi),
            coef=current.coef + mu_coef * (current.coef - previous.coef),
        )
        return NesterovState(
            s=s_next,
            lookahead=lookahead,
            extrapolated=max(mu_gamma, mu_coef, mu_psi) > 0,
        )
    return NesterovState(s=state.s, lookahead=previous, restarted=True)


def _require_finite(block: np.ndarray, name: str, iteration: int) -> np.ndarray:
    if not np.all(np.isfinite(block)):
        raise NumericalError(f"non-finite values in {name}", iteration)
    return block


def _sweep(
    s: np.ndarray,
    start: Model,
    lam: float,
    update_dictionaries: bool,
    iteration: int,
) -> tuple[Model, np.ndarray]:
    gamma, psi, coef = start.gamma, start.psi, start.coef
    m = start

    if update_dictionaries:
        l_gamma = lipschitz_gamma(m)
        if l_gamma >= LIPSCHITZ_FLOOR:
            step = gamma - grad_gamma(s, m, residual(s, m)) / l_gamma
            gamma = prox_columns(step, gamma_thresholds(m, lam, l_gamma))
            gamma = _require_finite(gamma, "gamma", iteration)
            m = Model(gamma, psi, coef)

    l_c = lipschitz_coef(m)
    if l_c >= LIPSCHITZ_FLOOR:
        step = coef - grad_coef(s, m, residual(s, m)) / l_c
        coef = prox_abs(step, coef_thresholds(m, lam, l_c)[:, :, np.newaxis])
        coef = _require_finite(coef, "coef", iteration)
        m = Model(gamma, psi, coef)

    if update_dictionaries:
        l_psi = lipschitz_psi(m)
        if l_psi >= LIPSCHITZ_FLOOR:
            step = psi - grad_psi(s, m, residual(s, m)) / l_psi
            psi = prox_columns(step, psi_thresholds(m, lam, l_psi))
            psi = _require_finite(psi, "psi", iteration)
            m = Model(gamma, psi, coef)

    if m is start:
        m = start.copy()
    return m, residual(s, m)


def _objective_from(resid: np.ndarray, m: Model, lam: float) -> float:
    return 0.5 * float(np.vdot(resid, resid)) + lam * regularizer(m)


def descend(
    s: np.ndarray,
    m0: Model,
    lam: float,
    cfg: Optional[DescentConfig] = None,
    update_dictionaries: bool = True,
) -> tuple[Model, DescentTrace]:
    """Run sweeps until the relative objective change drops below ``cfg.rel_tol``.

    With ``update_dictionaries=False`` only the coefficients move (sparse
    coding with fixed dictionaries).
    """
    cfg = cfg or DescentConfig()
    s = as_tensor3(s, "data")
    lam = _check_lambda(lam)
    check_compatible(s, m0)

    m = m0.copy()
    f = _objective_from(residual(s, m), m, lam)
    if not math.isfinite(f):
        raise NumericalError("non-finite objective at the initial model", 0)
    trace = DescentTrace(initial_objective=f)

    state = NesterovState(s=1.0, lookahead=m)
    lc_prev = step_constants(m, lam) if cfg.nesterov else None

    for k in range(1, cfg.max_iters + 1):
        start = state.lookahead if cfg.nesterov else m
        candidate, resid = _sweep(s, start, lam, update_dictionaries, k)
        f_new = _objective_from(resid, candidate, lam)
        if not math.isfinite(f_new):
            raise NumericalError("non-finite objective", k)

        accepted = True
        if cfg.nesterov:
            lc = step_constants(candidate, lam)
            if state.extrapolated or f_new < f:
                state = nesterov_step(
                    state, candidate, m, f_new, f, lc, lc_prev,
                    restart=cfg.restart_on_increase,
                )
                accepted = not state.restarted
            else:
                # plain step from the main iterate: no decrease means stationary
                state = NesterovState(s=state.s, lookahead=candidate)
            if accepted:
                lc_prev = lc
            else:
                trace.restarts += 1

        change = math.inf
        if accepted:
            change = abs(f_new - f) / max(1.0, abs(f_new))
            m, f = candidate, f_new
        trace.objectives.append(f)
        trace.iterations = k
        if change < cfg.rel_tol:
            trace.converged = True
            break

    if trace.converged:
        logger.debug(
            "descent converged after %d iterations, objective %.10g (r1=%d, r2=%d)",
            trace.iterations, f, m.r1, m.r2,
        )
    else:
        logger.warning(
            "descent stopped at max_iters=%d without converging, objective %.10g",
            cfg.max_iters, f,
        )
    return m, trace
