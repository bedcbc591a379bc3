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

"""Meta-algorithm: alternate local descent and the optimality certificate,
appending atoms until the model is certified globally optimal."""

from dataclasses import dataclass, field, replace
import logging
from typing import Optional

import numpy as np

from .certificate import CertConfig, CertificateReport, apply_escape, check
from .constants import (
    DEFAULT_MAX_ROUNDS,
    REL_TOL_DECAY,
    REL_TOL_FLOOR,
    STALL_LIMIT,
)
from .descent import DescentConfig, descend
from .errors import ParameterError, StallError
from .io import format_float
from .objective import Model
from .tensor import as_tensor3

logger = logging.getLogger(__name__)

LOG_HEADER = ("round", "iter_total", "objective", "r1", "r2", "g", "p", "c", "verdict")


@dataclass
class SolverConfig:
    lam: float
    init_r1: int = 1
    init_r2: int = 1
    init_seed: int = 0
    descent: DescentConfig = field(default_factory=DescentConfig)
    cert: CertConfig = field(default_factory=CertConfig)
    max_outer_rounds: int = DEFAULT_MAX_ROUNDS
    prune_dead_atoms: bool = False

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if self.init_r1 < 1 or self.init_r2 < 1:
            raise ParameterError(
                f"initial atom counts must be >= 1, got {self.init_r1}, {self.init_r2}"
            )
        if self.max_outer_rounds < 1:
            raise ParameterError(
                f"max_outer_rounds must be >= 1, got {self.max_outer_rounds}"
            )


@dataclass
class RoundRecord:
    round: int
    iterations: int
    iter_total: int
    objective: float
    r1: int
    r2: int
    sparsity: float
    report: CertificateReport
    gap: Optional[float] = None


@dataclass
class RunRecord:
    rounds: list[RoundRecord] = field(default_factory=list)
    objective_trace: list[float] = field(default_factory=list)
    model: Optional[Model] = None
    certified: bool = False
    objective_star: Optional[float] = None

    @property
    def final_objective(self) -> float:
        return self.rounds[-1].objective

    @property
    def oracle_gap(self) -> Optional[float]:
        return self.rounds[-1].gap if self.rounds else None

    def log_header(self) -> tuple[str, ...]:
        if self.objective_star is None:
            return LOG_HEADER
        return LOG_HEADER + ("gap",)

    def log_rows(self) -> list[list[str]]:
        rows = []
        for rec in self.rounds:
            row = [
                str(rec.round),
                str(rec.iter_total),
                format_float(rec.objective),
                str(rec.r1),
                str(rec.r2),
                format_float(rec.report.g),
                format_float(rec.report.p),
                format_float(rec.report.c),
                rec.report.verdict.value,
            ]
            if rec.gap is not None:
                row.append(format_float(rec.gap))
            rows.append(row)
        return rows

    def gap_curve(self) -> np.ndarray:
        """Objective minus the global optimum at every descent iteration."""
        if self.objective_star is None:
            raise ParameterError("gap_curve needs the oracle optimum")
        return np.asarray(self.objective_trace) - self.objective_star


def init_model(g: int, v: int, t: int, cfg: SolverConfig) -> Model:
    """Random unit-norm dictionary columns and zero coefficients."""
    if min(g, v, t) < 1:
        raise ParameterError(f"dimensions must be positive, got {g}x{v}x{t}")
    rng = np.random.default_rng(cfg.init_seed)
    gamma = rng.standard_normal((g, cfg.init_r1))
    psi = rng.standard_normal((v, cfg.init_r2))
    gamma /= np.linalg.norm(gamma, axis=0)
    psi /= np.linalg.norm(psi, axis=0)
    return Model(gamma, psi, np.zeros((cfg.init_r1, cfg.init_r2, t)))


def prune(m: Model) -> Model:
    """Drop atoms that contribute nothing to the reconstruction.

    An atom is dead when its column is zero or all of its coefficients that
    meet a live atom of the other mode are zero.  The pruned model has the
    same reconstruction and objective.
    """
    gamma_live = np.linalg.norm(m.gamma, axis=0) > 0
    psi_live = np.linalg.norm(m.psi, axis=0) > 0
    effective = m.coef * gamma_live[:, None, None] * psi_live[None, :, None]
    keep_gamma = np.flatnonzero(np.any(effective != 0, axis=(1, 2)))
    keep_psi = np.flatnonzero(np.any(effective != 0, axis=(0, 2)))
    if keep_gamma.size == 0:
        g, v, t = m.data_shape
        return Model(np.zeros((g, 1)), np.zeros((v, 1)), np.zeros((1, 1, t)))
    if keep_gamma.size == m.r1 and keep_psi.size == m.r2:
        return m.copy()
    return Model(
        m.gamma[:, keep_gamma],
        m.psi[:, keep_psi],
        m.coef[np.ix_(keep_gamma, keep_psi)],
    )


def solve(
    s: np.ndarray,
    cfg: SolverConfig,
    objective_star: Optional[float] = None,
    m0: Optional[Model] = None,
) -> tuple[Model, RunRecord]:
    """Run descent/certificate rounds until certified or out of rounds.

    Each round descends with a relative tolerance half the previous one
    (floored at ``REL_TOL_FLOOR``).  Running out of rounds returns the last
    model uncertified; two consecutive zero-step escapes raise
    :class:`StallError` carrying the partial record.
    """
    s = as_tensor3(s, "data")
    m = m0.copy() if m0 is not None else init_model(*s.shape, cfg)
    record = RunRecord(objective_star=objective_star)
    rel_tol = cfg.descent.rel_tol
    iter_total = 0
    stalls = 0

    for rnd in range(1, cfg.max_outer_rounds + 1):
        m, trace = descend(s, m, cfg.lam, replace(cfg.descent, rel_tol=rel_tol))
        iter_total += trace.iterations
        record.objective_trace.extend(trace.objectives)
        report = check(s, m, cfg.lam, cfg.cert)
        objective = trace.final_objective
        rec = RoundRecord(
            round=rnd,
            iterations=trace.iterations,
            iter_total=iter_total,
            objective=objective,
            r1=m.r1,
            r2=m.r2,
            sparsity=float(np.count_nonzero(m.coef)) / m.coef.size,
            report=report,
            gap=None if objective_star is None else objective - objective_star,
        )
        record.rounds.append(rec)
        logger.info(
            "round %d: objective %.10g, r1=%d, r2=%d, g=%.6g, p=%.6g, c=%.6g, %s",
            rnd, objective, m.r1, m.r2, report.g, report.p, report.c,
            report.verdict.value,
        )

        if report.optimal:
            record.certified = True
            break
        if rnd == cfg.max_outer_rounds:
            logger.warning(
                "no certificate after %d rounds, returning the last model", rnd
            )
            break
        stalls = stalls + 1 if report.stalled else 0
        if stalls >= STALL_LIMIT:
            record.model = m
            raise StallError(
                f"escape step was zero in {stalls} consecutive rounds "
                f"(round {rnd}, c={report.c:.6g})",
                record,
            )
        m = apply_escape(m, report)
        rel_tol = max(rel_tol * REL_TOL_DECAY, REL_TOL_FLOOR)

    if cfg.prune_dead_atoms:
        m = prune(m)
    record.model = m
    return m, record
