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

"""Synthetic separable data: random sparse mixtures of ground-truth atoms.

Each signal ``S_t`` is ``sum_p sum_q w_pq Γ̄_{i_p} Ψ̄_{j_q}^T + noise`` with
``1 <= m_t <= max_gamma_terms`` angular and ``1 <= n_t <= max_psi_terms``
spatial atoms drawn uniformly with replacement and Uniform(0, 1) weights
rescaled to sum to one.  Random numbers come from numpy's PCG64 generator;
mixtures and noise use independent child streams of ``seed`` so the clean
tensor does not depend on the noise level.
"""

from dataclasses import dataclass, fields
import json
import os
from typing import Iterator

import numpy as np

from .errors import ParameterError
from .tensor import as_matrix

# Candidate atoms this similar to an accepted one are skipped.
_MAX_COSINE = 0.99

_GOLDEN = (1.0 + 5.0**0.5) / 2.0


def _load_presets() -> dict:
    current_dir = os.path.dirname(os.path.abspath(__file__))
    try:
        with open(os.path.join(current_dir, "presets.json"), "r", encoding="utf-8") as f:
            return json.load(f)
    except (FileNotFoundError, json.JSONDecodeError):
        return {}


PRESETS = _load_presets()


@dataclass
class SyntheticSpec:
    g: int = 10
    v: int = 100
    t: int = 1200
    n_gamma_atoms: int = 3
    n_psi_atoms: int = 6
    noise_var: float = 0.003
    seed: int = 0
    max_gamma_terms: int = 2
    max_psi_terms: int = 3

    def __post_init__(self) -> None:
        for name in ("g", "v", "t", "n_gamma_atoms", "n_psi_atoms",
                     "max_gamma_terms", "max_psi_terms"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_gamma_atoms > self.g:
            raise ParameterError(
                f"cannot build {self.n_gamma_atoms} distinct angular atoms of length {self.g}"
            )
        if self.n_psi_atoms > self.v:
            raise ParameterError(
                f"cannot build {self.n_psi_atoms} distinct spatial atoms of length {self.v}"
            )
        if not self.noise_var >= 0:
            raise ParameterError(f"noise_var must be >= 0, got {self.noise_var}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "SyntheticSpec":
        if name not in PRESETS:
            raise ParameterError(
                f"unknown preset {name!r}, choose from {sorted(PRESETS)}"
            )
        known = {f.name for f in fields(cls)}
        params = {k: val for k, val in PRESETS[name].items() if k in known}
        params.update({k: val for k, val in overrides.items() if val is not None})
        return cls(**params)


@dataclass
class Mixture:
    gamma_idx: np.ndarray
    psi_idx: np.ndarray
    weights: np.ndarray


@dataclass
class SyntheticData:
    tensor: np.ndarray
    clean: np.ndarray
    gamma_atoms: np.ndarray
    psi_atoms: np.ndarray
    mixtures: list[Mixture]


def grid_shape(v: int) -> tuple[int, int]:
    """Most square ``h x w`` factorization of ``v`` with ``h <= w``."""
    h = int(np.floor(np.sqrt(v)))
    while v % h:
        h -= 1
    return h, v // h


def _spatial_masks(h: int, w: int) -> Iterator[np.ndarray]:
    rows, cols = np.mgrid[0:h, 0:w]
    thick_r, thick_c = max(1, h // 5), max(1, w // 5)
    yield np.abs(rows - h // 2) < thick_r
    yield np.abs(cols - w // 2) < thick_c
    if h > 1:
        yield cols == np.rint(rows * (w - 1) / (h - 1))
    else:
        yield cols == rows
    lo_r, hi_r, lo_c, hi_c = h // 4, h - h // 4, w // 4, w - w // 4
    square = (rows >= lo_r) & (rows < hi_r) & (cols >= lo_c) & (cols < hi_c)
    yield square
    yield (rows < (h + 1) // 3) & (cols < (w + 1) // 3)
    outer = (rows >= h // 8) & (rows < h - h // 8) & (cols >= w // 8) & (cols < w - w // 8)
    inner = (rows > h // 8) & (rows < h - h // 8 - 1) & (cols > w // 8) & (cols < w - w // 8 - 1)
    yield outer & ~inner


def _spatial_candidates(v: int) -> Iterator[np.ndarray]:
    h, w = grid_shape(v)
    masks = list(_spatial_masks(h, w))
    for mask in masks:
        yield mask.ravel(order="F").astype(float)
    for shift in range(1, max(h, w)):
        for mask in masks:
            rolled = np.roll(np.roll(mask, shift, axis=1), shift, axis=0)
            yield rolled.ravel(order="F").astype(float)
    for k in range(v):
        yield np.eye(v)[k]


def _bump(g: int, center: float) -> np.ndarray:
    width = max(g / 8.0, 0.5)
    x = np.arange(g)
    return np.exp(-0.5 * ((x - center) / width) ** 2)


def _angular_candidates(g: int) -> Iterator[np.ndarray]:
    yield np.ones(g)
    yield _bump(g, g / 3.0)
    yield _bump(g, g / 4.0) + _bump(g, 3.0 * g / 4.0)
    for k in range(1, 4 * g):
        yield _bump(g, ((k * _GOLDEN) % 1.0) * g)
    for k in range(g):
        yield np.eye(g)[k]


def _pick_atoms(candidates: Iterator[np.ndarray], count: int) -> np.ndarray:
    accepted: list[np.ndarray] = []
    for cand in candidates:
        norm = np.linalg.norm(cand)
        if norm == 0.0:
            continue
        cand = cand / norm
        if any(abs(float(cand @ atom)) >= _MAX_COSINE for atom in accepted):
            continue
        accepted.append(cand)
        if len(accepted) == count:
            break
    return np.column_stack(accepted)


def default_atoms(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Unit-norm ground-truth atoms.

    Angular atoms are smooth profiles (constant, one Gaussian bump, two
    bumps, then bumps at golden-ratio positions).  Spatial atoms are binary
    masks on the :func:`grid_shape` grid: horizontal bar, vertical bar,
    diagonal, centered square, corner block and ring, then shifted copies.
    """
    return (
        _pick_atoms(_angular_candidates(spec.g), spec.n_gamma_atoms),
        _pick_atoms(_spatial_candidates(spec.v), spec.n_psi_atoms),
    )


def generate(spec: SyntheticSpec) -> SyntheticData:
    gamma_atoms, psi_atoms = default_atoms(spec)
    mix_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(2)
    rng = np.random.default_rng(mix_seq)

    clean = np.zeros((spec.g, spec.v, spec.t))
    mixtures = []
    for t in range(spec.t):
        m_t = int(rng.integers(1, spec.max_gamma_terms + 1))
        n_t = int(rng.integers(1, spec.max_psi_terms + 1))
        gamma_idx = rng.integers(0, spec.n_gamma_atoms, size=m_t)
        psi_idx = rng.integers(0, spec.n_psi_atoms, size=n_t)
        weights = rng.uniform(0.0, 1.0, size=(m_t, n_t))
        weights /= weights.sum()
        clean[:, :, t] = gamma_atoms[:, gamma_idx] @ weights @ psi_atoms[:, psi_idx].T
        mixtures.append(Mixture(gamma_idx, psi_idx, weights))

    tensor = clean.copy()
    if spec.noise_var > 0:
        noise_rng = np.random.default_rng(noise_seq)
        tensor += noise_rng.normal(0.0, np.sqrt(spec.noise_var), size=clean.shape)
    return SyntheticData(tensor, clean, gamma_atoms, psi_atoms, mixtures)


def atom_recovery(learned: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Best absolute cosine similarity of each ground-truth atom to any learned atom."""
    learned = as_matrix(learned, "learned")
    truth = as_matrix(truth, "truth")
    if learned.shape[0] != truth.shape[0]:
        raise ParameterError(
            f"atom lengths differ: learned {learned.shape[0]}, truth {truth.shape[0]}"
        )
    norms = np.linalg.norm(learned, axis=0)
    live = norms > 0
    if not np.any(live):
        return np.zeros(truth.shape[1])
    unit_learned = learned[:, live] / norms[live]
    unit_truth = truth / np.linalg.norm(truth, axis=0)
    return np.abs(unit_truth.T @ unit_learned).max(axis=1)
