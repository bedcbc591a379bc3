from pathlib import Path
import sys

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from sepdl.errors import ParameterError
from sepdl.synth import (
    PRESETS,
    SyntheticSpec,
    atom_recovery,
    default_atoms,
    generate,
    grid_shape,
)


def small_spec(**kwargs):
    params = dict(g=6, v=16, t=30, n_gamma_atoms=3, n_psi_atoms=4, noise_var=0.0, seed=0)
    params.update(kwargs)
    return SyntheticSpec(**params)


@pytest.mark.imported
def test_presets_are_loaded():
    assert {"full", "desk", "tiny"} <= set(PRESETS)
    spec = SyntheticSpec.from_preset("full")
    assert (spec.g, spec.v, spec.t) == (10, 100, 1200)
    assert (spec.n_gamma_atoms, spec.n_psi_atoms) == (3, 6)
    assert spec.noise_var == pytest.approx(0.003)


@pytest.mark.imported
def test_preset_overrides_skip_none():
    spec = SyntheticSpec.from_preset("desk", t=None, seed=5)
    assert spec.t == 200
    assert spec.seed == 5


@pytest.mark.imported
def test_unknown_preset():
    with pytest.raises(ParameterError):
        SyntheticSpec.from_preset("huge")


@pytest.mark.imported
@pytest.mark.parametrize(
    "kwargs",
    [dict(g=0), dict(n_gamma_atoms=7), dict(n_psi_atoms=17), dict(noise_var=-0.1), dict(max_psi_terms=0)],
)
def test_spec_validation(kwargs):
    with pytest.raises(ParameterError):
        small_spec(**kwargs)


@pytest.mark.imported
@pytest.mark.parametrize("v, expected", [(100, (10, 10)), (12, (3, 4)), (7, (1, 7)), (9, (3, 3))])
def test_grid_shape(v, expected):
    assert grid_shape(v) == expected


@pytest.mark.imported
@pytest.mark.parametrize("preset", ["full", "tiny"])
def test_default_atoms_are_unit_and_distinct(preset):
    spec = SyntheticSpec.from_preset(preset)
    gamma, psi = default_atoms(spec)
    assert gamma.shape == (spec.g, spec.n_gamma_atoms)
    assert psi.shape == (spec.v, spec.n_psi_atoms)
    for atoms in (gamma, psi):
        np.testing.assert_allclose(np.linalg.norm(atoms, axis=0), 1.0, rtol=1e-12)
        cosines = np.abs(atoms.T @ atoms)
        np.fill_diagonal(cosines, 0.0)
        assert cosines.max() < 0.99


@pytest.mark.imported
def test_generate_is_deterministic():
    spec = small_spec(noise_var=0.01, seed=3)
    a, b = generate(spec), generate(spec)
    np.testing.assert_array_equal(a.tensor, b.tensor)
    other = generate(small_spec(noise_var=0.01, seed=4))
    assert not np.array_equal(a.tensor, other.tensor)


@pytest.mark.imported
def test_clean_tensor_does_not_depend_on_noise_level():
    quiet = generate(small_spec(seed=2))
    noisy = generate(small_spec(seed=2, noise_var=0.05))
    np.testing.assert_array_equal(quiet.clean, noisy.clean)
    np.testing.assert_array_equal(quiet.tensor, quiet.clean)


@pytest.mark.imported
def test_single_atoms_give_rank_one_slices():
    data = generate(small_spec(n_gamma_atoms=1, n_psi_atoms=1))
    for t in range(data.clean.shape[2]):
        assert np.linalg.matrix_rank(data.clean[:, :, t], tol=1e-10) == 1
        np.testing.assert_allclose(
            data.clean[:, :, t], np.outer(data.gamma_atoms[:, 0], data.psi_atoms[:, 0]), atol=1e-12
        )


@pytest.mark.imported
def test_noise_variance():
    spec = SyntheticSpec(g=10, v=100, t=50, n_gamma_atoms=3, n_psi_atoms=6, noise_var=0.003, seed=1)
    data = generate(spec)
    noise = data.tensor - data.clean
    assert noise.var() == pytest.approx(0.003, rel=0.1)
    assert abs(noise.mean()) < 0.01


@pytest.mark.imported
def test_clean_slices_lie_in_atom_spans():
    data = generate(small_spec(seed=6))
    q_gamma, _ = np.linalg.qr(data.gamma_atoms)
    q_psi, _ = np.linalg.qr(data.psi_atoms)
    for t in range(data.clean.shape[2]):
        x = data.clean[:, :, t]
        projected = q_gamma @ (q_gamma.T @ x @ q_psi) @ q_psi.T
        np.testing.assert_allclose(projected, x, atol=1e-12)


@pytest.mark.imported
def test_mixtures_respect_term_limits_and_weights():
    spec = small_spec(seed=7, max_gamma_terms=2, max_psi_terms=3)
    data = generate(spec)
    assert len(data.mixtures) == spec.t
    for mix in data.mixtures:
        assert 1 <= mix.gamma_idx.size <= 2
        assert 1 <= mix.psi_idx.size <= 3
        assert mix.weights.shape == (mix.gamma_idx.size, mix.psi_idx.size)
        assert mix.weights.sum() == pytest.approx(1.0)
        assert np.all(mix.weights >= 0)
        assert np.all(mix.gamma_idx < spec.n_gamma_atoms)
        assert np.all(mix.psi_idx < spec.n_psi_atoms)


@pytest.mark.imported
def test_atom_recovery_of_truth_is_perfect():
    gamma, _ = default_atoms(small_spec())
    scores = atom_recovery(-2.0 * gamma[:, ::-1], gamma)
    np.testing.assert_allclose(scores, 1.0)


@pytest.mark.imported
def test_atom_recovery_ignores_zero_columns():
    gamma, _ = default_atoms(small_spec())
    learned = np.column_stack([np.zeros(gamma.shape[0]), gamma[:, 0]])
    scores = atom_recovery(learned, gamma)
    assert scores[0] == pytest.approx(1.0)
    assert np.all(scores[1:] < 1.0)
    np.testing.assert_array_equal(atom_recovery(np.zeros((gamma.shape[0], 2)), gamma), 0.0)


@pytest.mark.imported
def test_atom_recovery_rejects_length_mismatch():
    with pytest.raises(ParameterError):
        atom_recovery(np.ones((3, 1)), np.ones((4, 1)))
