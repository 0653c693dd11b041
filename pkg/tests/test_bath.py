"""Shell sampling, density calibration, and coupling-tensor layout."""

import numpy as np
import pytest

from nvbath.bath import (BathRealization, ShellSpec, enumerate_bath_states,
                         expected_spin_count, realization_from_positions,
                         sample_bath_realization, sample_bath_state,
                         sample_positions, spin_count)
from nvbath.spinmodel import PhysicalConstants, dipole_matrices

CONSTANTS = PhysicalConstants()

# frozen by tests/oracles/shell_counts.py
FROZEN_COUNTS = [
    ((30.0, 250.0, 45.0), 518),
    ((30.0, 60.0, 65.0), 9),
    ((30.0, 90.0, 17.4), 9),
]


@pytest.mark.parametrize("shell_args,expected", FROZEN_COUNTS)
def test_spin_count_frozen_values(shell_args, expected):
    assert spin_count(ShellSpec(*shell_args), CONSTANTS) == expected


def test_spin_count_zero_density():
    assert spin_count(ShellSpec(30.0, 250.0, 0.0), CONSTANTS) == 0


def test_spin_count_monotone():
    base = spin_count(ShellSpec(30.0, 100.0, 20.0), CONSTANTS)
    assert spin_count(ShellSpec(30.0, 100.0, 40.0), CONSTANTS) >= base
    assert spin_count(ShellSpec(30.0, 150.0, 20.0), CONSTANTS) >= base


def test_shell_validation():
    with pytest.raises(ValueError):
        ShellSpec(60.0, 30.0, 10.0)
    with pytest.raises(ValueError):
        ShellSpec(0.0, 30.0, 10.0)
    with pytest.raises(ValueError):
        ShellSpec(30.0, 60.0, -1.0)


def test_sampled_radii_inside_shell():
    shell = ShellSpec(30.0, 60.0, 65.0)
    rng = np.random.default_rng(1)
    pos = sample_positions(shell, 5000, rng)
    r = np.linalg.norm(pos, axis=1)
    assert r.min() >= shell.r_min_nm
    assert r.max() <= shell.r_max_nm


def test_radial_cdf_matches_volume_law():
    shell = ShellSpec(30.0, 90.0, 20.0)
    rng = np.random.default_rng(99)
    r = np.sort(np.linalg.norm(sample_positions(shell, 100_000, rng), axis=1))
    analytic = ((r ** 3 - shell.r_min_nm ** 3)
                / (shell.r_max_nm ** 3 - shell.r_min_nm ** 3))
    empirical = np.arange(1, r.size + 1) / r.size
    ks = np.max(np.abs(empirical - analytic))
    assert ks < 0.01


def test_directions_are_isotropic():
    shell = ShellSpec(30.0, 60.0, 65.0)
    rng = np.random.default_rng(5)
    pos = sample_positions(shell, 100_000, rng)
    unit = pos / np.linalg.norm(pos, axis=1, keepdims=True)
    # each Cartesian mean ~ N(0, 1/sqrt(3n)); allow five sigma
    assert np.all(np.abs(unit.mean(axis=0)) < 5.0 / np.sqrt(3 * unit.shape[0]))


def test_same_seed_reproduces_realization(register2, shell_9spin):
    a = sample_bath_realization(shell_9spin, register2,
                                np.random.default_rng(123))
    b = sample_bath_realization(shell_9spin, register2,
                                np.random.default_rng(123))
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.pair_coupling, b.pair_coupling)
    c = sample_bath_realization(shell_9spin, register2,
                                np.random.default_rng(124))
    assert not np.array_equal(a.positions, c.positions)


def test_count_override_and_poisson(register2, shell_9spin):
    rlz = sample_bath_realization(shell_9spin, register2,
                                  np.random.default_rng(0), count=4)
    assert rlz.n_spins == 4
    counts = [sample_bath_realization(shell_9spin, register2,
                                      np.random.default_rng(i),
                                      poisson=True).n_spins
              for i in range(40)]
    assert min(counts) != max(counts)  # actually random
    assert abs(np.mean(counts) - 9.0) < 3.0


def test_realization_tensor_shapes(register24):
    rng = np.random.default_rng(8)
    rlz = sample_bath_realization(ShellSpec(30.0, 60.0, 65.0), register24, rng)
    n = rlz.n_spins
    assert rlz.positions.shape == (n, 3)
    assert rlz.nv_coupling.shape == (n, 3, 3)
    assert rlz.nitrogen_coupling.shape == (n, 3, 3)
    assert rlz.carbon_coupling.shape == (2, n, 3, 3)
    assert rlz.pair_coupling.shape == (n, n, 3, 3)
    assert np.all(np.isfinite(rlz.pair_coupling))


def test_pair_coupling_symmetric_zero_diagonal(bath3):
    g = bath3.pair_coupling
    np.testing.assert_allclose(g, np.swapaxes(g, 0, 1), atol=1e-12)
    for j in range(bath3.n_spins):
        np.testing.assert_array_equal(g[j, j], np.zeros((3, 3)))


def test_couplings_match_direct_dipole_formula(register2):
    positions = np.array([[0.0, 0.0, 40.0], [30.0, 0.0, 20.0]])
    rlz = realization_from_positions(register2, positions)
    c = register2.constants
    expected_nv = dipole_matrices(positions, c.gamma_e, c.gamma_e)
    np.testing.assert_allclose(rlz.nv_coupling, expected_nv, atol=1e-12)
    c1 = np.asarray(register2.species[1].position)
    expected_c1 = dipole_matrices(positions - c1, c.gamma_c, c.gamma_e)
    np.testing.assert_allclose(rlz.carbon_coupling[0], expected_c1, atol=1e-12)
    expected_pair = dipole_matrices(positions[0] - positions[1],
                                    c.gamma_e, c.gamma_e)
    np.testing.assert_allclose(rlz.pair_coupling[0, 1], expected_pair,
                               atol=1e-12)


def test_two_qubit_register_has_no_nitrogen_coupling(register2):
    rlz = realization_from_positions(
        register2, np.array([[0.0, 0.0, 40.0]]))
    np.testing.assert_array_equal(rlz.nitrogen_coupling, np.zeros((1, 3, 3)))


def test_empty_realization(register2):
    rlz = realization_from_positions(register2, np.zeros((0, 3)))
    assert rlz.n_spins == 0
    assert rlz.pair_coupling.shape == (0, 0, 3, 3)


def test_sample_bath_state_values():
    rng = np.random.default_rng(17)
    s = sample_bath_state(1000, rng)
    assert set(np.unique(s)) == {-0.5, 0.5}
    assert sample_bath_state(0, rng).shape == (0,)


def test_sample_bath_state_unbiased():
    rng = np.random.default_rng(3)
    mean = np.mean([sample_bath_state(1, rng)[0] for _ in range(100_000)])
    assert abs(mean) < 0.01


def test_enumerate_bath_states():
    states = enumerate_bath_states(3)
    assert states.shape == (8, 3)
    assert {tuple(row) for row in states} == {
        tuple(0.5 - np.array(bits))
        for bits in np.ndindex(2, 2, 2)}
    np.testing.assert_array_equal(enumerate_bath_states(0), np.zeros((1, 0)))
    with pytest.raises(ValueError):
        enumerate_bath_states(21)


def test_expected_count_is_linear_in_density():
    a = expected_spin_count(ShellSpec(30.0, 60.0, 10.0), CONSTANTS)
    b = expected_spin_count(ShellSpec(30.0, 60.0, 20.0), CONSTANTS)
    assert abs(b - 2.0 * a) < 1e-9
