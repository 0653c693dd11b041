"""Cluster expansion: orders 0-2, the general recursion, and selection."""

import numpy as np
import pytest

from nvbath.bath import (BathRealization, enumerate_bath_states,
                         realization_from_positions)
from nvbath.evolution import PulseSequence, TABLE_PRESETS, evolve_trajectory
from nvbath.exact import exact_evolve
from nvbath.gcce import (ClusterSet, GcceConfig, gcce0, gcce1, gcce2,
                         gcce_general, select_pairs, _guarded_divide)
from nvbath.spinmodel import (C1_POSITION, CouplingTensor, NV_POSITION,
                              RegisterSpec, SpinKind, SpinSpecies,
                              TensorSource, two_qubit_register)

CFG = GcceConfig()


def superposition_rho(dim, partner):
    vec = np.zeros(dim, dtype=complex)
    vec[0] = vec[partner] = 1.0 / np.sqrt(2.0)
    return np.outer(vec, vec.conj())


def single_zz_bath(kzz_khz):
    """One impurity coupled to the NV by a pure secular term."""
    k = np.zeros((1, 3, 3))
    k[0, 2, 2] = kzz_khz
    return BathRealization(positions=np.array([[0.0, 0.0, 40.0]]),
                           nv_coupling=k,
                           nitrogen_coupling=np.zeros((1, 3, 3)),
                           carbon_coupling=np.zeros((1, 1, 3, 3)),
                           pair_coupling=np.zeros((1, 1, 3, 3)))


def uncoupled_register():
    """NV + 13C register with the hyperfine tensor removed.

    Keeps the register Hamiltonian diagonal so the NV coherence envelope
    has the bare closed form.
    """
    zero = CouplingTensor(np.zeros((3, 3)), TensorSource.TABLE_CONSTANT)
    return RegisterSpec(
        species=(SpinSpecies(SpinKind.NV_ELECTRON, 1.0, NV_POSITION),
                 SpinSpecies(SpinKind.CARBON13, 0.5, C1_POSITION)),
        tensors={(0, 1): zero})


# ---------------------------------------------------------------------------
# analytic anchor: one secular bath spin dephases the NV coherence as
# (1/2)|cos(pi K_zz t)|
# ---------------------------------------------------------------------------

def test_single_spin_dephasing_envelope():
    spec = uncoupled_register()
    kzz_khz = 50.0
    rlz = single_zz_bath(kzz_khz)
    rho0 = superposition_rho(4, 2)  # NV superposition, carbon up
    times = np.linspace(0.0, 60.0, 121)
    seq = PulseSequence((0.0,), (), ())
    traj = gcce1(rho0, spec, rlz, seq, CFG, None, times)
    coherence = np.abs(traj[:, 0, 2])
    envelope = 0.5 * np.abs(np.cos(np.pi * kzz_khz * 1e-3 * times))
    np.testing.assert_allclose(coherence, envelope, atol=1e-6)


def test_envelope_nodes_and_revivals():
    spec = uncoupled_register()
    kzz_khz = 50.0  # node at t = 10 us, revival at t = 20 us
    rlz = single_zz_bath(kzz_khz)
    rho0 = superposition_rho(4, 2)
    seq = PulseSequence((0.0,), (), ())
    traj = gcce1(rho0, spec, rlz, seq, CFG, None, np.array([10.0, 20.0]))
    assert abs(traj[0, 0, 2]) < 1e-9
    assert abs(abs(traj[1, 0, 2]) - 0.5) < 1e-9


# ---------------------------------------------------------------------------
# exactness identities
# ---------------------------------------------------------------------------

def test_empty_bath_matches_unitary(register2, h2):
    rlz = realization_from_positions(register2, np.zeros((0, 3)))
    rho0 = superposition_rho(4, 3)
    times = np.linspace(0.0, 15.0, 7)
    seq = TABLE_PRESETS["bell2"]
    for fn in (gcce0, gcce1):
        traj = fn(rho0, register2, rlz, seq, CFG, None, times)
        uni = evolve_trajectory(h2, seq, rho0, times)
        np.testing.assert_allclose(traj, uni, atol=1e-12)


def test_gcce1_exact_for_single_spin(register2):
    rng = np.random.default_rng(6)
    pos = rng.uniform(30.0, 50.0, size=(1, 3))
    rlz = realization_from_positions(register2, pos)
    rho0 = superposition_rho(4, 3)
    times = np.array([0.0, 7.1, 20.0, 40.0])
    seq = TABLE_PRESETS["bell2"]
    approx = gcce1(rho0, register2, rlz, seq, CFG, None, times)
    exact = exact_evolve(rho0, register2, rlz, seq, times)
    np.testing.assert_allclose(approx, exact, atol=1e-8)


def test_full_cluster_recursion_is_exact(register2, bath3):
    """The expansion telescopes: with every cluster up to the full bath the
    tilde-factor product reproduces the exact reduced dynamics."""
    rho0 = superposition_rho(4, 3)
    times = np.array([5.0, 20.0, 65.0])
    seq = TABLE_PRESETS["bell2"]
    all_clusters = ClusterSet(
        tuple((j,) for j in range(3))
        + ((0, 1), (0, 2), (1, 2))
        + ((0, 1, 2),))
    result = gcce_general(rho0, register2, bath3, seq, CFG, all_clusters,
                          None, times)
    exact3 = exact_evolve(rho0, register2, bath3, seq, times)
    np.testing.assert_allclose(result, exact3, atol=1e-8)


def test_gcce2_close_to_exact_on_small_bath(register2, bath3):
    rho0 = superposition_rho(4, 3)
    times = np.array([20.0, 65.0])
    seq = TABLE_PRESETS["bell2"]
    pairs = ClusterSet(((0, 1), (0, 2), (1, 2)))
    g2 = gcce2(rho0, register2, bath3, seq, CFG, pairs, None, times)
    exact3 = exact_evolve(rho0, register2, bath3, seq, times)
    assert np.abs(g2 - exact3).max() < 1e-3


def test_outputs_hermitian_unit_trace(register2, bath3):
    rho0 = superposition_rho(4, 3)
    times = np.array([10.0, 30.0])
    seq = TABLE_PRESETS["bell2"]
    traj = gcce2(rho0, register2, bath3, seq, CFG,
                 ClusterSet(((0, 1),)), None, times)
    for rho in traj:
        assert np.abs(rho - rho.conj().T).max() < 1e-10
        assert abs(np.trace(rho) - 1.0) < 1e-3


def test_order_hierarchy_is_consistent(register2, bath3):
    """gcce2 with an empty pair set degenerates to gcce1."""
    rho0 = superposition_rho(4, 3)
    times = np.array([15.0])
    seq = TABLE_PRESETS["bell2"]
    g1 = gcce1(rho0, register2, bath3, seq, CFG, None, times)
    g2 = gcce2(rho0, register2, bath3, seq, CFG, ClusterSet(()), None, times)
    np.testing.assert_allclose(g1, g2, atol=1e-12)


def test_sampled_average_approaches_enumeration(register2, bath3):
    rho0 = superposition_rho(4, 3)
    times = np.array([20.0])
    seq = TABLE_PRESETS["bell2"]
    enum = gcce0(rho0, register2, bath3, seq, CFG, None, times)
    cfg = GcceConfig(n_samples=4000, enumerate_exact_below=0)
    sampled = gcce0(rho0, register2, bath3, seq, cfg,
                    np.random.default_rng(12), times)
    assert np.abs(sampled - enum).max() < 0.05


# ---------------------------------------------------------------------------
# cluster bookkeeping
# ---------------------------------------------------------------------------

def test_cluster_set_canonical_order():
    cs = ClusterSet(((2,), (0, 1), (1,), (0,)))
    assert cs.clusters == ((0,), (1,), (2,), (0, 1))
    assert cs.max_size == 2
    assert cs.by_size(1) == ((0,), (1,), (2,))
    assert len(cs) == 4


def test_cluster_set_validation():
    with pytest.raises(ValueError):
        ClusterSet(((1, 0),))  # unsorted
    with pytest.raises(ValueError):
        ClusterSet(((0, 0),))  # duplicate index
    with pytest.raises(ValueError):
        ClusterSet(((),))  # empty cluster
    with pytest.raises(ValueError):
        ClusterSet(((0,), (0,)))  # duplicate cluster
    with pytest.raises(ValueError):
        ClusterSet(((-1,),))


def test_subset_closure_detection():
    closed = ClusterSet(((0,), (1,), (0, 1)))
    assert closed.is_subset_closed()
    open_set = ClusterSet(((0,), (0, 1)))
    assert not open_set.is_subset_closed()


def test_gcce_general_requires_subset_closure(register2, bath3):
    rho0 = superposition_rho(4, 3)
    seq = TABLE_PRESETS["bell2"]
    with pytest.raises(ValueError):
        gcce_general(rho0, register2, bath3, seq, CFG,
                     ClusterSet(((0,), (0, 1))), None, np.array([1.0]))


def test_gcce2_rejects_non_pairs(register2, bath3):
    rho0 = superposition_rho(4, 3)
    seq = TABLE_PRESETS["bell2"]
    with pytest.raises(ValueError):
        gcce2(rho0, register2, bath3, seq, CFG,
              ClusterSet(((0, 1, 2),)), None, np.array([1.0]))


def test_select_pairs_geometry(register2):
    positions = np.array([[40.0, 0.0, 0.0],
                          [52.0, 0.0, 16.0],
                          [150.0, 0.0, 0.0]])
    rlz = realization_from_positions(register2, positions)
    assert select_pairs(rlz, 70.0, 60.0).clusters == ((0, 1),)
    assert select_pairs(rlz, 50.0, 50.0).clusters == ()   # spin 1 too far out
    assert select_pairs(rlz, 70.0, 15.0).clusters == ()   # pair too wide
    with pytest.raises(ValueError):
        select_pairs(rlz, 10.0, 60.0)


def test_config_validation():
    with pytest.raises(ValueError):
        GcceConfig(n_samples=0)
    with pytest.raises(ValueError):
        GcceConfig(pair_select_d1_nm=10.0, pair_select_d2_nm=20.0)
    with pytest.raises(ValueError):
        GcceConfig(ratio_floor=0.0)
    with pytest.raises(ValueError):
        GcceConfig(order=-1)


def test_sampling_requires_rng_above_enumeration_threshold(register2):
    rng = np.random.default_rng(2)
    pos = rng.uniform(30, 60, size=(11, 3))
    rlz = realization_from_positions(register2, pos)
    rho0 = superposition_rho(4, 3)
    seq = PulseSequence((1.0,), (), ())
    with pytest.raises(ValueError):
        gcce0(rho0, register2, rlz, seq, CFG, None, np.array([1.0]))


def test_explicit_samples_validation(register2, bath3):
    rho0 = superposition_rho(4, 3)
    seq = PulseSequence((1.0,), (), ())
    with pytest.raises(ValueError):
        gcce0(rho0, register2, bath3, seq, CFG, None, np.array([1.0]),
              samples=np.zeros((5, 7)))


def test_guarded_divide():
    num = np.array([1.0 + 0j, 2.0, 3.0])
    den = np.array([2.0 + 0j, 1e-14, 4.0])
    out = _guarded_divide(num, den, 1e-10)
    np.testing.assert_allclose(out, [0.5, 1.0, 0.75])
