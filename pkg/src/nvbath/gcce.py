"""Generalized cluster correlation expansion over the impurity bath.

The register density matrix is approximated element-wise, per classical
bath configuration, as the mean-field trajectory times a product of
cluster correction factors:

    rho[a,b] ~= mf[a,b] * prod_C  tilde_C[a,b],
    tilde_C  = raw_C / (mf * prod_{C' proper subset of C} tilde_C'),

where raw_C evolves register (x) cluster C fully quantum (all remaining
impurities classical) and traces the cluster out again.  Averaging over
configurations happens after the product.  Including every cluster up to
the full bath makes the telescoping product exact; truncating at
singletons or pairs gives orders 1 and 2.  Order 0 keeps only the
mean-field factor.

Division is guarded: elements whose denominator magnitude falls below
``ratio_floor`` contribute a factor of one instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .bath import BathRealization, enumerate_bath_states
from .evolution import PulseSequence, decompose_density, evolve_state_batch
from .hamiltonian import cluster_hamiltonian, cluster_shift_diagonals
from .spinmodel import RegisterSpec

#: soft cap on scratch array elements per sample chunk
_CHUNK_ELEMENTS = 2 ** 23


@dataclass(frozen=True)
class GcceConfig:
    """Expansion order and averaging parameters."""

    order: int = 0
    n_samples: int = 100
    pair_select_d1_nm: float = 70.0
    pair_select_d2_nm: float = 60.0
    ratio_floor: float = 1e-10
    enumerate_exact_below: int = 10

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if self.n_samples < 1:
            raise ValueError("need at least one bath-state sample")
        if not self.pair_select_d1_nm >= self.pair_select_d2_nm > 0:
            raise ValueError("pair selection needs d1 >= d2 > 0")
        if self.ratio_floor <= 0:
            raise ValueError("ratio_floor must be positive")


@dataclass(frozen=True)
class ClusterSet:
    """Canonical collection of impurity-index clusters."""

    clusters: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        canon = tuple(tuple(int(i) for i in c) for c in self.clusters)
        for c in canon:
            if not c:
                raise ValueError("empty cluster not allowed")
            if list(c) != sorted(set(c)):
                raise ValueError(f"cluster {c} must be sorted and duplicate-free")
            if c[0] < 0:
                raise ValueError(f"negative impurity index in {c}")
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate clusters in cluster set")
        object.__setattr__(self, "clusters", tuple(sorted(canon, key=lambda c: (len(c), c))))

    def __len__(self) -> int:
        return len(self.clusters)

    @property
    def max_size(self) -> int:
        return max((len(c) for c in self.clusters), default=0)

    def by_size(self, size: int) -> tuple[tuple[int, ...], ...]:
        return tuple(c for c in self.clusters if len(c) == size)

    def is_subset_closed(self) -> bool:
        have = set(self.clusters)
        for c in self.clusters:
            for k in range(1, len(c)):
                if any(sub not in have for sub in combinations(c, k)):
                    return False
        return True


def select_pairs(realization: BathRealization, d1_nm: float,
                 d2_nm: float) -> ClusterSet:
    """Impurity pairs with both members within d1 of the register origin
    and mutual separation at most d2."""
    if d1_nm < d2_nm:
        raise ValueError("d1 must be at least d2")
    pos = realization.positions
    near = np.linalg.norm(pos, axis=1) <= d1_nm
    pairs = []
    for l, q in combinations(range(realization.n_spins), 2):
        if near[l] and near[q] and np.linalg.norm(pos[l] - pos[q]) <= d2_nm:
            pairs.append((l, q))
    return ClusterSet(tuple(pairs))


def _bath_state_matrix(n_spins: int, config: GcceConfig,
                       rng: np.random.Generator | None,
                       samples: np.ndarray | None) -> np.ndarray:
    if samples is not None:
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != n_spins:
            raise ValueError("explicit samples must have shape (M, n_spins)")
        return samples
    if n_spins == 0:
        return np.zeros((1, 0))
    if n_spins <= config.enumerate_exact_below:
        return enumerate_bath_states(n_spins)
    if rng is None:
        raise ValueError("rng required to sample bath states")
    return rng.integers(0, 2, size=(config.n_samples, n_spins)) - 0.5


def _cluster_trajectories(spec: RegisterSpec, realization: BathRealization,
                          cluster: tuple[int, ...], chunk: np.ndarray,
                          sequence: PulseSequence, times: np.ndarray,
                          weights: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Density-matrix trajectories (T, S, d_reg, d_reg) for one cluster.

    Evolves register (x) cluster with the chunk's classical configurations
    applied outside the cluster, each cluster spin starting in the basis
    state matching its own sampled projection, then traces the cluster out.
    """
    n = realization.n_spins
    c = len(cluster)
    block = 2 ** c
    d_reg = spec.dim
    base = cluster_hamiltonian(spec, realization, cluster, np.zeros(n))
    shifts = cluster_shift_diagonals(spec, realization, cluster, chunk)
    hams = base[None, :, :] + np.eye(base.shape[0])[None, :, :] * shifts[:, :, None]

    s_n, r_n = chunk.shape[0], len(weights)
    if c:
        bits = (0.5 - chunk[:, list(cluster)]).astype(int)
        b = bits @ (2 ** np.arange(c - 1, -1, -1))
        psi0 = np.zeros((s_n, r_n, d_reg * block), dtype=complex)
        reg_idx = np.arange(d_reg) * block
        psi0[np.arange(s_n)[:, None, None], np.arange(r_n)[None, :, None],
             b[:, None, None] + reg_idx[None, None, :]] = vectors[None, :, :]
    else:
        psi0 = np.broadcast_to(vectors, (s_n, r_n, d_reg))
    states = evolve_state_batch(hams, sequence, psi0, times)
    states = states.reshape(states.shape[:3] + (d_reg, block))
    return np.einsum("r,tsrak,tsrbk->tsab", weights, states, states.conj(), optimize=True)


def _guarded_divide(num: np.ndarray, den: np.ndarray, floor: float) -> np.ndarray:
    mask = np.abs(den) < floor
    out = num / np.where(mask, 1.0, den)
    out[mask] = 1.0
    return out


def _proper_subclusters(cluster: tuple[int, ...], have: set) -> list:
    subs = []
    for k in range(1, len(cluster)):
        subs.extend(s for s in combinations(cluster, k) if s in have)
    return subs


def _run_expansion(rho0, spec, realization, sequence, config, rng,
                   sample_times, clusters: ClusterSet,
                   samples=None) -> np.ndarray:
    times = np.asarray(sample_times, dtype=float)
    weights, vectors = decompose_density(rho0)
    if vectors.shape[1] != spec.dim:
        raise ValueError("initial state dimension does not match the register")
    if clusters.clusters and realization.n_spins:
        top = max(max(c) for c in clusters.clusters)
        if top >= realization.n_spins:
            raise ValueError(f"cluster index {top} out of range")
    states = _bath_state_matrix(realization.n_spins, config, rng, samples)
    m_total = states.shape[0]

    d_max = spec.dim * 2 ** max(clusters.max_size, 0)
    per_sample = max(1, len(times)) * d_max * d_max
    chunk_size = max(1, min(m_total, _CHUNK_ELEMENTS // per_sample))

    have = set(clusters.clusters)
    acc = np.zeros((len(times), spec.dim, spec.dim), dtype=complex)
    for start in range(0, m_total, chunk_size):
        chunk = states[start:start + chunk_size]
        rho_mf = _cluster_trajectories(spec, realization, (), chunk,
                                       sequence, times, weights, vectors)
        tilde: dict[tuple[int, ...], np.ndarray] = {}
        for cl in clusters.clusters:  # already sorted by size
            raw = _cluster_trajectories(spec, realization, cl, chunk,
                                        sequence, times, weights, vectors)
            den = rho_mf.copy()
            for sub in _proper_subclusters(cl, have):
                den *= tilde[sub]
            tilde[cl] = _guarded_divide(raw, den, config.ratio_floor)
        prod = rho_mf
        for cl in clusters.clusters:
            prod = prod * tilde[cl]
        acc += prod.sum(axis=1)
    return acc / m_total


def gcce0(rho0, spec: RegisterSpec, realization: BathRealization,
          sequence: PulseSequence, config: GcceConfig,
          rng: np.random.Generator | None, sample_times,
          *, samples: np.ndarray | None = None) -> np.ndarray:
    """Mean-field expansion: bath spins as static classical projections."""
    return _run_expansion(rho0, spec, realization, sequence, config, rng,
                          sample_times, ClusterSet(()), samples)


def gcce1(rho0, spec: RegisterSpec, realization: BathRealization,
          sequence: PulseSequence, config: GcceConfig,
          rng: np.random.Generator | None, sample_times,
          *, samples: np.ndarray | None = None) -> np.ndarray:
    """Order 1: one correction factor per impurity."""
    singles = ClusterSet(tuple((j,) for j in range(realization.n_spins)))
    return _run_expansion(rho0, spec, realization, sequence, config, rng,
                          sample_times, singles, samples)


def gcce2(rho0, spec: RegisterSpec, realization: BathRealization,
          sequence: PulseSequence, config: GcceConfig, clusters: ClusterSet,
          rng: np.random.Generator | None, sample_times,
          *, samples: np.ndarray | None = None) -> np.ndarray:
    """Order 2: all singletons plus the given pair corrections."""
    if any(len(c) != 2 for c in clusters.clusters):
        raise ValueError("order-2 cluster set must contain pairs only")
    full = tuple((j,) for j in range(realization.n_spins)) + clusters.clusters
    return _run_expansion(rho0, spec, realization, sequence, config, rng,
                          sample_times, ClusterSet(full), samples)


def gcce_general(rho0, spec: RegisterSpec, realization: BathRealization,
                 sequence: PulseSequence, config: GcceConfig,
                 clusters: ClusterSet, rng: np.random.Generator | None,
                 sample_times,
                 *, samples: np.ndarray | None = None) -> np.ndarray:
    """Arbitrary-order expansion over a subset-closed cluster collection."""
    if not clusters.is_subset_closed():
        raise ValueError("cluster set must be closed under taking subsets")
    return _run_expansion(rho0, spec, realization, sequence, config, rng,
                          sample_times, clusters, samples)
