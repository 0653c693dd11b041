"""Brute-force register (x) bath evolution, the benchmark ground truth.

Assembles the full quantum Hamiltonian over the register and every bath
spin with its own embedding code, deliberately sharing nothing with the
mean-field/cluster builders it is used to check.  The completely mixed
bath is handled exactly by averaging over bath basis-state products (the
initial state is block diagonal in the bath index, so linearity makes the
average exact).  One eigendecomposition per realization is reused across
all bath states, pulse segments, and sample times.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from .bath import BathRealization, enumerate_bath_states
from .evolution import PulseSequence, decompose_density, evolve_state_batch
from .metrics import bath_fidelity
from .spinmodel import RegisterSpec, spin_operators

#: dimension at which the dense path is refused outright
HARD_DIM_LIMIT = 12288
#: dimension above which a slow-path warning is emitted
WARN_DIM_LIMIT = 4096

_KHZ = 1e-3


def _kron_embed(ops: dict[int, np.ndarray], dims: tuple[int, ...]) -> sparse.coo_matrix:
    """Sparse kron product placing ops[site] at each site, identity elsewhere.

    Sparsity matters: the full space reaches 12288 dimensions and a term
    touches only a few sites, so the dense product would dominate assembly.
    """
    out = sparse.identity(1, dtype=complex, format="coo")
    for site, d in enumerate(dims):
        op = ops.get(site)
        factor = sparse.identity(d, dtype=complex, format="coo") \
            if op is None else sparse.coo_matrix(op)
        out = sparse.kron(out, factor, format="coo")
    return out


def full_hamiltonian(spec: RegisterSpec, realization: BathRealization) -> np.ndarray:
    """Register + fully quantum bath Hamiltonian (MHz)."""
    c = spec.constants
    n_reg = len(spec.species)
    n = realization.n_spins
    dims = spec.dims + (2,) * n
    dim = int(np.prod(dims))
    if dim > HARD_DIM_LIMIT:
        raise ValueError(f"full dimension {dim} exceeds {HARD_DIM_LIMIT}")
    if dim > WARN_DIM_LIMIT:
        warnings.warn(f"full dimension {dim}: slow dense path", RuntimeWarning,
                      stacklevel=2)

    site_ops = [spec.site_operators(i) for i in range(n_reg)]
    site_ops += [spin_operators(0.5)] * n
    terms: list[sparse.coo_matrix] = []

    def add(coeff: float, placements: dict[int, np.ndarray]) -> None:
        if coeff:
            terms.append(coeff * _kron_embed(placements, dims))

    def add_tensor(t_khz: np.ndarray, i: int, j: int) -> None:
        t = np.asarray(t_khz, dtype=float)
        for a in range(3):
            for b in range(3):
                add(t[a, b] * _KHZ, {i: site_ops[i][a], j: site_ops[j][b]})

    sz = site_ops[0][2]
    add(c.d_gs, {0: sz @ sz})
    add(-c.g_e * c.b_field, {0: sz})
    if spec.nitrogen_zz_shift is not None:
        add(spec.nitrogen_zz_shift, {0: sz})
    ni = spec.nitrogen_index
    if ni is not None:
        inz = site_ops[ni][2]
        add(c.p_gs, {ni: inz @ inz})
        add(-c.g_n * _KHZ * c.b_field, {ni: inz})
    for ci in spec.carbon_indices:
        add(-c.g_c * _KHZ * c.b_field, {ci: site_ops[ci][2]})
    for (i, j), tensor in spec.tensors.items():
        add_tensor(tensor.matrix, i, j)

    for j in range(n):
        site = n_reg + j
        add(-c.g_e * c.b_field, {site: site_ops[site][2]})
        add_tensor(realization.nv_coupling[j], 0, site)
        if ni is not None:
            add_tensor(realization.nitrogen_coupling[j], ni, site)
        for slot, ci in enumerate(spec.carbon_indices):
            add_tensor(realization.carbon_coupling[slot, j], ci, site)
        for k in range(j + 1, n):
            add_tensor(realization.pair_coupling[j, k], site, n_reg + k)

    data = np.concatenate([t.data for t in terms])
    rows = np.concatenate([t.row for t in terms])
    cols = np.concatenate([t.col for t in terms])
    return sparse.coo_matrix((data, (rows, cols)), shape=(dim, dim)).toarray()


def exact_evolve(rho0: np.ndarray, spec: RegisterSpec,
                 realization: BathRealization, sequence: PulseSequence,
                 sample_times, *, mode: str = "enumerate",
                 n_samples: int | None = None,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Register-reduced trajectory (T, d_reg, d_reg) under the full model.

    The bath starts completely mixed: uniformly over all 2^N basis products
    (``mode="enumerate"``) or over ``n_samples`` sampled products
    (``mode="sample"``).
    """
    n = realization.n_spins
    if n > 12:
        raise ValueError(f"bath of {n} spins exceeds the 12-spin oracle limit")
    times = np.asarray(sample_times, dtype=float)
    weights, vectors = decompose_density(rho0)
    d_reg = spec.dim
    if vectors.shape[1] != d_reg:
        raise ValueError("initial state dimension does not match the register")

    if mode == "enumerate":
        bath_states = enumerate_bath_states(n) if n else np.zeros((1, 0))
    elif mode == "sample":
        if n_samples is None or rng is None:
            raise ValueError("sample mode needs n_samples and rng")
        bath_states = rng.integers(0, 2, size=(n_samples, n)) - 0.5
    else:
        raise ValueError(f"unknown mode {mode!r}")
    n_states = bath_states.shape[0]

    h = full_hamiltonian(spec, realization)
    dim = h.shape[0]
    block = dim // d_reg
    lam, vec = sla.eigh(h, driver="evr")

    bits = (0.5 - bath_states).astype(int)
    b_index = bits @ (2 ** np.arange(n - 1, -1, -1)) if n else np.zeros(1, int)

    r_n = len(weights)
    chunk_cols = max(1, (2 ** 24) // (max(1, len(times)) * dim))
    chunk_states = max(1, chunk_cols // r_n)
    acc = np.zeros((len(times), d_reg, d_reg), dtype=complex)
    reg_idx = np.arange(d_reg) * block
    for start in range(0, n_states, chunk_states):
        b_chunk = b_index[start:start + chunk_states]
        s_n = len(b_chunk)
        psi0 = np.zeros((s_n, r_n, dim), dtype=complex)
        psi0[np.arange(s_n)[:, None, None], np.arange(r_n)[None, :, None],
             b_chunk[:, None, None] + reg_idx[None, None, :]] = vectors[None]
        states = evolve_state_batch(h[None], sequence,
                                    psi0.reshape(1, s_n * r_n, dim), times,
                                    eig=(lam, vec))
        states = states.reshape(len(times), s_n, r_n, d_reg, block)
        acc += np.einsum("r,tsrak,tsrbk->tab", weights, states, states.conj(), optimize=True)
    return acc / n_states


@dataclass(frozen=True)
class BenchmarkReport:
    """Deviation of an approximate trajectory from the exact one."""

    relative_error: float
    f_approx: float
    f_exact: float
    max_element_deviation: float
    worst_element: tuple[int, int]

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return (f"rel err {self.relative_error:.3e} "
                f"(F {self.f_approx:.6f} vs {self.f_exact:.6f}), "
                f"max |drho| {self.max_element_deviation:.3e} "
                f"at {self.worst_element}")


def benchmark_error(approx_traj: np.ndarray, exact_traj: np.ndarray,
                    reference_traj: np.ndarray,
                    time_index: int = -1) -> BenchmarkReport:
    """Compare bath fidelities of approximate and exact trajectories.

    All three trajectories must share sample times; ``reference_traj`` is
    the bath-free (unitary) evolution both fidelities are measured against.
    """
    approx = np.asarray(approx_traj)
    exact = np.asarray(exact_traj)
    ref = np.asarray(reference_traj)
    if approx.shape != exact.shape or approx.shape != ref.shape:
        raise ValueError("trajectory shapes do not match")
    f_a = bath_fidelity(approx[time_index], ref[time_index])
    f_e = bath_fidelity(exact[time_index], ref[time_index])
    dev = np.abs(approx[time_index] - exact[time_index])
    worst = np.unravel_index(int(np.argmax(dev)), dev.shape)
    return BenchmarkReport(relative_error=abs(f_a - f_e) / abs(f_e),
                           f_approx=f_a, f_exact=f_e,
                           max_element_deviation=float(dev.max()),
                           worst_element=(int(worst[0]), int(worst[1])))
