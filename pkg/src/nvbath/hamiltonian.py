"""Hamiltonian assembly for register, mean-field, and cluster problems.

Everything is returned in MHz (linear frequency); stored coupling tensors
are kHz and get scaled here.  Spin-spin terms contract the full 3x3 tensor,
S . T . I = sum_ab T_ab S_a I_b.

Mean-field ("order zero") problems replace every impurity by its classical
z projection: each sampled value +-1/2 shifts the register z operators
through the zz tensor components.  Cluster problems keep a chosen subset of
impurities fully quantum (appended as spin-1/2 factors after the register)
while the remaining impurities act on both the register and the cluster
members through the same classical shifts.  Constant (identity) terms such
as the bath Zeeman energy of the classical spins are dropped; they only
contribute global phases.
"""

from __future__ import annotations

import numpy as np

from .bath import BathRealization
from .spinmodel import RegisterSpec, spin_operators

#: Largest Hilbert-space dimension the dense builders accept.
MAX_DENSE_DIM = 4096

KHZ = 1e-3  # kHz -> MHz


def _check_dim(dims) -> int:
    dim = int(np.prod(dims))
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"Hilbert dimension {dim} exceeds {MAX_DENSE_DIM}")
    return dim


def _embed(op: np.ndarray, site: int, dims) -> np.ndarray:
    full = np.ones((1, 1), dtype=complex)
    for k, d in enumerate(dims):
        full = np.kron(full, op if k == site else np.eye(d))
    return full


def _register_terms(spec: RegisterSpec, dims) -> np.ndarray:
    """Register-only Hamiltonian embedded in a space with the given dims."""
    c = spec.constants
    dim = _check_dim(dims)
    h = np.zeros((dim, dim), dtype=complex)
    ops = [tuple(_embed(o, i, dims) for o in spec.site_operators(i))
           for i in range(len(spec.species))]

    sx, sy, sz = ops[0]
    h += c.d_gs * (sz @ sz) - c.g_e * c.b_field * sz
    if spec.nitrogen_zz_shift is not None:
        h += spec.nitrogen_zz_shift * sz

    ni = spec.nitrogen_index
    if ni is not None:
        _, _, inz = ops[ni]
        h += c.p_gs * (inz @ inz) - c.g_n * KHZ * c.b_field * inz
    for ci in spec.carbon_indices:
        h += -c.g_c * KHZ * c.b_field * ops[ci][2]

    for (i, j), tensor in spec.tensors.items():
        t = tensor.matrix * KHZ
        for a in range(3):
            for b in range(3):
                if t[a, b]:
                    h += t[a, b] * (ops[i][a] @ ops[j][b])
    return h


def register_hamiltonian(spec: RegisterSpec) -> np.ndarray:
    """Bare register Hamiltonian (MHz) on the register Hilbert space."""
    return _register_terms(spec, spec.dims)


def two_qubit_hamiltonian(constants=None, nv_carbon_tensor_khz=None) -> np.ndarray:
    """Reduced NV + 13C model (4x4, MHz), nitrogen frozen in m_N = +1.

    Written out directly rather than through the generic assembly:
    D S_z^2 - (g_e B - N_zz) S_z + S.M.I - g_C B I_z with the truncated NV
    operators.  Serves as an independent cross-check of the register builder.
    """
    from .spinmodel import M1_TENSOR_KHZ, PhysicalConstants, truncated_nv_operators

    c = constants or PhysicalConstants()
    m = np.asarray(M1_TENSOR_KHZ if nv_carbon_tensor_khz is None
                   else nv_carbon_tensor_khz, dtype=float) * KHZ
    s_ops = truncated_nv_operators()
    i_ops = spin_operators(0.5)
    eye2 = np.eye(2)
    sz, iz = s_ops[2], i_ops[2]
    h = c.d_gs * np.kron(sz @ sz, eye2)
    h -= (c.g_e * c.b_field - c.n_zz_frozen) * np.kron(sz, eye2)
    for a in range(3):
        for b in range(3):
            if m[a, b]:
                h += m[a, b] * np.kron(s_ops[a], i_ops[b])
    h -= c.g_c * KHZ * c.b_field * np.kron(eye2, iz)
    return h


def _register_z_diagonals(spec: RegisterSpec, dims) -> dict[str, np.ndarray]:
    """Diagonals of the embedded register z operators (all are diagonal)."""
    out = {"nv": np.real(np.diag(_embed(spec.site_operators(0)[2], 0, dims)))}
    ni = spec.nitrogen_index
    if ni is not None:
        out["nitrogen"] = np.real(np.diag(_embed(spec.site_operators(ni)[2], ni, dims)))
    out["carbons"] = [np.real(np.diag(_embed(spec.site_operators(ci)[2], ci, dims)))
                      for ci in spec.carbon_indices]
    return out


def meanfield_shift_vectors(spec: RegisterSpec,
                            realization: BathRealization) -> np.ndarray:
    """Per-impurity diagonal shift vectors, shape (n, register dim), MHz.

    Row j is the diagonal of the register operator multiplying the classical
    projection of impurity j:  K_zz[j] S_z + A_zz[j] I_Nz + sum_k F_zz[kj] I_kz.
    A sampled configuration eps (+-1/2 values) then shifts the register
    Hamiltonian by diag(eps @ shifts).
    """
    dims = spec.dims
    zdiag = _register_z_diagonals(spec, dims)
    n = realization.n_spins
    shifts = np.zeros((n, int(np.prod(dims))))
    if n == 0:
        return shifts
    shifts += realization.nv_coupling[:, 2, 2, None] * KHZ * zdiag["nv"]
    if spec.nitrogen_index is not None:
        shifts += realization.nitrogen_coupling[:, 2, 2, None] * KHZ * zdiag["nitrogen"]
    for slot, diag in enumerate(zdiag["carbons"]):
        shifts += realization.carbon_coupling[slot, :, 2, 2, None] * KHZ * diag
    return shifts


def meanfield_hamiltonian(spec: RegisterSpec, realization: BathRealization,
                          sample: np.ndarray) -> np.ndarray:
    """Register Hamiltonian with one classical bath configuration (MHz)."""
    sample = np.asarray(sample, dtype=float)
    if sample.shape != (realization.n_spins,):
        raise ValueError("sample length must match the bath size")
    h = register_hamiltonian(spec)
    if realization.n_spins:
        h = h + np.diag(sample @ meanfield_shift_vectors(spec, realization))
    return h


def cluster_hamiltonian(spec: RegisterSpec, realization: BathRealization,
                        cluster: tuple[int, ...],
                        sample: np.ndarray) -> np.ndarray:
    """Register + quantum cluster Hamiltonian (MHz).

    ``cluster`` lists impurity indices that are kept quantum, appended to
    the register factors in the given order.  ``sample`` supplies classical
    projections for every impurity; only the entries outside the cluster
    are used (as mean-field shifts on the register and on cluster members).
    """
    cluster = tuple(int(i) for i in cluster)
    n = realization.n_spins
    if len(set(cluster)) != len(cluster):
        raise ValueError(f"duplicate impurity in cluster {cluster}")
    if any(not 0 <= i < n for i in cluster):
        raise ValueError(f"cluster {cluster} out of range for {n} impurities")
    sample = np.asarray(sample, dtype=float)
    if sample.shape != (n,):
        raise ValueError("sample length must match the bath size")

    c = spec.constants
    n_reg = len(spec.species)
    dims = spec.dims + (2,) * len(cluster)
    h = _register_terms(spec, dims)

    reg_ops = [tuple(_embed(o, i, dims) for o in spec.site_operators(i))
               for i in range(n_reg)]
    half_ops = spin_operators(0.5)
    clu_ops = [tuple(_embed(o, n_reg + slot, dims) for o in half_ops)
               for slot in range(len(cluster))]

    def add_tensor(t_khz, ops_a, ops_b):
        nonlocal h
        t = np.asarray(t_khz) * KHZ
        for a in range(3):
            for b in range(3):
                if t[a, b]:
                    h += t[a, b] * (ops_a[a] @ ops_b[b])

    outside = [j for j in range(n) if j not in cluster]
    for slot, j in enumerate(cluster):
        ez = clu_ops[slot][2]
        h += -c.g_e * c.b_field * ez
        add_tensor(realization.nv_coupling[j], reg_ops[0], clu_ops[slot])
        ni = spec.nitrogen_index
        if ni is not None:
            add_tensor(realization.nitrogen_coupling[j], reg_ops[ni], clu_ops[slot])
        for cslot, ci in enumerate(spec.carbon_indices):
            add_tensor(realization.carbon_coupling[cslot, j], reg_ops[ci], clu_ops[slot])
        # mean-field shift on the cluster member from the impurities left out
        if outside:
            zz = realization.pair_coupling[j, outside, 2, 2]
            h += float(np.dot(zz, sample[outside])) * KHZ * ez
    for s1 in range(len(cluster)):
        for s2 in range(s1 + 1, len(cluster)):
            add_tensor(realization.pair_coupling[cluster[s1], cluster[s2]],
                       clu_ops[s1], clu_ops[s2])

    if outside:
        shifts = meanfield_shift_vectors(spec, realization)[outside]
        reg_diag = sample[outside] @ shifts
        full_diag = np.kron(reg_diag, np.ones(2 ** len(cluster)))
        h += np.diag(full_diag)
    return h


def cluster_shift_diagonals(spec: RegisterSpec, realization: BathRealization,
                            cluster: tuple[int, ...],
                            samples: np.ndarray) -> np.ndarray:
    """Sample-dependent diagonal part of the cluster Hamiltonian, batched.

    For each row of ``samples`` (shape (S, n)), returns the real diagonal
    (S, dim) such that cluster_hamiltonian(spec, realization, cluster, row)
    equals the zero-sample Hamiltonian plus diag(row of the result).  The
    classical projections enter only through zz couplings, so the
    dependence is exactly diagonal and linear.
    """
    cluster = tuple(int(i) for i in cluster)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n = realization.n_spins
    if samples.shape[1] != n:
        raise ValueError("sample width must match the bath size")
    n_reg = len(spec.species)
    dims = spec.dims + (2,) * len(cluster)
    dim = _check_dim(dims)
    block = 2 ** len(cluster)
    out = np.zeros((samples.shape[0], dim))
    outside = [j for j in range(n) if j not in cluster]
    if not outside:
        return out
    reg_shifts = meanfield_shift_vectors(spec, realization)[outside]
    out += np.repeat(samples[:, outside] @ reg_shifts, block, axis=1)
    half_z = spin_operators(0.5)[2]
    for slot, j in enumerate(cluster):
        ez_diag = np.real(np.diag(_embed(half_z, n_reg + slot, dims)))
        coeff = samples[:, outside] @ realization.pair_coupling[j, outside, 2, 2]
        out += (coeff * KHZ)[:, None] * ez_diag[None, :]
    return out
