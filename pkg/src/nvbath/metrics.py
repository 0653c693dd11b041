"""Fidelities, entanglement measures, and spin expectation values."""

from __future__ import annotations

import math

import numpy as np

from .spinmodel import RegisterSpec


def overlap_ratio(rho_reference: np.ndarray, rho_state: np.ndarray) -> float:
    """tr(rho_ref^dag rho_state) / tr(rho_ref^dag rho_ref)."""
    ref = np.asarray(rho_reference, dtype=complex)
    num = np.trace(ref.conj().T @ np.asarray(rho_state, dtype=complex))
    den = float(np.real(np.trace(ref.conj().T @ ref)))
    if den <= 0.0:
        raise ValueError("reference state has zero norm")
    if abs(np.imag(num)) > 1e-9 * max(den, 1.0):
        raise ValueError("overlap has a non-negligible imaginary part")
    return float(np.real(num) / den)


def process_fidelity(rho_prepared: np.ndarray, rho_target: np.ndarray) -> float:
    """Overlap of the dissipation-free post-sequence state with the target."""
    return overlap_ratio(rho_target, rho_prepared)


def bath_fidelity(rho_dissipative: np.ndarray, rho_unitary: np.ndarray) -> float:
    """Overlap of the bath-averaged state with the bath-free state."""
    return overlap_ratio(rho_unitary, rho_dissipative)


def full_fidelity(f_process: float, f_bath: float) -> float:
    return f_process * f_bath


def partial_transpose(rho: np.ndarray, dims: tuple[int, ...],
                      sites: tuple[int, ...]) -> np.ndarray:
    """Transpose the listed tensor factors of a multi-site density matrix."""
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    dim = int(np.prod(dims))
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"shape {rho.shape} does not match dims {dims}")
    sites = tuple(sorted(set(int(s) for s in sites)))
    if any(s < 0 or s >= n for s in sites):
        raise ValueError(f"site out of range for {n} factors")
    t = rho.reshape(dims + dims)
    for s in sites:
        t = np.swapaxes(t, s, s + n)
    return t.reshape(dim, dim)


def log_negativity(rho: np.ndarray, dims: tuple[int, ...],
                   sites: tuple[int, ...]) -> float:
    """log2 of the trace norm of the partial transpose over ``sites``."""
    pt = partial_transpose(rho, dims, sites)
    trace_norm = float(np.sum(np.abs(np.linalg.eigvalsh(pt))))
    return max(0.0, math.log2(trace_norm))


_PAULI_INDEX = {"x": 0, "y": 1, "z": 2}


def expectation(rho: np.ndarray, register: RegisterSpec, site: int,
                component: str) -> float:
    """tr(rho O) for the site-embedded spin operator O."""
    if component not in _PAULI_INDEX:
        raise ValueError(f"component must be one of x, y, z, got {component!r}")
    dims = register.dims
    if site < 0 or site >= len(dims):
        raise ValueError(f"site {site} out of range")
    op = register.site_operators(site)[_PAULI_INDEX[component]]
    full = op
    left = int(np.prod(dims[:site])) if site else 1
    right = int(np.prod(dims[site + 1:])) if site + 1 < len(dims) else 1
    if left > 1:
        full = np.kron(np.eye(left), full)
    if right > 1:
        full = np.kron(full, np.eye(right))
    val = np.trace(np.asarray(rho, dtype=complex) @ full)
    if abs(val.imag) > 1e-6:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3g}")
    return float(val.real)


def assert_density_matrix(rho: np.ndarray, atol: float = 1e-8) -> None:
    """Raise unless rho is Hermitian, unit-trace, and positive semidefinite."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > atol:
        raise ValueError(f"trace {tr:.6g} differs from 1")
    w = np.linalg.eigvalsh(rho)
    if w.min() < -atol:
        raise ValueError(f"negative eigenvalue {w.min():.3g}")


def trace_drift(rho: np.ndarray) -> float:
    """|tr(rho) - 1|, reported as a diagnostic and never corrected."""
    return float(abs(np.trace(np.asarray(rho)) - 1.0))
