"""Random P1 electron-spin environments around the register.

Impurity spins are placed uniformly by volume inside a spherical shell
centred on the NV.  Every placed spin gets point-dipole coupling tensors to
the NV electron, to the host nitrogen nucleus, to each register 13C, and to
every other impurity.  All tensors are stored in kHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spinmodel import PhysicalConstants, RegisterSpec, SpinKind, dipole_matrices


@dataclass(frozen=True)
class ShellSpec:
    """Spherical shell geometry (nm) and impurity density (ppb of C sites)."""

    r_min_nm: float
    r_max_nm: float
    density_ppb: float

    def __post_init__(self) -> None:
        if not (0.0 < self.r_min_nm < self.r_max_nm):
            raise ValueError(
                f"need 0 < r_min < r_max, got {self.r_min_nm}, {self.r_max_nm}")
        if self.density_ppb < 0.0:
            raise ValueError("density must be non-negative")

    @property
    def volume_cm3(self) -> float:
        v_nm3 = 4.0 * math.pi / 3.0 * (self.r_max_nm ** 3 - self.r_min_nm ** 3)
        return v_nm3 * 1e-21


def expected_spin_count(shell: ShellSpec, constants: PhysicalConstants) -> float:
    """Mean number of impurities in the shell (before rounding)."""
    sites = constants.carbon_density * shell.volume_cm3
    return shell.density_ppb * 1e-9 * sites


def spin_count(shell: ShellSpec, constants: PhysicalConstants) -> int:
    """Deterministic impurity count: the rounded shell expectation."""
    return int(math.floor(expected_spin_count(shell, constants) + 0.5))


@dataclass(eq=False)
class BathRealization:
    """Positions and coupling tensors of one sampled environment.

    Shapes (n = number of impurities, nc = number of register carbons):
        positions         (n, 3)   nm
        nv_coupling       (n, 3, 3)   impurity to NV electron, kHz
        nitrogen_coupling (n, 3, 3)   impurity to host nitrogen, kHz
        carbon_coupling   (nc, n, 3, 3) impurity to each register 13C, kHz
        pair_coupling     (n, n, 3, 3) impurity-impurity, kHz; symmetric in
                          the first two axes, zero on the diagonal
    """

    positions: np.ndarray
    nv_coupling: np.ndarray
    nitrogen_coupling: np.ndarray
    carbon_coupling: np.ndarray
    pair_coupling: np.ndarray

    @property
    def n_spins(self) -> int:
        return int(self.positions.shape[0])


def realization_from_positions(register: RegisterSpec,
                               positions_nm: np.ndarray) -> BathRealization:
    """Build all coupling tensors for given impurity positions (nm)."""
    pos = np.asarray(positions_nm, dtype=float).reshape(-1, 3)
    n = pos.shape[0]
    c = register.constants
    gamma_e = c.gamma_rad_per_s_per_t(SpinKind.P1_ELECTRON)

    nv_pos = np.asarray(register.species[0].position)
    if n:
        k = dipole_matrices(pos - nv_pos, gamma_e, gamma_e)
    else:
        k = np.zeros((0, 3, 3))

    a = np.zeros((n, 3, 3))
    ni = register.nitrogen_index
    if ni is not None and n:
        gamma_n = c.gamma_rad_per_s_per_t(SpinKind.NITROGEN14)
        a = dipole_matrices(pos - np.asarray(register.species[ni].position),
                            gamma_n, gamma_e)

    carbons = register.carbon_indices
    f = np.zeros((len(carbons), n, 3, 3))
    gamma_c = c.gamma_rad_per_s_per_t(SpinKind.CARBON13)
    for slot, ci in enumerate(carbons):
        if n:
            f[slot] = dipole_matrices(
                pos - np.asarray(register.species[ci].position),
                gamma_c, gamma_e)

    g = np.zeros((n, n, 3, 3))
    if n > 1:
        iu, ju = np.triu_indices(n, k=1)
        tensors = dipole_matrices(pos[iu] - pos[ju], gamma_e, gamma_e)
        g[iu, ju] = tensors
        g[ju, iu] = tensors
    return BathRealization(pos, k, a, f, g)


def sample_positions(shell: ShellSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points uniform by volume in the shell: inverse-CDF radius in r^3."""
    u = rng.random(n)
    r = (shell.r_min_nm ** 3
         + u * (shell.r_max_nm ** 3 - shell.r_min_nm ** 3)) ** (1.0 / 3.0)
    cos_theta = 1.0 - 2.0 * rng.random(n)
    sin_theta = np.sqrt(np.clip(1.0 - cos_theta ** 2, 0.0, 1.0))
    phi = 2.0 * math.pi * rng.random(n)
    direction = np.stack([sin_theta * np.cos(phi),
                          sin_theta * np.sin(phi),
                          cos_theta], axis=-1)
    return r[:, None] * direction


def sample_bath_realization(shell: ShellSpec, register: RegisterSpec,
                            rng: np.random.Generator, *,
                            count: int | None = None,
                            poisson: bool = False) -> BathRealization:
    """Sample one environment.

    The impurity count defaults to the deterministic rounded expectation;
    ``poisson=True`` draws it from the Poisson distribution instead, and an
    explicit ``count`` overrides both.
    """
    if count is None:
        if poisson:
            count = int(rng.poisson(expected_spin_count(shell, register.constants)))
        else:
            count = spin_count(shell, register.constants)
    positions = sample_positions(shell, count, rng)
    return realization_from_positions(register, positions)


def sample_bath_state(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random classical impurity configuration: n values from {-1/2, +1/2}."""
    return rng.integers(0, 2, size=n) - 0.5


def enumerate_bath_states(n: int) -> np.ndarray:
    """All 2^n classical configurations, shape (2^n, n), values +-1/2.

    Row s assigns spin j the value +1/2 when bit j of s is clear.  The
    ordering is fixed so enumerated runs are reproducible.
    """
    if n < 0:
        raise ValueError("negative bath size")
    if n > 20:
        raise ValueError(f"refusing to enumerate 2^{n} bath states")
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
    return 0.5 - bits.astype(float)
