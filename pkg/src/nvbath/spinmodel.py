"""Spin species, physical constants, and coupling tensors for an NV register.

Default units, used consistently across the package:

    distance        nm
    magnetic field  G
    energy/coupling MHz for Hamiltonian terms, kHz for stored tensors
    gyromagnetic    rad s^-1 T^-1 (only inside dipole-tensor evaluation)
    time            us

The register is an NV- electron spin (restricted to the m_s = {0, -1}
doublet unless requested otherwise), the host nitrogen nuclear spin (I = 1)
and up to two nearby 13C nuclear spins (I = 1/2).  Substitutional nitrogen
defects in the surrounding crystal contribute electron spins 1/2; their
couplings are generated in :mod:`nvbath.bath`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

HBAR = 1.054571817e-34          # J s
MU0_OVER_4PI = 1e-7             # T^2 m^3 / J
DIAMOND_LATTICE_NM = 0.3567     # conventional cell edge, 8 C atoms per cell

#: Below this separation the point-dipole form is meaningless (contact terms
#: dominate) and tensor generation refuses to proceed.
MIN_DIPOLE_DISTANCE_NM = 0.1


class SpinKind(enum.Enum):
    """What a spin is, which fixes its gyromagnetic ratio and Zeeman term."""

    NV_ELECTRON = "nv_electron"
    P1_ELECTRON = "p1_electron"
    CARBON13 = "carbon13"
    NITROGEN14 = "nitrogen14"


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants of the NV / P1 system.

    Fields (units):
        d_gs          NV ground-state zero-field splitting, MHz
        g_e           electron Zeeman coefficient, MHz/G (negative)
        p_gs          nitrogen quadrupole splitting, MHz
        g_n           14N nuclear Zeeman coefficient, kHz/G
        g_c           13C nuclear Zeeman coefficient, kHz/G
        gamma_e       electron gyromagnetic ratio, rad s^-1 T^-1
        gamma_c       13C gyromagnetic ratio, rad s^-1 T^-1
        b_field       applied axial field, G
        n_par         axial NV-14N hyperfine component, MHz
        n_perp        transverse NV-14N hyperfine component, MHz
        n_zz_frozen   effective NV-14N zz coupling with the nitrogen frozen
                      in m_N = +1, MHz
        carbon_density  carbon site density of diamond, cm^-3
    """

    d_gs: float = 2880.0
    g_e: float = -2.806
    p_gs: float = -5.08
    g_n: float = 0.308
    g_c: float = 1.071
    gamma_e: float = -1.761e11
    gamma_c: float = 6.728e7
    b_field: float = 148.0
    n_par: float = -1.73
    n_perp: float = -2.16
    n_zz_frozen: float = -1.76
    # 8 atoms per cubic cell; the cell edge gives 1.7627e23 cm^-3, which
    # reproduces the 518-spin benchmark count for a 30-250 nm shell at 45 ppb.
    carbon_density: float = 8.0 / (DIAMOND_LATTICE_NM * 1e-7) ** 3

    def gamma_rad_per_s_per_t(self, kind: SpinKind) -> float:
        """Gyromagnetic ratio for a spin kind in rad s^-1 T^-1."""
        if kind in (SpinKind.NV_ELECTRON, SpinKind.P1_ELECTRON):
            return self.gamma_e
        if kind is SpinKind.CARBON13:
            return self.gamma_c
        if kind is SpinKind.NITROGEN14:
            # g_n is stored in kHz/G; kHz/G * 1e7 = Hz/T
            return self.g_n * 1e7 * 2.0 * math.pi
        raise ValueError(f"unknown spin kind {kind!r}")


@dataclass(frozen=True)
class SpinSpecies:
    """One spin of the register: kind, spin quantum number, position (nm)."""

    kind: SpinKind
    spin: float
    position: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.spin not in (0.5, 1.0):
            raise ValueError(f"unsupported spin quantum number {self.spin}")


class TensorSource(enum.Enum):
    POINT_DIPOLE = "point_dipole"
    TABLE_CONSTANT = "table_constant"


@dataclass(frozen=True, eq=False)
class CouplingTensor:
    """A 3x3 bilinear coupling matrix in kHz with a provenance tag."""

    matrix: np.ndarray
    source: TensorSource

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float).copy()
        if m.shape != (3, 3):
            raise ValueError(f"coupling tensor must be 3x3, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def zz(self) -> float:
        return float(self.matrix[2, 2])


def spin_operators(s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Sx, Sy, Sz) matrices for spin s in the descending-m basis.

    Only s = 1/2 and s = 1 occur in this problem; anything else is rejected.
    """
    if s not in (0.5, 1.0):
        raise ValueError(f"unsupported spin quantum number {s}")
    dim = int(round(2 * s + 1))
    m = s - np.arange(dim)
    sz = np.diag(m).astype(complex)
    # ladder operator: <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    raise_elem = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((dim, dim), dtype=complex)
    sp[np.arange(dim - 1), np.arange(1, dim)] = raise_elem
    sx = 0.5 * (sp + sp.conj().T)
    sy = -0.5j * (sp - sp.conj().T)
    return sx, sy, sz


def truncated_nv_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """NV spin-1 operators restricted to the {m_s = 0, m_s = -1} doublet.

    Basis order is (|0>, |-1>), so Sz = diag(0, -1) and the transverse
    operators are the Pauli matrices scaled by 1/sqrt(2).
    """
    sx = np.array([[0, 1], [1, 0]], dtype=complex) / math.sqrt(2)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex) / math.sqrt(2)
    sz = np.array([[0, 0], [0, -1]], dtype=complex)
    return sx, sy, sz


def dipole_matrices(displacements_nm: np.ndarray, gamma_a: float,
                    gamma_b: float) -> np.ndarray:
    """Vectorized point-dipole tensors in kHz for displacement vectors (nm).

    T_ij = -(hbar mu0 / 4 pi) (gamma_a gamma_b / r^3) (3 n_i n_j - delta_ij),
    converted from rad/s to kHz (linear frequency).  Accepts any leading
    shape; the last axis must be the Cartesian components.
    """
    d = np.asarray(displacements_nm, dtype=float)
    if d.shape[-1] != 3:
        raise ValueError("displacement vectors must have 3 components")
    r = np.linalg.norm(d, axis=-1)
    if np.any(r <= MIN_DIPOLE_DISTANCE_NM):
        raise ValueError(
            f"dipole tensor requested below {MIN_DIPOLE_DISTANCE_NM} nm "
            f"separation (min {r.min():.4g} nm)")
    n = d / r[..., None]
    prefactor_rad = MU0_OVER_4PI * HBAR * gamma_a * gamma_b / (r * 1e-9) ** 3
    prefactor_khz = prefactor_rad / (2.0 * math.pi) / 1e3
    angular = 3.0 * n[..., :, None] * n[..., None, :] - np.eye(3)
    return -prefactor_khz[..., None, None] * angular


def dipole_tensor(displacement_nm, gamma_a: float, gamma_b: float) -> CouplingTensor:
    """Point-dipole coupling tensor (kHz) for a single displacement (nm)."""
    matrix = dipole_matrices(np.asarray(displacement_nm, dtype=float),
                             gamma_a, gamma_b)
    return CouplingTensor(matrix, TensorSource.POINT_DIPOLE)


@dataclass(frozen=True)
class RegisterSpec:
    """The central spin register: species, pair couplings, conventions.

    Tensor basis order for the composite Hilbert space follows the order of
    ``species`` (NV first); bath/cluster spins are appended after the
    register factors.  ``tensors`` maps ordered index pairs (i, j), i < j,
    to kHz coupling tensors; every register pair must have an entry.

    ``nitrogen_zz_shift`` (MHz), when set, adds that value times S_z to the
    NV term — the effective field of a host nitrogen frozen in m_N = +1,
    used by the reduced NV + 13C two-qubit model.
    """

    species: tuple[SpinSpecies, ...]
    tensors: Mapping[tuple[int, int], CouplingTensor]
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    nv_truncated: bool = True
    nitrogen_zz_shift: float | None = None

    def __post_init__(self) -> None:
        kinds = [sp.kind for sp in self.species]
        if kinds.count(SpinKind.NV_ELECTRON) != 1 or kinds[0] is not SpinKind.NV_ELECTRON:
            raise ValueError("register must contain exactly one NV electron, first")
        n = len(self.species)
        for (i, j) in self.tensors:
            if not (0 <= i < j < n):
                raise ValueError(f"tensor key {(i, j)} out of range or unordered")
        for i in range(n):
            for j in range(i + 1, n):
                if (i, j) not in self.tensors:
                    raise ValueError(f"missing coupling tensor for pair {(i, j)}")

    @property
    def dims(self) -> tuple[int, ...]:
        out = []
        for idx, sp in enumerate(self.species):
            if idx == 0 and self.nv_truncated:
                out.append(2)
            else:
                out.append(int(round(2 * sp.spin + 1)))
        return tuple(out)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def carbon_indices(self) -> tuple[int, ...]:
        return tuple(i for i, sp in enumerate(self.species)
                     if sp.kind is SpinKind.CARBON13)

    @property
    def nitrogen_index(self) -> int | None:
        for i, sp in enumerate(self.species):
            if sp.kind is SpinKind.NITROGEN14:
                return i
        return None

    def site_operators(self, index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Sx, Sy, Sz) for one register site in its own factor space."""
        if index == 0 and self.nv_truncated:
            return truncated_nv_operators()
        return spin_operators(self.species[index].spin)


# Fixed register geometry (nm).  The two 13C sites come from the reference
# configuration; the nitrogen nucleus sits one bond length behind the
# vacancy along the symmetry axis.
NV_POSITION = (0.0, 0.0, 0.0)
C1_POSITION = (0.87, 0.0, 0.19)
C2_POSITION = (0.56, 0.77, 0.31)
N_POSITION = (0.0, 0.0, -0.154)

# NV-13C hyperfine tensors of the reference configuration, kHz.  These are
# tabulated values, loaded verbatim (they are not regenerated from the
# point-dipole formula).
M1_TENSOR_KHZ = np.array([
    [310.8, 0.0, 101.4],
    [0.0, 166.2, 0.0],
    [101.4, 0.0, -144.6],
])
M2_TENSOR_KHZ = np.array([
    [-7.381, 152.4, -61.2],
    [152.4, 90.16, -84.23],
    [-61.2, -84.23, -84.26],
])


def _table(matrix_khz) -> CouplingTensor:
    return CouplingTensor(np.asarray(matrix_khz, float), TensorSource.TABLE_CONSTANT)


def default_register(constants: PhysicalConstants | None = None) -> RegisterSpec:
    """Full four-spin register: NV, two 13C, host nitrogen."""
    c = constants or PhysicalConstants()
    nv = SpinSpecies(SpinKind.NV_ELECTRON, 1.0, NV_POSITION)
    c1 = SpinSpecies(SpinKind.CARBON13, 0.5, C1_POSITION)
    c2 = SpinSpecies(SpinKind.CARBON13, 0.5, C2_POSITION)
    nit = SpinSpecies(SpinKind.NITROGEN14, 1.0, N_POSITION)
    gamma_c = c.gamma_rad_per_s_per_t(SpinKind.CARBON13)
    gamma_n = c.gamma_rad_per_s_per_t(SpinKind.NITROGEN14)
    d = np.subtract
    # NV-nitrogen coupling in kHz from the MHz hyperfine components
    n_tensor = np.diag([c.n_perp, c.n_perp, c.n_par]) * 1e3
    tensors = {
        (0, 1): _table(M1_TENSOR_KHZ),
        (0, 2): _table(M2_TENSOR_KHZ),
        (0, 3): _table(n_tensor),
        (1, 2): dipole_tensor(d(C2_POSITION, C1_POSITION), gamma_c, gamma_c),
        (1, 3): dipole_tensor(d(C1_POSITION, N_POSITION), gamma_c, gamma_n),
        (2, 3): dipole_tensor(d(C2_POSITION, N_POSITION), gamma_c, gamma_n),
    }
    return RegisterSpec(species=(nv, c1, c2, nit), tensors=tensors, constants=c)


def two_qubit_register(constants: PhysicalConstants | None = None) -> RegisterSpec:
    """Reduced NV + first-13C register with the nitrogen frozen in m_N = +1."""
    c = constants or PhysicalConstants()
    nv = SpinSpecies(SpinKind.NV_ELECTRON, 1.0, NV_POSITION)
    c1 = SpinSpecies(SpinKind.CARBON13, 0.5, C1_POSITION)
    tensors = {(0, 1): _table(M1_TENSOR_KHZ)}
    return RegisterSpec(species=(nv, c1), tensors=tensors, constants=c,
                        nitrogen_zz_shift=c.n_zz_frozen)
