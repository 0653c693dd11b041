"""Shared fixtures: registers, Hamiltonians, and small bath scenarios."""

import numpy as np
import pytest

from nvbath.bath import ShellSpec, sample_bath_realization
from nvbath.hamiltonian import register_hamiltonian
from nvbath.spinmodel import default_register, two_qubit_register


@pytest.fixture(scope="session")
def register2():
    return two_qubit_register()


@pytest.fixture(scope="session")
def register24():
    return default_register()


@pytest.fixture(scope="session")
def h2(register2):
    return register_hamiltonian(register2)


@pytest.fixture(scope="session")
def h24(register24):
    return register_hamiltonian(register24)


@pytest.fixture(scope="session")
def shell_9spin():
    return ShellSpec(30.0, 60.0, 65.0)


@pytest.fixture()
def bath3(register2, shell_9spin):
    """Small fixed 3-spin bath for cross-module identities."""
    rng = np.random.default_rng(2024)
    return sample_bath_realization(shell_9spin, register2, rng, count=3)


def rho_from_vector(vec):
    vec = np.asarray(vec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    return np.outer(vec, vec.conj())
