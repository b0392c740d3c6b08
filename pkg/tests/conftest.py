import numpy as np
import pytest

from meanforce.bath import OhmicBath
from meanforce.operators import (
    bohr_decompose,
    pauli_coupling,
    spectral_decompose,
    tls_hamiltonian,
)

OMEGA0 = 1.0
BETA = 1.0
X = Z = 1.0 / np.sqrt(2.0)


@pytest.fixture(scope="session")
def bath():
    return OhmicBath(beta=BETA, coupling=1.0, cutoff=50.0)


@pytest.fixture(scope="session")
def h0():
    return tls_hamiltonian(OMEGA0)


@pytest.fixture(scope="session")
def tls_decomposition(h0):
    return spectral_decompose(h0)


@pytest.fixture(scope="session")
def jumps(tls_decomposition):
    return [bohr_decompose(tls_decomposition, pauli_coupling(X, 0.0, Z))]


@pytest.fixture(scope="session")
def rho0():
    return np.array([[0.6, 0.1], [0.1, 0.4]], dtype=complex)
