import numpy as np
import pytest

from spintransfer.chain import ChainSpec


def make_random_chain(rng: np.random.Generator, n_sites: int, long_range: bool = False) -> ChainSpec:
    """Random nearest-neighbour chain (optionally with one extra bond)."""
    couplings = np.zeros((n_sites, n_sites))
    for i in range(n_sites - 1):
        couplings[i, i + 1] = couplings[i + 1, i] = rng.uniform(0.5, 1.5)
    if long_range and n_sites >= 5:
        i, j = 0, n_sites // 2
        couplings[i, j] = couplings[j, i] = rng.uniform(0.2, 0.6)
    fields = rng.uniform(-0.5, 0.5, n_sites)
    return ChainSpec(n_sites, couplings, np.zeros((n_sites, n_sites)), fields)


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    eigenvalues = np.linalg.eigvalsh(rho_a - rho_b)
    return 0.5 * float(np.abs(eigenvalues).sum())


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    state = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return state / np.linalg.norm(state)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
