import numpy as np
import pytest

from conftest import make_random_chain, random_state, trace_distance
from spintransfer.chain import ChainSpec, ChannelInit
from spintransfer.dynamics import amplitudes_at, dynamics_for, propagator_at
from spintransfer.errors import CapacityError, ParameterError
from spintransfer.oracle import (
    FullState,
    basis_index,
    evolve_full,
    full_hamiltonian,
    reduced_density,
    transfer_initial_state,
)

BOND = ChainSpec(2, np.array([[0.0, 1.0], [1.0, 0.0]]), np.zeros((2, 2)), np.zeros(2))


def test_two_site_full_hamiltonian():
    h = full_hamiltonian(BOND)
    expected = np.zeros((4, 4))
    expected[1, 2] = expected[2, 1] = 2.0  # XX+YY block between |10> and |01>
    assert np.array_equal(h, expected)


def test_commutes_with_magnetization(rng):
    for n in (4, 6):
        spec = make_random_chain(rng, n, long_range=True)
        h = full_hamiltonian(spec)
        dim = 1 << n
        bits = (np.arange(dim)[:, None] >> np.arange(n)[None, :]) & 1
        q = (1.0 - 2.0 * bits).sum(axis=1)
        commutator = h * q[None, :] - q[:, None] * h
        assert np.abs(commutator).max() <= 1e-10


def test_block_structure(rng):
    spec = make_random_chain(rng, 5)
    h = full_hamiltonian(spec)
    dim = 1 << 5
    weights = np.array([bin(i).count("1") for i in range(dim)])
    differ = weights[:, None] != weights[None, :]
    assert np.abs(h[differ]).max() == 0.0


def test_capacity_cap():
    spec = make_random_chain(np.random.default_rng(0), 13)
    with pytest.raises(CapacityError):
        full_hamiltonian(spec)


def test_evolution_identity_at_zero(rng):
    spec = make_random_chain(rng, 4)
    state = FullState(random_state(rng, 16), 4)
    out = evolve_full(spec, state, 0.0)
    assert np.abs(out.amplitudes - state.amplitudes).max() < 1e-12


def test_one_excitation_periodicity_two_sites():
    # a one-excitation state returns to itself (global phase) at t = pi/2J
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1.0 / np.sqrt(2.0)
    psi[2] = 1j / np.sqrt(2.0)
    state = FullState(psi, 2)
    out = evolve_full(BOND, state, np.pi / 2.0)
    overlap = abs(np.vdot(psi, out.amplitudes))
    assert overlap == pytest.approx(1.0, abs=1e-12)


def test_sector_evolution_matches_full(rng):
    spec = make_random_chain(rng, 6, long_range=True)
    dyn = dynamics_for(spec)
    t = 1.37
    coeffs = random_state(rng, 6)
    full_vec = np.zeros(1 << 6, dtype=complex)
    for site, c in enumerate(coeffs, start=1):
        full_vec[basis_index(6, [site])] = c
    evolved = evolve_full(spec, FullState(full_vec, 6), t)
    sector = propagator_at(dyn.one, t) @ coeffs
    overlap = abs(
        np.vdot(
            sector,
            [evolved.amplitudes[basis_index(6, [s])] for s in range(1, 7)],
        )
    )
    assert 1.0 - overlap <= 1e-9


def test_reduced_density_product_state():
    # |psi> = |1>_1 x |0>_2: reducing to site 1 gives the pure projector
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1.0
    rho = reduced_density(FullState(psi, 2), (1,))
    assert np.allclose(rho, np.diag([0.0, 1.0]))


def test_reduced_density_bell_pair():
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1.0 / np.sqrt(2.0)
    rho = reduced_density(FullState(psi, 2), (1,))
    assert np.allclose(rho, 0.5 * np.eye(2), atol=1e-12)


def test_reduced_density_trace_one(rng):
    state = FullState(random_state(rng, 1 << 6), 6)
    rho = reduced_density(state, (5, 6))
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    eigenvalues = np.linalg.eigvalsh(rho)
    assert eigenvalues.min() >= -1e-10


def test_reduced_density_site_order_convention():
    # excitation on site 2 of 3: reducing to (2, 3) vs (3, 2) swaps factors
    psi = np.zeros(8, dtype=complex)
    psi[basis_index(3, [2])] = 1.0
    rho_23 = reduced_density(FullState(psi, 3), (2, 3))
    rho_32 = reduced_density(FullState(psi, 3), (3, 2))
    assert rho_23[2, 2] == pytest.approx(1.0)  # |1 0> with first factor site 2
    assert rho_32[1, 1] == pytest.approx(1.0)  # |0 1> with first factor site 3


def test_initial_state_embedding(rng):
    psi = random_state(rng, 2)
    state = transfer_initial_state(5, (1,), psi, ChannelInit.UNIFORM_ONE_EXCITATION)
    # amplitude of |0>_1 (x) |j>: psi_0 / sqrt(3)
    for j in (2, 3, 4):
        assert state.amplitudes[basis_index(5, [j])] == pytest.approx(
            psi[0] / np.sqrt(3.0)
        )
        assert state.amplitudes[basis_index(5, [1, j])] == pytest.approx(
            psi[1] / np.sqrt(3.0)
        )


def test_invalid_sites_rejected(rng):
    state = FullState(random_state(rng, 16), 4)
    for sites in [(0,), (5,), (1, 1)]:
        with pytest.raises(ParameterError):
            reduced_density(state, sites)
