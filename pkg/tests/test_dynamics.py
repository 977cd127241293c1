import numpy as np
import pytest

from conftest import make_random_chain
from spintransfer.chain import ChainSpec, Perfect, protocol_preset, sector_hamiltonian
from spintransfer.dynamics import (
    amplitude_table_to_csv,
    amplitudes_at,
    diagonalize,
    dynamics_for,
    propagator_at,
)
from spintransfer.errors import ParameterError
from spintransfer.sectors import build_sector_basis

BOND = ChainSpec(2, np.array([[0.0, 1.0], [1.0, 0.0]]), np.zeros((2, 2)), np.zeros(2))


def test_diagonalize_two_by_two():
    prop = diagonalize(np.array([[0.0, 2.0], [2.0, 0.0]]))
    assert np.allclose(prop.eigenvalues, [-2.0, 2.0])
    for col, expected in zip(prop.eigenvectors.T, ([1, -1], [1, 1])):
        expected = np.asarray(expected) / np.sqrt(2.0)
        assert np.allclose(col, expected) or np.allclose(col, -expected)


def test_diagonalize_identity():
    prop = diagonalize(np.eye(5))
    assert np.allclose(prop.eigenvalues, 1.0)
    assert np.abs(prop.eigenvectors @ prop.eigenvectors.T - np.eye(5)).max() < 1e-12


def test_diagonalize_rejects_asymmetric():
    with pytest.raises(ParameterError):
        diagonalize(np.array([[0.0, 1.0], [0.5, 0.0]]))


def test_perfect_spectrum_equally_spaced():
    spec = protocol_preset(Perfect(), 6)
    prop = diagonalize(sector_hamiltonian(spec, build_sector_basis(6, 1)))
    gaps = np.diff(prop.eigenvalues)
    assert np.abs(gaps - gaps[0]).max() <= 1e-9


def test_propagator_identity_at_zero(rng):
    spec = make_random_chain(rng, 5)
    dyn = dynamics_for(spec)
    assert np.abs(propagator_at(dyn.one, 0.0) - np.eye(5)).max() < 1e-14
    tab = amplitudes_at(spec, 0.0)
    assert np.abs(tab.one_exc - np.eye(5)).max() < 1e-14
    assert np.abs(tab.two_exc - np.eye(10)).max() < 1e-14


def test_two_site_closed_form():
    t = 0.437
    tab = amplitudes_at(BOND, t)
    assert tab.one_amplitude(1, 1) == pytest.approx(np.cos(2.0 * t), abs=1e-12)
    assert tab.one_amplitude(1, 2) == pytest.approx(-1j * np.sin(2.0 * t), abs=1e-12)


def test_group_law(rng):
    spec = make_random_chain(rng, 6, long_range=True)
    dyn = dynamics_for(spec)
    t1, t2 = 0.83, 1.91
    product = propagator_at(dyn.one, t1) @ propagator_at(dyn.one, t2)
    assert np.abs(product - propagator_at(dyn.one, t1 + t2)).max() <= 1e-9


def test_unitarity_random_times(rng):
    spec = make_random_chain(rng, 7)
    for t in rng.uniform(0.0, 30.0, 5):
        tab = amplitudes_at(spec, float(t))
        for mat in (tab.one_exc, tab.two_exc):
            gram = mat @ mat.conj().T
            assert np.abs(gram - np.eye(mat.shape[0])).max() <= 1e-10


def test_energy_conservation(rng):
    spec = make_random_chain(rng, 6)
    dyn = dynamics_for(spec)
    h = sector_hamiltonian(spec, build_sector_basis(6, 1))
    psi = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi /= np.linalg.norm(psi)
    e0 = np.real(psi.conj() @ h @ psi)
    for t in (0.7, 3.1, 12.9):
        evolved = propagator_at(dyn.one, t) @ psi
        assert np.real(evolved.conj() @ h @ evolved) == pytest.approx(e0, abs=1e-9)


def test_perfect_transfer_amplitude_sweep():
    spec = protocol_preset(Perfect(), 22)
    dyn = dynamics_for(spec)
    ts = np.linspace(0.7, 0.9, 20001)
    r = np.abs(dyn.end_to_end_amplitude(ts))
    t_best = ts[np.argmax(r)]
    assert abs(dyn.end_to_end_amplitude(np.array([t_best]))[0]) >= 1.0 - 1e-8


def test_summed_rows_match_tables(rng):
    spec = make_random_chain(rng, 7)
    dyn = dynamics_for(spec)
    times = np.array([0.9, 2.3])
    summed = dyn.one_exc_summed_row([2, 3, 4], times)
    pair_summed = dyn.two_exc_summed_row_to([(1, 2), (1, 3)], [(2, 7), (4, 6)], times)
    for k, t in enumerate(times):
        tab = amplitudes_at(spec, float(t))
        expected = tab.one_exc[1:4, :].sum(axis=0)
        assert np.abs(summed[k] - expected).max() < 1e-12
        for col, dst in enumerate([(2, 7), (4, 6)]):
            expected_pair = tab.two_amplitude((1, 2), dst) + tab.two_amplitude((1, 3), dst)
            assert abs(pair_summed[k, col] - expected_pair) < 1e-12


def test_csv_export(tmp_path, rng):
    spec = make_random_chain(rng, 4)
    tab = amplitudes_at(spec, 1.0)
    path = tmp_path / "amps.csv"
    amplitude_table_to_csv(tab, path, which="one")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "i,j,re,im"
    assert len(lines) == 1 + 16
    i, j, re, im = lines[1].split(",")
    assert (i, j) == ("1", "1")
    assert complex(float(re), float(im)) == pytest.approx(tab.one_amplitude(1, 1))


def test_csv_export_two_excitation(tmp_path, rng):
    spec = make_random_chain(rng, 4)
    tab = amplitudes_at(spec, 0.8)
    path = tmp_path / "pairs.csv"
    amplitude_table_to_csv(tab, path, which="two")
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "i1,i2,j1,j2,re,im"
    assert len(lines) == 1 + 36  # 6x6 pair matrix
    with pytest.raises(ParameterError):
        amplitude_table_to_csv(tab, path, which="three")
