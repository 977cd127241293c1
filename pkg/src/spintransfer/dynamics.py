"""Exact sector propagators and transition-amplitude tables.

Time evolution is evaluated from a one-off dense eigendecomposition of each
sector Hamiltonian rather than by time stepping: the protocols of interest
reach their working point at long times (weak effective couplings), where
steppers accumulate error but the spectral form stays exact.  Spectral data
is cached per chain spec behind a lock; evaluation at a time point is two
dense multiplications.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec, sector_hamiltonian
from .errors import NumericError, ParameterError
from .sectors import SectorBasis, build_sector_basis

ORTHOGONALITY_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-10
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SpectralPropagator:
    """Eigendecomposition of a sector Hamiltonian.

    ``eigenvalues`` are ascending; ``eigenvectors`` holds the orthonormal
    eigenbasis in its columns, so ``V diag(L) V^T`` reconstructs the matrix.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    basis: SectorBasis | None = None

    @property
    def dimension(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class AmplitudeTable:
    """One- and two-excitation transition amplitudes at a fixed time.

    ``one_exc[i, j]`` is the amplitude to go from site i+1 to site j+1;
    ``two_exc[p, q]`` the amplitude between the pair configurations at
    indices p and q of the two-excitation basis.  Both matrices are unitary
    and symmetric (the sector Hamiltonians are real symmetric).
    """

    time: float
    one_exc: np.ndarray
    two_exc: np.ndarray
    pair_basis: SectorBasis

    def one_amplitude(self, i: int, j: int) -> complex:
        """Amplitude a_i^j(t) between sites i and j (1-based)."""
        return complex(self.one_exc[i - 1, j - 1])

    def two_amplitude(self, src: tuple[int, int], dst: tuple[int, int]) -> complex:
        """Amplitude b_{src}^{dst}(t) between sorted site pairs (1-based)."""
        return complex(
            self.two_exc[
                self.pair_basis.index_of(tuple(sorted(src))),
                self.pair_basis.index_of(tuple(sorted(dst))),
            ]
        )


def diagonalize(matrix: np.ndarray, basis: SectorBasis | None = None) -> SpectralPropagator:
    """Diagonalize a real symmetric matrix and validate the result.

    Raises
    ------
    ParameterError
        If the input is not symmetric to 1e-12.
    NumericError
        If the eigensolver fails or the reconstruction residual exceeds
        the 1e-10 contract.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ParameterError(f"matrix must be square, got shape {matrix.shape}")
    asym = float(np.abs(matrix - matrix.T).max()) if matrix.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ParameterError(
            f"matrix is not symmetric: max |A - A^T| = {asym:.3e}"
        )
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed to converge: {exc}") from exc
    dim = matrix.shape[0]
    ortho = float(np.abs(eigenvectors @ eigenvectors.T - np.eye(dim)).max())
    recon = float(
        np.abs(
            (eigenvectors * eigenvalues) @ eigenvectors.T - matrix
        ).max()
    )
    if ortho > ORTHOGONALITY_TOL or recon > RECONSTRUCTION_TOL:
        raise NumericError(
            f"eigendecomposition residuals exceed contract: "
            f"orthogonality {ortho:.3e}, reconstruction {recon:.3e}"
        )
    return SpectralPropagator(eigenvalues, eigenvectors, basis)


def propagator_at(prop: SpectralPropagator, t: float) -> np.ndarray:
    """Unitary ``V exp(-i L t) V^T`` of one sector at time ``t``."""
    if not np.isfinite(t):
        raise ParameterError(f"time must be finite, got {t}")
    phases = np.exp(-1j * prop.eigenvalues * t)
    return (prop.eigenvectors * phases) @ prop.eigenvectors.T


class ChainDynamics:
    """Cached spectral data of one chain spec, for all sectors up to q = 2.

    Construction performs the (eager) eigendecompositions; evaluation methods
    are pure and safe to call concurrently afterwards.
    """

    def __init__(self, spec: ChainSpec):
        self.spec = spec
        self.one_basis = build_sector_basis(spec.n_sites, 1)
        self.pair_basis = build_sector_basis(spec.n_sites, 2)
        self.one = diagonalize(sector_hamiltonian(spec, self.one_basis), self.one_basis)
        self.two = diagonalize(sector_hamiltonian(spec, self.pair_basis), self.pair_basis)

    def amplitudes_at(self, t: float) -> AmplitudeTable:
        """Full one- and two-excitation amplitude tables at time ``t``."""
        return AmplitudeTable(
            time=float(t),
            one_exc=propagator_at(self.one, t),
            two_exc=propagator_at(self.two, t),
            pair_basis=self.pair_basis,
        )

    # -- vectorized row evaluations used by the tuning sweeps ---------------

    def one_exc_rows(self, rows: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Selected rows of the one-excitation propagator on a time grid.

        Parameters
        ----------
        rows : array of int
            1-based source sites.
        times : array of float, shape (T,)

        Returns
        -------
        ndarray, shape (T, len(rows), N)
            ``out[k, r, j]`` is the amplitude from site rows[r] to site j+1.
        """
        v = self.one.eigenvectors
        src = v[np.asarray(rows) - 1, :]  # (R, M)
        phases = np.exp(-1j * np.outer(np.asarray(times), self.one.eigenvalues))
        return np.einsum("tm,rm,jm->trj", phases, src, v, optimize=True)

    def two_exc_row(self, src_pair: tuple[int, int], times: np.ndarray) -> np.ndarray:
        """One row of the two-excitation propagator on a time grid.

        Returns an array of shape (T, P) with P the pair-sector dimension;
        column q is the amplitude from ``src_pair`` to the pair configuration
        at index q.
        """
        row = self.pair_basis.index_of(tuple(sorted(src_pair)))
        v = self.two.eigenvectors
        weights = v[row, :]
        phases = np.exp(-1j * np.outer(np.asarray(times), self.two.eigenvalues))
        return (phases * weights) @ v.T

    def end_to_end_amplitude(self, times: np.ndarray) -> np.ndarray:
        """Amplitude from site 1 to site N on a time grid, shape (T,)."""
        v = self.one.eigenvectors
        weights = v[0, :] * v[-1, :]
        phases = np.exp(-1j * np.outer(np.asarray(times), self.one.eigenvalues))
        return phases @ weights

    def one_exc_summed_row(self, sources, times: np.ndarray) -> np.ndarray:
        """``sum_{i in sources} a_i^k(t)`` for every site k, shape (T, N)."""
        v = self.one.eigenvectors
        weights = v[np.asarray(sources) - 1, :].sum(axis=0)
        phases = np.exp(-1j * np.outer(np.asarray(times), self.one.eigenvalues))
        return (phases * weights) @ v.T

    def two_exc_summed_row_to(
        self, src_pairs, dst_pairs, times: np.ndarray
    ) -> np.ndarray:
        """``sum_{p in src_pairs} b_p^q(t)`` for the listed target pairs.

        Returns shape (T, len(dst_pairs)).
        """
        v = self.two.eigenvectors
        src_rows = [self.pair_basis.index_of(tuple(sorted(p))) for p in src_pairs]
        dst_rows = [self.pair_basis.index_of(tuple(sorted(p))) for p in dst_pairs]
        weights = v[src_rows, :].sum(axis=0)
        phases = np.exp(-1j * np.outer(np.asarray(times), self.two.eigenvalues))
        return (phases * weights) @ v[dst_rows, :].T


_CACHE_LOCK = threading.Lock()
_DYNAMICS_CACHE: dict[bytes, ChainDynamics] = {}
_CACHE_LIMIT = 64


def dynamics_for(spec: ChainSpec) -> ChainDynamics:
    """Cached :class:`ChainDynamics` for a spec (content-addressed)."""
    key = spec.cache_key()
    with _CACHE_LOCK:
        hit = _DYNAMICS_CACHE.get(key)
    if hit is not None:
        return hit
    built = ChainDynamics(spec)
    with _CACHE_LOCK:
        if len(_DYNAMICS_CACHE) >= _CACHE_LIMIT:
            _DYNAMICS_CACHE.clear()
        _DYNAMICS_CACHE[key] = built
    return built


def amplitudes_at(spec: ChainSpec, t: float) -> AmplitudeTable:
    """Amplitude tables of ``spec`` at time ``t`` (cached spectral data)."""
    return dynamics_for(spec).amplitudes_at(t)


def amplitude_table_to_csv(table: AmplitudeTable, path, which: str = "one") -> None:
    """Write an amplitude matrix as CSV for debugging.

    ``which="one"`` writes columns ``i,j,re,im`` over site pairs;
    ``which="two"`` writes ``i1,i2,j1,j2,re,im`` over configuration pairs.
    """
    lines = []
    if which == "one":
        lines.append("i,j,re,im")
        n = table.one_exc.shape[0]
        for i in range(n):
            for j in range(n):
                z = table.one_exc[i, j]
                lines.append(f"{i + 1},{j + 1},{z.real:.17g},{z.imag:.17g}")
    elif which == "two":
        lines.append("i1,i2,j1,j2,re,im")
        configs = table.pair_basis.configurations
        for p, (i1, i2) in enumerate(configs):
            for q, (j1, j2) in enumerate(configs):
                z = table.two_exc[p, q]
                lines.append(f"{i1},{i2},{j1},{j2},{z.real:.17g},{z.imag:.17g}")
    else:
        raise ParameterError(f"which must be 'one' or 'two', got {which!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
