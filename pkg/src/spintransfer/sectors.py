"""Canonical bases for fixed-excitation sectors of a spin network.

Total magnetization is conserved, so the dynamics never mixes configurations
with different numbers of flipped spins.  Each sector gets a dense coordinate
space whose ordering is the lexicographic ordering of the flipped-site tuples;
this module owns that ordering and the two-way maps between configurations
and vector indices.  Sites are labelled 1..N throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

from .errors import ParameterError

MAX_EXCITATIONS = 2


@dataclass(frozen=True)
class SectorBasis:
    """Ordered basis of all configurations with a fixed excitation count.

    Attributes
    ----------
    n_sites : int
        Number of network sites N.
    n_excitations : int
        Number of flipped spins q (0, 1 or 2).
    configurations : tuple of tuple of int
        Lexicographically ordered site tuples, each strictly increasing.
    """

    n_sites: int
    n_excitations: int
    configurations: tuple[tuple[int, ...], ...]
    _index: dict[tuple[int, ...], int] = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {c: k for k, c in enumerate(self.configurations)}
        )

    @property
    def dimension(self) -> int:
        return len(self.configurations)

    def index_of(self, config) -> int:
        """Return the dense index of a configuration (sorted site tuple)."""
        config = tuple(int(s) for s in config)
        index = self._index.get(config)
        if index is None:
            raise ParameterError(
                f"config {config} is not a sorted in-range configuration of "
                f"the (n_sites={self.n_sites}, q={self.n_excitations}) sector"
            )
        return index

    def config_of(self, index: int) -> tuple[int, ...]:
        """Return the configuration stored at a dense index."""
        if not 0 <= index < self.dimension:
            raise ParameterError(
                f"index {index} outside [0, {self.dimension}) for this sector"
            )
        return self.configurations[index]


def build_sector_basis(n_sites: int, n_excitations: int) -> SectorBasis:
    """Build the canonical basis of the ``n_excitations`` sector.

    The ordering is lexicographic over configurations: for one excitation the
    flipped site runs 1..N, for two excitations the pairs (i, j) with i < j
    run (1,2), (1,3), ..., (N-1,N).

    Raises
    ------
    ParameterError
        If ``n_sites < 2`` or ``n_excitations`` is not in {0, 1, 2}.
    """
    if n_sites < 2:
        raise ParameterError(f"n_sites must be >= 2, got {n_sites}")
    if n_excitations not in (0, 1, 2):
        raise ParameterError(
            f"n_excitations must be one of 0, 1, 2, got {n_excitations}"
        )
    if n_excitations > n_sites:
        raise ParameterError(
            f"n_excitations={n_excitations} exceeds n_sites={n_sites}"
        )
    if n_excitations == 0:
        configs = ((),)
    elif n_excitations == 1:
        configs = tuple((i,) for i in range(1, n_sites + 1))
    else:
        configs = tuple(
            (i, j)
            for i in range(1, n_sites + 1)
            for j in range(i + 1, n_sites + 1)
        )
    assert len(configs) == comb(n_sites, n_excitations)
    return SectorBasis(n_sites, n_excitations, configs)


def index_of(basis: SectorBasis, config) -> int:
    """Functional form of :meth:`SectorBasis.index_of`."""
    return basis.index_of(config)


def config_of(basis: SectorBasis, index: int) -> tuple[int, ...]:
    """Functional form of :meth:`SectorBasis.config_of`."""
    return basis.config_of(index)
