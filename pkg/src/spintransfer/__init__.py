"""Spin-chain quantum state transfer: channels, fidelity distributions,
Monte Carlo validation and a brute-force reference.

The package splits along the physics pipeline: sector bases and chain
Hamiltonians -> spectral dynamics -> Kraus transfer channels -> closed-form
fidelity statistics -> sampling/goodness-of-fit, with an independent
full-Hilbert-space oracle used to certify everything.
"""

from .chain import (
    Barrier,
    ChainSpec,
    ChannelInit,
    Perfect,
    ProtocolKind,
    Weak,
    protocol_preset,
    sector_hamiltonian,
)
from .channel import (
    KrausSet,
    Scenario,
    apply_channel,
    fidelity,
    fidelity_many,
    kraus_for_scenario,
    kraus_one_qubit_uniform,
    kraus_one_qubit_vacuum,
    kraus_two_qubit_vacuum,
)
from .dynamics import (
    AmplitudeTable,
    ChainDynamics,
    SpectralPropagator,
    amplitude_table_to_csv,
    amplitudes_at,
    diagonalize,
    dynamics_for,
    propagator_at,
)
from .analytics import (
    FidelityPdf,
    MinBranch,
    MinFidelityResult,
    PdfKind,
    ProtocolTuning,
    QuadraticFidelity,
    ReadoutPlan,
    TwoQubitAffine,
    affine_from_kraus,
    avg_fidelity_curve,
    avg_fidelity_one_qubit_uniform,
    avg_fidelity_one_qubit_vacuum,
    find_optimal_time,
    min_fidelity_closed_form,
    pdf_from_quadratic,
    pdf_two_qubit,
    phase_null_field,
    plan_readout,
    quadratic_reduce_one_qubit,
    time_for_target_avg,
    time_window_ladder,
    tune_with_ladder,
    two_qubit_affine,
    vacuum_quadratic,
)
from .errors import (
    CapacityError,
    CertificationError,
    ModelError,
    NumericError,
    ParameterError,
    RangeError,
    SpinTransferError,
)
from .oracle import (
    FullState,
    evolve_full,
    full_hamiltonian,
    reduced_density,
    transfer_initial_state,
)
from .sampling import (
    Histogram,
    RandomStream,
    concurrence,
    default_bin_edges,
    ks_distance,
    mc_fidelity_histogram,
    mc_local_unitary_fidelity,
    sample_bloch,
    sample_haar_unitary_2,
    sample_two_qubit_pure,
    schmidt_state,
)
from .sectors import SectorBasis, build_sector_basis, config_of, index_of
from .certify import run_certification

__version__ = "0.1.0"
