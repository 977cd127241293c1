"""Self-certification: cross-checks every module against the brute-force
reference and the package's own closed forms, with a machine-readable report.

These checks are the library's warranty seal: they re-derive the channel
outputs from the full 2^N evolution, re-verify trace preservation, and pin
the structural facts (perfect-chain spectrum, fidelity duality, distribution
normalization) that the analytic layer relies on.  Users can re-run them on
custom chain specs via the command line.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from math import comb

import numpy as np

from .chain import Barrier, ChainSpec, ChannelInit, Perfect, Weak, protocol_preset, sector_hamiltonian
from .channel import Scenario, apply_channel, fidelity, kraus_for_scenario
from .dynamics import amplitudes_at, dynamics_for
from .errors import CapacityError
from .oracle import MAX_ORACLE_SITES, evolve_full, reduced_density, transfer_initial_state
from .sectors import build_sector_basis
from .analytics import (
    affine_from_kraus,
    avg_fidelity_one_qubit_uniform,
    pdf_from_quadratic,
    quadratic_reduce_one_qubit,
    vacuum_quadratic,
)

REPORT_SCHEMA_VERSION = 1

SCENARIO_SETUP = {
    Scenario.ONE_QUBIT_VACUUM: ((1,), ChannelInit.VACUUM),
    Scenario.ONE_QUBIT_UNIFORM: ((1,), ChannelInit.UNIFORM_ONE_EXCITATION),
    Scenario.TWO_QUBIT_VACUUM: ((1, 2), ChannelInit.VACUUM),
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_error: float
    detail: str


def trace_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """Half the trace norm of the difference of two density matrices."""
    eigenvalues = np.linalg.eigvalsh(rho_a - rho_b)
    return 0.5 * float(np.abs(eigenvalues).sum())


def protocol_specs(n_sites: int, n_senders: int = 1) -> dict[str, ChainSpec]:
    """The three protocol presets at reference strengths."""
    return {
        "weak": protocol_preset(Weak(0.1), n_sites, n_senders),
        "barrier": protocol_preset(Barrier(20.0), n_sites, n_senders),
        "perfect": protocol_preset(Perfect(), n_sites, n_senders),
    }


def random_spec(rng: np.random.Generator, n_sites: int) -> ChainSpec:
    """Random nearest-neighbour chain with fields, for convention checks."""
    couplings = np.zeros((n_sites, n_sites))
    for i in range(n_sites - 1):
        couplings[i, i + 1] = couplings[i + 1, i] = rng.uniform(0.5, 1.5)
    fields = rng.uniform(-0.5, 0.5, n_sites)
    return ChainSpec(n_sites, couplings, np.zeros((n_sites, n_sites)), fields)


def _sender_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    state = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return state / np.linalg.norm(state)


def check_sector_dimensions() -> CheckResult:
    worst = 0
    for n in range(2, 25):
        for q in (0, 1, 2):
            if q > n:
                continue
            basis = build_sector_basis(n, q)
            worst = max(worst, abs(basis.dimension - comb(n, q)))
            for k in range(basis.dimension):
                if basis.index_of(basis.config_of(k)) != k:
                    return CheckResult(
                        "sector_dimensions", False, 1.0, f"round trip broke at N={n} q={q}"
                    )
    return CheckResult("sector_dimensions", worst == 0, float(worst), "N in 2..24")


def check_sector_hamiltonians(seed: int = 11) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (4, 6, 9):
        spec = random_spec(rng, n)
        for q in (0, 1, 2):
            h = sector_hamiltonian(spec, build_sector_basis(n, q))
            worst = max(worst, float(np.abs(h - h.T).max()))
            if q == 0:
                worst = max(worst, float(np.abs(h).max()))
    return CheckResult(
        "sector_hamiltonian_symmetry_and_gauge", worst <= 1e-12, worst,
        "symmetry and vacuum gauge on random specs",
    )


def check_perfect_spectrum(n_sites: int = 22) -> CheckResult:
    dyn = dynamics_for(protocol_preset(Perfect(), n_sites))
    gaps = np.diff(dyn.one.eigenvalues)
    err = float(np.abs(gaps - gaps[0]).max())
    return CheckResult(
        "perfect_spectrum_equal_spacing", err <= 1e-9, err, f"N={n_sites}"
    )


def check_amplitude_unitarity(seed: int = 12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (5, 8):
        spec = random_spec(rng, n)
        for _ in range(3):
            tab = amplitudes_at(spec, float(rng.uniform(0.0, 20.0)))
            for mat in (tab.one_exc, tab.two_exc):
                gram = mat @ mat.conj().T
                worst = max(worst, float(np.abs(gram - np.eye(mat.shape[0])).max()))
    return CheckResult("amplitude_unitarity", worst <= 1e-10, worst, "random specs")


def check_oracle_amplitudes(n_max: int, seed: int = 13) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(4, min(n_max, 8) + 1, 2):
        spec = random_spec(rng, n)
        t = float(rng.uniform(0.5, 5.0))
        tab = amplitudes_at(spec, t)
        for sites, q in (((1,), 1), ((1, 2), 2)):
            init = transfer_initial_state(
                n, sites, np.eye(1 << len(sites))[-1].astype(complex)
            )
            full = evolve_full(spec, init, t)
            if q == 1:
                for j in range(1, n + 1):
                    worst = max(
                        worst,
                        abs(full.amplitudes[1 << (j - 1)] - tab.one_amplitude(1, j)),
                    )
            else:
                for k in range(1, n + 1):
                    for l in range(k + 1, n + 1):
                        idx = (1 << (k - 1)) | (1 << (l - 1))
                        worst = max(
                            worst,
                            abs(
                                full.amplitudes[idx]
                                - tab.two_amplitude((1, 2), (k, l))
                            ),
                        )
    return CheckResult(
        "oracle_amplitude_equivalence", worst <= 1e-9, worst, f"N up to {min(n_max, 8)}"
    )


def check_channels_against_oracle(
    n_max: int, times_per_case: int = 10, seed: int = 14
) -> list[CheckResult]:
    """Completeness, oracle equivalence and fidelity duality in one sweep."""
    rng = np.random.default_rng(seed)
    worst_defect = 0.0
    worst_distance = 0.0
    worst_duality = 0.0
    cases = 0
    for n in range(4, n_max + 1):
        variants = [protocol_specs(n)]
        if n >= 6:
            variants.append(protocol_specs(n, n_senders=2))
        for spec_group in variants:
            for spec in spec_group.values():
                for scenario, (sites, init) in SCENARIO_SETUP.items():
                    if n < scenario.min_sites:
                        continue
                    for t in rng.uniform(0.0, 12.0, times_per_case):
                        tab = amplitudes_at(spec, float(t))
                        kraus = kraus_for_scenario(tab, scenario, n)
                        worst_defect = max(worst_defect, kraus.completeness_defect)
                        psi = _sender_state(rng, kraus.dim)
                        rho = apply_channel(kraus, psi)
                        full = evolve_full(
                            spec,
                            transfer_initial_state(n, sites, psi, init),
                            float(t),
                        )
                        receiver = (n,) if kraus.dim == 2 else (n - 1, n)
                        rho_ref = reduced_density(full, receiver)
                        worst_distance = max(
                            worst_distance, trace_distance(rho, rho_ref)
                        )
                        f_kraus = fidelity(kraus, psi)
                        f_overlap = float(np.real(psi.conj() @ rho @ psi))
                        worst_duality = max(worst_duality, abs(f_kraus - f_overlap))
                        cases += 1
    detail = f"{cases} cases, N in 4..{n_max}"
    return [
        CheckResult("kraus_completeness", worst_defect <= 1e-9, worst_defect, detail),
        CheckResult(
            "channel_oracle_equivalence", worst_distance <= 1e-9, worst_distance, detail
        ),
        CheckResult("fidelity_duality", worst_duality <= 1e-12, worst_duality, detail),
    ]


def check_quadratic_reduction(seed: int = 15) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (6, 9):
        spec = random_spec(rng, n)
        t = float(rng.uniform(1.0, 8.0))
        tab = amplitudes_at(spec, t)
        kraus = kraus_for_scenario(tab, Scenario.ONE_QUBIT_VACUUM, n)
        fitted = quadratic_reduce_one_qubit(kraus)
        amp = tab.one_amplitude(1, n)
        closed = vacuum_quadratic(abs(amp), float(np.angle(amp)))
        worst = max(
            worst,
            abs(fitted.a - closed.a),
            abs(fitted.b - closed.b),
            abs(fitted.c - closed.c),
            fitted.fit_residual,
        )
        uniform_kraus = kraus_for_scenario(tab, Scenario.ONE_QUBIT_UNIFORM, n)
        uniform_fit = quadratic_reduce_one_qubit(uniform_kraus)
        worst = max(
            worst,
            abs(uniform_fit.mean() - avg_fidelity_one_qubit_uniform(tab, n)),
        )
    return CheckResult(
        "quadratic_reduction_closed_forms", worst <= 1e-9, worst, "vacuum + uniform"
    )


def check_pdf_normalization(seed: int = 16) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (6, 9):
        spec = random_spec(rng, n)
        tab = amplitudes_at(spec, float(rng.uniform(1.0, 8.0)))
        for scenario in (Scenario.ONE_QUBIT_VACUUM, Scenario.ONE_QUBIT_UNIFORM):
            kraus = kraus_for_scenario(tab, scenario, n)
            pdf = pdf_from_quadratic(quadratic_reduce_one_qubit(kraus))
            worst = max(worst, abs(pdf.normalization() - 1.0))
    return CheckResult("pdf_normalization", worst <= 1e-6, worst, "random channels")


def check_two_qubit_twirl(seed: int = 17) -> CheckResult:
    """Trace-formula local-unitary average vs explicit Clifford 2-design."""
    rng = np.random.default_rng(seed)
    group = _clifford_group_su2()
    worst = 0.0
    for n in (6, 7):
        spec = random_spec(rng, n)
        tab = amplitudes_at(spec, float(rng.uniform(1.0, 6.0)))
        kraus = kraus_for_scenario(tab, Scenario.TWO_QUBIT_VACUUM, n)
        affine = affine_from_kraus(kraus)
        for conc in (0.0, 0.5, 1.0):
            base = np.array(
                [
                    np.sqrt((1.0 - np.sqrt(1.0 - conc**2)) / 2.0),
                    0.0,
                    0.0,
                    np.sqrt((1.0 + np.sqrt(1.0 - conc**2)) / 2.0),
                ],
                dtype=complex,
            ).reshape(2, 2)
            total = 0.0
            for u1 in group:
                states = np.einsum(
                    "ab,ncd,bd->nac", u1, np.asarray(group), base
                ).reshape(len(group), 4)
                total += float(
                    np.sum(
                        np.abs(
                            np.einsum(
                                "sk,okl,sl->so",
                                states.conj(),
                                kraus.operators,
                                states,
                            )
                        )
                        ** 2
                    )
                )
            average = total / len(group) ** 2
            worst = max(worst, abs(average - affine.evaluate(conc)))
    return CheckResult(
        "two_qubit_twirl_vs_clifford", worst <= 1e-10, worst, "exact 2-design"
    )


def _clifford_group_su2() -> list[np.ndarray]:
    """The 24 single-qubit Clifford rotations (global phase fixed)."""
    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)
    phase = np.diag([1.0, 1.0j])

    def canon(u: np.ndarray) -> np.ndarray:
        flat = u.ravel()
        pivot = flat[np.argmax(np.abs(flat) > 1e-6)]
        return u * (abs(pivot) / pivot)

    group = [np.eye(2, dtype=complex)]
    frontier = list(group)
    while frontier:
        fresh = []
        for g in frontier:
            for gen in (hadamard, phase):
                candidate = canon(gen @ g)
                if not any(np.allclose(candidate, kept, atol=1e-9) for kept in group):
                    group.append(candidate)
                    fresh.append(candidate)
        frontier = fresh
    assert len(group) == 24
    return group


def run_certification(n_max: int = 10, times_per_case: int = 10) -> dict:
    """Run every check and return the report as a JSON-friendly dict."""
    if n_max > MAX_ORACLE_SITES:
        raise CapacityError(
            f"certification is capped at N={MAX_ORACLE_SITES}, got {n_max}"
        )
    checks: list[CheckResult] = [
        check_sector_dimensions(),
        check_sector_hamiltonians(),
        check_perfect_spectrum(),
        check_amplitude_unitarity(),
        check_oracle_amplitudes(n_max),
        *check_channels_against_oracle(n_max, times_per_case),
        check_quadratic_reduction(),
        check_pdf_normalization(),
        check_two_qubit_twirl(),
    ]
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "n_max": n_max,
        "checks": [
            {**asdict(c), "passed": bool(c.passed), "max_error": float(c.max_error)}
            for c in checks
        ],
        "all_passed": bool(all(c.passed for c in checks)),
    }
