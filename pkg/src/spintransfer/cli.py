"""Reproducible experiment runner.

Three subcommands: ``tune`` locates optimal read-out times (optionally with
the phase-nulling auxiliary field), ``pdf`` produces analytic fidelity
distributions plus optional Monte Carlo histograms as figure-ready CSV
files, and ``certify`` runs the brute-force cross-check suite.  Identical
configuration and seed give byte-identical output files; wall-clock timing
is printed to stdout only, never written into them.

Exit codes: 0 success, 2 parameter error, 3 unreachable target average,
4 certification failure, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .analytics import (
    ReadoutPlan,
    affine_from_kraus,
    find_optimal_time,
    pdf_from_quadratic,
    pdf_two_qubit,
    phase_null_field,
    plan_readout,
    quadratic_reduce_one_qubit,
    tune_with_ladder,
)
from .chain import Barrier, ChainSpec, Perfect, ProtocolKind, Weak, protocol_preset
from .channel import Scenario, kraus_for_scenario
from .certify import run_certification
from .dynamics import amplitudes_at
from .errors import (
    CapacityError,
    CertificationError,
    ModelError,
    NumericError,
    ParameterError,
    RangeError,
    SpinTransferError,
)
from .sampling import Histogram, RandomStream, default_bin_edges, ks_distance, mc_fidelity_histogram

RESULT_SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "SPINTRANSFER_OUT"
DEFAULT_MC_SAMPLES = 100_000
DEFAULT_BINS = 200
DEFAULT_SEED = 0
DEFAULT_TIMING_FRACTION = 0.02
JITTER_MIX_NODES = 41

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_TARGET = 3
EXIT_CERTIFY = 4
EXIT_NUMERIC = 5


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (the ``result.json`` echo)."""

    protocol: dict
    n_sites: int
    scenario: str
    mode: dict
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = DEFAULT_SEED
    bins: int = DEFAULT_BINS
    output_dir: str = ""
    aux_field: bool | None = None
    window: tuple[float, float] | None = None
    grid: int | None = None
    jitter: bool = False

    def kind(self) -> ProtocolKind:
        kind = self.protocol.get("kind")
        if kind == "weak":
            return Weak(float(self.protocol["j0"]))
        if kind == "barrier":
            return Barrier(float(self.protocol["h0"]))
        if kind == "perfect":
            return Perfect()
        raise ParameterError(f"unknown protocol kind {kind!r}")

    def scenario_enum(self) -> Scenario:
        try:
            return Scenario(self.scenario)
        except ValueError as exc:
            raise ParameterError(f"unknown scenario {self.scenario!r}") from exc

    def resolved_aux(self) -> bool:
        if self.aux_field is not None:
            return bool(self.aux_field)
        return self.protocol.get("kind") != "barrier"

    def validate(self) -> None:
        if self.n_sites < 4:
            raise ParameterError(f"n_sites must be >= 4, got {self.n_sites}")
        mode_type = self.mode.get("type")
        if mode_type == "timing_error":
            fraction = float(self.mode.get("fraction", DEFAULT_TIMING_FRACTION))
            if not 0.0 <= fraction <= 0.5:
                raise ParameterError(
                    f"timing_error fraction must lie in [0, 0.5], got {fraction}"
                )
        elif mode_type == "target_avg":
            value = float(self.mode["value"])
            if not 0.5 < value < 1.0:
                raise ParameterError(
                    f"target_avg value must lie in (0.5, 1), got {value}"
                )
        elif mode_type != "at_optimal":
            raise ParameterError(f"unknown mode type {mode_type!r}")
        if self.mc_samples < 0:
            raise ParameterError("mc_samples must be >= 0 (0 = analytic only)")
        if self.bins < 2:
            raise ParameterError(f"bins must be >= 2, got {self.bins}")
        if not self.output_dir:
            raise ParameterError(
                "output_dir is required (flag --out, config field, or "
                f"{OUTPUT_DIR_ENV} environment variable)"
            )
        self.kind()
        self.scenario_enum()

    def to_echo(self) -> dict:
        return {
            "protocol": self.protocol,
            "n_sites": self.n_sites,
            "scenario": self.scenario,
            "mode": self.mode,
            "mc_samples": self.mc_samples,
            "seed": self.seed,
            "bins": self.bins,
            "output_dir": self.output_dir,
            "aux_field": self.resolved_aux(),
            "window": list(self.window) if self.window else None,
            "grid": self.grid,
            "jitter": self.jitter,
        }


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge the JSON config file (if any) with command-line overrides."""
    data: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    protocol = dict(data.get("protocol", {}))
    if args.protocol:
        protocol["kind"] = args.protocol
    if args.j0 is not None:
        protocol["j0"] = args.j0
    if args.h0 is not None:
        protocol["h0"] = args.h0
    mode = dict(data.get("mode", {}))
    if args.mode:
        parts = args.mode.split(":", 1)
        mode = {"type": parts[0]}
        if parts[0] == "timing_error":
            mode["fraction"] = float(parts[1]) if len(parts) > 1 else DEFAULT_TIMING_FRACTION
        elif parts[0] == "target_avg":
            if len(parts) < 2:
                raise ParameterError("--mode target_avg:<value> needs a value")
            mode["value"] = float(parts[1])
    if not mode:
        mode = {"type": "at_optimal"}
    window = data.get("window")
    if args.window:
        lo, _, hi = args.window.partition(":")
        window = [float(lo), float(hi)]
    output_dir = args.out or data.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV, "")
    aux = data.get("aux_field", None)
    if args.aux_field is not None:
        aux = args.aux_field == "on"
    config = ExperimentConfig(
        protocol=protocol,
        n_sites=int(args.n_sites if args.n_sites is not None else data.get("n_sites", 0)),
        scenario=str(args.scenario or data.get("scenario", "")),
        mode=mode,
        mc_samples=int(
            args.mc_samples if args.mc_samples is not None else data.get("mc_samples", DEFAULT_MC_SAMPLES)
        ),
        seed=int(args.seed if args.seed is not None else data.get("seed", DEFAULT_SEED)),
        bins=int(args.bins if args.bins is not None else data.get("bins", DEFAULT_BINS)),
        output_dir=str(output_dir),
        aux_field=aux,
        window=tuple(window) if window else None,
        grid=int(args.grid) if args.grid is not None else data.get("grid"),
        jitter=bool(args.jitter or data.get("jitter", False)),
    )
    config.validate()
    return config


# ---------------------------------------------------------------------------
# deterministic file output
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def pdf_curve_rows(pdf, resolution: int = 2001, pad_cells: int = 4):
    """Cell-averaged density curve rows (f, density, cdf).

    The grid extends a few empty cells past the support so that even the
    integrable edge singularities keep their mass under trapezoidal
    integration of the emitted samples; the density column is the exact
    per-cell probability mass divided by the cell width; the cdf column is
    the analytic CDF at the cell midpoint.
    """
    lo, hi = pdf.support
    span = max(hi - lo, 1e-6)  # point masses get a narrow but resolvable window
    step = span / max(resolution - 1, 1)
    start = lo - pad_cells * step
    stop = hi + pad_cells * step
    edges = np.linspace(start, stop, resolution + 2 * pad_cells)
    cdf_edges = pdf.cdf(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    density = np.diff(cdf_edges) / np.diff(edges)
    cdf_mid = pdf.cdf(mids)
    return [(float(f), float(d), float(c)) for f, d, c in zip(mids, density, cdf_mid)]


def histogram_rows(hist: Histogram):
    density = hist.normalized_density()
    return [
        (float(hist.bin_edges[i]), float(hist.bin_edges[i + 1]), int(hist.counts[i]), float(density[i]))
        for i in range(hist.counts.size)
    ]


# ---------------------------------------------------------------------------
# jitter mixture (alternative reading of the timing-error mode)
# ---------------------------------------------------------------------------

class JitterMixturePdf:
    """Equal-weight mixture of analytic pdfs over a read-out time grid."""

    def __init__(self, pdfs: list):
        self._pdfs = pdfs
        self.support = (
            min(p.support[0] for p in pdfs),
            max(p.support[1] for p in pdfs),
        )

    def density(self, f):
        return sum(p.density(f) for p in self._pdfs) / len(self._pdfs)

    def cdf(self, f):
        return sum(p.cdf(f) for p in self._pdfs) / len(self._pdfs)

    def mean(self) -> float:
        return sum(p.mean() for p in self._pdfs) / len(self._pdfs)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _build_spec(config: ExperimentConfig) -> ChainSpec:
    scenario = config.scenario_enum()
    n_senders = 2 if scenario is Scenario.TWO_QUBIT_VACUUM else 1
    return protocol_preset(config.kind(), config.n_sites, n_senders)


def _resolve_plan(config: ExperimentConfig) -> tuple[ReadoutPlan, tuple]:
    spec = _build_spec(config)
    scenario = config.scenario_enum()
    aux = config.resolved_aux()
    mode_type = config.mode.get("type")
    if config.window is not None:
        window = (config.window[0], config.window[1], config.grid or 200_000)
    else:
        _, window = tune_with_ladder(
            spec,
            scenario,
            config.kind(),
            phase_corrected=aux and scenario is not Scenario.ONE_QUBIT_UNIFORM,
        )
        if config.grid:
            window = (window[0], window[1], config.grid)
    kwargs = {}
    if mode_type == "timing_error":
        kwargs["timing_fraction"] = float(config.mode.get("fraction", DEFAULT_TIMING_FRACTION))
    elif mode_type == "target_avg":
        kwargs["target_avg"] = float(config.mode["value"])
    plan = plan_readout(
        spec,
        scenario,
        window=window[:2],
        grid=window[2],
        aux_field=aux,
        **kwargs,
    )
    return plan, window


def _analytic_pdf(plan: ReadoutPlan, t_read: float, n_sites: int):
    """Analytic pdf of the planned scenario at one read-out time."""
    tab = amplitudes_at(plan.spec, t_read)
    kraus = kraus_for_scenario(tab, plan.scenario, n_sites)
    if plan.scenario is Scenario.TWO_QUBIT_VACUUM:
        return pdf_two_qubit(affine_from_kraus(kraus)), kraus
    return pdf_from_quadratic(quadratic_reduce_one_qubit(kraus)), kraus


def _result_record(config, plan, pdf, avg, ks, files) -> dict:
    return {
        "schema_version": RESULT_SCHEMA_VERSION,
        "config": config.to_echo(),
        "t_opt": plan.t_opt,
        "t_readout": plan.t_read,
        "b_aux": plan.b_aux,
        "avg_fidelity": avg,
        "f_min": pdf.support[0],
        "f_max": pdf.support[1],
        "pdf_curve": files.get("pdf_curve"),
        "histogram": files.get("histogram"),
        "ks_distance": ks,
    }


def cmd_tune(config: ExperimentConfig) -> dict:
    """Tune the read-out time; with the auxiliary field, re-tune after it."""
    started = time.perf_counter()
    spec = _build_spec(config)
    scenario = config.scenario_enum()
    use_correction = (
        config.resolved_aux() and scenario is not Scenario.ONE_QUBIT_UNIFORM
    )
    if config.window is not None:
        window = (config.window[0], config.window[1], config.grid or 200_000)
    else:
        # the window must contain the peak of the objective actually used,
        # so ladder on the corrected curve whenever the field will be applied
        _, window = tune_with_ladder(
            spec, scenario, config.kind(), phase_corrected=use_correction
        )
        if config.grid:
            window = (window[0], window[1], config.grid)
    raw = find_optimal_time(spec, scenario, window[:2], window[2], phase_corrected=False)
    result = {
        "t_opt": raw.t_opt,
        "b_aux": 0.0,
        "avg_fidelity": raw.achieved_avg_fidelity,
        "avg_fidelity_no_aux": raw.achieved_avg_fidelity,
    }
    spec_eff = spec
    if use_correction:
        site = spec.n_sites - 1 if scenario is Scenario.TWO_QUBIT_VACUUM else spec.n_sites
        corrected = find_optimal_time(
            spec, scenario, window[:2], window[2], phase_corrected=True
        )
        b_aux = phase_null_field(spec, corrected.t_opt, site)
        spec_eff = spec.with_uniform_field(b_aux)
        retuned = find_optimal_time(
            spec_eff, scenario, window[:2], window[2], phase_corrected=False
        )
        result.update(
            t_opt=retuned.t_opt,
            b_aux=b_aux,
            avg_fidelity=retuned.achieved_avg_fidelity,
        )
    tab = amplitudes_at(spec_eff, result["t_opt"])
    kraus = kraus_for_scenario(tab, scenario, config.n_sites)
    if scenario is Scenario.TWO_QUBIT_VACUUM:
        pdf = pdf_two_qubit(affine_from_kraus(kraus))
    else:
        pdf = pdf_from_quadratic(quadratic_reduce_one_qubit(kraus))
    os.makedirs(config.output_dir, exist_ok=True)
    record = {
        "schema_version": RESULT_SCHEMA_VERSION,
        "config": config.to_echo(),
        "t_opt": result["t_opt"],
        "t_readout": result["t_opt"],
        "b_aux": result["b_aux"],
        "avg_fidelity": result["avg_fidelity"],
        "avg_fidelity_no_aux": result["avg_fidelity_no_aux"],
        "f_min": pdf.support[0],
        "f_max": pdf.support[1],
        "pdf_curve": None,
        "histogram": None,
        "ks_distance": None,
    }
    write_json(os.path.join(config.output_dir, "result.json"), record)
    elapsed = time.perf_counter() - started
    print(
        f"tuned {config.protocol.get('kind')} N={config.n_sites} {config.scenario}: "
        f"t_opt={record['t_opt']:.9g} b_aux={record['b_aux']:.9g} "
        f"<F>={record['avg_fidelity']:.9f} (no aux: {record['avg_fidelity_no_aux']:.9f}) "
        f"[{elapsed:.2f}s]"
    )
    return record


def cmd_pdf(config: ExperimentConfig) -> dict:
    """Analytic pdf + optional MC histogram at the resolved read-out time."""
    started = time.perf_counter()
    plan, window = _resolve_plan(config)
    scenario = config.scenario_enum()
    if config.jitter and config.mode.get("type") == "timing_error":
        fraction = float(config.mode.get("fraction", DEFAULT_TIMING_FRACTION))
        t_nodes = plan.t_opt * np.linspace(1.0 - fraction, 1.0 + fraction, JITTER_MIX_NODES)
        members = [_analytic_pdf(plan, float(t), config.n_sites)[0] for t in t_nodes]
        pdf = JitterMixturePdf(members)
        kraus_for_mc = None
    else:
        pdf, kraus_for_mc = _analytic_pdf(plan, plan.t_read, config.n_sites)
    avg = pdf.mean()

    os.makedirs(config.output_dir, exist_ok=True)
    files = {"pdf_curve": "pdf_curve.csv"}
    write_csv(
        os.path.join(config.output_dir, "pdf_curve.csv"),
        ["f", "density", "cdf"],
        pdf_curve_rows(pdf),
    )
    ks = None
    if config.mc_samples > 0:
        stream = RandomStream(config.seed)
        edges = default_bin_edges(pdf, config.bins)
        if config.jitter and config.mode.get("type") == "timing_error":
            hist, samples = _jitter_histogram(plan, config, edges, stream)
        else:
            hist = mc_fidelity_histogram(kraus_for_mc, config.mc_samples, edges, stream)
            samples = None
        ks = ks_distance(hist if samples is None else samples, pdf)
        files["histogram"] = "histogram.csv"
        write_csv(
            os.path.join(config.output_dir, "histogram.csv"),
            ["bin_lo", "bin_hi", "count", "normalized_density"],
            histogram_rows(hist),
        )
    record = _result_record(config, plan, pdf, avg, ks, files)
    write_json(os.path.join(config.output_dir, "result.json"), record)
    elapsed = time.perf_counter() - started
    ks_text = "n/a" if ks is None else f"{ks:.5f}"
    print(
        f"pdf {config.protocol.get('kind')} N={config.n_sites} {config.scenario}: "
        f"t_read={plan.t_read:.9g} <F>={avg:.9f} support=[{pdf.support[0]:.9f}, "
        f"{pdf.support[1]:.9f}] ks={ks_text} [{elapsed:.2f}s]"
    )
    return record


def _jitter_histogram(plan: ReadoutPlan, config: ExperimentConfig, edges, stream):
    """MC with per-sample read-out jitter, uniform in the timing window."""
    fraction = float(config.mode.get("fraction", DEFAULT_TIMING_FRACTION))
    rng = stream.generator()
    n = config.mc_samples
    node_times = plan.t_opt * np.linspace(1.0 - fraction, 1.0 + fraction, JITTER_MIX_NODES)
    counts = np.zeros(edges.size - 1, dtype=np.int64)
    node_of = rng.integers(0, JITTER_MIX_NODES, size=n)
    for node, t in enumerate(node_times):
        n_here = int((node_of == node).sum())
        if n_here == 0:
            continue
        tab = amplitudes_at(plan.spec, float(t))
        kraus = kraus_for_scenario(tab, plan.scenario, config.n_sites)
        hist = mc_fidelity_histogram(kraus, n_here, edges, stream.substream(node + 1))
        counts += hist.counts
    return Histogram(edges, counts, n), None


def cmd_certify(n_max: int, output_dir: str | None) -> dict:
    started = time.perf_counter()
    report = run_certification(n_max=n_max)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        write_json(os.path.join(output_dir, "certification.json"), report)
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status}  {check['name']:40s} max_error={check['max_error']:.3e}")
    print(
        f"certification {'passed' if report['all_passed'] else 'FAILED'} "
        f"(N up to {n_max}) [{time.perf_counter() - started:.2f}s]"
    )
    if not report["all_passed"]:
        raise CertificationError("one or more certification checks failed")
    return report


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spintransfer",
        description="Spin-chain state-transfer fidelity distributions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("tune", "locate the optimal read-out time (optionally with aux field)"),
        ("pdf", "emit analytic pdf and Monte Carlo histogram data files"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment config file")
        p.add_argument("--protocol", choices=["weak", "barrier", "perfect"])
        p.add_argument("--n-sites", type=int, dest="n_sites")
        p.add_argument(
            "--scenario",
            choices=[s.value for s in Scenario],
        )
        p.add_argument(
            "--mode",
            help="at_optimal | timing_error[:fraction] | target_avg:<value>",
        )
        p.add_argument("--j0", type=float, help="weak-protocol end coupling")
        p.add_argument("--h0", type=float, help="barrier-protocol field strength")
        p.add_argument("--seed", type=int)
        p.add_argument("--mc-samples", type=int, dest="mc_samples")
        p.add_argument("--bins", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--aux-field", choices=["on", "off"], dest="aux_field")
        p.add_argument("--window", help="time window lo:hi for the tuning scan")
        p.add_argument("--grid", type=int, help="tuning scan grid points")
        p.add_argument(
            "--jitter",
            action="store_true",
            help="timing_error mode: uniform read-out jitter instead of a fixed offset",
        )
    p = sub.add_parser("certify", help="run the brute-force cross-check suite")
    p.add_argument("--n-max", type=int, default=10, dest="n_max")
    p.add_argument("--out", help="directory for certification.json")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "certify":
            cmd_certify(args.n_max, args.out)
        else:
            config = load_config(args)
            if args.command == "tune":
                cmd_tune(config)
            else:
                cmd_pdf(config)
        return EXIT_OK
    except RangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TARGET
    except (ParameterError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except CertificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFY
    except (NumericError, ModelError, SpinTransferError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
