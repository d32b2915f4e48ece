"""Command-line front end.

Exit status: 0 success, 1 invalid input, 2 numerical failure.  Failures
print a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from nhlab import __version__
from nhlab.audit import (
    DEFAULT_POLICY,
    DEFAULT_SIZES,
    EXACT_CELL_CAP,
    TOL_PAIR,
    pbc_vs_obc,
    reality_verdict,
    resolve_policy,
    size_sweep,
    spectrum_report,
    symmetry_audit,
)
from nhlab.defect import (
    ZERO_SCAN_WINDOW,
    closed_form_ingap_state,
    localization_profile,
    multiplicity_report,
    zero_mode_scan,
)
from nhlab.errors import GapClosedError, NHLabError
from nhlab.io import (
    SchemaError,
    check_writable,
    dumps,
    emit_plot_data,
    envelope,
    load_eigenvalues,
    to_json,
    write_atomic,
)
from nhlab.kernel.matrix import DEFAULT_TOLERANCES
from nhlab.model import ModelParams, ep_encirclement, open_chain
from nhlab.topology import (
    BIORTHOGONAL_THRESHOLD,
    GAUGES,
    berry_phase_closed,
    berry_phase_open_2pi,
    hermitian_consistency,
    pauli_trajectory,
)

COMMANDS = ("spectrum", "sweep", "berry", "winding", "trajectory", "defect", "audit", "certify", "pbc-obc")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class ValidationError(NHLabError):
    pass


@dataclass
class JobConfig:
    command: str
    params: ModelParams | None = None
    n_cells: int | None = None
    sizes: tuple[int, ...] = DEFAULT_SIZES
    kpoints: int = 4096
    span: str = "4pi"
    gauge: str = "first-component-real"
    seed: int = 0
    rescale_seed: int | None = None
    policy: tuple[str, ...] = DEFAULT_POLICY
    tol_pair: float = TOL_PAIR
    energy: Fraction | complex = Fraction(0)
    window: float | None = None
    zero_scan: bool = False
    ingap: int | None = None
    input_path: str | None = None
    out: str | None = None
    fmt: str = "json"
    extra: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = asdict(self)
        d["params"] = None if self.params is None else {
            k: str(getattr(self.params, k)) for k in ("v", "r", "gamma")
        }
        d["energy"] = str(self.energy)
        d["policy"] = list(self.policy)
        d["sizes"] = list(self.sizes)
        d["defaults"] = {
            "residual_double": DEFAULT_TOLERANCES.residual_double,
            "residual_quad": DEFAULT_TOLERANCES.residual_quad,
            "max_iter_per_eigenvalue": DEFAULT_TOLERANCES.max_iter_per_eigenvalue,
            "exact_dim_cap": DEFAULT_TOLERANCES.exact_dim_cap,
            "exact_cell_cap": EXACT_CELL_CAP,
            "biorthogonal_threshold": BIORTHOGONAL_THRESHOLD,
            "zero_scan_window": ZERO_SCAN_WINDOW,
            "trajectory_projection": "real parts",
        }
        del d["extra"]
        return d


def parse_number(text: str) -> Fraction:
    """Finite decimal or rational literal ("0.52", "13/25", "1e-3") as an exact rational."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a finite decimal or p/q rational: {text!r}") from None


def parse_energy(text: str):
    t = text.strip()
    if "j" in t:
        try:
            return complex(t)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None
    return parse_number(t)


def parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers: {text!r}") from None
    if not sizes or any(n < 1 for n in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def parse_span(text: str) -> str:
    t = text.strip().lower().replace("π", "pi")
    if t not in ("2pi", "4pi"):
        raise argparse.ArgumentTypeError("span must be 2pi or 4pi")
    return t


def parse_policy(text: str) -> tuple[str, ...]:
    try:
        return resolve_policy(text)
    except NHLabError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(
        prog="nhlab",
        description="Spectral topology of the two-band gain/loss lattice (batch analyses, "
        "JSON/CSV output). Environment: NHLAB_PRECISION overrides the default precision policy.",
        formatter_class=fmt,
    )
    parser.add_argument("--version", action="version", version=f"nhlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model(sp, need=True):
        sp.add_argument("--v", type=parse_number, required=need, help="intra-cell hopping")
        sp.add_argument("--r", type=parse_number, required=need, help="inter-cell hopping scale")
        sp.add_argument("--gamma", type=parse_number, required=need, help="gain/loss rate (>= 0)")

    def output(sp):
        sp.add_argument("--out", default=None, help="output file (stdout if omitted)")
        sp.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")

    def policy(sp):
        sp.add_argument(
            "--precision",
            type=parse_policy,
            default=None,
            help="precision policy, a comma chain of double,quad,exact "
            f"(default {','.join(DEFAULT_POLICY)} unless NHLAB_PRECISION is set)",
        )
        sp.add_argument(
            "--tol-pair", type=float, default=TOL_PAIR, help="audit tolerance relative to spectral diameter"
        )

    def add(name, help_):
        return sub.add_parser(name, help=help_, formatter_class=fmt)

    sp = add("spectrum", "open-chain spectrum with symmetry audit")
    model(sp)
    sp.add_argument("--cells", type=int, required=True, help="number of unit cells N")
    policy(sp)
    output(sp)

    sp = add("sweep", "spectra over several chain sizes")
    model(sp)
    sp.add_argument("--sizes", type=parse_sizes, default=DEFAULT_SIZES, help="comma-separated N values")
    policy(sp)
    output(sp)

    sp = add("berry", "biorthogonal Berry phase and winding number")
    model(sp)
    sp.add_argument("--span", type=parse_span, default="4pi", help="4pi: closed loop; 2pi: open loop with a gauge")
    sp.add_argument("--kpoints", type=int, default=4096, help="k grid size (multiple of 4, >= 64)")
    sp.add_argument("--gauge", choices=GAUGES, default="first-component-real", help="gauge rule for span 2pi")
    sp.add_argument("--seed", type=int, default=0, help="seed of the random-seeded gauge")
    sp.add_argument("--rescale-seed", type=int, default=None, help="random node rescaling for span 4pi")
    output(sp)

    sp = add("winding", "exceptional-point encirclement, discriminant loop and windings")
    model(sp)
    sp.add_argument("--kpoints", type=int, default=4096, help="k grid size")
    output(sp)

    sp = add("trajectory", "Pauli expectation trajectory over the 4pi transport")
    model(sp)
    sp.add_argument("--kpoints", type=int, default=4096, help="k grid size")
    output(sp)

    sp = add("defect", "multiplicities, Jordan chains, in-gap state and zero-mode scan")
    model(sp)
    sp.add_argument("--cells", type=int, default=12, help="number of unit cells N")
    sp.add_argument("--energy", type=parse_energy, default=Fraction(0), help="target energy E0")
    sp.add_argument(
        "--window", type=float, default=None, help="cluster window (floating modes); default 10*residual+1e-8"
    )
    sp.add_argument(
        "--precision", choices=("double", "quad", "exact"), default="exact",
        help="arithmetic for the multiplicity report",
    )
    sp.add_argument(
        "--ingap", type=int, choices=(1, -1), default=None,
        help="also build the closed-form in-gap state with this sign",
    )
    sp.add_argument("--zero-scan", action="store_true", help="run the zero-mode scan over --sizes instead")
    sp.add_argument("--sizes", type=parse_sizes, default=(10, 20, 40), help="sizes for --zero-scan")
    output(sp)

    sp = add("audit", "symmetry audit of an external or emitted spectrum")
    sp.add_argument("--in", dest="input_path", required=True, help="JSON file (emitted report or list of [re, im])")
    sp.add_argument("--tol-pair", type=float, default=TOL_PAIR, help="audit tolerance relative to spectral diameter")
    output(sp)

    sp = add("certify", "exact Sturm-count reality certificate")
    model(sp)
    sp.add_argument("--cells", type=int, required=True, help=f"number of unit cells N (<= {EXACT_CELL_CAP})")
    output(sp)

    sp = add("pbc-obc", "periodic versus open spectra")
    model(sp)
    sp.add_argument("--cells", type=int, required=True, help="number of unit cells N (>= 3)")
    policy(sp)
    output(sp)
    return parser


def config_from_args(ns: argparse.Namespace) -> JobConfig:
    a = vars(ns)
    params = None
    if a.get("v") is not None:
        try:
            params = ModelParams(a["v"], a["r"], a["gamma"])
        except NHLabError as exc:
            raise ValidationError(str(exc)) from None
    cfg = JobConfig(command=ns.command, params=params, out=a.get("out"), fmt=a.get("fmt", "json"))
    for key in ("sizes", "kpoints", "span", "gauge", "seed", "rescale_seed", "tol_pair", "energy",
                "window", "zero_scan", "ingap", "input_path"):
        if a.get(key) is not None:
            setattr(cfg, key, a[key])
    if "cells" in a:
        cfg.n_cells = a["cells"]
    prec = a.get("precision")
    if ns.command == "defect":
        cfg.policy = (prec,)
    else:
        cfg.policy = resolve_policy(prec)
    _validate(cfg)
    return cfg


def _validate(cfg: JobConfig) -> None:
    if cfg.n_cells is not None and cfg.n_cells < 1:
        raise ValidationError(f"--cells must be >= 1, got {cfg.n_cells}")
    if cfg.command == "pbc-obc" and cfg.n_cells < 3:
        raise ValidationError("pbc-obc needs --cells >= 3")
    if cfg.command == "certify" and cfg.n_cells > EXACT_CELL_CAP:
        raise ValidationError(f"certify is capped at {EXACT_CELL_CAP} cells; use spectrum --precision quad")
    if cfg.command in ("berry", "winding", "trajectory"):
        if cfg.kpoints < 64 or cfg.kpoints % 4:
            raise ValidationError("--kpoints must be a multiple of 4 and >= 64")
        if cfg.params.r == 0:
            raise ValidationError("topology commands need r != 0")
    if cfg.command == "defect" and cfg.policy == ("exact",) and isinstance(cfg.energy, complex):
        raise ValidationError("exact defect analysis needs a rational --energy (p/q or decimal)")
    if cfg.tol_pair <= 0:
        raise ValidationError("--tol-pair must be positive")
    if cfg.window is not None and cfg.window <= 0:
        raise ValidationError("--window must be positive")
    if cfg.out is not None:
        try:
            check_writable(cfg.out)
        except NHLabError as exc:
            raise ValidationError(str(exc)) from None


def _compute(cfg: JobConfig):
    """Run the job; returns (report object, JSON result)."""
    p = cfg.params
    c = cfg.command
    if c == "spectrum":
        rep = spectrum_report(p, cfg.n_cells, cfg.policy, tol_pair=cfg.tol_pair)
        return rep, to_json(rep)
    if c == "sweep":
        rep = size_sweep(p, cfg.sizes, cfg.policy, tol_pair=cfg.tol_pair)
        return rep, to_json(rep)
    if c == "berry":
        if cfg.span == "4pi":
            rep = berry_phase_closed(p, cfg.kpoints, rescale_seed=cfg.rescale_seed)
        else:
            rep = berry_phase_open_2pi(p, cfg.gauge, cfg.kpoints, seed=cfg.seed)
        return rep, to_json(rep)
    if c == "winding":
        enc = ep_encirclement(p, cfg.kpoints)
        result = {"encirclement": to_json(enc)}
        if enc.encircled is not None:
            result["closed"] = to_json(berry_phase_closed(p, cfg.kpoints))
            if p.gamma == 0 and abs(p.v) != abs(p.r):
                result["hermitian_consistency"] = to_json(hermitian_consistency(p, cfg.kpoints))
        return enc, result
    if c == "trajectory":
        rep = pauli_trajectory(p, cfg.kpoints)
        return rep, to_json(rep)
    if c == "defect":
        return _defect(cfg)
    if c == "audit":
        return _audit(cfg)
    if c == "certify":
        rep = reality_verdict(p, cfg.n_cells)
        return rep, to_json(rep)
    if c == "pbc-obc":
        rep = pbc_vs_obc(p, cfg.n_cells, cfg.policy, tol_pair=cfg.tol_pair)
        return rep, to_json(rep)
    raise ValidationError(f"unknown command {c!r}")


def _defect(cfg: JobConfig):
    p = cfg.params
    if cfg.zero_scan:
        rows = zero_mode_scan(p, cfg.sizes, window=cfg.window or ZERO_SCAN_WINDOW)
        return rows, {"zero_mode_scan": to_json(rows)}
    mode = cfg.policy[0]
    h = open_chain(p, cfg.n_cells, mode)
    rep = multiplicity_report(h, cfg.energy, cfg.window)
    result = {"multiplicity": to_json(rep)}
    if cfg.ingap is not None:
        state = closed_form_ingap_state(p, cfg.ingap, cfg.n_cells, mode)
        result["ingap_state"] = to_json(state)
        result["localization"] = to_json(localization_profile(state.vector))
    return rep, result


def _audit(cfg: JobConfig):
    try:
        with open(cfg.input_path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {cfg.input_path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{cfg.input_path} is not valid JSON: {exc}") from None
    sets = load_eigenvalues(doc)
    audits = []
    for path, hi, lo in sets:
        a = symmetry_audit(hi if lo is None else hi + lo, cfg.tol_pair)
        audits.append({"source": path, "n_eigenvalues": len(hi), "audit": to_json(a)})
    result = {"audits": audits, "passed": all(x["audit"]["passed"] for x in audits)}
    if len(audits) == 1:
        result["audit"] = audits[0]["audit"]
    return None, result


def run_job(cfg: JobConfig, *, timestamp: str | None = None, stdout=None) -> int:
    """Execute a validated job and write its artifact; returns the exit status."""
    stdout = stdout or sys.stdout
    try:
        report, result = _compute(cfg)
        if cfg.fmt == "csv" and report is not None:
            text = emit_plot_data(report, "csv")
        else:
            text = dumps(envelope(result, cfg.echo(), timestamp))
        if cfg.out:
            write_atomic(cfg.out, text)
        else:
            stdout.write(text)
    except (ValidationError, SchemaError, GapClosedError) as exc:
        return _fail(EXIT_INVALID, exc)
    except NHLabError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    return EXIT_OK


def _fail(code: int, exc: Exception) -> int:
    record = {
        "error": {
            "kind": type(exc).__name__,
            "message": str(exc),
            "exit_code": code,
        }
    }
    if getattr(exc, "path", None):
        record["error"]["path"] = exc.path
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        cfg = config_from_args(ns)
    except ValidationError as exc:
        return _fail(EXIT_INVALID, exc)
    return run_job(cfg)


if __name__ == "__main__":
    sys.exit(main())
