"""Batch front end: JSON config in, CSV / validation report out.

Config schema (complex numbers are [re, im] pairs):

    {
      "task": "corrections" | "evolve" | "steadystate" | "validate",
      "system": {"tls": {"omega0": 1.0}} or {"hamiltonian": [[[re,im], ...], ...]},
      "couplings": [{"pauli": {"x":..,"y":..,"z":..} or "operator": [...], "bath": "b1"}],
      "baths": {"b1": {"type":"ohmic","gamma_c":1.0,"cutoff":50.0}
                       or {"type":"discrete","modes":[[W,g],...]}},
      "beta": 1.0,
      "lambda": 0.05,
      "sweep": {"parameter": "omega0", "values": [...]},        # corrections
      "evolve": {"initial_state": [...], "times": [...],
                 "equations": ["cumulant","davies","redfield"]},
      "validate": {"skip_oracle": false, "break_detailed_balance": false},
      "quadrature": {"abs_tol": 1e-9, "rel_tol": 1e-8},
      "output": "out.csv"
    }

CSV output is byte-deterministic: header line, comma separated, 12 significant
digits, LF line endings, fixed row order.  Exit status is 0 iff every executed
check passed (validate) or the run completed (other tasks).
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._quad import DEFAULT_QUAD, QuadratureConfig
from .bath import DiscreteBath, OhmicBath
from .corrections import (
    build_upsilon_table,
    kossakowski_custom,
    kossakowski_redfield,
    upsilon_steady_offdiag,
)
from .errors import DetailedBalanceError, MeanforceError, NumericsError, ValidationError
from .generators import (
    build_davies_generator,
    build_redfield_generator,
    cumulant_map,
    propagate,
    steady_state_of_generator,
    thermal_state,
)
from .operators import (
    assemble_correction,
    bohr_decompose,
    pauli_coupling,
    spectral_decompose,
    tls_hamiltonian,
)
from .validation import (
    SWEEP_KINDS,
    SWEEP_NAMES,
    CheckResult,
    ReferenceCase,
    qubit_sweep_point,
    run_checks,
)

FMT = "%.12g"


def _fmt(x):
    return FMT % float(x)


def _parse_complex_matrix(obj, path):
    try:
        arr = np.array([[complex(e[0], e[1]) for e in row] for row in obj])
    except (TypeError, IndexError):
        raise ValidationError(f"{path}: expected a nested list of [re, im] pairs") from None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{path}: matrix must be square")
    return arr


@dataclass
class RunConfig:
    task: str
    beta: float
    lam: float
    h0: np.ndarray
    couplings: list                 # [(operator, bath_id)]
    baths: dict                     # id -> bath model
    omega0: float = None            # set for tls systems
    sweep_values: list = field(default_factory=list)
    evolve_times: list = field(default_factory=list)
    evolve_equations: list = field(default_factory=lambda: ["cumulant", "davies"])
    initial_state: np.ndarray = None
    skip_oracle: bool = False
    break_detailed_balance: bool = False
    quad: QuadratureConfig = DEFAULT_QUAD
    output: str = "out.csv"

    @property
    def is_tls(self):
        return self.omega0 is not None

    def bath_list(self):
        return [self.baths[bid] for _, bid in self.couplings]

    def jump_list(self):
        dec = spectral_decompose(self.h0)
        return [bohr_decompose(dec, op, index=i) for i, (op, _) in enumerate(self.couplings)]


def parse_config(data):
    """Validate a config dict into a RunConfig; error messages carry field paths."""
    if not isinstance(data, dict):
        raise ValidationError("config: top level must be an object")

    task = data.get("task")
    if task not in ("corrections", "evolve", "steadystate", "validate"):
        raise ValidationError(f"task: expected one of corrections/evolve/steadystate/validate, got {task!r}")

    beta = data.get("beta")
    if not isinstance(beta, (int, float)) or beta <= 0:
        raise ValidationError("beta: must be a positive number")
    lam = data.get("lambda", 0.05)
    if not isinstance(lam, (int, float)) or lam < 0:
        raise ValidationError("lambda: must be a nonnegative number")

    system = data.get("system")
    omega0 = None
    if not isinstance(system, dict):
        raise ValidationError("system: must be an object with 'tls' or 'hamiltonian'")
    if "tls" in system:
        omega0 = system["tls"].get("omega0")
        if not isinstance(omega0, (int, float)) or omega0 <= 0:
            raise ValidationError("system.tls.omega0: must be a positive number")
        h0 = tls_hamiltonian(float(omega0))
    elif "hamiltonian" in system:
        h0 = _parse_complex_matrix(system["hamiltonian"], "system.hamiltonian")
        if np.abs(h0 - h0.conj().T).max() > 1e-12 * max(1.0, np.abs(h0).max()):
            raise ValidationError("system.hamiltonian: matrix is not Hermitian")
    else:
        raise ValidationError("system: needs either 'tls' or 'hamiltonian'")

    baths_cfg = data.get("baths")
    if not isinstance(baths_cfg, dict) or not baths_cfg:
        raise ValidationError("baths: must be a non-empty object")
    baths = {}
    for bid, b in baths_cfg.items():
        path = f"baths.{bid}"
        kind = b.get("type")
        if kind == "ohmic":
            gc, wc = b.get("gamma_c"), b.get("cutoff")
            if not isinstance(gc, (int, float)) or gc < 0:
                raise ValidationError(f"{path}.gamma_c: must be a nonnegative number")
            if not isinstance(wc, (int, float)) or wc <= 0:
                raise ValidationError(f"{path}.cutoff: must be a positive number")
            baths[bid] = OhmicBath(beta=float(beta), coupling=float(gc), cutoff=float(wc))
        elif kind == "discrete":
            modes = b.get("modes")
            if not isinstance(modes, list) or not modes:
                raise ValidationError(f"{path}.modes: must be a non-empty list of [frequency, coupling]")
            try:
                baths[bid] = DiscreteBath(beta=float(beta), modes=tuple((m[0], m[1]) for m in modes))
            except (ValidationError, TypeError, IndexError) as exc:
                raise ValidationError(f"{path}.modes: {exc}") from None
        else:
            raise ValidationError(f"{path}.type: expected 'ohmic' or 'discrete', got {kind!r}")

    couplings_cfg = data.get("couplings")
    if not isinstance(couplings_cfg, list) or not couplings_cfg:
        raise ValidationError("couplings: must be a non-empty list")
    couplings = []
    for i, c in enumerate(couplings_cfg):
        path = f"couplings[{i}]"
        if "pauli" in c:
            p = c["pauli"]
            op = pauli_coupling(p.get("x", 0.0), p.get("y", 0.0), p.get("z", 0.0))
            if h0.shape[0] != 2:
                raise ValidationError(f"{path}.pauli: pauli couplings need a two-level system")
        elif "operator" in c:
            op = _parse_complex_matrix(c["operator"], f"{path}.operator")
        else:
            raise ValidationError(f"{path}: needs 'pauli' or 'operator'")
        bid = c.get("bath")
        if bid not in baths:
            raise ValidationError(f"{path}.bath: unknown bath id {bid!r}")
        if op.shape[0] != h0.shape[0]:
            raise ValidationError(f"{path}: operator dimension {op.shape[0]} != system dimension {h0.shape[0]}")
        couplings.append((op, bid))

    quad = DEFAULT_QUAD
    if "quadrature" in data:
        q = data["quadrature"]
        quad = QuadratureConfig(
            abs_tol=q.get("abs_tol", DEFAULT_QUAD.abs_tol),
            rel_tol=q.get("rel_tol", DEFAULT_QUAD.rel_tol),
            limit=q.get("limit", DEFAULT_QUAD.limit),
        )

    cfg = RunConfig(
        task=task, beta=float(beta), lam=float(lam), h0=h0,
        couplings=couplings, baths=baths, omega0=omega0,
        quad=quad, output=data.get("output", "out.csv"),
    )

    sweep = data.get("sweep")
    if sweep is not None:
        if sweep.get("parameter") != "omega0":
            raise ValidationError("sweep.parameter: only 'omega0' sweeps are supported")
        vals = sweep.get("values")
        if not isinstance(vals, list) or not all(isinstance(v, (int, float)) and np.isfinite(v) and v > 0 for v in vals):
            raise ValidationError("sweep.values: must be a list of positive finite numbers")
        cfg.sweep_values = [float(v) for v in vals]
    elif task == "corrections":
        cfg.sweep_values = [float(v) for v in np.linspace(0.1, 5.0, 20)]

    if task == "evolve":
        ev = data.get("evolve")
        if not isinstance(ev, dict):
            raise ValidationError("evolve: required for the evolve task")
        times = ev.get("times")
        if not isinstance(times, list) or not all(isinstance(t, (int, float)) and t >= 0 for t in times):
            raise ValidationError("evolve.times: must be a list of nonnegative numbers")
        cfg.evolve_times = sorted(float(t) for t in times)
        eqs = ev.get("equations", ["cumulant", "davies"])
        for e in eqs:
            if e not in ("cumulant", "davies", "redfield"):
                raise ValidationError(f"evolve.equations: unknown equation kind {e!r}")
        cfg.evolve_equations = list(eqs)
        state = ev.get("initial_state")
        if state is None:
            raise ValidationError("evolve.initial_state: required")
        rho0 = _parse_complex_matrix(state, "evolve.initial_state")
        if abs(np.trace(rho0) - 1.0) > 1e-10:
            raise ValidationError("evolve.initial_state: trace must be 1")
        cfg.initial_state = rho0

    if "validate" in data:
        v = data["validate"]
        cfg.skip_oracle = bool(v.get("skip_oracle", False))
        cfg.break_detailed_balance = bool(v.get("break_detailed_balance", False))

    return cfg


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


# --- corrections task ----------------------------------------------------------


def _sweep_point(payload):
    """One sweep point; module-level for the worker pool."""
    bw0, beta, gamma_c, cutoff, abs_tol, rel_tol = payload
    quad = QuadratureConfig(abs_tol=abs_tol, rel_tol=rel_tol)
    bath = OhmicBath(beta=beta, coupling=gamma_c, cutoff=cutoff)
    try:
        return bw0, qubit_sweep_point(bath, bw0 / beta, gamma_c, quad), None
    except NumericsError as exc:
        return bw0, None, str(exc)


def run_corrections(cfg, threads=1):
    """Qubit coefficient sweep (TLS + single Ohmic bath) or a full coefficient table."""
    header = ["sweep_value", "coefficient_name", "correction_kind", "value_re", "value_im"]
    rows = []
    failures = []
    if cfg.is_tls and len(cfg.couplings) == 1 \
            and isinstance(cfg.bath_list()[0], OhmicBath):
        bath = cfg.bath_list()[0]
        payloads = [
            (bw0, cfg.beta, bath.coupling, bath.cutoff, cfg.quad.abs_tol, cfg.quad.rel_tol)
            for bw0 in cfg.sweep_values
        ]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_sweep_point, payloads))
        else:
            results = [_sweep_point(p) for p in payloads]
        for bw0, vals, err in results:
            for kind in SWEEP_KINDS:
                for name in SWEEP_NAMES:
                    if vals is None:
                        rows.append([_fmt(bw0), name, kind, "nan", "nan"])
                    else:
                        v = vals[(kind, name)]
                        rows.append([_fmt(bw0), name, kind, _fmt(v), _fmt(0.0)])
            if err:
                failures.append(f"sweep value {bw0:g}: {err}")
    else:
        jumps = cfg.jump_list()
        baths = cfg.bath_list()
        for kind, table_kind, eq in (("mf", "mean_force", None),
                                     ("dyn", "dynamical", None),
                                     ("st_redfield", "steady_state", "redfield")):
            table = build_upsilon_table(table_kind, jumps, baths,
                                        equation=eq or "redfield", config=cfg.quad)
            for (a, b, w, wp), v in sorted(table.entries.items()):
                name = f"Y[{a};{b};{_fmt(w)};{_fmt(wp)}]"
                rows.append(["0", name, kind, _fmt(np.real(v)), _fmt(np.imag(v))])
    _write_csv(cfg.output, header, rows)
    for msg in failures:
        print(f"warning: {msg}", file=sys.stderr)
    return 0


# --- evolve task ----------------------------------------------------------------


def run_evolve(cfg):
    jumps = cfg.jump_list()
    baths = cfg.bath_list()
    d = cfg.h0.shape[0]
    header = ["t", "equation"]
    for i in range(d):
        for j in range(d):
            header += [f"rho_{i}{j}_re", f"rho_{i}{j}_im"]
    header += ["trace_re", "min_eigenvalue"]

    generators = {}
    if "davies" in cfg.evolve_equations:
        generators["davies"] = build_davies_generator(cfg.h0, jumps, baths, cfg.lam, cfg.quad)
    if "redfield" in cfg.evolve_equations:
        generators["redfield"] = build_redfield_generator(cfg.h0, jumps, baths, cfg.lam, config=cfg.quad)

    rows = []
    for t in cfg.evolve_times:
        for eq in cfg.evolve_equations:
            if eq == "cumulant":
                state = propagate(cumulant_map(cfg.h0, jumps, baths, cfg.lam, t, cfg.quad),
                                  cfg.initial_state)
            else:
                state = propagate(generators[eq], cfg.initial_state, t)
            herm = 0.5 * (state + state.conj().T)
            row = [_fmt(t), eq]
            for i in range(d):
                for j in range(d):
                    row += [_fmt(state[i, j].real), _fmt(state[i, j].imag)]
            row += [_fmt(np.trace(state).real), _fmt(np.linalg.eigvalsh(herm).min())]
            rows.append(row)
    _write_csv(cfg.output, header, rows)
    return 0


# --- steadystate task -------------------------------------------------------------


def run_steadystate(cfg):
    jumps = cfg.jump_list()
    baths = cfg.bath_list()
    d = cfg.h0.shape[0]
    header = ["kind"]
    for i in range(d):
        for j in range(d):
            header += [f"rho_{i}{j}_re", f"rho_{i}{j}_im"]

    states = {}
    states["davies"] = steady_state_of_generator(
        build_davies_generator(cfg.h0, jumps, baths, cfg.lam, cfg.quad))
    states["redfield"] = steady_state_of_generator(
        build_redfield_generator(cfg.h0, jumps, baths, cfg.lam, config=cfg.quad))
    hmf = assemble_correction(
        build_upsilon_table("mean_force", jumps, baths, config=cfg.quad), jumps)
    states["mean_force_gibbs"] = thermal_state(cfg.h0 + cfg.lam**2 * hmf, cfg.beta)

    rows = []
    for kind in ("davies", "redfield", "mean_force_gibbs"):
        row = [kind]
        for i in range(d):
            for j in range(d):
                row += [_fmt(states[kind][i, j].real), _fmt(states[kind][i, j].imag)]
        rows.append(row)
    _write_csv(cfg.output, header, rows)
    return 0


# --- validate task ----------------------------------------------------------------


def _broken_balance_check(cfg):
    bath = cfg.bath_list()[0]
    base = kossakowski_redfield(bath, cfg.quad)

    def bad_k(a, b, w, wp):
        return base.K(a, b, w, wp) * (1.1 if w > 0 else 1.0)

    spec = kossakowski_custom(cfg.beta, bad_k, base.upsilon_dyn)
    w0 = cfg.omega0 or 1.0
    try:
        upsilon_steady_offdiag(spec, bath, w0, 0.0, config=cfg.quad)
    except DetailedBalanceError as exc:
        return CheckResult("steady_coherence_detailed_balance_precondition", False, 1.0, 0.0,
                           f"rejected as required: {exc}")
    return CheckResult("steady_coherence_detailed_balance_precondition", False, 1.0, 0.0,
                       "skewed Kossakowski diagonal was not rejected")


def read_corrections_csv(path):
    """Parse a corrections CSV back into the (bw0, kind, name) -> value map."""
    rows = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["sweep_value", "coefficient_name", "correction_kind"]:
            raise ValidationError(f"{path}: not a corrections CSV")
        for line in fh:
            sweep, name, kind, re, _ = line.strip().split(",")
            rows[(float(sweep), kind, name)] = float(re)
    return rows


def run_validate(cfg):
    case = ReferenceCase(
        omega0=cfg.omega0 or 1.0,
        beta=cfg.beta,
        cutoff=cfg.bath_list()[0].cutoff if isinstance(cfg.bath_list()[0], OhmicBath) else 50.0,
        coupling_strength=cfg.bath_list()[0].coupling if isinstance(cfg.bath_list()[0], OhmicBath) else 1.0,
        config=cfg.quad,
    )
    if cfg.break_detailed_balance:
        # injected-fault mode: only the detailed-balance precondition is probed
        results = [_broken_balance_check(cfg)]
    else:
        results = run_checks(case, skip_oracle=cfg.skip_oracle)
    lines = [r.line() for r in results]
    ok = all(r.passed for r in results)
    lines.append(f"RESULT: {'PASS' if ok else 'FAIL'} ({sum(r.passed for r in results)}/{len(results)} checks)")
    report = "\n".join(lines) + "\n"
    with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report)
    print(report, end="")
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="meanforce",
        description="Hamiltonian-correction and master-equation sweeps for open quantum systems",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task in ("corrections", "evolve", "steadystate", "validate"):
        p = sub.add_parser(task)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output path (overrides config)")
        p.add_argument("--tol-abs", type=float, help="quadrature absolute tolerance override")
        p.add_argument("--tol-rel", type=float, help="quadrature relative tolerance override")
        p.add_argument("--threads", type=int, default=1, help="parallel sweep width")
        if task == "validate":
            p.add_argument("--skip-oracle", action="store_true",
                           help="skip the exact-diagonalisation scaling check")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except (MeanforceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.task != args.task:
        print(f"error: config task {cfg.task!r} does not match subcommand {args.task!r}",
              file=sys.stderr)
        return 2
    if args.out:
        cfg.output = args.out
    if args.tol_abs or args.tol_rel:
        cfg.quad = QuadratureConfig(
            abs_tol=args.tol_abs or cfg.quad.abs_tol,
            rel_tol=args.tol_rel or cfg.quad.rel_tol,
            limit=cfg.quad.limit,
        )
    if getattr(args, "skip_oracle", False):
        cfg.skip_oracle = True

    try:
        if cfg.task == "corrections":
            return run_corrections(cfg, threads=args.threads)
        if cfg.task == "evolve":
            return run_evolve(cfg)
        if cfg.task == "steadystate":
            return run_steadystate(cfg)
        return run_validate(cfg)
    except MeanforceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
