"""Command-line front end.

Subcommands: ``rate``, ``threshold``, ``composable``, ``sweep`` and
``mc-validate``. Output is CSV (default) or JSON, to stdout or ``--out``.
CSV output starts with a ``#`` comment line carrying the resolved job so the
run can be repeated exactly.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 Monte-Carlo
validation failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import closed_forms, montecarlo
from .canonical_forms import CanonicalForm
from .composable import ComposableConfig, optimize
from .errors import DomainError, NumericalError
from .rate_engine import (
    ASYMPTOTIC_MU,
    ProtocolConfig,
    asymptotic_rate,
    form_from_descriptor,
    security_threshold,
    xi_to_omega,
)

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_MC_FAIL = 0, 1, 2, 3
SWEEP_VARS = ("L_db", "tau", "theta", "xi", "mu", "N")
SWEEP_MODES = ("asymptotic", "closed-form", "composable", "threshold")
DIGITS = 12


# --- job specification ------------------------------------------------------

@dataclass(frozen=True)
class JobSpec:
    """A fully resolved command: name plus sorted ``key=value`` parameters."""

    command: str
    params: dict = field(default_factory=dict)

    def to_string(self) -> str:
        items = " ".join(f"{k}={shlex.quote(str(v))}" for k, v in sorted(self.params.items()))
        return f"{self.command} {items}".strip()

    @classmethod
    def from_string(cls, text: str) -> "JobSpec":
        tokens = shlex.split(text)
        if not tokens:
            raise DomainError("empty job specification")
        params = {}
        for tok in tokens[1:]:
            key, eq, value = tok.partition("=")
            if not eq:
                raise DomainError(f"bad job parameter {tok!r}")
            params[key] = value
        return cls(tokens[0], params)


def _jobspec(args: argparse.Namespace) -> JobSpec:
    skip = {"command", "func", "config", "out"}
    params = {k: _fmt(v) if isinstance(v, float) else str(v)
              for k, v in vars(args).items() if k not in skip and v is not None}
    return JobSpec(args.command, params)


# --- output ------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{DIGITS}g}"
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(f"{float(x):.{DIGITS}g}")
        return x if math.isfinite(x) else None
    return x


def render(rows: list[dict], columns: list[str], job: JobSpec, fmt: str) -> str:
    """Serialise ``rows`` in column order, CSV with a job comment line or JSON."""
    if fmt == "json":
        doc = {"job": job.to_string(),
               "rows": [{c: _json_value(r.get(c)) for c in columns} for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# {job.to_string()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- shared helpers -----------------------------------------------------------

def _protocol(args, mu=None) -> ProtocolConfig:
    return ProtocolConfig(args.det, args.dir, args.mu if mu is None else mu, args.zeta)


def _closed_form_rate(form: CanonicalForm, cfg: ProtocolConfig) -> float:
    if form.kind in ("C-att", "C-amp"):
        return closed_forms.c_class_rate(cfg.variant, form.tau, form.omega)
    if form.kind == "B2":
        return closed_forms.classical_noise_rate(cfg.variant, form.theta)
    if form.kind == "B1":
        return closed_forms.b1_rate(cfg.variant, cfg.mu)
    raise DomainError(f"no closed form for class {form.kind}")


def _composable_config(args) -> ComposableConfig:
    return ComposableConfig(N=int(args.N), p_ec=args.p_ec, zeta=args.zeta, d=args.d,
                            eps_s=args.eps_s, eps_h=args.eps_h, eps_pe=args.eps_pe,
                            eps_cor=args.eps_cor,
                            aep_log_base=math.e if args.aep_log_base == "e" else 2.0)


def _pool_map(fn, items):
    workers = montecarlo.max_workers()
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


# --- subcommands --------------------------------------------------------------

def cmd_rate(args) -> int:
    form = form_from_descriptor(args.channel)
    cfg = _protocol(args)
    row = {"channel": args.channel, "variant": cfg.variant, "mu": cfg.mu, "zeta": cfg.zeta}
    if args.closed_form:
        row["rate"] = _closed_form_rate(form, cfg)
        columns = ["channel", "variant", "mu", "zeta", "rate"]
    else:
        b = asymptotic_rate(form, cfg)
        row.update(mutual_info=b.mutual_info, holevo=b.holevo, rate=b.rate)
        columns = ["channel", "variant", "mu", "zeta", "mutual_info", "holevo", "rate"]
    _emit(render([row], columns, _jobspec(args), args.format), args.out)
    return EXIT_OK


def cmd_threshold(args) -> int:
    cfg = _protocol(args)
    rate_fn = (lambda f, c: _closed_form_rate(f, c)) if args.closed_form else None
    x = security_threshold(args.family, cfg, args.solve_for, tau=args.tau, xi=args.xi,
                           rate_fn=rate_fn)
    row = {"family": args.family, "variant": cfg.variant, "solve_for": args.solve_for,
           "tau": args.tau, "xi": args.xi, "threshold": x}
    columns = ["family", "variant", "solve_for", "tau", "xi", "threshold"]
    _emit(render([row], columns, _jobspec(args), args.format), args.out)
    return EXIT_OK


_COMPOSABLE_COLUMNS = ["rate", "r", "n", "m", "va_opt", "r_m", "pe_failed", "eps_total"]


def _composable_row(form: CanonicalForm, args, cfg: ComposableConfig | None = None) -> dict:
    cfg = cfg or _composable_config(args)
    res = optimize(form, cfg, ProtocolConfig(args.det, args.dir), coupling=args.coupling)
    return {c: getattr(res, c) for c in _COMPOSABLE_COLUMNS}


def cmd_composable(args) -> int:
    form = form_from_descriptor(args.channel)
    row = {"channel": args.channel, "variant": f"{args.det}-{args.dir}", **_composable_row(form, args)}
    columns = ["channel", "variant"] + _COMPOSABLE_COLUMNS
    _emit(render([row], columns, _jobspec(args), args.format), args.out)
    return EXIT_OK


def sweep_form(family: str, var: str, x: float, args) -> CanonicalForm:
    """Channel for one sweep point; dB values are converted here and nowhere else."""
    tau, xi, theta = args.tau, args.xi, args.theta
    if var == "L_db":
        tau = 10.0 ** (x / 10.0) if family == "amp" else 10.0 ** (-x / 10.0)
    elif var == "tau":
        tau = x
    elif var == "xi":
        xi = x
    elif var == "theta":
        theta = x
    if family == "b2":
        return CanonicalForm.classical_noise(theta)
    if family == "b1":
        return CanonicalForm.b1()
    if tau is None:
        raise DomainError("sweep needs --tau or a tau/L_db sweep")
    kind = "C-att" if family == "att" else "C-amp"
    return CanonicalForm(kind, tau, xi_to_omega(tau, xi or 0.0) if xi else 1.0)


def _sweep_point(args, variants, x: float) -> dict:
    row = {args.var: x, "note": ""}
    try:
        mu = x if args.var == "mu" else args.mu
        if args.mode == "threshold":
            if args.family not in ("att", "amp"):
                raise DomainError("threshold sweeps are defined for att and amp")
            tau = sweep_form(args.family, args.var, x, args).tau
            row["tau"] = tau
            for v in variants:
                det, direc = v.split("-")
                cfg = ProtocolConfig(det, direc, mu, args.zeta)
                row[f"xi_star_{det}_{direc}"] = security_threshold(args.family, cfg, "xi", tau=tau)
            return row
        form = sweep_form(args.family, args.var, x, args)
        row["tau"] = form.tau
        cfg_c = None
        if args.mode == "composable":
            n_total = int(x) if args.var == "N" else int(args.N)
            cfg_c = ComposableConfig(**{**_composable_config(args).__dict__, "N": n_total})
        for v in variants:
            det, direc = v.split("-")
            key = f"rate_{det}_{direc}"
            if args.mode == "composable":
                sub = argparse.Namespace(**{**vars(args), "det": det, "dir": direc})
                row[key] = _composable_row(form, sub, cfg_c)["rate"]
                continue
            cfg = ProtocolConfig(det, direc, mu, args.zeta)
            if args.mode == "closed-form":
                row[key] = _closed_form_rate(form, cfg)
            else:
                row[key] = asymptotic_rate(form, cfg).rate
    except (DomainError, NumericalError) as exc:
        row["note"] = str(exc)
    return row


def cmd_sweep(args) -> int:
    if args.steps < 1 or not args.start <= args.stop or (args.steps > 1 and args.start == args.stop):
        raise DomainError("sweep range is empty: need start < stop and steps >= 1")
    if args.var == "N" and args.mode != "composable":
        raise DomainError("sweeping N requires --mode composable")
    grid = np.linspace(args.start, args.stop, args.steps) if args.steps > 1 else np.array([args.start])
    if args.log:
        if args.start <= 0:
            raise DomainError("log sweeps need start > 0")
        grid = np.geomspace(args.start, args.stop, args.steps)
    variants = args.variants.split(",")
    for v in variants:
        if v not in closed_forms.VARIANTS:
            raise DomainError(f"unknown variant {v!r}; expected {closed_forms.VARIANTS}")
    rows = _pool_map(lambda x: _sweep_point(args, variants, float(x)), grid)
    prefix = "xi_star" if args.mode == "threshold" else "rate"
    columns = [args.var, "tau"] + [f"{prefix}_{v.replace('-', '_')}" for v in variants] + ["note"]
    _emit(render(rows, columns, _jobspec(args), args.format), args.out)
    return EXIT_OK


def cmd_mc_validate(args) -> int:
    report = montecarlo.variance_validation_report(montecarlo.default_grid(args.m), args.trials,
                                                   args.seed, args.coupling)
    job = _jobspec(args)
    if args.format == "json":
        text = json.dumps({"job": job.to_string(), **json.loads(report.to_json())}, indent=2) + "\n"
    else:
        text = f"# {job.to_string()}\n" + report.to_csv()
    _emit(text, args.out)
    failed = [r for r in report.rows if not r.passed]
    for r in failed:
        print(f"FAIL {r.grid_point} {r.quantity} ratio={_fmt(r.ratio)} {r.note}".rstrip(),
              file=sys.stderr)
    return EXIT_OK if not failed else EXIT_MC_FAIL


# --- argument parsing ---------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="key=value file, one flag per line")


def _add_protocol(p: argparse.ArgumentParser, mu_default=ASYMPTOTIC_MU, zeta_default=1.0) -> None:
    p.add_argument("--det", choices=("hom", "het"), default="hom")
    p.add_argument("--dir", choices=("dr", "rr"), default="rr")
    p.add_argument("--mu", type=float, default=mu_default, help="Alice's variance V_A + 1")
    p.add_argument("--zeta", type=float, default=zeta_default, help="reconciliation efficiency")


def _add_composable(p: argparse.ArgumentParser) -> None:
    p.add_argument("--N", type=float, default=1e6, help="total signals per block")
    p.add_argument("--p-ec", dest="p_ec", type=float, default=0.8)
    p.add_argument("--d", type=int, default=32, help="discretisation bins")
    p.add_argument("--eps-s", dest="eps_s", type=float, default=1e-20)
    p.add_argument("--eps-h", dest="eps_h", type=float, default=1e-20)
    p.add_argument("--eps-pe", dest="eps_pe", type=float, default=1e-10)
    p.add_argument("--eps-cor", dest="eps_cor", type=float, default=1e-20)
    p.add_argument("--aep-log-base", dest="aep_log_base", choices=("2", "e"), default="e")
    p.add_argument("--coupling", choices=("paper", "consistent"), default="paper",
                   help="amplifier gain-to-noise coupling in the excess-noise variance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvkey", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="asymptotic rate at one point")
    p.add_argument("--channel", required=True, help="e.g. att:tau=0.6,xi=0.01")
    p.add_argument("--closed-form", dest="closed_form", action="store_true")
    _add_protocol(p)
    _add_common(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("threshold", help="parameter value where the rate reaches zero")
    p.add_argument("--family", choices=("att", "amp", "b2"), required=True)
    p.add_argument("--solve-for", dest="solve_for", choices=("tau", "xi", "theta"), required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--closed-form", dest="closed_form", action="store_true")
    _add_protocol(p)
    _add_common(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("composable", help="optimised finite-size composable rate")
    p.add_argument("--channel", required=True)
    _add_protocol(p, zeta_default=0.9)
    _add_composable(p)
    _add_common(p)
    p.set_defaults(func=cmd_composable)

    p = sub.add_parser("sweep", help="rates over a one-dimensional grid")
    p.add_argument("--family", choices=("att", "amp", "b2", "b1"), required=True)
    p.add_argument("--var", choices=SWEEP_VARS, required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=51)
    p.add_argument("--log", action="store_true", help="geometric spacing")
    p.add_argument("--mode", choices=SWEEP_MODES, default="asymptotic")
    p.add_argument("--variants", default=",".join(closed_forms.VARIANTS))
    p.add_argument("--tau", type=float)
    p.add_argument("--xi", type=float, default=0.0, help="input-referred excess noise")
    p.add_argument("--theta", type=float, default=0.1)
    _add_protocol(p)
    _add_composable(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mc-validate", help="Monte-Carlo check of estimator variances")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--m", type=int, default=10_000, help="PE signals per trial")
    p.add_argument("--coupling", choices=("paper", "consistent"), default="paper")
    _add_common(p)
    p.set_defaults(func=cmd_mc_validate)
    return parser


def read_config(path: str) -> list[str]:
    """``key=value`` lines as argv tokens; blank lines and ``#`` comments are skipped."""
    tokens = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            key = "--" + key.strip().lstrip("-").replace("_", "-")
            value = value.strip()
            if not eq or value.lower() in ("true", "yes", "on"):
                tokens.append(key)
            elif value.lower() not in ("false", "no", "off"):
                tokens += [key, value]
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    """Insert config-file flags right after the subcommand so explicit flags win."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None or not argv:
        return argv
    return argv[:1] + read_config(path) + argv[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except OSError as exc:
        print(f"cvkey: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (DomainError, NumericalError) as exc:
        print(f"cvkey: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
