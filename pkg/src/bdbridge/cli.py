"""Command-line front door.

Subcommands map one-to-one onto the library: ``count`` and ``sample`` expose
the bridge combinatorics and sampler, ``transprob`` the transition-probability
engines (bridge sampling, straight simulation, closed form), ``simulate`` the
forward simulator, ``filter``/``scan-failure``/``fit`` the epidemic filtering
stack.  Structured results are JSON with every float printed to 17 significant
digits so reruns can be compared byte-for-byte; matrices and paths are CSV.

Exit codes: 0 success, 1 usage error, 2 domain/data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from importlib import resources

import numpy as np

from . import filters, inference, likelihood, models, reference
from .counting import BridgeSpec, bridge_count, log_bridge_density
from .errors import (
    BridgeDomainError,
    CapacityError,
    DataFormatError,
    ModelDomainError,
    UnsupportedCaseError,
    ZeroMeasureSpace,
)
from .sampler import RngStream, sample_bridge

DEFAULT_SEED = 20240817
SEED_ENV_VAR = "BDBRIDGE_SEED"

_DOMAIN_ERRORS = (
    BridgeDomainError, ModelDomainError, DataFormatError,
    UnsupportedCaseError, CapacityError, ZeroMeasureSpace, ValueError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _dump_json(obj) -> str:
    """Compact JSON with floats at 17 significant digits."""
    out = io.StringIO()

    def walk(node):
        if isinstance(node, dict):
            out.write("{")
            for k, (key, val) in enumerate(node.items()):
                if k:
                    out.write(", ")
                out.write(f'"{key}": ')
                walk(val)
            out.write("}")
        elif isinstance(node, (list, tuple, np.ndarray)):
            out.write("[")
            seq = node.tolist() if isinstance(node, np.ndarray) else node
            for k, val in enumerate(seq):
                if k:
                    out.write(", ")
                walk(val)
            out.write("]")
        elif isinstance(node, bool) or node is None:
            out.write({True: "true", False: "false", None: "null"}[node])
        elif isinstance(node, (float, np.floating)):
            out.write(_fmt_float(float(node)))
        elif isinstance(node, (int, np.integer)):
            out.write(str(int(node)))
        else:
            out.write('"' + str(node).replace("\\", "\\\\").replace('"', '\\"') + '"')

    walk(obj)
    return out.getvalue()


def _parse_params(text: str) -> dict:
    out = {}
    for chunk in text.split(","):
        if not chunk:
            continue
        if "=" not in chunk:
            raise UsageError(f"bad parameter {chunk!r}, expected key=value")
        key, val = chunk.split("=", 1)
        out[key.strip()] = float(val)
    return out


def _build_model(name: str, params: dict):
    if name == "lbdi":
        p = models.LBDIParams(
            lam=params.get("lambda", params.get("lam", 0.0)),
            mu=params.get("mu", 0.0),
            nu=params.get("nu", 0.0),
        )
        return models.lbdi_model(p), p
    if name == "sis":
        p = models.SISParams(n0=int(params["n0"]), beta=params["beta"],
                             gamma=params["gamma"])
        return models.sis_model(p), p
    if name == "sir":
        p = models.SIRParams(n0=int(params["n0"]), beta=params["beta"],
                             gamma=params["gamma"])
        if "s0" not in params:
            raise UsageError("model sir requires s0=<initial susceptibles>")
        return models.sir_as_bd(p, int(params["s0"])), p
    raise UsageError(f"unknown model {name!r}")


def _parse_range(text: str) -> inference.GridSpec:
    try:
        lo, hi, steps = text.split(":")
        return inference.GridSpec(float(lo), float(hi), int(steps))
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}, expected lo:hi:steps") from exc


def _parse_bound(text: str | None):
    if text is None or text.lower() in ("none", "-inf", "inf", "+inf"):
        if text is None or text.lower() == "none":
            return None
        return float(text)
    return int(text)


def shigellosis_path() -> str:
    return str(resources.files("bdbridge").joinpath("data/shigellosis.csv"))


def load_observations(path) -> filters.Observations:
    """Read a ``time,S`` CSV (comment lines starting with # are skipped)."""
    times, sus = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise DataFormatError(f"{path}: empty observation file")
    header = [c.strip() for c in rows[0]]
    if header[:2] != ["time", "S"]:
        raise DataFormatError(f"{path}: expected header 'time,S', got {rows[0]}")
    for k, row in enumerate(rows[1:], start=1):
        try:
            t_val = float(row[0])
            s_val = float(row[1])
        except (ValueError, IndexError) as exc:
            raise DataFormatError(f"{path}: malformed row {k}: {row}") from exc
        if s_val != int(s_val):
            raise DataFormatError(f"{path}: non-integer susceptible count in row {k}")
        times.append(t_val)
        sus.append(int(s_val))
    return filters.Observations(np.array(times), np.array(sus))


def load_shigellosis() -> filters.Observations:
    return load_observations(shigellosis_path())


def _read_csv(path, expected_header):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != expected_header:
        raise DataFormatError(f"{path}: expected header {','.join(expected_header)}")
    return rows[1:]


def load_sample_paths(path):
    """Re-ingest a ``sample`` CSV as a list of BridgePath values."""
    from .sampler import BridgePath

    grouped: dict[int, list[tuple[float, int]]] = {}
    for row in _read_csv(path, ["replicate_id", "k", "tau_k", "omega_k"]):
        grouped.setdefault(int(row[0]), []).append((float(row[2]), int(row[3])))
    paths = []
    for rep in sorted(grouped):
        times, states = zip(*grouped[rep])
        paths.append(BridgePath(np.array(times), np.array(states)))
    return paths


def load_sim_path(path) -> reference.SimPath:
    """Re-ingest a ``simulate`` CSV (its last row carries the horizon)."""
    rows = [(float(r[0]), int(r[1])) for r in _read_csv(path, ["time", "state"])]
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need at least the start and horizon rows")
    times, states = zip(*rows[:-1])
    return reference.SimPath(np.array(times), np.array(states), rows[-1][0])


def load_scan_csv(path) -> dict:
    """Re-ingest a ``scan-failure`` CSV as column arrays."""
    header = ["beta", "gamma", "survival_min", "failed_0p1", "failed_0p01"]
    rows = _read_csv(path, header)
    cols = list(zip(*rows))
    return {
        "beta": np.array(cols[0], float),
        "gamma": np.array(cols[1], float),
        "survival_min": np.array(cols[2], float),
        "failed_0p1": np.array(cols[3], int).astype(bool),
        "failed_0p01": np.array(cols[4], int).astype(bool),
    }


def load_surface_csv(path) -> dict:
    """Re-ingest a ``fit --surface-out`` CSV as column arrays."""
    rows = _read_csv(path, ["beta", "gamma", "loglik", "loglik_sd"])
    cols = list(zip(*rows))
    return {
        "beta": np.array(cols[0], float),
        "gamma": np.array(cols[1], float),
        "loglik": np.array(cols[2], float),
        "loglik_sd": np.array(cols[3], float),
    }


def _write_csv(path, header, rows):
    out = sys.stdout if path in (None, "-") else open(path, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                _fmt_float(v) if isinstance(v, (float, np.floating)) else v
                for v in row
            ])
    finally:
        if out is not sys.stdout:
            out.close()


def _emit(args, payload: str):
    if getattr(args, "output", None) and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)


def _cmd_count(args):
    spec = BridgeSpec(i=args.i, j=args.j, up_jumps=args.B, t=args.t,
                      lower=_parse_bound(args.l), upper=_parse_bound(args.u))
    n = bridge_count(spec)
    try:
        log_density = log_bridge_density(spec)
    except ZeroMeasureSpace:
        log_density = None
    _emit(args, _dump_json({
        "i": spec.i, "j": spec.j, "up_jumps": spec.up_jumps, "t": spec.t,
        "lower": spec.lower, "upper": spec.upper,
        "count": n, "log_density": log_density, "feasible": n > 0,
    }))
    return 0


def _cmd_sample(args):
    spec = BridgeSpec(i=args.i, j=args.j, up_jumps=args.B, t=args.t,
                      lower=_parse_bound(args.l), upper=_parse_bound(args.u))
    rng = RngStream(args.seed)
    rows = []
    for rep in range(args.n):
        path = sample_bridge(spec, rng)
        for k in range(len(path.times)):
            rows.append((rep, k, float(path.times[k]), int(path.states[k])))
    _write_csv(args.output, ["replicate_id", "k", "tau_k", "omega_k"], rows)
    return 0


def _cmd_transprob(args):
    model, params = _build_model(args.model, _parse_params(args.params))
    rng = RngStream(args.seed)
    if args.method == "closed":
        if args.model != "lbdi":
            raise UsageError("--method closed is only available for the lbdi model")
        value = reference.lbdi_transition(params, args.i, args.j, args.t)
        _emit(args, _dump_json({
            "method": "closed", "model": args.model, "i": args.i, "j": args.j,
            "t": args.t, "value": value,
            "log_value": math.log(value) if value > 0 else float("-inf"),
        }))
        return 0
    if args.method == "straight":
        est = reference.straight_estimate(model, args.i, args.j, args.t, args.n, rng)
        bset = None
    else:
        if args.bmax is not None:
            bset = likelihood.BSet(tuple(range(max(0, args.j - args.i), args.bmax + 1)))
        else:
            bset = likelihood.choose_bset(args.i, args.j, model, args.t,
                                          args.eps, rng.child(1))
        est = likelihood.estimate_pij(model, args.i, args.j, args.t, bset,
                                      args.n, rng.child(2), threads=args.threads)
    _emit(args, _dump_json({
        "method": args.method, "model": args.model, "i": args.i, "j": args.j,
        "t": args.t, "n": est.n, "value": est.value, "std_error": est.std_error,
        "log_value": est.log_value,
        "bset": list(bset) if bset is not None else None,
        "seed": args.seed, "threads": args.threads,
    }))
    return 0


def _cmd_simulate(args):
    model, _ = _build_model(args.model, _parse_params(args.params))
    rng = RngStream(args.seed)
    path = reference.gillespie_simulate(model, args.y0, args.t, rng)
    rows = [(float(tv), int(sv)) for tv, sv in zip(path.times, path.states)]
    rows.append((float(path.horizon), path.final_state))
    _write_csv(args.output, ["time", "state"], rows)
    return 0


def _cmd_filter(args):
    obs = load_observations(args.data)
    params_in = _parse_params(args.params)
    n0 = int(params_in.get("n0", obs.susceptibles[0] + args.i0))
    params = models.SIRParams(n0=n0, beta=params_in["beta"], gamma=params_in["gamma"])
    rng = RngStream(args.seed)
    trace: list = []
    loglik, final = filters.run_filter(params, obs, args.i0, args.m, rng, trace=trace)
    _emit(args, _dump_json({
        "loglik": loglik,
        "per_step": trace,
        "posterior_final": final.posterior,
        "i0": args.i0, "m": args.m, "seed": args.seed,
    }))
    return 0


def _cmd_scan_failure(args):
    obs = load_observations(args.data)
    rng = RngStream(args.seed)
    scan = filters.failure_domain_scan(
        obs, _parse_range(args.beta_range).values(),
        _parse_range(args.gamma_range).values(),
        args.particles, (0.001, 0.0001), rng, i0=args.i0,
    )
    rows = []
    for a, beta in enumerate(scan.beta_grid):
        for b, gamma in enumerate(scan.gamma_grid):
            rows.append((
                float(beta), float(gamma), float(scan.survival_min[a, b]),
                int(scan.failed[0, a, b]), int(scan.failed[1, a, b]),
            ))
    _write_csv(args.output, ["beta", "gamma", "survival_min", "failed_0p1", "failed_0p01"], rows)
    return 0


def _cmd_fit(args):
    obs = load_observations(args.data)
    config = inference.SearchConfig(
        beta=_parse_range(args.beta_range),
        gamma=_parse_range(args.gamma_range),
        refinements=args.refinements,
        replications=args.replications,
        threads=args.threads,
    )
    rng = RngStream(args.seed)
    fit = inference.fit_mle(obs, config, args.m, rng, i0=args.i0)
    if args.surface_out:
        rows = []
        for a, beta in enumerate(fit.surface.beta_grid):
            for b, gamma in enumerate(fit.surface.gamma_grid):
                rows.append((float(beta), float(gamma),
                             float(fit.surface.mean[a, b]),
                             float(fit.surface.spread[a, b])))
        _write_csv(args.surface_out, ["beta", "gamma", "loglik", "loglik_sd"], rows)
    _emit(args, _dump_json({
        "beta_hat": fit.beta_hat, "gamma_hat": fit.gamma_hat,
        "ci_beta": list(fit.ci_beta), "ci_gamma": list(fit.ci_gamma),
        "r0": fit.r0, "loglik_max": fit.loglik_max,
        "boundary_warning": fit.boundary_warning,
        "ci_method": "profile likelihood, chi-square(1) 95% drop of 1.92",
        "m": args.m, "replications": args.replications, "seed": args.seed,
    }))
    return 0


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else DEFAULT_SEED


def build_parser() -> _Parser:
    parser = _Parser(prog="bdbridge",
                     description="Birth-death bridge sampling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    seed = _default_seed()

    def add_common(p, output_default=None):
        p.add_argument("--seed", type=int, default=seed,
                       help=f"random seed (default {seed}, env {SEED_ENV_VAR})")
        p.add_argument("--output", "-o", default=output_default,
                       help="output path ('-' or omit for stdout)")

    p = sub.add_parser("count", help="exact bridge count and log-density")
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--B", type=int, required=True, dest="B")
    p.add_argument("--l", default=None)
    p.add_argument("--u", default=None)
    p.add_argument("--t", type=float, default=1.0)
    add_common(p)
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("sample", help="draw bridge paths as CSV")
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--B", type=int, required=True, dest="B")
    p.add_argument("--l", default=None)
    p.add_argument("--u", default=None)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1, help="number of replicate paths")
    add_common(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("transprob", help="transition probability estimate")
    p.add_argument("--model", required=True, choices=["lbdi", "sis", "sir"])
    p.add_argument("--params", required=True, help="comma-separated key=value")
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--method", choices=["igbs", "straight", "closed"], default="igbs")
    p.add_argument("--bmax", type=int, default=None,
                   help="fixed upper end of the up-jump set")
    p.add_argument("--eps", type=float, default=1e-4,
                   help="adaptive up-jump set tolerance (used when --bmax absent)")
    p.add_argument("--threads", type=int, default=1)
    add_common(p)
    p.set_defaults(func=_cmd_transprob)

    p = sub.add_parser("simulate", help="forward-simulate one trajectory as CSV")
    p.add_argument("--model", required=True, choices=["lbdi", "sis", "sir"])
    p.add_argument("--params", required=True)
    p.add_argument("--y0", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("filter", help="sequential filter log-likelihood")
    p.add_argument("--data", required=True, help="CSV with header time,S")
    p.add_argument("--model", default="sir", choices=["sir"])
    p.add_argument("--params", required=True, help="beta=...,gamma=...[,n0=...]")
    p.add_argument("--m", type=int, default=10_000, help="replicates per step")
    p.add_argument("--i0", type=int, default=1)
    add_common(p)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("scan-failure", help="bootstrap-filter failure domain scan")
    p.add_argument("--data", required=True)
    p.add_argument("--beta-range", required=True, help="lo:hi:steps")
    p.add_argument("--gamma-range", required=True, help="lo:hi:steps")
    p.add_argument("--particles", type=int, default=100_000)
    p.add_argument("--i0", type=int, default=1)
    add_common(p)
    p.set_defaults(func=_cmd_scan_failure)

    p = sub.add_parser("fit", help="maximum likelihood fit of (beta, gamma)")
    p.add_argument("--data", required=True)
    p.add_argument("--beta-range", required=True, help="lo:hi:steps")
    p.add_argument("--gamma-range", required=True, help="lo:hi:steps")
    p.add_argument("--m", type=int, default=10_000)
    p.add_argument("--replications", type=int, default=5)
    p.add_argument("--refinements", type=int, default=2)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--i0", type=int, default=1)
    p.add_argument("--surface-out", default=None,
                   help="also dump the full-span surface CSV here")
    add_common(p)
    p.set_defaults(func=_cmd_fit)

    return parser


def parse_and_dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except KeyError as exc:
        print(f"usage error: missing parameter {exc}", file=sys.stderr)
        return 1
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return parse_and_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
