"""Command-line front end: exponent curves, simulations and exact oracles.

Exit codes: 0 success, 2 invalid input, 3 a solver did not converge (the
output is still written).  Rates are in nats unless ``--bits`` is given.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelError, Dmc, bec, bsc, load_channel, uniform

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3
CSV_COLUMNS = ["rate_nats", "exponent_nats", "method", "L_or_lambda", "q_mode", "converged"]
LN2 = math.log(2.0)


class UsageError(ValueError):
    pass


RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["tool", "version", "kind", "units", "config"],
    "properties": {
        "tool": {"const": "listexp"},
        "version": {"type": "string"},
        "kind": {"enum": ["curve", "simulation", "oracle"]},
        "units": {"enum": ["nats", "bits"]},
        "config": {"type": "object"},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["rate", "exponent", "method", "L_or_lambda", "q_mode", "converged"],
                "properties": {
                    "rate": {"type": "number"},
                    "exponent": {"type": ["number", "null"]},
                    "method": {"type": "string"},
                    "L_or_lambda": {"type": "number"},
                    "q_mode": {"type": "string"},
                    "converged": {"type": "boolean"},
                    "rho": {"type": "number"},
                    "conjecture": {"type": "boolean"},
                },
            },
        },
        "result": {"type": "object"},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "curve"}}},
         "then": {"required": ["rows"]}},
        {"if": {"properties": {"kind": {"enum": ["simulation", "oracle"]}}},
         "then": {"required": ["result"]}},
    ],
}


def validate_record(record: dict) -> None:
    import jsonschema

    jsonschema.validate(record, RESULT_SCHEMA)


# --- argument helpers -----------------------------------------------------------

def parse_grid(text: str) -> np.ndarray:
    try:
        start, stop, points = text.split(":")
        start, stop, points = float(start), float(stop), int(points)
    except ValueError:
        raise UsageError(f"grid must look like start:stop:points, got {text!r}") from None
    if not start < stop:
        raise UsageError("grid start must be below stop")
    if points < 2:
        raise UsageError("grid needs at least two points")
    return np.linspace(start, stop, points)


def resolve_channel(spec: str) -> Dmc:
    """A channel JSON path, or the shorthands ``bsc:p`` and ``bec:e``."""
    if spec.startswith(("bsc:", "bec:")):
        kind, _, val = spec.partition(":")
        try:
            p = float(val)
        except ValueError:
            raise UsageError(f"bad channel parameter in {spec!r}") from None
        if not 0 <= p <= 1:
            raise UsageError("channel parameter must lie in [0, 1]")
        return bsc(p) if kind == "bsc" else bec(p)
    try:
        return load_channel(spec)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read channel file {spec}: {exc}") from None


def resolve_q(mode: str, w: Dmc):
    """Returns (q or None for optimize, q_mode label)."""
    if mode == "uniform":
        return uniform(w.input_size), "uniform"
    if mode == "optimize":
        return None, "optimize"
    try:
        data = json.loads(Path(mode).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--q must be uniform, optimize or a JSON file ({exc})") from None
    if isinstance(data, dict):
        data = data.get("q")
    from .channel import as_distribution

    return as_distribution(data, w.input_size), "file"


def _rate_in(x: float, bits: bool) -> float:
    return x * LN2 if bits else x


def _out(x, bits: bool):
    if x is None or not math.isfinite(x):
        return x
    return x / LN2 if bits else x


# --- subcommands ----------------------------------------------------------------------

def _curve_row(rate, value, method, l_or_lambda, q_mode, converged, bits, **extra):
    row = {
        "rate": _out(float(rate), bits),
        "exponent": _out(float(value), bits) if value is not None else None,
        "method": method,
        "L_or_lambda": float(l_or_lambda),
        "q_mode": q_mode,
        "converged": bool(converged),
    }
    row.update(extra)
    return row


def cmd_exponents(args) -> tuple[dict, bool]:
    from .csiszar import fixed_composition_solution, sphere_packing_csiszar_solution
    from .gallager import random_coding_solution, sphere_packing_solution

    w = resolve_channel(args.channel)
    q, q_mode = resolve_q(args.q, w)
    rates = [_rate_in(r, args.bits) for r in parse_grid(args.rate)]
    rows, ok = [], True
    if args.lambda_ is not None:
        lam = _rate_in(args.lambda_, args.bits)
        for r in rates:
            if not 0 < lam < r:
                raise UsageError(f"need 0 < lambda < rate (rate {r}, lambda {lam})")
            sol = sphere_packing_csiszar_solution(r - lam, q, w)
            ok &= sol.converged
            rows.append(_curve_row(r, sol.value, "exponential-list", _out(lam, args.bits),
                                   q_mode, sol.converged, args.bits))
    else:
        L = args.list_size
        for r in rates:
            if r < 0:
                raise UsageError("rates must be nonnegative")
            if args.method == "fixed-composition":
                sol = fixed_composition_solution(r, L, w, q)
            elif args.method == "random-coding":
                sol = random_coding_solution(r, L, w, q)
            elif args.method == "sphere-packing":
                sol = sphere_packing_solution(r, w, q)
            else:
                if r <= 0:
                    raise UsageError("sphere-packing needs positive rates")
                sol = sphere_packing_csiszar_solution(r, q, w)
            ok &= sol.converged
            rows.append(_curve_row(r, sol.value, args.method, L, q_mode, sol.converged,
                                   args.bits))
    config = {"channel": w.to_json(), "channel_fingerprint": w.fingerprint(),
              "method": "exponential-list" if args.lambda_ is not None else args.method,
              "q_mode": q_mode, "q": None if q is None else q.tolist(), "rate_grid": args.rate}
    return _record("curve", config, rows=rows, bits=args.bits), ok


def cmd_expurgated(args) -> tuple[dict, bool]:
    from .ckm import ckm_solution
    from .gallager import gallager_expurgated_solution

    w = resolve_channel(args.channel)
    q, q_mode = resolve_q(args.q, w)
    rows, ok = [], True
    for r in parse_grid(args.rate):
        r = _rate_in(r, args.bits)
        if r < 0:
            raise UsageError("rates must be nonnegative")
        if args.method == "gallager":
            sol = gallager_expurgated_solution(r, args.list_size, w, q)
        else:
            sol = ckm_solution(r, args.list_size, w, q)
        ok &= sol.converged
        rows.append(_curve_row(r, sol.value, f"expurgated-{args.method}", args.list_size,
                               q_mode, sol.converged, args.bits))
    config = {"channel": w.to_json(), "channel_fingerprint": w.fingerprint(),
              "method": args.method, "q_mode": q_mode, "rate_grid": args.rate}
    return _record("curve", config, rows=rows, bits=args.bits), ok


def cmd_gaussian(args) -> tuple[dict, bool]:
    from .gaussian import GaussianSpec, gaussian_ckm_exponent, tangency_point

    spec = GaussianSpec(args.power, args.noise_var)
    t = tangency_point(args.list_size, spec)
    rows = []
    for r in parse_grid(args.rate):
        r = _rate_in(r, args.bits)
        if r < 0:
            raise UsageError("rates must be nonnegative")
        rows.append(_curve_row(r, gaussian_ckm_exponent(r, args.list_size, spec, t),
                               "gaussian-expurgated", args.list_size, "gaussian", True,
                               args.bits))
    config = {"power": args.power, "noise_var": args.noise_var, "L": args.list_size,
              "tangency_rate_nats": t.rate, "tangency_rho": t.rho, "rate_grid": args.rate}
    return _record("curve", config, rows=rows, bits=args.bits), True


def cmd_guessing(args) -> tuple[dict, bool]:
    from .guessing import (
        GuessingQuery,
        guessing_moment_conjectured_exponent,
        guessing_moment_lower_exponent,
    )

    w = resolve_channel(args.channel)
    rate = _rate_in(args.rate, args.bits)
    rows = []
    for rho in parse_grid(args.rho):
        query = GuessingQuery(float(rho), rate, w)
        lo = guessing_moment_lower_exponent(query)
        rows.append(_curve_row(rate, lo.value, "guessing-lower", 1, "optimize", True,
                               args.bits, rho=float(rho), conjecture=False))
        if args.conjecture:
            cj = guessing_moment_conjectured_exponent(query)
            rows.append(_curve_row(rate, cj.value, "guessing-conjectured", 1, "optimize", True,
                                   args.bits, rho=float(rho), conjecture=True))
    config = {"channel": w.to_json(), "rate": args.rate, "rho_grid": args.rho}
    return _record("curve", config, rows=rows, bits=args.bits), True


def _sim_config(args, w: Dmc):
    from .simulator import SimConfig

    q, _ = resolve_q(args.q, w)
    if q is None:
        raise UsageError("simulation needs a fixed composition (--q uniform or a file)")
    lam = None if args.lambda_ is None else _rate_in(args.lambda_, args.bits)
    L = args.list_size if lam is None else None
    return SimConfig(args.n, _rate_in(args.rate, args.bits), q, w, list_size=L,
                     list_exponent=lam, decoder=args.decoder, trials=args.trials,
                     master_seed=args.seed, engine=args.engine)


def cmd_simulate(args) -> tuple[dict, bool]:
    from .simulator import exceeder_statistics

    w = resolve_channel(args.channel)
    cfg = _sim_config(args, w)
    rhos = [] if args.moments is None else [float(x) for x in args.moments.split(",")]
    res = exceeder_statistics(cfg, rhos, workers=args.workers)
    return _record("simulation", cfg.echo(), result=res.to_json(), bits=args.bits), True


def cmd_oracle(args) -> tuple[dict, bool]:
    from .simulator import SimConfig, exhaustive_list_error

    w = resolve_channel(args.channel)
    q, _ = resolve_q(args.q, w)
    if q is None:
        raise UsageError("the oracle needs a fixed composition")
    cfg = SimConfig(args.n, _rate_in(args.rate, args.bits), q, w, list_size=args.list_size,
                    decoder=args.decoder, trials=1)
    p = exhaustive_list_error(cfg.n, cfg.M, cfg.L, q, w, args.decoder)
    echo = cfg.echo()
    for key in ("trials", "master_seed", "engine"):
        echo.pop(key)
    return _record("oracle", echo, result={"exact_error_probability": p}, bits=args.bits), True


def _record(kind: str, config: dict, rows=None, result=None, bits: bool = False) -> dict:
    rec = {"tool": "listexp", "version": __version__, "kind": kind,
           "units": "bits" if bits else "nats", "config": config}
    if rows is not None:
        rec["rows"] = rows
    if result is not None:
        rec["result"] = result
    return rec


def cmd_validate(args) -> tuple[dict | None, bool]:
    import jsonschema

    try:
        data = json.loads(Path(args.file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {args.file}: {exc}") from None
    try:
        validate_record(data)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"schema violation: {exc.message}") from None
    print(f"{args.file}: valid")
    return None, True


# --- output ------------------------------------------------------------------------------

def render(record: dict, fmt: str) -> str:
    if fmt == "json" or "rows" not in record:
        return json.dumps(record, indent=2, sort_keys=True, allow_nan=False) + "\n"
    bits = record["units"] == "bits"
    header = list(CSV_COLUMNS)
    if bits:
        header[0], header[1] = "rate_bits", "exponent_bits"
    extra = [k for k in ("rho", "conjecture") if any(k in r for r in record["rows"])]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header + extra)
    cell = lambda v: str(v).lower() if isinstance(v, bool) else repr(v)  # noqa: E731
    for r in record["rows"]:
        exp = r["exponent"]
        writer.writerow([
            repr(r["rate"]), "inf" if exp is None else repr(exp), r["method"],
            repr(r["L_or_lambda"]), r["q_mode"], cell(r["converged"])]
            + [cell(r[k]) for k in extra])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="listexp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"listexp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, rate_grid=True):
        sp.add_argument("--format", choices=["csv", "json"], default="json")
        sp.add_argument("--output", "-o", help="output file (default: stdout)")
        sp.add_argument("--bits", action="store_true", help="rates and exponents in bits")
        if rate_grid:
            sp.add_argument("--rate", required=True, help="rate grid start:stop:points")

    e = sub.add_parser("exponents", help="random-coding / sphere-packing / fixed-composition")
    common(e)
    e.add_argument("--channel", required=True, help="channel JSON file, or bsc:p / bec:e")
    grp = e.add_mutually_exclusive_group(required=True)
    grp.add_argument("--list-size", type=int)
    grp.add_argument("--lambda", dest="lambda_", type=float, help="list-size exponent")
    e.add_argument("--method", default="fixed-composition",
                   choices=["fixed-composition", "random-coding", "sphere-packing",
                            "sphere-packing-divergence"])
    e.add_argument("--q", default="optimize", help="uniform | optimize | path to JSON")
    e.set_defaults(func=cmd_exponents)

    x = sub.add_parser("expurgated", help="expurgated list exponents")
    common(x)
    x.add_argument("--channel", required=True)
    x.add_argument("--list-size", type=int, required=True)
    x.add_argument("--method", choices=["gallager", "ckm"], default="ckm")
    x.add_argument("--q", default="uniform")
    x.set_defaults(func=cmd_expurgated)

    g = sub.add_parser("gaussian", help="Gaussian-channel expurgated list exponent")
    common(g)
    g.add_argument("--power", type=float, required=True)
    g.add_argument("--noise-var", type=float, required=True)
    g.add_argument("--list-size", type=int, required=True)
    g.set_defaults(func=cmd_gaussian)

    u = sub.add_parser("guessing", help="exponents of exceeder-count moments")
    common(u, rate_grid=False)
    u.add_argument("--channel", required=True)
    u.add_argument("--rate", type=float, required=True)
    u.add_argument("--rho", required=True, help="moment-order grid start:stop:points")
    u.add_argument("--conjecture", action="store_true", help="also emit the conjectured curve")
    u.set_defaults(func=cmd_guessing)

    s = sub.add_parser("simulate", help="Monte-Carlo list-error and exceeder statistics")
    common(s, rate_grid=False)
    s.add_argument("--channel", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--rate", type=float, required=True)
    grp = s.add_mutually_exclusive_group(required=True)
    grp.add_argument("--list-size", type=int)
    grp.add_argument("--lambda", dest="lambda_", type=float)
    s.add_argument("--q", default="uniform")
    s.add_argument("--decoder", choices=["ml", "mmi"], default="ml")
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--engine", choices=["auto", "direct", "typed"], default="auto")
    s.add_argument("--workers", type=int, default=None,
                   help="worker processes (default from LISTEXP_WORKERS, else 1)")
    s.add_argument("--moments", help="comma-separated moment orders rho")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="exact list-error probability by enumeration")
    common(o, rate_grid=False)
    o.add_argument("--channel", required=True)
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--rate", type=float, required=True)
    o.add_argument("--list-size", type=int, required=True)
    o.add_argument("--q", default="uniform")
    o.add_argument("--decoder", choices=["ml", "mmi"], default="ml")
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("validate", help="check a JSON result against the output schema")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        record, converged = args.func(args)
    except (UsageError, ChannelError, ValueError) as exc:
        print(f"listexp: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if record is None:
        return EXIT_OK
    record = _json_safe(record)
    text = render(record, args.format)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    if not converged:
        print("listexp: warning: a solver did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
