"""``treepark`` command line.

Every command writes its CSV/JSON outputs plus ``manifest.json`` into the
output directory. A manifest holds the full configuration and can be fed
back through ``treepark replay`` to regenerate identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from pathlib import Path

from . import __version__
from .bounds import (
    BoundCertificate,
    certify_upper,
    lower_certificate,
    percolation_certificate,
    replay as replay_certificate,
    search_upper,
)
from .dist import SupportGuardError, parse_arrival
from .montecarlo import ResourceGuardError, estimate, oracle_check, parse_mc_arrival, parse_offspring
from .numerics import DEFAULT_SCALE, decimal_digits, format_rational
from .order import icx_compare_parking
from .recursion import ModelConfig, expected_xn, iterate, resolve_constant, limit_residual
from . import reports

EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_REFUSED = 3
EXIT_ICX = 4
EXIT_GUARD = 5

OUT_ENV = "TREEPARK_OUT"


class ConfigError(ValueError):
    pass


# -- argument types -----------------------------------------------------------


def scale_arg(text):
    if text is None or str(text).lower() in ("exact", "none"):
        return None
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("scale must be a positive integer or 'exact'")
    return value


def _grid(text: str):
    try:
        start, stop, step = text.split(":")
    except ValueError:
        raise ConfigError(f"alpha grid must be start:stop:step, got {text!r}") from None
    return reports.alpha_grid(start, stop, step)


def _check_representable(alphas, scale):
    if scale is None:
        return
    for a in alphas:
        digits = decimal_digits(a)
        if digits is None or digits > scale:
            raise ConfigError(f"alpha={a} is not exactly representable at scale {scale}")


def _alphas(args) -> tuple[str, list]:
    """(family, alphas) from either --arrival or --family with --alpha-grid."""
    if args.arrival:
        law = parse_arrival(args.arrival)
        if not args.alpha_grid:
            return law.family, [law.alpha]
        family = law.family
    else:
        family = args.family
    if not args.alpha_grid:
        raise ConfigError("give --arrival, or --family with --alpha-grid")
    if family not in ("two", "three") and not family.startswith("atom"):
        raise ConfigError(f"family {family!r} has no alpha parameter")
    return family, _grid(args.alpha_grid)


def _depth_list(text):
    if not text:
        return None
    return sorted({int(x) for x in str(text).split(",")})


# -- commands -----------------------------------------------------------------


def cmd_qn_table(args, out: Path) -> int:
    family, alphas = _alphas(args)
    _check_representable(alphas, args.scale)
    depths = _depth_list(args.depths)
    rows = reports.qn_rows(args.d, family, alphas, args.depth, args.scale, depths)
    reports.write_csv(out / "qn_table.csv", ["alpha", "n", "q_n"], rows)
    if not args.no_figure:
        reports.plot_qn(rows, out / "qn_table.png", f"d={args.d}, {family}")
    return 0


def cmd_ex_table(args, out: Path) -> int:
    family, alphas = _alphas(args)
    _check_representable(alphas, args.scale)
    rows = reports.ex_rows(args.d, family, alphas, args.depth, args.scale)
    reports.write_csv(out / "ex_table.csv", ["alpha", "n", "ex_n", "ratio_lambda_n"], rows)
    if not args.no_figure:
        reports.plot_ex(rows, out / "ex_table.png", args.d)
    return 0


def _write_json(path: Path, payload: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload)


def cmd_bound_upper(args, out: Path) -> int:
    result = certify_upper(args.d, parse_arrival(args.arrival), args.depth, args.scale)
    if isinstance(result, BoundCertificate):
        _write_json(out / "certificate.json", result.to_json())
        print(f"certified: alpha_c({args.d}) < {result.alpha}  margin {result.margin[:24]}")
        return 0
    _write_json(out / "refusal.json", json.dumps(vars(result), indent=2, sort_keys=True) + "\n")
    print(f"refused: margin {result.margin[:24]} is not positive", file=sys.stderr)
    return EXIT_REFUSED


def cmd_bound_search(args, out: Path) -> int:
    start, stop, step = args.alpha_grid.split(":")
    _check_representable(_grid(args.alpha_grid), args.scale)
    cert = search_upper(args.d, args.family, args.depth, start, stop, step, args.scale, args.exhaustive)
    if cert is None:
        print("no grid point certifies", file=sys.stderr)
        return EXIT_REFUSED
    _write_json(out / "certificate.json", cert.to_json())
    print(f"smallest certified grid alpha: {cert.alpha}")
    return 0


def cmd_bound_lower(args, out: Path) -> int:
    cert = lower_certificate(args.d, args.growth)
    _write_json(out / "certificate.json", cert.to_json())
    print(f"alpha_c({args.d}) >= {cert.alpha}")
    return 0


def cmd_bound_percolation(args, out: Path) -> int:
    cert = percolation_certificate(args.d, args.k)
    _write_json(out / "certificate.json", cert.to_json())
    print(f"alpha_c({args.d}) <= {cert.alpha}")
    return 0


def cmd_simulate(args, out: Path) -> int:
    offspring = parse_offspring(args.offspring or str(args.d))
    arrival = parse_mc_arrival(args.arrival)
    rep = estimate(offspring, arrival, args.depth, args.trials, args.seed, args.workers)
    sci = reports.sci
    reports.write_csv(out / "simulate.csv", ["n", "trials", "q_hat", "q_se", "ex_hat", "ex_se"],
                      [(n, t, sci(a), sci(b), sci(c), sci(e)) for n, t, a, b, c, e in rep.rows()])
    # the last histogram entry counts trials with no arrival up to the depth
    hist = [(m, c) for m, c in enumerate(rep.tau_hist[:-1])] + [(f">{args.depth}", rep.tau_hist[-1])]
    reports.write_csv(out / "tau_hist.csv", ["m", "count"], hist)
    if not args.no_figure:
        exact_q = None
        if offspring.kind == "deterministic" and offspring.param >= 1 and hasattr(arrival, "dist"):
            cfg = ModelConfig(offspring.param, arrival, args.depth, scale=60)
            exact_q = [s.q for s in iterate(cfg)]
        reports.plot_simulation(rep, out / "simulate.png", exact_q)
    return 0


def cmd_oracle_check(args, out: Path) -> int:
    rows = oracle_check(args.instances, args.max_depth, args.tie_seeds, args.seed)
    reports.write_csv(out / "oracle_check.csv", ["instance", "tie_seed", "n", "eval_parking", "stepwise"],
                      [(r.instance, r.tie_seed, r.n, r.counted, r.simulated) for r in rows])
    bad = [r for r in rows if r.counted != r.simulated]
    print(f"{len(rows)} comparisons, {len(bad)} mismatches")
    return EXIT_FAIL if bad else 0


def cmd_icx_check(args, out: Path) -> int:
    a = ModelConfig(args.d, parse_arrival(args.arrival_a), args.depth, scale=None)
    b = ModelConfig(args.d, parse_arrival(args.arrival_b), args.depth, scale=None)
    per_depth = icx_compare_parking(a, b, args.depth)
    rows = [(depth, t, format_rational(m, 60))
            for depth, rep in enumerate(per_depth) for t, m in enumerate(rep.margins)]
    reports.write_csv(out / "icx_check.csv", ["depth", "t", "margin"], rows)
    if not args.no_figure:
        reports.plot_icx(per_depth, out / "icx_check.png")
    for depth, rep in enumerate(per_depth):
        if not rep.dominated:
            print(f"violation at depth {depth}, t={rep.violated_at}", file=sys.stderr)
            return EXIT_ICX
    print(f"dominated at every depth <= {args.depth}")
    return 0


def cmd_verify_identities(args, out: Path) -> int:
    arrival = parse_arrival(args.arrival)
    exact = args.scale is None
    cfg = ModelConfig(args.d, arrival, args.depth, scale=args.scale, full_law=True)
    rows, failures = [], 0
    resolution = resolve_constant(arrival, args.d) if exact and args.d >= 2 else None
    for state in iterate(cfg):
        chk = expected_xn(state, cfg)
        resid = limit_residual(state.exn, state.q, arrival.alpha, args.d) if args.d >= 2 else None
        if exact:
            failures += chk.law_mean != chk.recursion
            failures += chk.closed_form is not None and chk.closed_form != chk.recursion
        rows.append((
            state.n,
            reports.fmt_number(state.q),
            reports.fmt_number(chk.recursion),
            reports.fmt_number(chk.law_mean),
            "" if chk.closed_form is None else reports.fmt_number(chk.closed_form),
            "" if resid is None else format_rational(resid, 60),
        ))
    reports.write_csv(out / "identities.csv",
                      ["n", "q_n", "ex_recursion", "ex_law", "ex_closed_form", "limit_residual"], rows)
    if resolution is not None:
        payload = {"constant": resolution.name, "value": format_rational(resolution.value, 60),
                   "candidates": {k: format_rational(v, 60) for k, v in resolution.candidates.items()}}
        _write_json(out / "constant.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"{len(rows)} depths, {failures} exact mismatches")
    return EXIT_FAIL if failures else 0


def cmd_replay(args, out: Path) -> int:
    doc = json.loads(Path(args.file).read_text())
    if "method" in doc:
        cert = BoundCertificate(**doc)
        again = replay_certificate(cert)
        if again == cert:
            print("certificate reproduced")
            return 0
        print("certificate did not reproduce", file=sys.stderr)
        return EXIT_REFUSED
    if "command" not in doc:
        raise ConfigError("file is neither a certificate nor a run manifest")
    argv = [doc["command"], "--config", args.file]
    if args.out:
        argv += ["--out", args.out]
    return main(argv)


# -- parser -------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--config", default=None, help="JSON file of flag values, or a run manifest")
    p.add_argument("--no-figure", action="store_true", help="skip PNG figures")


def _model(p, depth=40, scale=True):
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--depth", type=int, default=depth)
    if scale:
        p.add_argument("--scale", type=scale_arg, default=DEFAULT_SCALE, help="decimal digits, or 'exact'")


COMMANDS = {}


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="treepark", description="Parking on trees: exact laws, bounds, simulation.")
    parser.add_argument("--version", action="version", version=f"treepark {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _common(p)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    for name, func, text in (("qn-table", cmd_qn_table, "P(X_n = 0) over an alpha grid"),
                             ("ex-table", cmd_ex_table, "E X_n and E X_n / d^n over an alpha grid")):
        p = add(name, func, text)
        _model(p)
        p.add_argument("--arrival", default=None, help="e.g. two:0.05")
        p.add_argument("--family", default="two")
        p.add_argument("--alpha-grid", default=None, help="start:stop:step")
        if name == "qn-table":
            p.add_argument("--depths", default=None, help="comma list of n to keep")

    p = add("bound-upper", cmd_bound_upper, "certify alpha > alpha_c")
    _model(p, depth=50)
    p.add_argument("--arrival", required=True)

    p = add("bound-search", cmd_bound_search, "smallest certified alpha on a grid")
    _model(p, depth=50)
    p.add_argument("--family", default="two")
    p.add_argument("--alpha-grid", required=True)
    p.add_argument("--exhaustive", action="store_true")

    p = add("bound-lower", cmd_bound_lower, "counting lower bound on alpha_c")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--growth", default=None, help="catalan, ed, or a number")

    p = add("bound-percolation", cmd_bound_percolation, "k d^-k upper bound")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=2)

    p = add("simulate", cmd_simulate, "Monte Carlo estimates")
    _model(p, depth=10, scale=False)
    p.add_argument("--offspring", default=None, help="d, det:d, poisson:m or pmf:k:w,...")
    p.add_argument("--arrival", required=True)
    p.add_argument("--trials", type=int, default=10**4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)

    p = add("oracle-check", cmd_oracle_check, "bottom-up count against literal car moves")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--max-depth", type=int, default=5)
    p.add_argument("--tie-seeds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = add("icx-check", cmd_icx_check, "increasing convex order of X_n under two arrival laws")
    _model(p, depth=10, scale=False)
    p.add_argument("--arrival-a", required=True)
    p.add_argument("--arrival-b", required=True)

    p = add("verify-identities", cmd_verify_identities, "mean recursion, closed form, residuals")
    _model(p, depth=12)
    p.add_argument("--arrival", required=True)

    p = add("replay", cmd_replay, "re-run a manifest or re-check a certificate")
    p.add_argument("file")
    return parser, subs


_NOT_CONFIG = {"out", "config", "func", "command", "file"}
_SEEDED = {"seed"}


def _load_config(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]
    return {k.replace("-", "_"): v for k, v in doc.items()}


def _versions() -> dict:
    import gmpy2
    import matplotlib
    import numpy

    return {"treepark": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
            "gmpy2": gmpy2.version(), "matplotlib": matplotlib.__version__}


def _snapshot(out: Path) -> dict:
    return {p.name: p.stat().st_mtime_ns for p in out.iterdir() if p.is_file()}


def _write_manifest(args, out: Path, before: dict) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}
    after = _snapshot(out)
    outputs = sorted(k for k, t in after.items() if before.get(k) != t and k != "manifest.json")
    manifest = {
        "command": args.command,
        "config": config,
        "seeds": [config[k] for k in sorted(_SEEDED & config.keys())],
        "versions": _versions(),
        "outputs": outputs,
    }
    _write_json(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _parse(argv, parser, subs):
    # required flags may come from a config file, so they are checked after merging
    required = {name: [a for a in sp._actions if a.required] for name, sp in subs.items()}
    for actions in required.values():
        for a in actions:
            a.required = False
    args = parser.parse_args(argv)
    sp = subs[args.command]
    if getattr(args, "config", None):
        values = _load_config(args.config)
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(values) - known - {"command"})
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        # config supplies defaults; explicit flags still win
        sp.set_defaults(**{k: v for k, v in values.items() if k not in _NOT_CONFIG})
        args = parser.parse_args(argv)
        if isinstance(getattr(args, "scale", None), str):
            args.scale = scale_arg(args.scale)
    missing = [a.option_strings[0] if a.option_strings else a.dest
               for a in required[args.command] if getattr(args, a.dest) is None]
    if missing:
        sp.error(f"the following arguments are required: {', '.join(missing)}")
    return args


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = _parse(argv, parser, subs)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
        before = _snapshot(out)
        code = args.func(args, out)
    except (SupportGuardError, ResourceGuardError) as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ConfigError, ValueError, KeyError, ZeroDivisionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command != "replay":
        _write_manifest(args, out, before)
    return code


if __name__ == "__main__":
    sys.exit(main())
