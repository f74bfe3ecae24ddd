"""Command-line front end: ``twoweight <subcommand> [flags]``.

Every subcommand writes one JSON report (stdout, ``--out``, or a file in the
directory named by ``TWOWEIGHT_OUT``) and exits with status 0 iff all of its
checks pass.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import acceptance, bellman, exponents, muckenhoupt, operators, poly_doubling, sharpness, testing
from .measures import Cube, GridMeasure, MeasureError, MeasureSpec, dyadic_family, generate, load, \
    spec_from_dict

SCHEMA_VERSION = "1.0"
OUT_ENV = "TWOWEIGHT_OUT"


# -- helpers -------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _parse_measure(text: str) -> MeasureSpec:
    """``KIND`` or ``KIND:key=value,key=value`` (values parsed as JSON, then as fractions)."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            params[key] = str(Fraction(val))
    return MeasureSpec(kind, params)


def _box(args, n: int) -> Cube | None:
    if not args.box:
        return None
    vals = [float(v) for v in args.box]
    if len(vals) != n + 1:
        raise MeasureError(f"--box takes {n} corner coordinates and a side")
    return Cube(tuple(vals[:n]), vals[n])


def _measures(args, default: str = "lebesgue") -> list[GridMeasure]:
    out = []
    for path in args.measure_file or []:
        with open(path) as fh:
            doc = json.load(fh)
        if "kind" in doc:
            out.append(generate(spec_from_dict(doc), args.n, args.level, _box(args, args.n)))
        else:
            out.append(load(path))
    for text in args.measure or []:
        out.append(generate(_parse_measure(text), args.n, args.level, _box(args, args.n)))
    if not out:
        out.append(generate(MeasureSpec(default), args.n, args.level, _box(args, args.n)))
    return out


def _pair(args, default: str = "lebesgue"):
    ms = _measures(args, default)
    if len(ms) > 2:
        raise MeasureError("at most two measures (sigma, omega)")
    return ms[0], ms[-1]


def _family(mu: GridMeasure, args):
    finest = args.finest if args.finest is not None else max(0, mu.level - 2)
    return dyadic_family(mu.box, range(finest + 1))


def _cube(args, mu: GridMeasure) -> Cube:
    if args.cube:
        vals = [float(v) for v in args.cube]
        return Cube(tuple(vals[:-1]), vals[-1])
    return mu.box


# -- subcommands ---------------------------------------------------------------

def cmd_exponents(args) -> dict:
    sigma, omega = _pair(args)
    fam = _family(sigma, args)
    d = exponents.doubling_exponent(sigma, cubes=fam)
    r = exponents.reverse_doubling_exponent(sigma, cubes=fam)
    g = exponents.diagonal_reverse_doubling_exponent(sigma, omega, cubes=fam)
    return {"doubling": d.to_dict(), "reverse": r.to_dict(), "diagonal_reverse": g.to_dict(), "checks": {}}


def cmd_a2(args) -> dict:
    sigma, omega = _pair(args)
    fam = _family(sigma, args)
    out = {"classical": muckenhoupt.a2_classical(sigma, omega, args.alpha, fam).to_dict()}
    if args.one_tailed:
        out["one_tailed_forward"] = muckenhoupt.a2_one_tailed(sigma, omega, args.alpha, fam).to_dict()
        out["one_tailed_backward"] = muckenhoupt.a2_one_tailed(sigma, omega, args.alpha, fam, backward=True).to_dict()
    out["checks"] = {}
    return out


def cmd_pairing(args) -> dict:
    sigma, omega = _pair(args)
    Q = _cube(args, sigma)
    res = operators.fractional_pairing(sigma, omega, Q, args.alpha, return_error=True)
    out = {"cube": Q.to_dict(), "alpha": args.alpha, "pairing": res.value, "error_bar": res.error_bar,
           "checks": {}}
    if args.theta is not None:
        sb = operators.shell_upper_bound(sigma, omega, Q, args.alpha, args.theta, detail=True)
        out["shell_upper_bound"] = sb.value
        out["shell_hypothesis_ok"] = bool(np.all(sb.hypothesis_ok))
        out["theorem_constant"] = operators.theorem_constant(args.theta, args.alpha, sigma.dimension)
        out["checks"]["shell_dominates"] = bool(sb.value >= res.value)
    return out


def cmd_maximal(args) -> dict:
    mu = _measures(args)[0]
    Q = _cube(args, mu)
    beta = args.beta if args.beta is not None else args.alpha / 2
    prof = operators.maximal_energy_profile(mu, Q, beta, args.levels)
    return {"cube": Q.to_dict(), "beta": beta, "cutoffs": list(range(args.levels + 1)),
            "energies": prof, "checks": {}}


def cmd_hdyadic(args) -> dict:
    rng = np.random.default_rng(args.seed)
    depth = args.depth or 8
    if args.pair_file:
        with open(args.pair_file) as fh:
            pair = bellman.WeightPair.from_dict(json.load(fh))
        if pair.depth > 20:
            # too deep to expand; the pairing is half the tree functional
            return {"depth": pair.depth, "pairing": pair.functional() / 2, "expanded": False, "checks": {}}
        u, v = pair.leaves()
    else:
        u = rng.uniform(0.1, 2.0, 1 << depth)
        v = rng.uniform(0.1, 2.0, 1 << depth)
    tu, tv = operators.HaarTree(u), operators.HaarTree(v)
    p = operators.pairing(tu, tv)
    riemann = float(np.mean(operators.hilbert_on_leaves(tv) * u))
    return {"depth": tu.depth, "pairing": p, "riemann_sum": riemann, "expanded": True,
            "checks": {"pairing_identity": abs(p - riemann) <= 1e-12 * max(1.0, abs(riemann))}}


def cmd_testing(args) -> dict:
    sigma, omega = _pair(args)
    fam = _family(sigma, args)
    out = {
        "BCT": testing.bct_fractional(sigma, omega, args.alpha, fam).to_dict(),
        "T-forward": testing.cube_testing(sigma, omega, args.alpha, fam).to_dict(),
        "T-backward": testing.cube_testing(sigma, omega, args.alpha, fam, "backward").to_dict(),
        "A-cancel-forward": testing.cancellation_constant(sigma, omega, args.alpha).to_dict(),
        "A-cancel-backward": testing.cancellation_constant(sigma, omega, args.alpha, direction="backward").to_dict(),
        "Norm": testing.operator_norm(sigma, omega, args.alpha).to_dict(),
    }
    out["checks"] = {"bct_below_norm": out["BCT"]["value"] <= out["Norm"]["value"] * (1 + 1e-9)}
    return out


def cmd_bellman(args) -> dict:
    fld = bellman.bellman_iterate(bellman.BellmanField.empty(args.tau, args.size), args.max_sweeps,
                                  target=args.target)
    _, pair, cert = bellman.certify(args.tau, args.gamma, depth=args.depth, fld=fld)
    out = {"field": fld.to_dict(), "certificate": cert.to_dict(),
           "checks": {f"certificate_{k}": v for k, v in cert.checks.items()}}
    out["pair"] = {"depth": pair.depth, "nodes": pair.node_count, "start": list(pair.start)}
    out["_pair"] = pair
    return out


def cmd_sharpness(args) -> dict:
    if args.scenario == "line":
        rep = sharpness.line_measure_divergence(1.0, args.levels, max(args.level, args.levels))
    else:
        rep = sharpness.cantor_scenario(args.level, args.rounds)
    doc = rep.to_dict()
    doc["checks"] = rep.checks
    return doc


def cmd_poly(args) -> dict:
    mu = _measures(args)[0]
    Q = _cube(args, mu)
    one = poly_doubling.energy_constant(mu, Q, args.kappa, seed=args.seed)
    fam = poly_doubling.triadic_family(args.finest or 4, mu.box) if args.triadic else _family(mu, args)
    glob = poly_doubling.energy_constant_family(mu, fam, args.kappa, seed=args.seed)
    params = poly_doubling.doubling_from_energy(glob.constant, mu.dimension, args.beta)
    measured = exponents.doubling_check(mu, params.shrink, fam)
    return {"cube": one.to_dict(), "family": glob.to_dict(), "doubling_parameters": params.to_dict(),
            "measured_gamma": measured,
            "checks": {"doubling_check": bool(measured >= params.gamma)}}


def cmd_verify_all(args) -> dict:
    sel = {int(x) for x in args.only.split(",")} if args.only else None
    results = acceptance.run_all(sel)
    crit = []
    for r in results:
        print(r.line(), file=sys.stderr)
        d = r.to_dict()
        d.pop("seconds")
        crit.append(d)
    return {"criteria": crit, "checks": {f"criterion_{r.number}": r.passed for r in results}}


COMMANDS = {
    "exponents": cmd_exponents,
    "a2": cmd_a2,
    "pairing": cmd_pairing,
    "maximal": cmd_maximal,
    "hdyadic": cmd_hdyadic,
    "testing": cmd_testing,
    "bellman": cmd_bellman,
    "sharpness": cmd_sharpness,
    "poly": cmd_poly,
    "verify-all": cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--measure", action="append",
                        help="KIND[:key=value,...]; give twice for (sigma, omega)")
    common.add_argument("--measure-file", action="append", help="measure JSON (cells or a spec with 'kind')")
    common.add_argument("--n", type=int, default=1, help="dimension")
    common.add_argument("--level", type=int, default=None, help="finest grid level L (default 10; 20 for the Cantor scenario)")
    common.add_argument("--box", nargs="+", help="support box: corner coordinates then side")
    common.add_argument("--cube", nargs="+", help="cube Q: corner coordinates then side (default: the box)")
    common.add_argument("--finest", type=int, default=None, help="finest level of the scanned cube family")
    common.add_argument("--alpha", type=float, default=0.5)
    common.add_argument("--tau", type=float, default=0.2)
    common.add_argument("--gamma", type=float, default=5.0)
    common.add_argument("--depth", type=int, default=None)
    common.add_argument("--kappa", type=int, default=2)
    common.add_argument("--threads", type=int, default=1,
                        help="parallelism bound (computations are serial; results never depend on it)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="report path (default: stdout or $%s/<command>.json)" % OUT_ENV)

    p = argparse.ArgumentParser(prog="twoweight", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("exponents", parents=[common], help="doubling and reverse doubling exponents")
    a2 = sub.add_parser("a2", parents=[common], help="fractional Muckenhoupt constants")
    a2.add_argument("--one-tailed", action="store_true")
    pr = sub.add_parser("pairing", parents=[common], help="fractional pairing and shell bound")
    pr.add_argument("--theta", type=float, default=None)
    mx = sub.add_parser("maximal", parents=[common], help="cutoff maximal energies")
    mx.add_argument("--beta", type=float, default=None)
    mx.add_argument("--levels", type=int, default=10)
    hd = sub.add_parser("hdyadic", parents=[common], help="dyadic Hilbert pairing identity")
    hd.add_argument("--pair-file")
    sub.add_parser("testing", parents=[common], help="testing constants and the discretized norm")
    bl = sub.add_parser("bellman", parents=[common], help="Bellman iteration and certificate")
    bl.add_argument("--size", type=int, default=256)
    bl.add_argument("--max-sweeps", type=int, default=10_000)
    bl.add_argument("--target", type=float, default=10.0, help="stop sweeping once max B/sqrt(x1 x2) exceeds this")
    sh = sub.add_parser("sharpness", parents=[common], help="line-measure and Cantor sharpness scenarios")
    sh.add_argument("--scenario", choices=("line", "cantor"), default="line")
    sh.add_argument("--levels", type=int, default=10)
    sh.add_argument("--rounds", type=int, default=5)
    po = sub.add_parser("poly", parents=[common], help="energy constant and doubling parameters")
    po.add_argument("--beta", type=float, default=0.5)
    po.add_argument("--triadic", action="store_true", help="scan triadic intervals instead of dyadic cubes")
    va = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    va.add_argument("--only", help="comma-separated criterion numbers")
    return p


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "out"}


def _write(doc: dict, args, pair=None) -> None:
    text = json.dumps(_clean(doc), indent=1, sort_keys=True)
    target = args.out
    if target is None and os.environ.get(OUT_ENV):
        target = str(Path(os.environ[OUT_ENV]) / f"{args.command}.json")
    if target is None:
        print(text)
        return
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n")
    if pair is not None:
        pair_path = path.with_name(path.stem + ".pair.json")
        pair_path.write_text(json.dumps(_clean(pair.to_dict())) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.level is None:
        args.level = 20 if args.command == "sharpness" and args.scenario == "cantor" else 10
    try:
        body = COMMANDS[args.command](args)
    except MeasureError as exc:
        print(f"twoweight: error: {exc}", file=sys.stderr)
        return 2
    pair = body.pop("_pair", None)
    checks = body.get("checks", {})
    failed = sorted(k for k, v in checks.items() if not v)
    doc = {"schema_version": SCHEMA_VERSION, "command": args.command, "config": _config(args),
           "status": "FAIL" if failed else "PASS", "failed": failed, "report": body}
    _write(doc, args, pair)
    if failed:
        print(f"twoweight: failed checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
