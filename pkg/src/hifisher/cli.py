"""Command-line front end.

Exit codes: 0 when every check passes, 2 for configuration or domain
errors, 3 for numerical failures (identity violations, non-positive
information, oracle disagreement, non-converged quadrature).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from .errors import DomainError, HiFisherError
from .estimators import EstimatorConfig
from .models import DESCRIPTIONS, MODELS, get_model
from .models.mixture import discrete_component, gaussian_component

SCHEMA_VERSION = 1
CSV_HEADER = "theta,i_w,e_iw_given_y,e_iy_given_w,i_y,jeffreys,upper_bound,stderr_jeffreys"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
KL_TOL = 1e-12

MODEL_PARAMS = {
    "mixture": ("components",),
    "gaussian2": ("mu", "delta", "parametrization"),
    "studentt": (),
    "lasso": ("p", "sigma"),
    "hyperbolic": (),
}
REQUIRED_PARAMS = {"lasso": ("p",)}


class ConfigError(Exception):
    pass


def _fmt(x):
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _dumps(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, allow_nan=False)


def _workers():
    raw = os.environ.get("HIFISHER_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"HIFISHER_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("HIFISHER_THREADS must be >= 1")
    return n


def _parse_component(text):
    kind, _, rest = text.partition(":")
    try:
        if kind == "normal":
            mean, sd = (float(v) for v in rest.split(":"))
            return gaussian_component(mean, sd)
        if kind == "discrete":
            return discrete_component([float(v) for v in rest.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad component {text!r}: {exc}") from None
    raise ConfigError(f"component {text!r} must be normal:MEAN:SD or discrete:P0,P1,...")


def build_model(args):
    name = args.model
    if name is None:
        raise ConfigError("missing required parameter --model")
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(sorted(MODELS))}")
    allowed = MODEL_PARAMS[name]
    params = {}
    for field in ("p", "sigma", "mu", "delta", "parametrization", "components"):
        val = getattr(args, field, None)
        if val is None:
            continue
        if field not in allowed:
            raise ConfigError(f"parameter --{field} does not apply to model {name}")
        params[field] = [_parse_component(c) for c in val] if field == "components" else val
    for req in REQUIRED_PARAMS.get(name, ()):
        if req not in params:
            raise ConfigError(f"missing required parameter --{req} for model {name}")
    try:
        return get_model(name, **params)
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"invalid parameters for model {name}: {exc}") from None


def build_config(args):
    try:
        return EstimatorConfig(
            n_outer=args.n_outer,
            n_inner=args.n_inner,
            seed=args.seed,
            fd_step=args.fd_step,
            quad_points=args.quad_points,
            quad_range_sd=args.quad_range_sd,
            analytic=args.analytic,
            inner_method=args.inner_method,
        )
    except ValueError as exc:
        raise ConfigError(f"estimator configuration: {exc}") from None


def build_grid(args, model):
    """Free coordinates for every requested parameter point."""
    from .priors import barycentric_grid, parse_grid

    if model.domain.simplex and model.theta_dim > 1:
        if args.simplex_depth is None:
            raise ConfigError("missing required parameter --simplex-depth for a mixture with p >= 2")
        try:
            return barycentric_grid(model.theta_dim + 1, args.simplex_depth)[:, 1:]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if args.theta is not None:
        coords = np.asarray(args.theta, dtype=float)
        if coords.size > 1 and np.any(np.diff(coords) <= 0):
            raise ConfigError("--theta values must be strictly increasing")
    elif args.grid is not None:
        try:
            coords = parse_grid(args.grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise ConfigError("missing required parameter --theta-grid (or --theta)")
    for c in coords:
        if not model.domain.admits_free(np.atleast_1d(c)):
            raise ConfigError(f"grid value {c!r} lies outside the domain of {model.name}")
    return coords[:, None]


def _points(model, coords):
    from .priors import grid_points

    return grid_points(model, coords)


def _run_points(fn, n, workers):
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(n)))
    return [fn(k) for k in range(n)]


class _Output:
    def __init__(self, path):
        self.path = path
        self.lines = []

    def write(self, line):
        self.lines.append(line)

    def flush(self):
        text = "".join(line + "\n" for line in self.lines)
        if self.path in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(self.path, "w", newline="") as fh:
                fh.write(text)


def cmd_decompose(args):
    from .core.decomposition import decompose_two_level

    model = build_model(args)
    cfg = build_config(args)
    coords = build_grid(args, model)
    points = _points(model, coords)
    reports = _run_points(lambda k: decompose_two_level(model, points[k], cfg.at(k)), len(points), _workers())
    records = []
    for k, r in enumerate(reports):
        rec = r.to_dict()
        rec["index"] = k
        rec["model"] = model.name
        records.append(rec)
    ok = all(r.ok for r in reports)
    out = _Output(args.out)
    if args.json:
        out.write(_dumps({"schema_version": SCHEMA_VERSION, "command": "decompose", "ok": ok, "records": records}))
    else:
        for rec in records:
            rec["schema_version"] = SCHEMA_VERSION
            out.write(_dumps(rec))
    out.flush()
    if not ok:
        bad = [k for k, r in enumerate(reports) if not r.ok]
        logging.getLogger(__name__).error("identity violations at grid indices %s", bad)
    return EXIT_OK if ok else EXIT_NUMERIC


def _theta_text(row):
    return ";".join(_fmt(v) for v in row)


def cmd_prior(args):
    from dataclasses import replace

    from .priors import jeffreys_grid, prior_table, properness_diagnostic

    model = build_model(args)
    cfg = build_config(args)
    coords = build_grid(args, model)
    grid = jeffreys_grid(model, coords if coords.shape[1] > 1 else coords[:, 0], cfg, _workers())
    rows = prior_table(grid)
    slack = grid.dominance_slack()
    violations = [int(k) for k in np.flatnonzero(slack < 0)]
    identity = [k for k, r in enumerate(grid.reports) if not r.ok]
    footer = {
        "schema_version": SCHEMA_VERSION,
        "model": model.name,
        "n_points": len(rows),
        "seed": cfg.seed,
        "dominance_violations": violations,
        "identity_violations": identity,
    }
    if grid.properness is not None:
        p = grid.properness
        upper = properness_diagnostic(replace(grid, properness=None), column="upper_bound")
        footer.update(
            {
                "normalization": p.normalization,
                "tail_exponent": p.tail("upper").exponent,
                "tail_exponent_stderr": p.tail("upper").stderr,
                "lower_exponent": p.tail("lower").exponent,
                "lower_exponent_stderr": p.tail("lower").stderr,
                "tails": [t.__dict__ for t in p.tails],
                "verdict": p.verdict,
                "upper_bound_normalization": upper.normalization,
                "upper_bound_verdict": upper.verdict,
            }
        )
    out = _Output(args.out)
    if args.json:
        out.write(_dumps({"schema_version": SCHEMA_VERSION, "command": "prior", "rows": rows, "footer": footer}))
        out.flush()
    else:
        out.write(CSV_HEADER)
        for r in rows:
            cells = [_theta_text(r["theta"])] + [
                _fmt(r[c]) for c in ("i_w", "e_iw_given_y", "e_iy_given_w", "i_y", "jeffreys", "upper_bound", "stderr_jeffreys")
            ]
            out.write(",".join(cells))
        out.flush()
        footer_path = args.footer or (None if args.out in (None, "-") else args.out + ".footer.json")
        text = _dumps(footer) + "\n"
        if footer_path is None:
            sys.stderr.write(text)
        else:
            with open(footer_path, "w") as fh:
                fh.write(text)
    return EXIT_OK if not violations and not identity else EXIT_NUMERIC


def _rel(a, b):
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


def cmd_validate(args):
    from .core.decomposition import marginal_fisher
    from .oracle import kl_hessian_fisher, score_variance_fisher

    model = build_model(args)
    if model.oracle_exempt:
        raise ConfigError(f"validate does not apply to {model.name}: {model.oracle_exempt}")
    if model.latent_dim != 1:
        raise ConfigError("validate needs a scalar-latent model")
    cfg = build_config(args)
    coords = build_grid(args, model)
    points = _points(model, coords)

    def one(k):
        c = cfg.at(k)
        dec = marginal_fisher(model, points[k], c)
        sv = score_variance_fisher(model, points[k], c)
        kl = kl_hessian_fisher(model, points[k], c)
        return {
            "index": k,
            "theta": points[k].values.tolist(),
            "decomposition": dec.entries.tolist(),
            "decomposition_stderr": dec.se.tolist(),
            "score_variance": sv.entries.tolist(),
            "kl_hessian": kl.entries.tolist(),
            "rel_err_score": _rel(dec.entries, sv.entries),
            "rel_err_kl": _rel(dec.entries, kl.entries),
            "rel_err_oracles": _rel(kl.entries, sv.entries),
        }

    rows = _run_points(one, len(points), _workers())
    worst = max(max(r["rel_err_score"], r["rel_err_kl"]) for r in rows)
    ok = worst <= args.tolerance
    out = _Output(args.out)
    summary = {"schema_version": SCHEMA_VERSION, "command": "validate", "model": model.name,
               "tolerance": args.tolerance, "max_rel_err": worst, "ok": ok}
    if args.json:
        out.write(_dumps(dict(summary, rows=rows)))
    else:
        out.write(f"{'theta':>24} {'decomposition':>22} {'score_variance':>22} {'kl_hessian':>22} {'rel_err':>10}")
        for r in rows:
            out.write(
                f"{_theta_text(r['theta']):>24} {_fmt(np.ravel(r['decomposition'])[0]):>22} "
                f"{_fmt(np.ravel(r['score_variance'])[0]):>22} {_fmt(np.ravel(r['kl_hessian'])[0]):>22} "
                f"{max(r['rel_err_score'], r['rel_err_kl']):>10.3e}"
            )
        out.write(f"max relative error {worst:.3e} ({'pass' if ok else 'FAIL'} at {args.tolerance:g})")
    out.flush()
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_klcheck(args):
    from .oracle import discrete_kl_chain_check, random_joint

    if args.instances < 1 or args.size < 1:
        raise ConfigError("--instances and --size must be positive")
    if args.size > 64:
        raise ConfigError("--size must be at most 64")
    if not 0 <= args.zeros < 1:
        raise ConfigError("--zeros must lie in [0, 1)")
    rows = []
    for i in range(args.instances):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed, spawn_key=(i,))))
        f = random_joint(rng, args.size, args.size)
        g = random_joint(rng, args.size, args.size, zeros=args.zeros)
        r = discrete_kl_chain_check(f, g)
        rows.append(
            {
                "instance": i,
                "kl_joint": r.joint,
                "residual_w_first": r.residual_w_first,
                "residual_y_first": r.residual_y_first,
                "infinite": r.infinite,
                "infinite_consistent": r.infinite_consistent,
            }
        )
    worst = max(max(r["residual_w_first"], r["residual_y_first"]) for r in rows)
    ok = worst <= KL_TOL
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "klcheck",
        "instances": args.instances,
        "size": args.size,
        "max_residual": worst,
        "infinite_consistent": sum(r["infinite_consistent"] for r in rows),
        "ok": ok,
    }
    out = _Output(args.out)
    if args.json:
        out.write(_dumps(dict(summary, rows=rows)))
    else:
        for r in rows:
            out.write(_dumps(r))
        out.write(_dumps(summary))
    out.flush()
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_list_models(args):
    entries = [
        {"name": name, "description": DESCRIPTIONS[name], "parameters": list(MODEL_PARAMS[name])}
        for name in sorted(MODELS)
    ]
    out = _Output(args.out)
    if args.json:
        out.write(_dumps({"schema_version": SCHEMA_VERSION, "command": "list-models", "models": entries}))
    else:
        for e in entries:
            params = ", ".join(e["parameters"]) or "-"
            out.write(f"{e['name']:<11} {e['description']}  [params: {params}]")
    out.flush()
    return EXIT_OK


def _add_model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=sorted(MODELS), help="catalog model name")
    g.add_argument("--p", type=int, help="lasso: number of coefficients")
    g.add_argument("--sigma", type=float, help="lasso: known scale")
    g.add_argument("--mu", type=float, help="gaussian2: latent mean")
    g.add_argument("--delta", type=float, help="gaussian2: known observation precision")
    g.add_argument("--parametrization", choices=["precision", "variance"], help="gaussian2 coordinate")
    g.add_argument(
        "--components", nargs="+", metavar="SPEC", help="mixture components: normal:MEAN:SD or discrete:P0,P1,..."
    )
    grid = p.add_argument_group("grid")
    grid.add_argument("--theta-grid", "--phi-grid", dest="grid", metavar="MIN:MAX:COUNT[:log]")
    grid.add_argument("--theta", nargs="+", type=float, help="explicit parameter values")
    grid.add_argument("--simplex-depth", type=int, help="mixture p >= 2: barycentric subdivision depth")
    est = p.add_argument_group("estimator")
    est.add_argument("--n-outer", type=int, default=20_000)
    est.add_argument("--n-inner", type=int, default=1)
    est.add_argument("--fd-step", type=float, default=1e-4)
    est.add_argument("--quad-points", type=int, default=201)
    est.add_argument("--quad-range-sd", type=float, default=12.0)
    est.add_argument("--analytic", choices=["all", "per_draw", "none"], default="all")
    est.add_argument("--inner-method", choices=["mc", "quadrature"], default="mc")


def _add_io_args(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=0, help="root seed for every random stream")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--json", action="store_true", help="emit one structured JSON document")


def make_parser():
    parser = argparse.ArgumentParser(prog="hifisher", description="Fisher information of hierarchical models")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="all Fisher components per grid point (JSON lines)")
    _add_model_args(p)
    _add_io_args(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("prior", help="Jeffreys and upper-bound priors as CSV plus a JSON footer")
    _add_model_args(p)
    _add_io_args(p)
    p.add_argument("--footer", help="footer path (default: OUT.footer.json, or stderr)")
    p.set_defaults(func=cmd_prior)

    p = sub.add_parser("validate", help="compare the decomposition with the quadrature oracles")
    _add_model_args(p)
    _add_io_args(p)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("klcheck", help="KL chain rule on random discrete joints")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--zeros", type=float, default=0.0, help="chance a cell of g is zero")
    _add_io_args(p)
    p.set_defaults(func=cmd_klcheck)

    p = sub.add_parser("list-models", help="catalog names and parameters")
    _add_io_args(p, seed=False)
    p.set_defaults(func=cmd_list_models)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "seed", 0) is not None and not 0 <= getattr(args, "seed", 0) < 2**64:
        print("error: --seed must be a 64-bit unsigned integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HiFisherError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
