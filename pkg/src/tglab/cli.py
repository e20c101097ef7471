"""Command-line driver: ``tglab {verify,sweep,export} --config PATH``.

Exit codes: 0 when every requested claim passes, 2 when any claim fails,
1 for usage, configuration and I/O errors. Log verbosity comes from the
``TGLAB_LOG`` environment variable (``error``, ``info`` or ``debug``).
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import analysis, coarse, problems, smoothing, transfer
from .config import GENERATORS, apply_seed_override, grid_points, load_config
from .errors import ConfigError, TGLabError

log = logging.getLogger("tglab")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
SUMMARY_COLUMNS = ("setup", "claim", "lower", "upper", "measured", "tolerance", "pass", "detail")
SWEEP_METRICS = ("sigma_tg", "delta_tg", "delta_pencil_min", "floor", "factor_measured",
                 "factor_identity", "optimal_bound", "L", "U", "factor_inexact",
                 "nonlinear_bound", "status")
NEEDS_MODE = {
    "sandwich": ("exact", "linear"),
    "corollary": ("exact", "linear"),
    "nonlinear": ("nonlinear",),
    "randomized": ("randomized",),
}


def _fmt(x):
    if x is None or x == "":
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def build_problem(cfg):
    p = cfg["problem"]
    if p["path"] is not None:
        return problems.load_problem(p["path"], label="matrix-market")
    return GENERATORS[p["generator"]](**p["params"])


def build_components(cfg):
    """``(setup, solver)`` for one resolved configuration."""
    problem = build_problem(cfg)
    sm = cfg["smoother"]
    if sm["omega"] == "auto":
        smoother = smoothing.auto_scale(problem, sm["kind"])
    else:
        smoother = smoothing.build_smoother(problem, sm["kind"], float(sm["omega"]))
    rc = cfg["restriction"]
    n = problem.n
    n_c = n // 4 if rc["n_c"] is None else rc["n_c"]
    kind = rc["kind"]
    if kind == "injection":
        r = transfer.injection_restriction(n, n_c)
    elif kind == "aggregation":
        r = transfer.aggregation_restriction(n, n_c)
    elif kind == "random":
        r = transfer.random_restriction(n, n_c, rc["seed"])
    else:
        r = transfer.optimal_restriction(problem, smoother, n_c)
    setup = analysis.make_setup(problem, smoother, r, allow_uncertified=sm["allow_uncertified"])
    return setup, build_solver(cfg["coarse_solver"], setup.transfer.a_c)


def build_solver(cs, a_c):
    mode = cs["mode"]
    if mode == "exact":
        return coarse.exact_solver(a_c)
    if mode == "linear":
        return coarse.stationary_solver(a_c, cs["flavor"], omega=float(cs["omega"]))
    if mode == "nonlinear":
        return coarse.cg_solver(a_c, float(cs["epsilon"]), oracle_mode=bool(cs["oracle_mode"]))
    return coarse.randomized_solver(a_c, cs["steps"], cs["sketch_dim"], cs["seed"])


def _row(claim, passed, tolerance, measured=None, lower=None, upper=None, detail=""):
    return {"claim": claim, "lower": lower, "upper": upper, "measured": measured,
            "tolerance": tolerance, "pass": bool(passed), "detail": detail}


def evaluate_claim(claim, setup, solver, cfg):
    """One summary row for `claim`; numerical failures become failing rows."""
    try:
        return _evaluate(claim, setup, solver, cfg)
    except TGLabError as exc:
        return _row(claim, False, None, detail=f"{type(exc).__name__}: {exc}")


def _evaluate(claim, setup, solver, cfg):
    m = setup.smoother.m
    if claim == "identity":
        sigma = analysis.sigma_tg(setup)
        ident = analysis.sqrt_unit(1.0 - sigma)
        meas = analysis.measured_factor(analysis.e_tg(setup), m)
        return _row(claim, abs(meas - ident) <= 1e-8 * (1.0 + meas), 1e-8, meas, ident, ident)
    if claim == "optimal":
        mu = analysis.mu_spectrum(setup.problem, setup.smoother)
        bound = analysis.optimal_bound(mu, setup.n_c)
        meas = analysis.measured_factor(analysis.e_tg(setup), m)
        if setup.transfer.restriction.kind == "optimal":
            return _row(claim, abs(meas - bound) <= 1e-8, 1e-8, meas, bound, bound, "equality")
        return _row(claim, meas >= bound - 1e-9, 1e-9, meas, bound, None, "lower bound")
    if claim == "monotonicity":
        rep = analysis.verify_monotonicity(setup, cfg["extra_rows"], cfg["seed"],
                                           levels=cfg["levels"], strict=False)
        detail = "factors=" + ";".join(f"{f:.12g}" for f in rep.factors)
        return _row(claim, rep.passed, 1e-9, max(rep.factors[1:]), None, rep.factors[0], detail)
    if claim == "sandwich":
        d = solver.diagnostics
        sigma = analysis.sigma_tg(setup)
        delta = analysis.delta_tg(setup)
        floor = smoothing.smoother_floor(setup.smoother)
        lower, upper = analysis.inexact_bounds(sigma, delta, floor, d.alpha1, d.alpha2)
        meas = analysis.measured_factor(analysis.e_itg(setup, d), m)
        return _row(claim, lower - 1e-8 <= meas <= upper + 1e-8, 1e-8, meas, lower, upper)
    if claim == "corollary":
        d = solver.diagnostics
        if d.beta1 is None:
            return _row(claim, False, 1e-8, detail="B_c is not SPD")
        sigma = analysis.sigma_tg(setup)
        delta = analysis.delta_tg(setup)
        floor = smoothing.smoother_floor(setup.smoother)
        via_alpha = analysis.inexact_bounds(sigma, delta, floor, d.alpha1, d.alpha2)
        a1, a2 = coarse.beta_to_alpha(d.beta1, d.beta2)
        via_beta = analysis.inexact_bounds(sigma, delta, floor, a1, a2)
        gap = max(abs(x - y) for x, y in zip(via_alpha, via_beta))
        detail = f"alpha-route=({via_alpha[0]:.12g},{via_alpha[1]:.12g}) beta-route=({via_beta[0]:.12g},{via_beta[1]:.12g})"
        return _row(claim, gap <= 1e-8, 1e-8, gap, None, 0.0, detail)
    if claim == "nonlinear":
        rep = analysis.verify_nonlinear(setup, solver, cfg["trials"], cfg["seed"], strict=False)
        return _row(claim, rep.passed, 1e-8, rep.max_ratio, None, rep.bound)
    if claim == "randomized":
        rep = analysis.verify_randomized(setup, solver, cfg["trials"], cfg["seed"],
                                         initial_errors=cfg["initial_errors"], strict=False)
        worst = max(max(l / b for l, b in zip(rep.lhs1, rep.bound1)),
                    max(l / b for l, b in zip(rep.lhs2, rep.bound2)))
        detail = (f"mean={rep.passed_mean} second={rep.passed_second_moment} "
                  f"ordering={rep.passed_ordering} decomposition={rep.passed_decomposition}")
        return _row(claim, rep.passed, 1e-9, worst, None, 1.0, detail)
    if claim == "lemma41":
        sigma = analysis.sigma_tg(setup)
        delta = analysis.delta_tg(setup)
        floor = smoothing.smoother_floor(setup.smoother)
        lem = analysis.lemma41_identities(setup)
        gap = max(abs(lem.min_complement), abs(lem.min_projection),
                  abs(lem.max_complement - (1.0 - sigma)), abs(lem.max_projection - (1.0 - delta)))
        delta_floor = 1.0 - delta + floor >= sigma - 1e-9
        return _row(claim, gap <= 1e-8 and delta_floor, 1e-8, gap, None, 0.0, f"delta_floor={delta_floor}")
    raise ConfigError(f"unknown claim {claim!r}")


def _check_claims(cfg):
    mode = cfg["coarse_solver"]["mode"]
    for claim in cfg["verify"]:
        allowed = NEEDS_MODE.get(claim)
        if allowed and mode not in allowed:
            raise ConfigError(f"claim {claim!r} needs coarse_solver.mode in {list(allowed)}, got {mode!r}")
    if "corollary" in cfg["verify"] and mode == "linear" and cfg["coarse_solver"]["flavor"] != "jacobi":
        raise ConfigError("claim 'corollary' needs an SPD B_c (flavor 'jacobi')")


def _setup_key(key):
    if not key:
        return "default"
    return ";".join(f"{k}={key[k]}" for k in sorted(key))


def _run_point(item):
    key, cfg = item
    label = _setup_key(key)
    try:
        setup, solver = build_components(cfg)
    except TGLabError as exc:
        msg = f"{type(exc).__name__}: {exc}"
        rows = [dict(_row(c, False, None, detail=msg), setup=label) for c in cfg["verify"]]
        return {"key": key, "error": msg}, rows
    try:
        diag = solver.diagnostics if solver.mode in ("exact", "linear") else None
        rep = analysis.build_report(setup, diag).to_dict()
    except TGLabError as exc:
        rep = {"error": f"{type(exc).__name__}: {exc}"}
    rows = []
    for claim in cfg["verify"]:
        row = evaluate_claim(claim, setup, solver, cfg)
        if "flags" in rep:
            rep["flags"][claim] = {"passed": row["pass"], "tolerance": row["tolerance"]}
        rows.append(dict(row, setup=label))
    return {"key": key, "report": rep}, rows


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_text(path, text):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from None


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in header])
    return buf.getvalue()


def cmd_verify(cfg, out, jobs=1):
    _check_claims(cfg)
    results = _map(_run_point, grid_points(cfg), jobs)
    reports = [r for r, _ in results]
    rows = [row for _, rs in results for row in rs]
    doc = json.dumps({"setups": reports}, sort_keys=True, indent=2) + "\n"
    _write_text(out / cfg["output"]["report"], doc)
    _write_text(out / cfg["output"]["summary"], _csv_text(SUMMARY_COLUMNS, rows))
    failed = [r for r in rows if not r["pass"]] + [r for r in reports if "error" in r or "error" in r.get("report", {})]
    for r in rows:
        if not r["pass"]:
            print(f"FAIL {r['setup']} {r['claim']}: {r['detail']}", file=sys.stderr)
    return 2 if failed else 0


def _sweep_point(item):
    key, cfg = item
    row = dict(key)
    try:
        setup, solver = build_components(cfg)
        diag = solver.diagnostics if solver.mode in ("exact", "linear") else None
        rep = analysis.build_report(setup, diag)
        row.update(
            sigma_tg=rep.sigma_tg, delta_tg=rep.delta_tg, delta_pencil_min=rep.delta_pencil_min,
            floor=rep.floor, factor_measured=rep.factor_exact_measured,
            factor_identity=rep.factor_exact_identity,
            optimal_bound=analysis.optimal_bound(rep.mu_spectrum, setup.n_c),
        )
        if rep.bounds is not None:
            row.update(L=rep.bounds[0], U=rep.bounds[1], factor_inexact=rep.measured_inexact)
        if solver.mode == "nonlinear":
            row["nonlinear_bound"] = analysis.nonlinear_bound(rep.sigma_tg, rep.floor, solver.epsilon)
        ok = rep.flags["identity"]["passed"]
        row["status"] = "ok" if ok else "identity-failed"
    except TGLabError as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(cfg, out, jobs=1):
    points = grid_points(cfg)
    rows = _map(_sweep_point, points, jobs)
    header = tuple(sorted(cfg["grid"])) + SWEEP_METRICS
    _write_text(out / cfg["output"]["sweep"], _csv_text(header, rows))
    return 0 if all(r["status"] == "ok" for r in rows) else 2


def cmd_export(cfg, out, jobs=1):
    if cfg["grid"]:
        raise ConfigError("export takes a single setup; remove 'grid'")
    setup, _ = build_components(cfg)
    mats = {
        "A": setup.problem.a,
        "M": setup.smoother.m.base,
        "tilde_A": setup.smoother.tilde_a,
        "R": setup.transfer.restriction.r,
        "P_star": setup.transfer.p_star,
        "A_c": setup.transfer.a_c.base,
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, mat in mats.items():
            problems.write_matrix_market(out / f"{name}.mtx", mat)
    except OSError as exc:
        raise OSError(f"cannot write to {out}: {exc.strerror or exc}") from None
    if cfg["verify"]:
        return cmd_verify(cfg, out, jobs)
    return 0


COMMANDS = {"verify": cmd_verify, "sweep": cmd_sweep, "export": cmd_export}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def make_parser():
    parser = _Parser(prog="tglab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", default=Path("out"), type=Path)
        p.add_argument("--jobs", default=1, type=int)
        p.add_argument("--seed-override", type=int, default=None)
    return parser


def _configure_logging():
    level = os.environ.get("TGLAB_LOG", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level not in LOG_LEVELS:
        log.error("unknown TGLAB_LOG=%r; using 'error'", level)


def main(argv=None):
    args = make_parser().parse_args(argv)
    _configure_logging()
    if args.jobs < 1:
        print("tglab: error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        if args.seed_override is not None:
            cfg = apply_seed_override(cfg, args.seed_override)
        return COMMANDS[args.command](cfg, args.out, args.jobs)
    except ConfigError as exc:
        print(f"tglab: config error in {args.config}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"tglab: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
