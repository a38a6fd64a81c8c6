"""Command-line front end: ``sdrk <subcommand> ...``.

Exit status is 0 on success, 1 when an operation fails (the error is
printed to stderr as one JSON object) and 2 for malformed arguments.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import _io, bench, fourier, rkopt, stabpoly, tableau
from .errors import SDRKError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _rk_order(text):
    v = int(text)
    if not 1 <= v <= rkopt.MAX_ORDER:
        raise argparse.ArgumentTypeError(f"unsupported order {v} (supported: 1..{rkopt.MAX_ORDER})")
    return v


def _sd_degree(text):
    v = int(text)
    if not 1 <= v <= 5:
        raise argparse.ArgumentTypeError(f"unsupported SD degree {v} (supported: 1..5)")
    return v


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_any_scheme(text):
    """A reference method name or a scheme JSON path."""
    if text in tableau.REFERENCE_NAMES:
        return tableau.reference_tableau(text)
    return tableau.load_scheme(text)


def _poly_from_json(path):
    d = _read_json(path)
    return stabpoly.StabilityPolynomial(coeffs=d["beta"], p=int(d["p"])), d


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(args):
    spec = fourier.sample_spectrum(args.order, args.npsi, args.ntheta, args.nk)
    fourier.write_spectrum(args.output, spec, args.provenance)
    return {"points": len(spec), "output": args.output}


def cmd_optimize_poly(args):
    spec = stabpoly.read_spectrum_csv(args.spectrum)
    res = stabpoly.optimize_stability_polynomial(spec, args.stages, args.order, tol=args.tol)
    d = res.to_dict()
    d["provenance"] = {k: v for k, v in d["provenance"].items() if k != "source"}
    _io.write_json(args.output, d)
    return {"nu_star": res.nu_star, "output": args.output}


def cmd_optimize_rk(args):
    poly, d = _poly_from_json(args.poly)
    if poly.p != args.order:
        raise UsageError(f"polynomial has order {poly.p}, --order is {args.order}")
    prob = rkopt.RkOptProblem(s=poly.s, p=args.order, beta=poly.coeffs, attempts=args.attempts,
                              seed=args.seed, name=args.name or f"opt-s{poly.s}-p{args.order}")
    ls, report = rkopt.optimize_low_storage(prob, return_report=True)
    tableau.save_scheme(args.output, ls)
    if args.report:
        rkopt.write_report(args.report, report)
    return {"best_C": report.best_C, "attempts_passed": report.attempts_passed, "output": args.output}


def cmd_validate(args):
    ls = tableau.load_scheme(args.scheme)
    poly, _ = _poly_from_json(args.poly)
    rep = rkopt.validate_scheme(ls, poly)
    ok = rkopt.passes(rep, ls.p, args.tol)
    out = {"name": ls.name, "s": ls.s, "p": ls.p, "passes": ok,
           "max_residual": rep.max_residual,
           "max_beta_mismatch": float(np.max(np.abs(rep.beta_mismatch))) if rep.beta_mismatch else 0.0,
           "principal_error_norm": rep.principal_error_norm,
           "residuals_by_order": {str(k): list(v) for k, v in rep.residuals_by_order.items()},
           "beta_mismatch": list(rep.beta_mismatch)}
    if args.output:
        _io.write_json(args.output, out)
    if not ok:
        raise SDRKError(f"scheme {ls.name!r} fails validation at tolerance {args.tol:g}")
    return {"passes": ok}


def cmd_convergence(args):
    scheme = _load_any_scheme(args.scheme)
    dts = args.dt or [0.4 / 2 ** k for k in range(5, 9)]
    res = bench.run_convergence(scheme, bench.ode_test_problem(), dts)
    bench.write_convergence_json(args.output, res)
    return {"slope": res.slope, "output": args.output}


def _setup(problem, p, cells):
    if problem == "annulus":
        return bench.annulus_setup(p, n_cells=cells)
    return bench.acoustic_setup(p, n_center=cells, n_radial=None if cells is None else max(1, 2 * cells // 3))


def cmd_bench(args):
    rows = []
    for path in args.scheme:
        scheme = _load_any_scheme(path)
        p = args.degree or max(1, scheme.p - 1)
        setup = _setup(args.problem, p, args.cells)
        for nu in args.cfl:
            m, dt, _ = bench.run_pde(setup, scheme, nu, timing=args.timing)
            rows.append(bench.results_row(scheme, nu, dt, m, timing=args.timing))
    bench.write_results_csv(args.output, rows)
    return {"runs": len(rows), "output": args.output}


def cmd_pipeline(args):
    os.makedirs(args.outdir, exist_ok=True)
    p, s = args.order, args.stages
    path = lambda name: os.path.join(args.outdir, name)  # noqa: E731
    sd = max(1, p - 1)
    spec = fourier.sample_spectrum(sd, args.npsi, args.ntheta, args.nk)
    fourier.write_spectrum(path("spectrum.csv"), spec, path("spectrum.json"))
    spec = stabpoly.read_spectrum_csv(path("spectrum.csv"))
    res = stabpoly.optimize_stability_polynomial(spec, s, p)
    d = res.to_dict()
    d["provenance"] = {k: v for k, v in d["provenance"].items() if k != "source"}
    _io.write_json(path("poly.json"), d)
    prob = rkopt.RkOptProblem(s=s, p=p, beta=res.poly.coeffs, attempts=args.attempts, seed=args.seed,
                              name=f"opt-s{s}-p{p}")
    ls, report = rkopt.optimize_low_storage(prob, return_report=True)
    tableau.save_scheme(path("scheme.json"), ls)
    rkopt.write_report(path("rk_report.json"), report)
    rep = rkopt.validate_scheme(tableau.load_scheme(path("scheme.json")), res.poly)
    if not rkopt.passes(rep, p):
        raise SDRKError("regenerated scheme fails validation")
    _io.write_json(path("validate.json"), {"passes": True, "max_residual": rep.max_residual,
                                          "principal_error_norm": rep.principal_error_norm,
                                          "beta_mismatch": list(rep.beta_mismatch)})
    setup = _setup(args.problem, sd, args.cells)
    m, dt, _ = bench.run_pde(setup, ls, res.nu_star)
    bench.write_results_csv(path("results.csv"), [bench.results_row(ls, res.nu_star, dt, m)])
    return {"nu_star": res.nu_star, "best_C": report.best_C, "linf": m.linf, "outdir": args.outdir}


# ---------------------------------------------------------------------------


def build_parser():
    ap = _Parser(prog="sdrk", description="Optimized explicit RK schemes for spectral difference solvers.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("spectrum", help="sample the SD Fourier footprint")
    sp.add_argument("--order", type=_sd_degree, required=True, help="SD polynomial degree")
    sp.add_argument("--npsi", type=_positive_int, default=fourier.DEFAULT_SAMPLING[0])
    sp.add_argument("--ntheta", type=_positive_int, default=fourier.DEFAULT_SAMPLING[1])
    sp.add_argument("--nk", type=_positive_int, default=fourier.DEFAULT_SAMPLING[2])
    sp.add_argument("--provenance", help="also write the provenance JSON here")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("optimize-poly", help="maximize the stable CFL number on a spectrum")
    sp.add_argument("--spectrum", required=True)
    sp.add_argument("--stages", type=_positive_int, required=True)
    sp.add_argument("--order", type=_rk_order, required=True)
    sp.add_argument("--tol", type=_positive_float, default=stabpoly.BISECTION_TOL)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_optimize_poly)

    sp = sub.add_parser("optimize-rk", help="3S* coefficients for a stability polynomial")
    sp.add_argument("--poly", required=True, help="optimize-poly JSON")
    sp.add_argument("--order", type=_rk_order, required=True)
    sp.add_argument("--attempts", type=_positive_int, default=600)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--name", default="")
    sp.add_argument("--report", help="write the optimization report JSON here")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_optimize_rk)

    sp = sub.add_parser("validate", help="check order conditions and beta match of a scheme")
    sp.add_argument("--scheme", required=True)
    sp.add_argument("--poly", required=True)
    sp.add_argument("--tol", type=_positive_float, default=rkopt.EQ_TOL)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("convergence", help="observed order on the ODE test problem")
    sp.add_argument("--scheme", required=True, help="scheme JSON or reference name")
    sp.add_argument("--dt", type=_positive_float, nargs="+")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("bench", help="PDE benchmark runs")
    sp.add_argument("--problem", choices=["annulus", "acoustic"], required=True)
    sp.add_argument("--scheme", nargs="+", required=True, help="scheme JSONs or reference names")
    sp.add_argument("--cfl", type=_positive_float, nargs="+", required=True)
    sp.add_argument("--degree", type=_sd_degree, help="SD degree (default: scheme order minus one)")
    sp.add_argument("--cells", type=_positive_int, help="cells per direction (annulus) or core cells (disk)")
    sp.add_argument("--timing", action="store_true", help="record CPU seconds (breaks byte-identity)")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("pipeline", help="spectrum to benchmark, end to end")
    sp.add_argument("--order", type=_rk_order, required=True, help="RK order; the SD degree is one less")
    sp.add_argument("--stages", type=_positive_int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--attempts", type=_positive_int, default=20)
    sp.add_argument("--npsi", type=_positive_int, default=fourier.DEFAULT_SAMPLING[0])
    sp.add_argument("--ntheta", type=_positive_int, default=fourier.DEFAULT_SAMPLING[1])
    sp.add_argument("--nk", type=_positive_int, default=fourier.DEFAULT_SAMPLING[2])
    sp.add_argument("--problem", choices=["annulus", "acoustic"], default="annulus")
    sp.add_argument("--cells", type=_positive_int, default=8)
    sp.add_argument("--outdir", required=True)
    sp.set_defaults(func=cmd_pipeline)
    return ap


def _fail(kind, exc, status):
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return status


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = args.func(args)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except (SDRKError, OSError, ValueError, KeyError) as exc:
        return _fail("operation", exc, 1)
    sys.stdout.write(_io.dumps_json(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
