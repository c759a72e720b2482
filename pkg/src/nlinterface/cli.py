"""Command-line front end.

Every subcommand writes plot-ready CSV or JSON to ``--output`` (atomically)
or to standard output.  Exit codes: 0 success, 1 usage or domain error,
2 I/O error.
"""

import argparse
import cmath
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import atomic, klein, metrology, tensors
from .errors import InterfaceError

log = logging.getLogger("nlinterface")

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 1, 2

DEFAULT_VERIFY_DETUNING = -300.0
DEFAULT_FIELD = (3.0, 4.0 * cmath.exp(0.3j))
SLOPE_WINDOWS = {"order2": (3.8, 4.2), "order2+4": (5.8, 6.2)}
D2_WAVELENGTH = 780.241e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _complex(text):
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _positive(text):
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer: {text!r}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _matrix_json(m):
    return {"real": np.real(m).tolist(), "imag": np.imag(m).tolist()}


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectra(args, constants):
    if not args.min < args.max and not (args.min == args.max):
        raise UsageError("--min must not exceed --max")
    n = int(math.floor((args.max - args.min) / args.step + 1e-9)) + 1
    grid = args.min + args.step * np.arange(n)
    table = tensors.spectra(grid, constants, pole_margin=args.pole_margin)
    _write(table.to_csv(), args.output)


def cmd_roots(args, constants):
    if not args.min < args.max:
        raise UsageError("--min must be below --max")
    records = tensors.find_roots(args.coefficient, args.min, args.max, constants,
                                 source=args.source, step=args.step)
    _write(tensors.roots_to_json(records) + "\n", args.output)


def _field(args):
    return atomic.FieldConfig(args.g_plus, args.g_minus)


def cmd_heff(args, constants):
    det = atomic.DetuningSet.from_laser(constants, args.detuning)
    field = _field(args)
    out = {"detuning": det.as_dict(), "field": {"g_plus": [field.g_plus.real, field.g_plus.imag],
                                                "g_minus": [field.g_minus.real, field.g_minus.imag]}}
    for t in args.order:
        h = klein.effective_hamiltonian(t, field, det).matrix.data
        out[f"h{t}"] = _matrix_json(h)
    out["coefficients"] = tensors.tensor_coefficients(det).as_dict()
    out["closed_form"] = dict(zip(tensors.COEFFICIENTS, tensors.closed_form_alpha(det) + tensors.closed_form_beta(det)))
    _write(json.dumps(out, indent=2) + "\n", args.output)


def cmd_verify(args, constants):
    if not args.eps_min < args.eps_max or args.points < 2:
        raise UsageError("need --eps-min < --eps-max and at least two points")
    det = atomic.DetuningSet.from_laser(constants, args.detuning)
    table = klein.load_klein_table(args.klein_table) if args.klein_table else None
    field = _field(args)
    eps = np.logspace(math.log10(args.eps_min), math.log10(args.eps_max), args.points)
    report = {"detuning": det.as_dict(), "eps": eps.tolist()}
    passed = True
    for label, orders in (("order2", (2,)), ("order2+4", (2, 4))):
        scan = klein.convergence_scan(field, det, eps, orders, table)
        lo, hi = SLOPE_WINDOWS[label]
        ok = lo <= scan.slope <= hi
        passed &= ok
        report[label] = {"slope": scan.slope, "window": [lo, hi], "pass": ok,
                         "residuals": scan.residuals.tolist(), "dropped": scan.dropped}
    report["pass"] = passed
    _write(json.dumps(report, indent=2) + "\n", args.output)
    return EXIT_OK if passed else EXIT_USAGE


def _scenario(args, constants):
    det = atomic.DetuningSet.from_laser(constants, args.detuning)
    a1, _ = tensors.closed_form_alpha(det)
    b1 = tensors.closed_form_beta(det)[2]
    a1 = atomic.coefficient_to_si(a1, 2, constants)
    b1 = atomic.coefficient_to_si(b1, 4, constants)
    if args.zero == "alpha1":
        a1 = 0.0
    elif args.zero == "beta1":
        b1 = 0.0
    beam = metrology.BeamParameters.from_wavelength(args.wavelength, args.duration, args.area)
    tau = args.tau if args.tau is not None else args.duration
    scen = metrology.MetrologyScenario(a1, b1, tau, beam.gamma, 1.0, jz=args.jz)
    return det, scen


def _n_grid(args):
    if not args.nl_min < args.nl_max:
        raise UsageError("--nl-min must be below --nl-max")
    return np.logspace(math.log10(args.nl_min), math.log10(args.nl_max), args.points)


def _curve(args, constants, trials):
    det, scen = _scenario(args, constants)
    grid = _n_grid(args)
    rows = metrology.sensitivity_curve(scen, grid, trials=trials, seed=args.seed, form=args.form)
    summary = {"detuning": det.as_dict(), "form": args.form, "alpha1_SI": scen.alpha1,
               "beta1_SI": scen.beta1, "gamma": scen.gamma, "tau": scen.tau}
    cross = None
    if scen.alpha1 and scen.beta1:
        cross = summary["crossover_N_L"] = 2 * metrology.crossover(scen.alpha1, scen.beta1, scen.gamma).s0
    try:
        summary["fitted_slope"] = metrology.scaling_exponent(grid, [r[1] for r in rows], cross)
    except ValueError as exc:
        summary["fitted_slope"] = None
        log.warning("no scaling fit: %s", exc)
    print(json.dumps(summary), file=sys.stderr)
    _write(metrology.curve_to_csv(rows), args.output)


def cmd_sense(args, constants):
    if args.trials and args.seed is None:
        raise UsageError("--seed is required when --trials is given")
    _curve(args, constants, args.trials)


def cmd_montecarlo(args, constants):
    if args.seed is None:
        raise UsageError("montecarlo requires --seed")
    if args.trials < 100:
        raise UsageError("--trials must be at least 100")
    _curve(args, constants, args.trials)


def cmd_twist(args, constants):
    if args.optimal_tilt:
        tilt, _ = metrology.optimal_tilt_qfi(args.N)
    else:
        tilt = args.tilt
    report = metrology.twisting_evolve(args.N, args.chi_t, tilt)
    _write(report.to_json() + "\n", args.output)


# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--constants", default=argparse.SUPPRESS,
                        help="atomic-constants JSON (default: bundled 87Rb D2 data)")
    common.add_argument("--output", "-o", default=argparse.SUPPRESS,
                        help="output path (default: standard output)")
    common.add_argument("--seed", type=_seed, default=argparse.SUPPRESS,
                        help="random seed (unsigned 64-bit)")

    p = _Parser(prog="nlinterface", parents=[common],
                description="Nonlinear effective Hamiltonian of the 87Rb D2 line and "
                            "the J_Z metrology built on it.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectra", parents=[common], help="coefficient spectra as CSV")
    s.add_argument("--min", type=float, required=True, help="lowest laser detuning, MHz")
    s.add_argument("--max", type=float, required=True, help="highest laser detuning, MHz")
    s.add_argument("--step", type=_positive, required=True, help="grid step, MHz")
    s.add_argument("--pole-margin", type=_positive, default=0.5,
                   help="mask points this close to a resonance, MHz")
    s.set_defaults(func=cmd_spectra)

    s = sub.add_parser("roots", parents=[common], help="zero crossings of a coefficient as JSON")
    s.add_argument("coefficient", choices=tensors.COEFFICIENTS)
    s.add_argument("--min", type=float, default=-300.0, help="interval start (laser detuning), MHz")
    s.add_argument("--max", type=float, default=800.0, help="interval end (laser detuning), MHz")
    s.add_argument("--source", choices=("closed_form", "extracted"), default="closed_form",
                   help="closed-form polynomials or coefficients extracted from h_eff")
    s.add_argument("--step", type=_positive, default=0.5, help="bracketing scan step, MHz")
    s.set_defaults(func=cmd_roots)

    def add_field(s):
        s.add_argument("--g-plus", type=_complex, default=complex(DEFAULT_FIELD[0]),
                       help="sigma+ Rabi-scaled amplitude, MHz (complex allowed)")
        s.add_argument("--g-minus", type=_complex, default=DEFAULT_FIELD[1],
                       help="sigma- Rabi-scaled amplitude, MHz (complex allowed)")

    s = sub.add_parser("heff", parents=[common], help="effective Hamiltonian matrices as JSON")
    s.add_argument("--detuning", type=float, required=True, help="laser detuning, MHz")
    s.add_argument("--order", type=int, nargs="+", choices=(2, 3, 4), default=[2, 4],
                   help="perturbative orders to dump")
    add_field(s)
    s.set_defaults(func=cmd_heff)

    s = sub.add_parser("verify", parents=[common],
                       help="check the expansion against exact diagonalization")
    s.add_argument("--detuning", type=float, default=DEFAULT_VERIFY_DETUNING, help="laser detuning, MHz")
    s.add_argument("--eps-min", type=_positive, default=1.0, help="smallest field scale factor")
    s.add_argument("--eps-max", type=_positive, default=10.0, help="largest field scale factor")
    s.add_argument("--points", type=_positive_int, default=8, help="log-spaced scale factors")
    s.add_argument("--klein-table", help="alternative Klein coefficient table (JSON)")
    add_field(s)
    s.set_defaults(func=cmd_verify)

    def add_metrology(s, trials_default):
        s.add_argument("--detuning", type=float, required=True, help="laser detuning, MHz")
        s.add_argument("--nl-min", type=_positive, default=1e6, help="smallest photon number")
        s.add_argument("--nl-max", type=_positive, default=1e12, help="largest photon number")
        s.add_argument("--points", type=_positive_int, default=25, help="log-spaced grid points")
        s.add_argument("--wavelength", type=_positive, default=D2_WAVELENGTH, help="optical wavelength, m")
        s.add_argument("--duration", type=_positive, default=1e-6, help="pulse duration T, s")
        s.add_argument("--area", type=_positive, default=1e-8, help="beam area A, m^2")
        s.add_argument("--tau", type=_positive, default=None, help="interaction time, s (default T)")
        s.add_argument("--jz", type=float, default=0.0, help="true J_Z")
        s.add_argument("--zero", choices=("alpha1", "beta1"), help="switch one coupling off")
        s.add_argument("--form", choices=metrology.SENSITIVITY_FORMS, default="rederived",
                       help="sensitivity formula; 'half' halves the nonlinear term")
        s.add_argument("--trials", type=int, default=trials_default,
                       help="Monte Carlo trials per point (0 disables; needs --seed)")

    s = sub.add_parser("sense", parents=[common], help="analytic sensitivity curve as CSV")
    add_metrology(s, 0)
    s.set_defaults(func=cmd_sense)

    s = sub.add_parser("montecarlo", parents=[common], help="Monte Carlo sensitivity curve as CSV")
    add_metrology(s, 10_000)
    s.set_defaults(func=cmd_montecarlo)

    s = sub.add_parser("twist", parents=[common], help="one-axis twisting report as JSON")
    s.add_argument("--N", type=int, required=True, help="photon number")
    s.add_argument("--chi-t", type=float, default=0.0, help="twisting strength chi*t")
    s.add_argument("--tilt", type=float, default=0.0, help="initial tilt from +X toward +Z, rad")
    s.add_argument("--optimal-tilt", action="store_true", help="use the QFI-optimal tilt")
    s.set_defaults(func=cmd_twist)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("constants", "output", "seed"):
        if not hasattr(args, name):
            setattr(args, name, None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        constants = atomic.load_constants(args.constants)
        code = args.func(args, constants)
    except OSError as exc:
        print(f"nlinterface: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, InterfaceError, ValueError, ArithmeticError) as exc:
        print(f"nlinterface: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
