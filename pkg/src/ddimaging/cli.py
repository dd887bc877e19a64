"""Command-line harness: corrupt inputs, run solvers, evaluate energies.

Subcommands
-----------
corrupt   Apply uniform blur and/or salt-and-pepper noise to a PGM image.
solve     Run the decomposed solver (or the whole-image baseline for 1x1
          subdomains) and write the result image plus optional metrics CSV.
energy    Print the model energy of an image.

Exit status: 0 on success/convergence, 2 when the iteration budget ran out
before the stop rule fired, 1 on usage or I/O errors.
"""

import argparse
import math
import re
import sys

from .decomposition import OverlapLayout
from .models import ChanVese, HessianL1, TVL1Deblur, energy, salt_pepper, threshold_half
from .operators import BlurKernel, blur
from .pgmio import load_pgm, save_pgm
from .solvers import (
    default_eta,
    default_inner,
    default_tol,
    reference_energy,
    solve_dd,
    solve_single,
)
from .models import stencil_of

CSV_HEADER = "n,energy,rel_gap,consensus_residual,d_n,e_n,psnr,elapsed_s"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the harness reserves 2 for budget
    exhaustion, so usage errors exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(value, spec=".17g"):
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, spec)


def write_metrics(rows, path):
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            cells = [
                str(r.n),
                _fmt(r.energy),
                _fmt(r.rel_gap),
                _fmt(r.consensus_residual),
                _fmt(r.d_n),
                _fmt(r.e_n),
                _fmt(r.psnr),
                _fmt(r.elapsed_s, ".6f"),
            ]
            fh.write(",".join(cells) + "\n")


def _parse_subdomains(text):
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise ValueError(f"--subdomains expects PxQ (e.g. 4x4), got {text!r}")
    p, q = int(m.group(1)), int(m.group(2))
    if p < 1 or q < 1:
        raise ValueError("subdomain counts must be >= 1")
    return p, q


def _default_alpha(model_name):
    return {"ccv": 10.0, "tvl1": 10.0, "hessl1": 1.0}[model_name]


def _build_model(args, f):
    alpha = args.alpha if args.alpha is not None else _default_alpha(args.model)
    if args.model == "ccv":
        return ChanVese(f, alpha=alpha, c1=args.c1, c2=args.c2)
    if args.model == "tvl1":
        if args.kernel_halfwidth is None:
            raise ValueError("tvl1 needs --kernel-halfwidth")
        return TVL1Deblur(f, alpha=alpha, kernel=BlurKernel(args.kernel_halfwidth))
    return HessianL1(f, alpha=alpha)


def _mask_path(output):
    if output.endswith(".pgm"):
        return output[:-4] + ".mask.pgm"
    return output + ".mask.pgm"


def cmd_corrupt(args):
    u = load_pgm(args.input)
    if args.kernel_halfwidth is not None:
        u = blur(u, BlurKernel(args.kernel_halfwidth))
    if args.noise_sp is not None:
        u = salt_pepper(u, args.noise_sp, args.seed)
    save_pgm(u, args.output)
    return 0


def cmd_solve(args):
    f = load_pgm(args.input)
    ground_truth = load_pgm(args.ground_truth) if args.ground_truth else None
    model = _build_model(args, f)
    p, q = _parse_subdomains(args.subdomains)
    eta = args.eta if args.eta is not None else default_eta(model)
    tol = args.tol if args.tol is not None else default_tol(model)
    timing = not args.no_timing

    e_star = args.reference_energy
    if e_star is None and args.compute_reference_iters is not None:
        e_star = reference_energy(model, args.compute_reference_iters)

    if p * q == 1:
        max_iters = args.max_outer if args.max_outer is not None else 50_000
        result = solve_single(model, tol, max_iters, e_star=e_star,
                              ground_truth=ground_truth, timing=timing)
    else:
        max_outer = args.max_outer if args.max_outer is not None else 500
        layout = OverlapLayout.from_grid(f.shape, p, q, stencil_of(model))
        overrides = {}
        if args.inner_iters is not None:
            overrides["iters"] = args.inner_iters
        inner_prm = default_inner(model, eta, **overrides)
        result = solve_dd(model, layout, eta, inner_prm, tol, max_outer,
                          workers=args.workers, e_star=e_star,
                          ground_truth=ground_truth, timing=timing)

    if args.output:
        save_pgm(result.u, args.output)
        if isinstance(model, ChanVese):
            save_pgm(threshold_half(result.u), _mask_path(args.output))
    if args.metrics:
        write_metrics(result.rows, args.metrics)
    return 0 if result.converged else 2


def cmd_energy(args):
    u = load_pgm(args.input)
    model = _build_model(args, u)
    print(_fmt(energy(model, u)))
    return 0


def build_parser():
    parser = _Parser(prog="ddimaging",
                     description="Domain-decomposed variational imaging solvers")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_flags(sp):
        sp.add_argument("--model", choices=("ccv", "tvl1", "hessl1"),
                        required=True, help="variational model")
        sp.add_argument("--alpha", type=float, default=None,
                        help="fidelity weight (default: 10/10/1 by model)")
        sp.add_argument("--c1", type=float, default=0.6,
                        help="foreground region value (ccv)")
        sp.add_argument("--c2", type=float, default=0.1,
                        help="background region value (ccv)")
        sp.add_argument("--kernel-halfwidth", type=int, default=None,
                        help="uniform blur halfwidth l, kernel side 2l+1 (tvl1)")

    sp = sub.add_parser("corrupt", help="blur and/or add salt-and-pepper noise")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output", required=True)
    sp.add_argument("--kernel-halfwidth", type=int, default=None)
    sp.add_argument("--noise-sp", type=float, default=None,
                    help="salt-and-pepper corruption probability")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_corrupt)

    sp = sub.add_parser("solve", help="run a solver")
    add_model_flags(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--ground-truth", default=None,
                    help="clean image for PSNR reporting")
    sp.add_argument("--output", default=None, help="result image path")
    sp.add_argument("--metrics", default=None, help="per-iteration CSV path")
    sp.add_argument("--subdomains", default="1x1",
                    help="PxQ subdomain grid (1x1 runs the whole-image baseline)")
    sp.add_argument("--eta", type=float, default=None,
                    help="coupling weight (default 1/10/20 by model)")
    sp.add_argument("--tol", type=float, default=None,
                    help="stop tolerance (default 1e-4 ccv, 1e-3 otherwise)")
    sp.add_argument("--max-outer", type=int, default=None,
                    help="iteration budget (outer steps, or baseline iterations for 1x1)")
    sp.add_argument("--inner-iters", type=int, default=None,
                    help="inner iterations per outer step (default 10 ccv, 50 otherwise)")
    sp.add_argument("--workers", type=int, default=1,
                    help="thread count for local solves (results identical for any count)")
    sp.add_argument("--reference-energy", type=float, default=None,
                    help="known minimum energy for the rel_gap column")
    sp.add_argument("--compute-reference-iters", type=int, default=None,
                    help="compute the reference energy with this many baseline iterations")
    sp.add_argument("--no-timing", action="store_true",
                    help="leave elapsed_s empty so metrics files are bit-reproducible")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("energy", help="print the model energy of an image")
    add_model_flags(sp)
    sp.add_argument("--input", required=True)
    sp.set_defaults(func=cmd_energy)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        # argparse exits on usage errors and --help; keep main() returning
        # instead of raising so the code is a plain value in either case
        return exc.code if isinstance(exc.code, int) else 1
    except (OSError, ValueError) as exc:
        print(f"ddimaging: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
