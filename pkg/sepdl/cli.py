# Copyright (c) 2025 sepdl developers
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Command-line interface: ``sepdl <command> [flags]``."""

import argparse
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .certificate import REPORT_HEADER, CertConfig, check, report_row
from .constants import EXIT_NOT_OPTIMAL, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE
from .denoise import denoise, log_grid, psnr, sweep_lambda
from .descent import DescentConfig
from .errors import FormatError, ParameterError, SepdlError, ShapeError, StallError
from .io import (
    format_float,
    load_model,
    read_raw_volume,
    read_sdt1,
    save_model,
    write_csv,
    write_sdt1,
)
from .oracle import SUMMARY_HEADER, explicit_factorization, global_optimum
from .solver import RunRecord, SolverConfig, solve
from .synth import PRESETS, SyntheticSpec, generate

logger = logging.getLogger(__name__)

PROG = "sepdl"


class _Parser(argparse.ArgumentParser):
    """Usage errors print one line and exit with ``EXIT_USAGE``."""

    def error(self, message: str):
        self.exit(EXIT_USAGE, f"{PROG}: error: {message}\n")


def _int_triple(text: str) -> tuple[int, int, int]:
    try:
        dims = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected G,W,H integers, got {text!r}")
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive integers, got {text!r}")
    return dims


def _sweep_spec(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    try:
        if len(parts) != 3:
            raise ValueError(text)
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI,N, got {text!r}")


def _read_tensor(path: str, raw_dims: Optional[Sequence[int]] = None) -> np.ndarray:
    if raw_dims is not None:
        return read_raw_volume(path, raw_dims)
    return read_sdt1(path)


def cmd_synth(args) -> int:
    spec = SyntheticSpec.from_preset(
        args.preset,
        g=args.g,
        v=args.v,
        t=args.t,
        n_gamma_atoms=args.n_gamma_atoms,
        n_psi_atoms=args.n_psi_atoms,
        noise_var=args.noise_var,
        seed=args.seed,
    )
    data = generate(spec)
    write_sdt1(args.out, data.tensor)
    rows = []
    for mode, atoms in (("gamma", data.gamma_atoms), ("psi", data.psi_atoms)):
        for atom in range(atoms.shape[1]):
            for index in range(atoms.shape[0]):
                rows.append([mode, atom, index, format_float(atoms[index, atom])])
    write_csv(args.out + ".atoms.csv", ("mode", "atom", "index", "value"), rows)
    logger.info("wrote %s with shape %s", args.out, data.tensor.shape)
    return EXIT_OK


def _write_learn_logs(args, record: RunRecord) -> None:
    comment = f"seed={args.seed} lambda={format_float(args.lam)}"
    if record.objective_star is not None:
        comment += f" objective_star={format_float(record.objective_star)}"
    if args.log:
        write_csv(args.log, record.log_header(), record.log_rows(), comment=comment)
    if args.trace:
        header = ["iteration", "objective"]
        gaps = None
        if record.objective_star is not None:
            header.append("gap")
            gaps = record.gap_curve()
        rows = []
        for k, objective in enumerate(record.objective_trace, start=1):
            row = [str(k), format_float(objective)]
            if gaps is not None:
                row.append(format_float(gaps[k - 1]))
            rows.append(row)
        write_csv(args.trace, header, rows, comment=comment)


def cmd_learn(args) -> int:
    s = read_sdt1(args.data)
    cfg = SolverConfig(
        lam=args.lam,
        init_r1=args.init_r1,
        init_r2=args.init_r2,
        init_seed=args.seed,
        descent=DescentConfig(
            max_iters=args.max_iters,
            rel_tol=args.rel_tol,
            nesterov=not args.no_nesterov,
        ),
        cert=CertConfig(cert_tol=args.cert_tol, threads=args.threads),
        max_outer_rounds=args.max_rounds,
    )
    objective_star = None
    if args.oracle_gap:
        objective_star = global_optimum(s, args.lam, args.threads).objective_star

    try:
        model, record = solve(s, cfg, objective_star=objective_star)
    except StallError as exc:
        _write_learn_logs(args, exc.record)
        raise

    _write_learn_logs(args, record)
    if args.out_model:
        save_model(args.out_model, model)
    last = record.rounds[-1]
    print(
        f"certified={record.certified} rounds={len(record.rounds)} "
        f"objective={format_float(last.objective)} r1={last.r1} r2={last.r2}"
    )
    return EXIT_OK


def cmd_certify(args) -> int:
    s = read_sdt1(args.data)
    model = load_model(args.model)
    report = check(s, model, args.lam, CertConfig(cert_tol=args.cert_tol, threads=args.threads))
    print(",".join(REPORT_HEADER))
    print(",".join(report_row(report, 0)))
    return EXIT_OK if report.optimal else EXIT_NOT_OPTIMAL


def cmd_oracle(args) -> int:
    s = read_sdt1(args.data)
    solution = global_optimum(s, args.lam, args.threads)
    write_csv(
        args.out,
        SUMMARY_HEADER,
        solution.summary_rows(),
        comment=solution.summary_comment(),
    )
    if args.factorize:
        save_model(args.factorize, explicit_factorization(s, args.lam, True, args.threads))
    print(solution.summary_comment())
    return EXIT_OK


def cmd_denoise(args) -> int:
    noisy = _read_tensor(args.noisy, args.raw_dims)
    model = load_model(args.model)
    reference = _read_tensor(args.reference, args.raw_dims) if args.reference else None
    cfg = DescentConfig(nesterov=False, max_iters=args.max_iters)

    lam = args.lam
    if args.sweep:
        if reference is None:
            raise ParameterError("--sweep needs --reference")
        scores = sweep_lambda(
            noisy, reference, model.gamma, model.psi,
            log_grid(*args.sweep), args.patch, args.stride, cfg,
        )
        if args.psnr_csv:
            rows = [[format_float(value), format_float(score)] for value, score in scores]
            write_csv(args.psnr_csv, ("lambda", "psnr"), rows)
        lam = max(scores, key=lambda item: item[1])[0]
        print(f"best_lambda={format_float(lam)}")
    elif lam is None:
        raise ParameterError("--lambda is required unless --sweep is given")

    out = denoise(noisy, model.gamma, model.psi, lam, args.patch, args.stride, cfg)
    write_sdt1(args.out, out)
    if reference is not None:
        print(f"psnr_noisy={format_float(psnr(reference, noisy))}")
        print(f"psnr_denoised={format_float(psnr(reference, out))}")
    return EXIT_OK


def cmd_psnr(args) -> int:
    print(format_float(psnr(read_sdt1(args.a), read_sdt1(args.b))))
    return EXIT_OK


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog=PROG,
        description="Separable dictionary learning with certified global optimality.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0,
        help="log progress to stderr (-v rounds, -vv descent details)",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="cap on worker threads for per-slice work (default: all cores)",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output SDT1 tensor")
    p.add_argument("--preset", default="full", choices=sorted(PRESETS))
    p.add_argument("--g", type=int)
    p.add_argument("--v", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--n-gamma-atoms", type=int)
    p.add_argument("--n-psi-atoms", type=int)
    p.add_argument("--noise-var", type=float)
    _add_seed(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("learn", help="learn dictionaries until certified optimal")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--max-rounds", type=int, default=SolverConfig.max_outer_rounds)
    p.add_argument("--out-model", help="directory for gamma.sdt, psi.sdt, coef.sdt")
    p.add_argument("--log", help="per-round CSV log")
    p.add_argument("--trace", help="per-iteration objective CSV")
    p.add_argument("--oracle-gap", action="store_true", help="add the gap to the global optimum")
    p.add_argument("--init-r1", type=int, default=1)
    p.add_argument("--init-r2", type=int, default=1)
    p.add_argument("--rel-tol", type=float, default=DescentConfig.rel_tol)
    p.add_argument("--max-iters", type=int, default=DescentConfig.max_iters)
    p.add_argument("--cert-tol", type=float, default=CertConfig.cert_tol)
    p.add_argument("--no-nesterov", action="store_true")
    _add_seed(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("certify", help="check a model for global optimality")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--cert-tol", type=float, default=CertConfig.cert_tol)
    _add_seed(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("oracle", help="closed-form global optimum")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--out", required=True, help="per-slice summary CSV")
    p.add_argument("--factorize", metavar="DIR", help="write the compact optimal factorization")
    _add_seed(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("denoise", help="sparse-coding denoising with a learned model")
    p.add_argument("--noisy", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--patch", type=int, required=True)
    p.add_argument("--stride", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reference")
    p.add_argument("--raw-dims", type=_int_triple, metavar="G,W,H",
                   help="read --noisy/--reference as raw little-endian float64 volumes")
    p.add_argument("--sweep", type=_sweep_spec, metavar="LO,HI,N",
                   help="pick lambda from a log grid by PSNR against --reference")
    p.add_argument("--psnr-csv", help="write the (lambda, psnr) rows of the sweep")
    p.add_argument("--max-iters", type=int, default=DescentConfig.max_iters)
    _add_seed(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("psnr", help="PSNR of --b against reference --a")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_psnr)

    return parser


def _configure_logging(verbose: int) -> None:
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(name)s: %(levelname)s: %(message)s",
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")

    try:
        return args.func(args)
    except (FormatError, ShapeError, ParameterError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SepdlError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
