"""Command line front end.

Subcommands: gen (draw a ground-truth matrix), reconstruct (run the
alternating solver on measurement files), crb (evaluate a bound), sweep
(Monte Carlo sweep from a JSON config) and plot (emit a plot script for a
persisted sweep).

Exit codes: 0 on success, 1 for domain errors (bad flags, bad dimensions,
bad config), 2 for I/O failures. An invalid bound is a finding, not an
error, and exits 0. Every run prints its resolved configuration.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, matio, sensing, structures
from .als import SolverOptions, als_structured
from .crb import crb_hankel, crb_psd, crb_unstructured
from .errors import DomainError
from .structures import HankelParams

__all__ = ["main"]

_STRUCTURE_SPECS = {
    "unstructured": structures.UNSTRUCTURED,
    "hankel": structures.HANKEL,
    "toeplitz": structures.TOEPLITZ,
    "psd": structures.PSD,
}


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors follow the exit-code contract (1, not 2)."""

    def error(self, message):
        raise DomainError(message)


def _print_config(doc):
    print("config:", json.dumps(doc, sort_keys=True))


def cmd_gen(args):
    n = args.n
    p = args.p if args.p is not None else n
    r = args.r
    if args.kind == "psd" and p != n:
        raise DomainError(f"kind psd requires a square matrix, got n={n}, p={p}")
    _print_config({
        "subcommand": "gen", "kind": args.kind, "n": n, "p": p, "r": r,
        "seed": args.seed, "out": args.out, "params_out": args.params_out,
    })
    rng = np.random.default_rng(args.seed)
    params_doc = None
    if args.kind == "hankel":
        x, params = structures.generate_hankel_lowrank(n, p, r, rng=rng)
        params_doc = {"kind": "hankel", "n": n, "p": p, "r": r,
                      "a": params.a.tolist(), "b": params.b.tolist()}
    elif args.kind == "toeplitz":
        h, _ = structures.generate_hankel_lowrank(n, p, r, rng=rng)
        x = h[:, ::-1].copy()
    elif args.kind == "psd":
        x, m_factor = structures.generate_psd_lowrank(n, r, rng=rng)
        params_doc = {"kind": "psd", "n": n, "r": r, "factor": m_factor.tolist()}
    elif args.kind == "generic":
        x = rng.standard_normal((n, r)) @ rng.standard_normal((r, p))
    else:
        raise DomainError(f"unknown kind {args.kind!r}")
    matio.save_matrix(args.out, x)
    if args.params_out is not None:
        if params_doc is None:
            raise DomainError(f"kind {args.kind} has no exact parametrization to write")
        Path(args.params_out).write_text(json.dumps(params_doc, indent=2) + "\n")
    return 0


def cmd_reconstruct(args):
    _print_config({
        "subcommand": "reconstruct", "y": args.y, "op": args.op, "n": args.n,
        "p": args.p, "r": args.r, "structure": args.structure,
        "max_iters": args.max_iters, "tol": args.tol, "out": args.out,
        "report": args.report,
    })
    a = matio.load_matrix(args.op)
    y = matio.load_vector(args.y)
    if a.shape[1] != args.n * args.p:
        raise DomainError(
            f"operator has {a.shape[1]} columns but n*p = {args.n * args.p}"
        )
    if a.shape[0] != y.size:
        raise DomainError(f"operator has {a.shape[0]} rows but y has {y.size} entries")
    op = sensing.SensingOperator(a, args.n, args.p)
    opts = SolverOptions(max_iters=args.max_iters, rel_tol=args.tol)
    report = als_structured(op, y, args.r, _STRUCTURE_SPECS[args.structure], opts)
    matio.save_matrix(args.out, report.estimate)
    if args.report is not None:
        doc = {
            "iterations": report.iterations,
            "termination": report.termination,
            "final_residual": min(report.residual_history),
            "residual_history": report.residual_history,
            "half_step_residuals": report.half_step_residuals,
        }
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def _load_params(path, structure, r):
    if path is None:
        raise DomainError(f"structure {structure} needs --params (bounds are parametrization-specific)")
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: not valid JSON ({exc})") from exc
    if structure == "hankel":
        if "a" not in doc or "b" not in doc:
            raise DomainError(f"{path}: hankel parameters need fields 'a' and 'b'")
        params = HankelParams(np.asarray(doc["a"], float), np.asarray(doc["b"], float))
        if params.order != r:
            raise DomainError(f"{path}: parameter order {params.order} does not match --r {r}")
        return params
    if "factor" not in doc:
        raise DomainError(f"{path}: psd parameters need field 'factor'")
    m_factor = np.asarray(doc["factor"], dtype=float)
    if m_factor.ndim != 2 or m_factor.shape[1] != r:
        raise DomainError(f"{path}: factor must have r = {r} columns")
    return m_factor


def cmd_crb(args):
    config_doc = {
        "subcommand": "crb", "op": args.op, "sigma2": args.sigma2,
        "truth": args.truth, "r": args.r, "structure": args.structure,
        "params": args.params, "json": args.json,
    }
    if not args.json:
        _print_config(config_doc)
    x = matio.load_matrix(args.truth)
    n, p = x.shape
    a = matio.load_matrix(args.op)
    if a.shape[1] != n * p:
        raise DomainError(f"operator has {a.shape[1]} columns but truth is {n}x{p}")
    op = sensing.SensingOperator(a, n, p)
    if not args.sigma2 > 0:
        raise DomainError("--sigma2 must be positive (bounds need a noise level)")
    noise = sensing.IidGaussian(args.sigma2)
    if args.structure is None:
        result = crb_unstructured(op, noise, x, args.r)
    elif args.structure == "hankel":
        result = crb_hankel(op, noise, _load_params(args.params, "hankel", args.r), n, p)
    else:
        result = crb_psd(op, noise, _load_params(args.params, "psd", args.r))
    if args.json:
        print(json.dumps({
            "config": config_doc,
            "value": result.value if result.valid else None,
            "valid": result.valid,
            "diagnostic": result.diagnostic,
        }, sort_keys=True))
    else:
        print(f"crb: {result.value:.17g}")
        print(f"valid: {'true' if result.valid else 'false'}")
        print(f"diagnostic: {result.diagnostic}")
    return 0


def _resolve_threads(flag_value):
    if flag_value is not None:
        threads = flag_value
    else:
        env = os.environ.get("LRMR_THREADS", "").strip()
        if not env:
            return None
        try:
            threads = int(env)
        except ValueError as exc:
            raise DomainError(f"LRMR_THREADS={env!r} is not an integer") from exc
    if threads < 1:
        raise DomainError(f"thread count must be positive, got {threads}")
    return threads


def cmd_sweep(args):
    try:
        doc = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise DomainError(f"{args.config}: not valid JSON ({exc})") from exc
    config, parameter, values = bench.sweep_config_from_dict(doc, what=str(args.config))
    threads = _resolve_threads(args.threads)
    resolved = bench.config_to_dict(config)
    resolved["sweep"] = {"parameter": parameter, "values": values}
    _print_config({"subcommand": "sweep", "out": args.out, "threads": threads, **resolved})
    result = bench.sweep(config, parameter, values, threads=threads)
    bench.persist(result, args.out)
    _print_summary(result)
    return 0


def _cell(x):
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.3f}"
    return str(x)


def _print_summary(result):
    header = [result.parameter, "srer_unstr", "srer_str", "bound_unstr", "bound_str",
              "ok", "failed", "crb_invalid"]
    table = [header]
    for pt in result.points:
        table.append([
            _cell(pt.value), _cell(pt.srer_unstructured_db), _cell(pt.srer_structured_db),
            _cell(pt.bound_unstructured_db), _cell(pt.bound_structured_db),
            _cell(pt.trials_ok), _cell(pt.trials_failed), _cell(pt.crb_invalid),
        ])
    widths = [max(len(row[k]) for row in table) for k in range(len(header))]
    for row in table:
        print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))


def cmd_plot(args):
    _print_config({
        "subcommand": "plot", "in": args.infile, "out": args.out, "render": args.render,
    })
    rows = bench.load_sweep_csv(args.infile)
    script = _plot_script(args.infile, rows)
    try:
        Path(args.out).write_text(script)
    except OSError as exc:
        raise OSError(f"writing plot script to {args.out}: {exc}") from exc
    if args.render:
        exec(compile(script, args.out, "exec"), {"__name__": "__main__"})
    return 0


_SERIES = [
    ("srer_unstr_db", "ALS", "o-"),
    ("srer_str_db", "structured ALS", "s-"),
    ("bound_unstr_db", "CRB bound", "k--"),
    ("bound_str_db", "structured CRB bound", "k:"),
]

_XLABELS = {"smnr": "SMNR [dB]", "rho": "measurement fraction rho",
            "lambda": "relative rank lambda"}


def _plot_script(csv_path, rows):
    """Self-contained script reproducing the curves-plus-bounds layout."""
    png_path = str(Path(csv_path).with_suffix(".png"))
    xlabel = _XLABELS.get(rows[0]["sweep_param"], rows[0]["sweep_param"]) if rows else "value"
    lines = [
        "#!/usr/bin/env python3",
        f'"""SRER curves for {csv_path}; writes {png_path}."""',
        "import csv",
        "",
        "import matplotlib",
        'matplotlib.use("Agg")',
        "import matplotlib.pyplot as plt",
        "",
        f"CSV_PATH = {str(csv_path)!r}",
        f"OUT_PATH = {png_path!r}",
        "",
        'with open(CSV_PATH, newline="") as fh:',
        "    rows = list(csv.DictReader(fh))",
        "",
        "fig, ax = plt.subplots(figsize=(7.0, 5.0))",
    ]
    for column, label, style in _SERIES:
        if not any(row[column] is not None for row in rows):
            continue
        lines += [
            f'pts = [(float(r["value"]), float(r["{column}"])) for r in rows if r["{column}"]]',
            f"ax.plot([v for v, _ in pts], [s for _, s in pts], {style!r}, label={label!r})",
        ]
    lines += [
        f"ax.set_xlabel({xlabel!r})",
        'ax.set_ylabel("SRER [dB]")',
        "ax.grid(True, alpha=0.4)",
        "ax.legend()",
        "fig.tight_layout()",
        "fig.savefig(OUT_PATH, dpi=150)",
        'print("wrote", OUT_PATH)',
        "",
    ]
    return "\n".join(lines)


def _build_parser():
    parser = _Parser(prog="lrmr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("gen", help="draw a ground-truth low-rank matrix")
    g.add_argument("--kind", required=True, choices=["hankel", "toeplitz", "psd", "generic"])
    g.add_argument("--n", required=True, type=int)
    g.add_argument("--p", type=int, default=None, help="defaults to n")
    g.add_argument("--r", required=True, type=int)
    g.add_argument("--seed", required=True, type=int)
    g.add_argument("--out", required=True)
    g.add_argument("--params-out", dest="params_out", default=None)
    g.set_defaults(func=cmd_gen)

    rec = sub.add_parser("reconstruct", help="solve for a low-rank matrix from measurements")
    rec.add_argument("--y", required=True)
    rec.add_argument("--op", required=True)
    rec.add_argument("--n", required=True, type=int)
    rec.add_argument("--p", required=True, type=int)
    rec.add_argument("--r", required=True, type=int)
    rec.add_argument("--structure", default="unstructured",
                     choices=["unstructured", "hankel", "toeplitz", "psd"])
    rec.add_argument("--max-iters", dest="max_iters", type=int, default=500)
    rec.add_argument("--tol", type=float, default=1e-8)
    rec.add_argument("--out", required=True)
    rec.add_argument("--report", default=None)
    rec.set_defaults(func=cmd_reconstruct)

    c = sub.add_parser("crb", help="evaluate a reconstruction error bound")
    c.add_argument("--op", required=True)
    c.add_argument("--sigma2", required=True, type=float)
    c.add_argument("--truth", required=True)
    c.add_argument("--r", required=True, type=int)
    c.add_argument("--structure", default=None, choices=["hankel", "psd"])
    c.add_argument("--params", default=None)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_crb)

    s = sub.add_parser("sweep", help="run a Monte Carlo sweep from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=None,
                   help="worker threads; falls back to LRMR_THREADS, then all cores")
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="emit a plot script for persisted sweep results")
    pl.add_argument("--in", dest="infile", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--render", action="store_true",
                    help="also run the emitted script, writing the figure next to the CSV")
    pl.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
