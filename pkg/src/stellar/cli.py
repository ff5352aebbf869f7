"""Command-line interface: ``stellar <command> ...``.

Results go to stdout, diagnostics to stderr. Exit codes: 0 success,
1 invalid input, 2 numerical failure (cutoff or optimizer), 3 states not
Gaussian-convertible.
"""

from __future__ import annotations

import argparse
import cmath
import json
import logging
import math
import sys

import numpy as np

from . import analysis, fock
from .robustness import DEFAULT_RESTARTS, DEFAULT_TOL, RobustnessResult, ngf, robustness
from .errors import CutoffTooSmall, NotConverged, OracleMismatch, RankZero, StellarError
from .fock import FockState
from .gaussian import (
    CanonicalState,
    GaussianUnitary,
    apply_gaussian,
    fock_amplitudes,
    photon_add,
    photon_subtract,
)
from .io import complex_pairs, dump_state, gaussian_dict, load_state, save_state

log = logging.getLogger("stellar")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_NOT_CONVERTIBLE = 0, 1, 2, 3


def _canonical(state) -> CanonicalState:
    return CanonicalState.from_fock(state) if isinstance(state, FockState) else state


def _emit(args, payload: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print("\n".join(lines))


def _fmt(z: complex) -> str:
    return f"{z.real:+.10f} {z.imag:+.10f}i"


def _gauss_lines(g: dict) -> list[str]:
    return [f"squeeze r={g['r']:.10g} theta={g['theta']:.10g}",
            f"displacement beta={_fmt(complex(*g['beta']))}"]


# --------------------------------------------------------------------------
# commands


def cmd_rank(args) -> int:
    state = load_state(args.file)
    if isinstance(state, FockState):
        rep = analysis.rank_report(state, args.rank_tol)
        if rep.likely_truncated:
            log.warning("amplitudes decay into the cutoff (edge mass %.3e): "
                        "the rank may be a truncation artifact of an infinite-rank state", rep.edge_mass)
        else:
            log.info("Fock input: edge mass %.3e", rep.edge_mass)
        payload = {"rank": rep.rank, "edge_mass": rep.edge_mass, "likely_truncated": rep.likely_truncated}
        _emit(args, payload, [str(rep.rank)])
    else:
        rank = analysis.stellar_rank(state, args.rank_tol)
        _emit(args, {"rank": rank}, [str(rank)])
    return EXIT_OK


def cmd_roots(args) -> int:
    state = _canonical(load_state(args.file))
    try:
        roots = analysis.stellar_roots(state, args.cluster_tol)
    except RankZero:
        roots = ()
    grouped = analysis.group_roots(roots, args.cluster_tol)
    payload = {"rank": len(roots), "roots": [[[z.real, z.imag], m] for z, m in grouped]}
    lines = [f"{_fmt(z)}  x{m}" for z, m in grouped] or ["(no zeros: Gaussian state)"]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_decompose(args) -> int:
    d = analysis.decompose(_canonical(load_state(args.file)))
    g = gaussian_dict(d.gaussian)
    del g["phi"]
    payload = {
        "rank": d.rank,
        "roots": [[[z.real, z.imag], m] for z, m in analysis.group_roots(d.roots)],
        "gaussian": g,
        "normalization": d.normalization,
    }
    lines = [f"rank {d.rank}"] + [f"root {_fmt(z)}" for z in d.roots]
    lines += _gauss_lines(g) + [f"normalization {d.normalization:.12g}"]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_core(args) -> int:
    st = _canonical(load_state(args.file)).canonical()
    g = gaussian_dict(st.gaussian)
    del g["phi"]
    coeffs = st.core.coefficients
    payload = {"rank": st.rank, "core": complex_pairs(coeffs), "gaussian": g}
    lines = [f"rank {st.rank}"] + [f"c_{n} = {_fmt(c)}" for n, c in enumerate(coeffs)] + _gauss_lines(g)
    if args.output:
        save_state(st.core, args.output)
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_convertible(args) -> int:
    a = _canonical(load_state(args.file_a))
    b = _canonical(load_state(args.file_b))
    w = analysis.gaussian_convertible(a, b, args.tol)
    if w is None:
        _emit(args, {"convertible": False}, ["not convertible"])
        return EXIT_NOT_CONVERTIBLE
    g = gaussian_dict(w)
    payload = {"convertible": True, "witness": g}
    _emit(args, payload, ["convertible", *_gauss_lines(g), f"rotation phi={g['phi']:.10g}"])
    return EXIT_OK


def _robustness_payload(res: RobustnessResult) -> dict:
    xi, beta = res.witness_gaussian
    return {
        "value": res.value,
        "fidelity": res.best_fidelity,
        "witness": {
            "gaussian": {"r": abs(xi), "theta": cmath.phase(xi) if xi else 0.0, "beta": [beta.real, beta.imag]},
            "core": complex_pairs(res.witness_core.coefficients),
        },
        "restarts": res.restarts_used,
        "converged": res.converged,
    }


def cmd_robustness(args) -> int:
    state = load_state(args.file)
    res = robustness(state, args.restarts, args.tol, seed=args.seed, grid=args.grid)
    payload = {"robustness": _robustness_payload(res)}
    xi, beta = res.witness_gaussian
    lines = [f"robustness {res.value:.10f} (upper bound)", f"fidelity threshold {res.best_fidelity:.10f}",
             f"witness xi={_fmt(xi)} beta={_fmt(beta)} core degree {res.witness_core.degree}"]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_ngf(args) -> int:
    state = load_state(args.file)
    res = ngf(state, args.epsilon, args.restarts, args.tol, seed=args.seed)
    payload = {"ngf": {"rank": res.rank, "epsilon": res.epsilon, "distances": list(res.distances)}}
    lines = [f"ngf {res.rank} at epsilon {res.epsilon:g} (upper bound)"]
    lines += [f"d_{k} {d:.10f}" for k, d in enumerate(res.distances)]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    a = fock_amplitudes(load_state(args.file_a))
    b = fock_amplitudes(load_state(args.file_b))
    f = fock.fidelity(a, b)
    _emit(args, {"fidelity": f, "trace_distance": fock.trace_distance(a, b)}, [f"{f:.15g}"])
    return EXIT_OK


def cmd_apply(args) -> int:
    state = _canonical(load_state(args.file))
    for kind, value in args.ops or []:
        if kind == "displace":
            state = apply_gaussian(GaussianUnitary.displacement(value), state)
        elif kind == "squeeze":
            state = apply_gaussian(GaussianUnitary.squeeze(value), state)
        elif kind == "rotate":
            state = apply_gaussian(GaussianUnitary.rotation(value), state)
        elif kind == "add":
            for _ in range(value):
                state = photon_add(state)
        else:
            for _ in range(value):
                state = photon_subtract(state)
    doc = dump_state(state)
    if args.output:
        save_state(state, args.output)
    if args.json or not args.output:
        print(json.dumps(doc))
    return EXIT_OK


def cmd_husimi(args) -> int:
    if args.nx < 2 or args.ny < 2:
        raise argparse.ArgumentTypeError("nx and ny must be at least 2")
    window = (args.xmin, args.xmax, args.ymin, args.ymax)
    if not all(math.isfinite(v) for v in window) or args.xmin >= args.xmax or args.ymin >= args.ymax:
        raise argparse.ArgumentTypeError("window must be finite with xmin < xmax and ymin < ymax")
    state = load_state(args.file)
    xs = np.linspace(args.xmin, args.xmax, args.nx)
    ys = np.linspace(args.ymin, args.ymax, args.ny)
    gx, gy = np.meshgrid(xs, ys)  # rows follow y, columns follow x
    q = np.maximum(analysis.husimi(state, gx + 1j * gy), 0.0)
    rows = ["x,y,q"] + [f"{x:.17g},{y:.17g},{v:.17g}" for x, y, v in zip(gx.ravel(), gy.ravel(), q.ravel())]
    text = "\n".join(rows) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _complex_arg(text: str) -> complex:
    try:
        re, im = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected re,im, got {text!r}") from exc
    return complex(re, im)


def _squeeze_arg(text: str) -> complex:
    try:
        r, theta = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected r,theta, got {text!r}") from exc
    if r < 0:
        raise argparse.ArgumentTypeError("squeezing r must be non-negative")
    return r * cmath.exp(1j * theta)


def _count_arg(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("photon count must be non-negative")
    return n


class _Op(argparse.Action):
    """Collects operations in command-line order."""

    def __init__(self, *args, kind: str, **kwargs):
        self.kind = kind
        super().__init__(*args, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        ops = list(getattr(namespace, self.dest) or [])
        ops.append((self.kind, values))
        setattr(namespace, self.dest, ops)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stellar", description="Stellar rank analysis of single-mode pure states.")
    p.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, func, help_text, files=("file",)):
        sp = sub.add_parser(name, help=help_text)
        for f in files:
            sp.add_argument(f, help="state file (stellar-state/1 JSON)")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.set_defaults(func=func)
        return sp

    sp = command("rank", cmd_rank, "stellar rank")
    sp.add_argument("--rank-tol", type=float, default=analysis.RANK_TOL)
    sp = command("roots", cmd_roots, "zeros of the Husimi function")
    sp.add_argument("--cluster-tol", type=float, default=analysis.CLUSTER_TOL)
    command("decompose", cmd_decompose, "photon additions on a Gaussian state")
    sp = command("core", cmd_core, "core state and Gaussian of the canonical form")
    sp.add_argument("-o", "--output", help="write the core state to this file")
    sp = command("convertible", cmd_convertible, "decide Gaussian convertibility", ("file_a", "file_b"))
    sp.add_argument("--tol", type=float, default=analysis.CONVERTIBLE_TOL)
    for name, func in (("robustness", cmd_robustness), ("ngf", cmd_ngf)):
        sp = command(name, func, "stellar robustness" if name == "robustness" else "smoothed non-Gaussianity of formation")
        sp.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
        sp.add_argument("--seed", type=int, default=None, help="defaults to $STELLAR_SEED or 0")
        if name == "robustness":
            sp.add_argument("--grid", action="store_true", help="add a coarse grid scan as a floor")
        else:
            sp.add_argument("--epsilon", type=float, required=True)
    command("fidelity", cmd_fidelity, "fidelity between two states", ("file_a", "file_b"))

    sp = command("apply", cmd_apply, "apply operations left to right and write the result")
    sp.add_argument("--displace", dest="ops", action=_Op, kind="displace", type=_complex_arg, metavar="RE,IM")
    sp.add_argument("--squeeze", dest="ops", action=_Op, kind="squeeze", type=_squeeze_arg, metavar="R,THETA")
    sp.add_argument("--rotate", dest="ops", action=_Op, kind="rotate", type=float, metavar="PHI")
    sp.add_argument("--add-photon", dest="ops", action=_Op, kind="add", type=_count_arg, metavar="N")
    sp.add_argument("--subtract-photon", dest="ops", action=_Op, kind="subtract", type=_count_arg, metavar="N")
    sp.add_argument("-o", "--output", help="output state file")

    sp = command("husimi", cmd_husimi, "Husimi function on a grid as CSV")
    for name, default in (("xmin", -3.0), ("xmax", 3.0), ("ymin", -3.0), ("ymax", 3.0)):
        sp.add_argument(f"--{name}", type=float, default=default)
    sp.add_argument("--nx", type=int, default=61)
    sp.add_argument("--ny", type=int, default=61)
    sp.add_argument("-o", "--output", help="CSV path (default: stdout)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("stellar: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    log.propagate = False
    try:
        return args.func(args)
    except (CutoffTooSmall, NotConverged, OracleMismatch) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (StellarError, argparse.ArgumentTypeError, ValueError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
