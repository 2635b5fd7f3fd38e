"""Command-line front end.

Every subcommand writes one CSV table (header row first) to ``--output`` or
standard output.  Exit status is 0 on success, 1 when a solver did not
converge (partial results are still written, flagged in the ``converged``
column) and 2 on usage errors.

Options may also come from a ``--config`` file of ``key = value`` lines that
mirror the long flags (``grid = -2:2:41``); flags on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import diagnostics_from_point, stability_experiment
from .errors import FreeConvError, InvalidParameter, ParseError
from .limits import free_clt_profile, free_poisson_profile
from .measures import Cauchy, Empirical, MeasureSpec, closed_form_density, levy_distance
from .parsing import parse_measure_spec, read_reals
from .rmt import local_law_experiment
from .subord import ETA_FLOOR, SubordinationPoint, boxplus_density

__all__ = ["RunConfig", "build_parser", "format_number", "parse_grid", "run", "main"]

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE = 0, 1, 2
COMMANDS = ("density", "diagnose", "levy", "stability", "clt", "poisson", "stable", "rmt")


class UsageError(Exception):
    """Bad command-line or config input."""


def format_number(x) -> str:
    """Locale-independent text with at least six significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0 or 0.1 <= abs(x) < 1e6:
        return f"{x:.6f}"
    return f"{x:.6e}"


def parse_grid(text: str):
    """``"emin:emax:n"`` to ``(emin, emax, n)``; needs ``emin < emax`` and ``n >= 2``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must look like emin:emax:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"grid must look like emin:emax:n, got {text!r}") from None
    if not lo < hi or n < 2:
        raise UsageError("grid needs emin < emax and n >= 2")
    return lo, hi, n


def _parse_interval(text: str):
    parts = text.split(":")
    try:
        lo, hi = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"interval must look like a:b, got {text!r}") from None
    if not lo < hi:
        raise UsageError("interval needs a < b")
    return lo, hi


def _parse_list(text: str, kind):
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list, got {text!r}") from None


@dataclass
class RunConfig:
    """Validated options of one invocation."""

    command: str
    measure_a: MeasureSpec | None = None
    measure_b: MeasureSpec | None = None
    grid: tuple | None = None
    eta_floor: float = ETA_FLOOR
    output_path: str | None = None
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not 0 < self.eta_floor <= 1:
            raise UsageError("eta-floor must lie in (0, 1]")
        if self.grid is not None:
            lo, hi, n = self.grid
            if not lo < hi or n < 2:
                raise UsageError("grid needs emin < emax and n >= 2")

    def energies(self) -> np.ndarray:
        lo, hi, n = self.grid
        return np.linspace(lo, hi, n)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freeconv", description="Free additive convolution experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="key=value file with defaults for these options")
        p.add_argument("--output", "-o", help="CSV destination (default: standard output)")
        p.add_argument("--eta-floor", type=float, default=ETA_FLOOR, help="lowest height of the ladder")
        return p

    def pair(p):
        p.add_argument("--a", required=True, help="first measure")
        p.add_argument("--b", required=True, help="second measure")

    p = command("density", "density of A [+] B on a grid")
    pair(p)
    p.add_argument("--grid", required=True, help="emin:emax:n")

    p = command("diagnose", "smoothness and genericity of (A, B) on a grid")
    pair(p)
    p.add_argument("--grid", required=True, help="emin:emax:n")

    p = command("levy", "Levy distance between A and B")
    pair(p)

    p = command("stability", "density change under quantization of A and B")
    pair(p)
    p.add_argument("--interval", required=True, help="a:b")
    p.add_argument("--sizes", default="50,100,200,400", help="comma-separated quantization sizes")
    p.add_argument("--points", type=int, default=61, help="grid points in the interval")

    p = command("clt", "free central limit theorem for an atomic base law")
    p.add_argument("--base", default="atoms(-1:0.5,1:0.5)", help="centred unit-variance atomic law")
    p.add_argument("--n", default="2,4,8,16,32,64", help="comma-separated numbers of summands")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--points", type=int, default=121)

    p = command("poisson", "free Poisson limit theorem")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0)
    p.add_argument("--n", default="200", help="comma-separated numbers of summands")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--points", type=int, default=121)

    p = command("stable", "Cauchy(g1) [+] Cauchy(g2) against Cauchy(g1 + g2)")
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--gamma2", type=float, default=1.0)
    p.add_argument("--grid", default="-5:5:41", help="emin:emax:n")

    p = command("rmt", "eigenvalue counts of A + U B U* against the free convolution")
    p.add_argument("--a", help="spectral law of A")
    p.add_argument("--b", help="spectral law of B")
    p.add_argument("--a-eigs", help="file with the N eigenvalues of A, one per line")
    p.add_argument("--b-eigs", help="file with the N eigenvalues of B, one per line")
    p.add_argument("--n", default="500", help="comma-separated matrix sizes")
    p.add_argument("--eta", default="0.2", help="comma-separated window half-widths")
    p.add_argument("--e", type=float, default=0.0, help="window centre")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    return parser


_NUMERIC_START = re.compile(r"-[\d.]")


def _join_negative_values(argv):
    """Glue ``--opt -1.9:1.9:39`` into ``--opt=-1.9:1.9:39`` so argparse accepts it."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NUMERIC_START.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def read_config(path) -> list[str]:
    """Turn a ``key = value`` file into ``--key=value`` tokens."""
    tokens = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("_", "-")
        if key == "command":
            continue
        tokens.append(f"--{key}={value.strip()}")
    return tokens


def _expand_config(argv):
    """Insert config tokens right after the subcommand, before explicit flags."""
    argv = _join_negative_values(list(argv))
    cfg = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            cfg = argv[i + 1]
        elif tok.startswith("--config="):
            cfg = tok.split("=", 1)[1]
    if cfg is None:
        return argv
    extra = read_config(cfg)
    cmd_at = next((i for i, tok in enumerate(argv) if tok in COMMANDS), None)
    if cmd_at is None:
        command = _config_command(cfg)
        if command is None:
            return argv
        argv = [command] + argv
        cmd_at = 0
    return argv[: cmd_at + 1] + extra + argv[cmd_at + 1 :]


def _config_command(path):
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, sep, value = line.split("#", 1)[0].partition("=")
        if sep and key.strip() == "command":
            return value.strip()
    return None


def _measure(text, what):
    if text is None:
        raise UsageError(f"missing measure {what}")
    return parse_measure_spec(text)


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    """Validate parsed arguments into a :class:`RunConfig`."""
    cmd = ns.command
    params = {}
    a = b = grid = None
    seed = None
    if cmd in ("density", "diagnose", "levy", "stability"):
        a, b = _measure(ns.a, "--a"), _measure(ns.b, "--b")
    if cmd in ("density", "diagnose", "stable"):
        grid = parse_grid(ns.grid)
    if cmd == "stability":
        params.update(interval=_parse_interval(ns.interval), sizes=_parse_list(ns.sizes, int), points=ns.points)
    elif cmd == "clt":
        params.update(base=_measure(ns.base, "--base"), n=_parse_list(ns.n, int), epsilon=ns.epsilon, points=ns.points)
    elif cmd == "poisson":
        params.update(lam=ns.lam, n=_parse_list(ns.n, int), epsilon=ns.epsilon, points=ns.points)
    elif cmd == "stable":
        params.update(gamma1=ns.gamma1, gamma2=ns.gamma2)
    elif cmd == "rmt":
        seed = ns.seed
        if seed < 0:
            raise UsageError("seed must be nonnegative")
        params.update(n=_parse_list(ns.n, int), eta=_parse_list(ns.eta, float), e=ns.e, trials=ns.trials)
        for side in ("a", "b"):
            text, path = getattr(ns, side), getattr(ns, f"{side}_eigs")
            if (text is None) == (path is None):
                raise UsageError(f"give exactly one of --{side} and --{side}-eigs")
            params[f"{side}_eigs"] = None if path is None else read_reals(path)
            if text is not None:
                if side == "a":
                    a = _measure(text, "--a")
                else:
                    b = _measure(text, "--b")
    return RunConfig(cmd, a, b, grid, ns.eta_floor, ns.output, seed, params)


# ---------------------------------------------------------------------------
# commands


def _density(cfg):
    prof = boxplus_density(cfg.energies(), cfg.measure_a, cfg.measure_b, cfg.eta_floor)
    rows = [
        (E, r, ta.imag, tb.imag, c)
        for E, r, ta, tb, c in zip(prof.energies, prof.rho, prof.t_a, prof.t_b, prof.converged)
    ]
    return ["E", "rho", "im_tA", "im_tB", "converged"], rows, prof.all_converged


def _diagnose(cfg):
    prof = boxplus_density(cfg.energies(), cfg.measure_a, cfg.measure_b, cfg.eta_floor)
    rows = []
    for k, E in enumerate(prof.energies):
        if prof.converged[k]:
            p = SubordinationPoint(complex(E, cfg.eta_floor), prof.t_a[k], prof.t_b[k], prof.m_box[k], prof.residual[k])
            d = diagnostics_from_point(p, cfg.measure_a, cfg.measure_b)
            rows.append((E, d.im_ta, d.im_tb, d.k.real, d.k.imag, d.smooth, d.generic, d.reliable, True))
        else:
            nan = math.nan
            rows.append((E, nan, nan, nan, nan, False, False, False, False))
    header = ["E", "im_tA", "im_tB", "k_re", "k_im", "smooth", "generic", "reliable", "converged"]
    return header, rows, prof.all_converged


def _levy(cfg):
    return ["levy_distance"], [(levy_distance(cfg.measure_a, cfg.measure_b),)], True


def _stability(cfg):
    p = cfg.params
    rep = stability_experiment(cfg.measure_a, cfg.measure_b, p["interval"], p["sizes"], p["points"], cfg.eta_floor)
    rows = [(n, s, gap, ratio) for n, (s, gap, ratio) in zip(rep.sizes, rep.rows)]
    return ["n", "s", "sup_gap", "ratio"], rows, True


def _clt(cfg):
    p = cfg.params
    rep = free_clt_profile(p["base"], p["n"], p["epsilon"], p["points"], cfg.eta_floor)
    return ["n", "sup_error"], list(zip(rep.n_values, rep.sup_errors)), True


def _poisson(cfg):
    p = cfg.params
    rows = []
    for n in p["n"]:
        rep = free_poisson_profile(p["lam"], n, p["epsilon"], p["points"], cfg.eta_floor)
        rows.append((n, rep.sup_errors[0]))
    return ["n", "sup_error"], rows, True


def _stable(cfg):
    p = cfg.params
    g1, g2 = p["gamma1"], p["gamma2"]
    grid = cfg.energies()
    if np.any(np.abs(grid) > 10):
        raise UsageError("stable grid must lie within [-10, 10]")
    prof = boxplus_density(grid, Cauchy(g1), Cauchy(g2), cfg.eta_floor)
    target = closed_form_density(Cauchy(g1 + g2), grid)
    rows = list(zip(grid, prof.rho, target, np.abs(prof.rho - target), prof.converged))
    return ["E", "rho", "target", "abs_gap", "converged"], rows, prof.all_converged


def _rmt(cfg):
    p = cfg.params

    def source(measure, eigs, side):
        if eigs is None:
            return measure, measure
        eigs = np.sort(eigs)

        def fixed(n, eigs=eigs):
            if n != len(eigs):
                raise UsageError(f"--{side}-eigs holds {len(eigs)} values but N = {n}")
            return eigs

        return fixed, Empirical(tuple(eigs))

    src_a, lim_a = source(cfg.measure_a, p["a_eigs"], "a")
    src_b, lim_b = source(cfg.measure_b, p["b_eigs"], "b")
    rep = local_law_experiment(src_a, src_b, p["n"], p["e"], p["eta"], p["trials"], cfg.seed, lim_a, lim_b)
    rows = []
    for i, n in enumerate(rep.n_values):
        for j, eta in enumerate(rep.eta_values[i]):
            rows.append((n, eta, rep.E, rep.estimates[i, j], rep.stderr[i, j], rep.target, rep.trials))
    return ["N", "eta", "E", "estimate", "stderr", "target", "trials"], rows, True


_DISPATCH = {
    "density": _density,
    "diagnose": _diagnose,
    "levy": _levy,
    "stability": _stability,
    "clt": _clt,
    "poisson": _poisson,
    "stable": _stable,
    "rmt": _rmt,
}


def _write_csv(header, rows, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    text = buf.getvalue()
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def run(cfg: RunConfig) -> int:
    """Execute one configured command and write its table; returns the exit status."""
    try:
        header, rows, ok = _DISPATCH[cfg.command](cfg)
    except UsageError as exc:
        print(f"freeconv: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParameter, ParseError) as exc:
        print(f"freeconv: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FreeConvError as exc:
        print(f"freeconv: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    _write_csv(header, rows, cfg.output_path)
    if not ok:
        print("freeconv: some points did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
        ns = parser.parse_args(argv)
        cfg = config_from_args(ns)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (UsageError, ParseError, InvalidParameter, OSError) as exc:
        print(f"freeconv: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
