"""``ortholap`` command line.

Exit codes: 0 when every asserted check passed, 2 when only recorded probes
deviated (findings), 1 on a hard error or a failed assertion.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .. import network, odmap, rates, walk
from ..errors import OrthoLapError
from . import experiments as ex
from .config import load_config, spec_from_mapping
from .report import emit_report, fmt, spec_meta


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are hard errors, not findings
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p, eps_default="1/8,1/16,1/32,1/64"):
    p.add_argument("--domain", default=None, help="disk:R | disk:cx,cy,R | rect:w,h | rect:x0,y0,x1,y1")
    p.add_argument("--gen", default=None, choices=sorted(odmap.GENERATORS))
    p.add_argument("--eps", default=None, help=f"comma list, fractions allowed (default {eps_default})")
    p.add_argument("--g", default=None, help="poly:k:re|im or holder:alpha:x,y")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None)


def build_parser():
    ap = _Parser(prog="ortholap", description="Discrete harmonic functions on orthodiagonal maps.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("mesh-gen", help="generate a map and write it in the odmap v1 format")
    _common(p, "1/16")

    p = sub.add_parser("solve", help="solve the discrete Dirichlet problem and report the error")
    _common(p, "1/16")

    p = sub.add_parser("walk", help="Monte Carlo harmonic measure against the solver at one start")
    _common(p, "1/16")
    p.add_argument("--start", default="0,0", help="point x,y; the nearest primal vertex is used")

    for name, hlp in (("converge", "convergence sweep over eps"), ("probes", "run a probe battery"),
                      ("report", "run the experiment described by a config file")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--config", default=None, required=(name == "report"))
        if name == "probes":
            p.add_argument("--probes", default=None, help=f"comma list of {', '.join(ex.KINDS)}")

    p = sub.add_parser("rates", help="tabulate the exponents lambda and theta")
    p.add_argument("--alpha", default="0.1,0.25,0.5,0.75,1.0")
    p.add_argument("--beta", default="0.1,0.2,0.3,0.4")
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--bootstrap", type=float, default=None, help="also print the bootstrap sequence limit for beta")
    p.add_argument("--out", default=None)
    return ap


def _overrides(args):
    return {"domain": args.domain, "gen": args.gen, "eps": args.eps, "g": args.g,
            "seed": None if args.seed is None else str(args.seed),
            "trials": None if args.trials is None else str(args.trials),
            "tol": None if args.tol is None else str(args.tol),
            "out": args.out}


def _spec(args, kind, **extra):
    over = {**_overrides(args), **extra}
    if getattr(args, "config", None):
        return load_config(args.config, **over)
    return spec_from_mapping({"kind": kind}, **over)


def _single(args, default_eps):
    domain = odmap.parse_domain(args.domain or "disk:1")
    eps = ex.parse_eps(args.eps or default_eps)[0]
    return domain, args.gen or "square", eps


def cmd_mesh_gen(args):
    domain, gen, eps = _single(args, "1/16")
    m = odmap.generate(gen, domain, eps)
    rep = odmap.validate(m)
    if args.out:
        odmap.save(m, args.out)
    print(f"primal={len(m.primal_ids)} dual={len(m.dual_ids)} quads={m.n_quads} valid={rep.ok}")
    return 0 if rep.ok else 1


def cmd_solve(args):
    domain, gen, eps = _single(args, "1/16")
    gtext = args.g or "poly:2:re"
    g = ex.parse_boundary(gtext)
    m = odmap.generate(gen, domain, eps)
    net = network.build_network(m)
    h = network.solve_dirichlet(net, g, tol=args.tol or 1e-10)
    if args.out:
        network.save_field(h, args.out)
    msg = f"n={net.n} method={h.info['method']} iterations={h.info['iterations']}"
    try:
        oracle = ex.continuum_oracle(gtext, domain, 1e-8)
        msg += f" max_err={float(np.max(np.abs(h.values - oracle.fn(net.positions)))):.6g}"
    except OrthoLapError:
        msg += " max_err=n/a"
    print(msg)
    return 0


def cmd_walk(args):
    domain, gen, eps = _single(args, "1/16")
    g = ex.parse_boundary(args.g or "poly:2:re")
    m = odmap.generate(gen, domain, eps)
    net = network.build_network(m)
    x, y = (float(v) for v in args.start.split(","))
    start = walk.nearest_primal(m, (x, y))
    if m.is_boundary[start]:
        raise OrthoLapError("start point is on the boundary")
    h = network.solve_dirichlet(net, g, tol=args.tol or 1e-10)
    est = walk.harmonic_measure(net, start, g, args.trials or 20000, args.seed or 0)
    ref = float(h.values[net.local(start)])
    z = (est.mean - ref) / est.std_error if est.std_error > 0 else 0.0
    line = ",".join(fmt(v) for v in (start, est.mean, est.std_error, est.n_trials, ref, z))
    print("start,mc_mean,std_err,n,solver,z")
    print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("start,mc_mean,std_err,n,solver,z\n" + line + "\n")
    return 0 if abs(z) <= 4 else 1


def _run_and_report(spec):
    rep = ex.run_probe_battery(spec)
    for r in rep.results:
        fit = f" slope={r.fit.slope:.4g}" if r.fit is not None else ""
        print(f"{r.name}: {r.status}{fit} {r.note}".rstrip())
    if spec.outdir:
        emit_report(rep.results, spec.outdir, spec_meta(spec))
    return rep.exit_code


def cmd_converge(args):
    return _run_and_report(_spec(args, "converge"))


def cmd_probes(args):
    extra = {"probes": args.probes} if args.probes else {}
    spec = _spec(args, "converge", **extra)
    if not spec.probes:
        raise OrthoLapError("no probes named; pass --probes or set probes in the config")
    return _run_and_report(spec)


def cmd_report(args):
    spec = _spec(args, "converge")
    if not spec.outdir:
        raise OrthoLapError("report needs an output directory (--out or 'out' in the config)")
    return _run_and_report(spec)


def cmd_rates(args):
    alphas = [float(v) for v in args.alpha.split(",")]
    betas = [float(v) for v in args.beta.split(",")]
    lines = ["alpha,beta,lambda,lambda_lower,theta,theta_branch,bootstrap_limit"]
    for a, b, lv, th, branch, lim in rates.rates_table(alphas, betas, args.grid):
        lb = rates.lambda_lower_bound(a, b) if a < b <= 0.5 else float("nan")  # claimed only there
        lines.append(",".join(fmt(v) for v in (a, b, lv, lb, th, branch, lim)))
    text = "\n".join(lines) + "\n"
    if args.bootstrap is not None:
        bs = rates.bootstrap(args.bootstrap, 200)
        text += f"# bootstrap beta={args.bootstrap!r} alpha_200={float(bs.sequence[-1])!r} limit={bs.limit!r}\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


COMMANDS = {"mesh-gen": cmd_mesh_gen, "solve": cmd_solve, "walk": cmd_walk, "converge": cmd_converge,
            "probes": cmd_probes, "rates": cmd_rates, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (OrthoLapError, OSError, ValueError) as exc:
        print(f"ortholap: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
