"""Command line front-end.

Exit codes: 0 success, 2 invalid arguments, 3 verification failed,
4 numerical failure.  Every command writes its artifacts atomically into the
output directory (--out, else $GREENCANCEL_OUT, else ./out) together with a
manifest.json holding the configuration and the sha256 of each artifact.
"""

import argparse
import hashlib
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .cancellation import (build_system, cross_validate, solution_text,
                           verify_cancellation)
from .identities import provenance_json, read_system, system_text
from .linalg import STRATEGIES, FillInExceeded, solve, verify
from .rmt import (ModelParams, NumericalError, ParameterError, convergence_experiment,
                  edge_shift, rows_csv, sample_er, sandwich_check)
from .spotcheck import WORKED, compare
from .tw import TW1, ExtrapolationError

OK, BAD_ARGS, FAILED, NUMERICAL = 0, 2, 3, 4
OUT_ENV = "GREENCANCEL_OUT"


class UsageError(Exception):
    pass


def atomic_write(path, data):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Outputs:
    """Collects artifacts of one run and writes them with a manifest."""

    def __init__(self, out_dir, command, config):
        self.dir = out_dir
        self.command = command
        self.config = config
        self.files = {}

    def write(self, name, data):
        atomic_write(os.path.join(self.dir, name), data)
        self.files[name] = hashlib.sha256(data.encode()).hexdigest()

    def finish(self):
        manifest = {"command": self.command, "config": self.config,
                    "version": __version__, "files": self.files}
        atomic_write(os.path.join(self.dir, "manifest.json"),
                     json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _out_dir(args):
    return args.out or os.environ.get(OUT_ENV) or "out"


def _read(path):
    try:
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}")


def cmd_generate(args):
    system, container, stats, dropped, _ = build_system(args.case, args.nmax)
    out = Outputs(_out_dir(args), "generate", {"case": args.case, "nmax": args.nmax})
    out.write(f"system_{args.case}.txt", system_text(system))
    out.write(f"provenance_{args.case}.json", provenance_json(system, container) + "\n")
    m = system.matrix
    summary = {"rows": m.nrows, "cols": m.ncols, "nnz": m.nnz(), "target_dropped": dropped,
               "stats": dict(sorted(stats.items()))}
    out.write(f"generate_{args.case}.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    out.finish()
    print(f"case {args.case}: {m.nrows} x {m.ncols}, {m.nnz()} nonzeros -> {out.dir}")
    return OK


def cmd_solve(args):
    case, A, b = read_system(_read(args.system))
    rep = solve(A, b, args.strategy, args.cap)
    out = Outputs(_out_dir(args), "solve", {"system": os.path.basename(args.system),
                                            "strategy": rep.strategy})
    ok = rep.feasible and verify(A, rep.solution, b)
    info = {"case": case, "rows": A.nrows, "cols": A.ncols, "rank": rep.rank,
            "feasible": rep.feasible, "verified": ok, "certificate": rep.certificate,
            "nonzeros": len(rep.solution or {})}
    if ok:
        out.write("solution.txt", solution_text(rep.solution))
    out.write("solve_report.json", json.dumps(info, indent=1, sort_keys=True) + "\n")
    out.finish()
    print(json.dumps(info, sort_keys=True))
    return OK if ok else FAILED


def cmd_verify(args):
    if args.cross:
        d = args.cross
        sys_path = os.path.join(d, args.cross_system)
        sol_path = os.path.join(d, args.cross_solution)
        for p in (sys_path, sol_path):
            if not os.path.exists(p):
                raise UsageError(f"missing reference file {p}")
        res = cross_validate(sys_path, sol_path)
        out = Outputs(_out_dir(args), "verify-cross", {"case": args.case})
        out.write(f"cross_{args.case}.json", json.dumps(res, indent=1, sort_keys=True) + "\n")
        out.finish()
        print(json.dumps(res, sort_keys=True))
        return OK if res["verified"] else FAILED
    target = "reference" if args.case == "m" else "derived"
    report, system, x = verify_cancellation(args.case, args.nmax, args.strategy,
                                            args.flow_sign, target, args.cap)
    out = Outputs(_out_dir(args), "verify", {"case": args.case, "nmax": args.nmax,
                                             "strategy": report.strategy,
                                             "flow_sign": args.flow_sign})
    out.write(f"system_{args.case}.txt", system_text(system))
    if report.verified:
        out.write(f"solution_{args.case}.txt", solution_text(x))
    out.write(f"report_{args.case}.json", report.to_json(timing=False) + "\n")
    out.write(f"report_{args.case}.txt", report.to_text(timing=False))
    out.finish()
    sys.stdout.write(report.to_text())
    return OK if report.solved and report.verified else FAILED


SPOT_SETS = {
    "appendixB": [ex for ex in WORKED if ex["case"] == "m"],
    "fcase": [ex for ex in WORKED if ex["case"] == "F"],
    "all": WORKED,
}


def cmd_spotcheck(args):
    results = [compare(ex, args.full) for ex in SPOT_SETS[args.which]]
    out = Outputs(_out_dir(args), "spotcheck", {"set": args.which, "full": args.full})
    payload = [{k: (v if isinstance(v, (bool, str)) else [str(c) for c in v])
                for k, v in r.items()} for r in results]
    out.write(f"spotcheck_{args.which}.json", json.dumps(payload, indent=1) + "\n")
    out.finish()
    for r in results:
        status = "ok" if r["match"] and r["multiset_match"] else "MISMATCH"
        print(f"{r['name']:24s} {status}  {{{', '.join(str(c) for c in r['derived'])}}}")
    return OK if all(r["match"] and r["multiset_match"] for r in results) else FAILED


def _run_sandwich(cfg, out):
    N = int(cfg["N"])
    params = ModelParams.from_q(N, N ** float(cfg.get("q_exponent", 0.45)), int(cfg.get("seed", 0)))
    eps = float(cfg.get("eps", 0.05))
    lines = ["sample,holds"]
    held = 0
    n = int(cfg.get("samples", 200))
    for s in range(n):
        H = sample_er(params, s)
        _, Lhat = edge_shift(H, params.q, params.kappa4)
        ok, _ = sandwich_check(np.linalg.eigvalsh(H), Lhat, params.q, eps)
        held += ok
        lines.append(f"{s},{int(ok)}")
    out.write("sandwich.csv", "\n".join(lines) + "\n")
    return held / n


def cmd_simulate(args):
    try:
        config = json.loads(_read(args.config))
    except json.JSONDecodeError as e:
        raise UsageError(f"bad config: {e}")
    out = Outputs(_out_dir(args), "simulate", config)
    tw = TW1(int(config.get("tw_nodes", 64)))
    if config.get("settings"):
        rows, samples = convergence_experiment(config, tw, args.jobs)
        out.write("convergence.csv", rows_csv(rows))
        for i, xs in enumerate(samples):
            out.write(f"samples_{i}.txt", "".join(f"{v!r}\n" for v in xs))
        for r in rows:
            print(f"N={r.N} q={r.q:.2f} M={r.M} shift={r.shift} ks={r.ks:.4f} +- {r.ks_stderr:.4f}")
    if config.get("sandwich"):
        frac = _run_sandwich(config["sandwich"], out)
        print(f"sandwich holds on {frac:.1%} of samples")
    out.finish()
    return OK


def _read_grid(text):
    text = text.strip()
    if text.startswith("["):
        return [float(v) for v in json.loads(text)]
    return [float(v) for v in text.split()]


def cmd_tw(args):
    grid = _read_grid(_read(args.grid))
    tw = TW1(args.nodes)
    vals = [tw.cdf(r) for r in grid]
    out = Outputs(_out_dir(args), "tw", {"grid": os.path.basename(args.grid), "nodes": args.nodes})
    out.write("tw1.csv", "r,F1\n" + "".join(f"{r!r},{v!r}\n" for r, v in zip(grid, vals)))
    out.finish()
    print(f"{len(grid)} values written to {out.dir}")
    return OK


def build_parser():
    p = argparse.ArgumentParser(prog="greencancel", description=__doc__.splitlines()[0])
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    p.add_argument("--jobs", type=int, default=1, help="worker cap for sampling")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate identities and the linear system")
    g.add_argument("--case", choices=["m", "F"], required=True)
    g.add_argument("--nmax", type=int, default=4)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve a system file exactly")
    s.add_argument("--system", required=True)
    s.add_argument("--strategy", choices=STRATEGIES)
    s.add_argument("--cap", type=int, default=10**7)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="end-to-end cancellation check")
    v.add_argument("--case", choices=["m", "F"], required=True)
    v.add_argument("--nmax", type=int, default=4)
    v.add_argument("--strategy", choices=STRATEGIES)
    v.add_argument("--cap", type=int, default=10**7)
    v.add_argument("--flow-sign", type=int, choices=[1, -1], default=1)
    v.add_argument("--cross", metavar="DIR", help="verify reference system/solution files")
    v.add_argument("--cross-system", default="system.txt")
    v.add_argument("--cross-solution", default="solution.txt")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("spotcheck", help="re-derive the worked identities")
    c.add_argument("which", choices=sorted(SPOT_SETS))
    c.add_argument("--full", action="store_true", help="use full expansions with classification")
    c.set_defaults(func=cmd_spotcheck)

    m = sub.add_parser("simulate", help="run a Monte-Carlo experiment from a JSON config")
    m.add_argument("--config", required=True)
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tw", help="evaluate the Tracy-Widom GOE CDF on a grid")
    t.add_argument("--grid", required=True)
    t.add_argument("--nodes", type=int, default=64)
    t.set_defaults(func=cmd_tw)
    return p


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return BAD_ARGS if e.code else OK
    try:
        return args.func(args)
    except (UsageError, ParameterError, ExtrapolationError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_ARGS
    except (FillInExceeded, NumericalError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return NUMERICAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
