"""End-to-end check that the leading terms of the time derivative cancel.

The m-case target lists the nine leading terms of d/dt E[m(t, z(t))].  The
F-case target is recomputed here from the k = 3 cumulant terms of
d/dt E[F(X(t))] and the deterministic edge-shift term.  The same routine
also recomputes the m-case target, which cross-checks the tabulated list.
"""

import hashlib
import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .calculus import LEADING, DiffMode, classify, collect, nth_derivative
from .coeff import CoeffPoly
from .identities import ALPHA, assemble, generate_all, read_system, system_text
from .linalg import augmented_rank, solve, verify
from .terms import Term, make_factor, plain

KAPPA4_ALPHA = CoeffPoly.monomial(k4=1, u=1, s=2)

# indices: a = 0, b = 1, v = 2, j = 3
M_TARGET = [
    (12, [(0, 1), (0, 1)]),
    (24, [(0, 1), (0, 2), (1, 2)]),
    (48, [(0, 0), (1, 2), (1, 3), (2, 3)]),
    (72, [(0, 1), (0, 3), (1, 2), (2, 3)]),
    (24, [(0, 3), (0, 3), (1, 2), (1, 2)]),
    (12, [(0, 0), (0, 0), (1, 1), (1, 2), (1, 2)]),
    (36, [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)]),
    (36, [(0, 0), (0, 1), (0, 1), (1, 2), (1, 2)]),
    (12, [(0, 1), (0, 1), (0, 1), (0, 2), (1, 2)]),
]


class TargetError(RuntimeError):
    pass


def reference_target_m():
    """The nine leading terms as (coefficient, basis term)."""
    return [(Fraction(c), plain(ALPHA, e)) for c, e in M_TARGET]


def time_derivative_sources(case="m", flow_sign=1):
    """Unexpanded k = 3 sources of the time derivative, normalized form.

    Returns (to_differentiate, shift_terms): the first entries are
    differentiated three times in h_01, the second are already leading.
    ``flow_sign`` multiplies the -dh/dt contribution (1 is the value
    obtained by differentiating h(t) = e^{-t/2} W + (1 - e^{-t})^{1/2} H).
    """
    k4 = CoeffPoly.monomial(k4=1)
    flow = CoeffPoly.monomial(Fraction(-flow_sign, 2), u=1, s=-1) * k4
    shift = KAPPA4_ALPHA * 12
    chi = CoeffPoly.monomial(u=1) * k4
    if case == "m":
        src = [Term(flow, (make_factor([(2, 0), (1, 2)]),)),
               Term(chi, (make_factor([(2, 3), (2, 3)]),), h=((0, 1),))]
        leading = [Term(shift, (make_factor([(0, 1), (0, 1)]),))]
    else:
        src = [Term(flow, (make_factor([(0, 1)]),), dim=True),
               Term(chi, (make_factor([(2, 2)]),), h=((0, 1),), dim=True)]
        leading = [Term(shift, (make_factor([(0, 0)]),), dim=True)]
    return src, leading


def derived_target_terms(case="m", flow_sign=1):
    """Leading k = 3 terms of the time derivative with rational multipliers.

    Returns (list of (Fraction, basis term), Counter of tags).
    """
    src, leading = time_derivative_sources(case, flow_sign)
    out = []
    for t in src:
        out.extend(nth_derivative(t, 0, 1, 3, DiffMode.FULL_H))
    out = collect(out + leading)
    tags = Counter()
    res = []
    for t in out:
        tag = classify(t, case)
        tags[tag] += 1
        if tag != LEADING:
            continue
        r = t.coeff.ratio_to(KAPPA4_ALPHA)
        if r is None:
            raise TargetError(f"unexpected time factor {t.coeff}")
        res.append((r, Term(ALPHA, t.factors, t.dN, t.dQ, dim=t.dim)))
    return res, tags


def target_vector(container, terms, insert=False):
    """Map (coefficient, term) pairs to {classId: coefficient}."""
    vec = {}
    for c, t in terms:
        cid = container.insert(t) if insert else container.find(t)
        if cid is None:
            raise TargetError(f"target term not in basis: {t}")
        vec[cid] = vec.get(cid, Fraction(0)) + c
    return {k: v for k, v in vec.items() if v}


def target_vector_m(container):
    return target_vector(container, reference_target_m())


def target_vector_f(container, flow_sign=1, restrict=False):
    """F-case target; with restrict=True, terms outside the basis are dropped."""
    terms, _ = derived_target_terms("F", flow_sign)
    if restrict:
        terms = [(c, t) for c, t in terms if container.find(t) is not None]
    return target_vector(container, terms)


@dataclass
class CancellationReport:
    case: str
    n_max: int
    rows: int
    cols: int
    nnz: int
    rank: int
    solved: bool
    verified: bool
    nonzero_multipliers: int
    integers_only: bool
    target_nonzeros: int
    target_dropped: int = 0
    strategy: str = ""
    generate_seconds: float = 0.0
    solve_seconds: float = 0.0
    system_sha256: str = ""
    solution_sha256: str = ""
    certificate: dict = None
    stats: dict = field(default_factory=dict)

    def to_json(self, timing=True):
        d = asdict(self)
        if not timing:
            d.pop("generate_seconds")
            d.pop("solve_seconds")
        return json.dumps(d, indent=1, sort_keys=True)

    def to_text(self, timing=True):
        lines = [
            f"case            {self.case} (start terms with #I <= {self.n_max})",
            f"matrix          {self.rows} x {self.cols}, {self.nnz} nonzeros",
            f"rank            {self.rank}",
            f"target          {self.target_nonzeros} nonzero rows"
            + (f" ({self.target_dropped} target terms outside basis)" if self.target_dropped else ""),
            f"solved          {self.solved}",
            f"verified        {self.verified}",
            f"multipliers     {self.nonzero_multipliers} nonzero, integers only: {self.integers_only}",
            f"strategy        {self.strategy}",
        ]
        if timing:
            lines.append(f"time            generate {self.generate_seconds:.1f}s, "
                         f"solve {self.solve_seconds:.1f}s")
        if self.certificate:
            lines.append(f"certificate     {self.certificate}")
        return "\n".join(lines) + "\n"


def solution_text(x):
    return "".join(f"{c} {v.numerator}/{v.denominator}\n" for c, v in sorted(x.items()))


def read_solution(text, ncols=None):
    """Parse a solution file.

    Two layouts are accepted: ``col value`` lines with 0-based columns, or one
    value per line giving the full vector in column order.
    """
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    x = {}
    if rows and all(len(r) == 2 for r in rows):
        for c, v in rows:
            x[int(c)] = Fraction(v)
    elif all(len(r) == 1 for r in rows):
        if ncols is not None and len(rows) != ncols:
            raise ValueError(f"solution has {len(rows)} values for {ncols} columns")
        x = {i: Fraction(r[0]) for i, r in enumerate(rows)}
    else:
        raise ValueError("unrecognized solution layout")
    return {c: v for c, v in x.items() if v}


# 1-based positions and values of the reference m-case solution
REFERENCE_M_CHECKS = {"x3": (3, Fraction(-1824)), "x54": (54, Fraction(-12))}
REFERENCE_M_NONZEROS = 62


def cross_validate(system_path, solution_path):
    """Verify a reference system/solution pair without the eliminator.

    Returns a dict with the exact verification result and the positional
    statistics of the solution (meaningful for the m-case files).
    """
    with open(system_path) as f:
        case, A, b = read_system(f.read())
    with open(solution_path) as f:
        x = read_solution(f.read(), A.ncols)
    out = {
        "case": case, "rows": A.nrows, "cols": A.ncols, "nnz": A.nnz(),
        "verified": verify(A, x, b),
        "nonzeros": len(x),
        "integers_only": all(v.denominator == 1 for v in x.values()),
    }
    for name, (pos, want) in REFERENCE_M_CHECKS.items():
        got = x.get(pos - 1, Fraction(0))
        out[name] = str(got)
        out[name + "_ok"] = got == want
    out["nonzeros_ok"] = len(x) == REFERENCE_M_NONZEROS
    return out


def build_system(case="m", n_max=4, flow_sign=1, target="reference"):
    """Generate identities and assemble the system with its target."""
    t0 = time.perf_counter()
    identities, container, stats = generate_all(case, n_max)
    dropped = 0
    if case == "m" and target == "reference":
        tvec = target_vector_m(container)
    else:
        terms, _ = derived_target_terms(case, flow_sign)
        kept = [(c, t) for c, t in terms if container.find(t) is not None]
        dropped = len(terms) - len(kept)
        if dropped and n_max >= 4:
            raise TargetError(f"{dropped} target terms are not basis terms")
        tvec = target_vector(container, kept)
    system = assemble(identities, container, tvec, case)
    return system, container, stats, dropped, time.perf_counter() - t0


def verify_cancellation(case="m", n_max=4, strategy=None, flow_sign=1, target="reference", cap=10**7):
    """Generate, assemble, solve and exactly verify; returns (report, system, solution)."""
    system, container, stats, dropped, gen_s = build_system(case, n_max, flow_sign, target)
    A = system.matrix
    rep = solve(A, system.rhs, strategy, cap)
    x = rep.solution or {}
    ok = rep.feasible and verify(A, x, system.rhs)
    report = CancellationReport(
        case=case, n_max=n_max, rows=A.nrows, cols=A.ncols, nnz=A.nnz(), rank=rep.rank,
        solved=rep.feasible, verified=ok, nonzero_multipliers=len(x),
        integers_only=all(v.denominator == 1 for v in x.values()),
        target_nonzeros=len(system.rhs), target_dropped=dropped, strategy=rep.strategy,
        generate_seconds=gen_s, solve_seconds=rep.seconds,
        system_sha256=hashlib.sha256(system_text(system).encode()).hexdigest(),
        solution_sha256=hashlib.sha256(solution_text(x).encode()).hexdigest() if ok else "",
        certificate=rep.certificate, stats=dict(stats))
    if not rep.feasible:
        report.certificate = dict(rep.certificate or {})
        report.certificate["augmented_rank"] = augmented_rank(A, system.rhs)
    return report, system, x
