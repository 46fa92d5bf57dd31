"""Start terms, expansion rules and assembly of the identity systems.

Every identity is stored as a sparse rational vector over basis classes,
meaning 0 = sum_k c_k T_k up to non-leading terms, where the start term
enters with coefficient -1.  All basis terms share the prefactor
alpha = e^{-t}(1 - e^{-t}) with N^1 / q^2 normalization, so only the
rational multipliers are kept.
"""

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .calculus import (ClassificationError, DiffMode, LEADING, classify, collect, cumulant_expand,
                       derivative, fresh_index, gaussian_expand)
from .coeff import CoeffPoly
from .linalg import SparseMatrix
from .terms import Term, TermContainer, canonicalize, make_factor

ALPHA = CoeffPoly.alpha()
RULES = ("R1", "R1'", "R2", "R3-a", "R3-b")


@dataclass
class Identity:
    entries: dict
    start: object = None
    rule: str = ""
    site: tuple = ()

    def vector_key(self):
        return tuple(sorted(self.entries.items()))


@dataclass
class RuleOutput:
    """Raw rule result before basis registration."""
    terms: list
    rule: str
    site: tuple
    tags: Counter = field(default_factory=Counter)


# ---------------------------------------------------------------- start terms

def _occurrence_targets(n):
    base = [2] * n
    out = [("0", base)]
    if n >= 1:
        out.append(("A", [4] + base[1:]))
    if n >= 2:
        out.append(("AB", [4, 4] + base[2:]))
    return out


def entry_multisets(n):
    """All (type, entry multiset) over indices 0..n-1 with type-0/A/AB counts."""
    pairs = [(x, y) for x in range(n) for y in range(x, n)]
    out = []
    for typ, occ in _occurrence_targets(n):
        m = sum(occ) // 2
        for combo in itertools.combinations_with_replacement(pairs, m):
            c = [0] * n
            for x, y in combo:
                c[x] += 1
                c[y] += 1
            if c == occ:
                out.append((typ, combo))
    return out


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def enumerate_start_terms(n_max=4, case="m"):
    """Canonical type-0/A/AB start terms with #I <= n_max, up to equivalence."""
    seen = set()
    out = []
    lo = 1 if case == "m" else 0
    for n in range(lo, n_max + 1):
        batch = []
        for typ, combo in entry_multisets(n):
            if case == "m":
                t = canonicalize(Term(ALPHA, (make_factor(combo),)))
                if t.degree() < 2:
                    continue
                cands = [t]
            else:
                cands = []
                for part in _set_partitions(list(combo)):
                    blocks = [make_factor(b) for b in part]
                    for extra in ([], [()]):
                        fs = tuple(blocks + extra)
                        if not fs:
                            continue
                        cands.append(canonicalize(Term(ALPHA, fs, dim=True)))
            for t in cands:
                if t.shape not in seen:
                    seen.add(t.shape)
                    batch.append((("0", "A", "AB").index(typ), t.shape, t))
        batch.sort(key=lambda x: (x[0], x[1]))
        out.extend(t for _, _, t in batch)
    return out


# ---------------------------------------------------------------- rule helpers

def _replace_factor(term, fi, factor, coeff=None, dN=None, h=None, dQ=None, chi=None, deltas=None):
    fs = list(term.factors)
    fs[fi] = make_factor(factor)
    return Term(term.coeff if coeff is None else coeff, tuple(fs),
                term.dN if dN is None else dN, term.dQ if dQ is None else dQ,
                term.h if h is None else h, term.deltas if deltas is None else deltas,
                term.dim, term.chi if chi is None else chi)


def _without_entry(factor, x, y):
    out = []
    for ex, ey, p in factor:
        if (ex, ey) == (min(x, y), max(x, y)):
            if p > 1:
                out.append((ex, ey, p - 1))
        else:
            out.append((ex, ey, p))
    return out


def _zshift_terms(term, scale):
    """Terms from the (2 - z(t)) * scale prefactor: kappa_4 shift and chi marker."""
    k4 = Term(term.coeff * CoeffPoly.monomial(-6 * scale, k4=1, s=4), term.factors,
              term.dN, term.dQ + 2, term.h, term.deltas, term.dim, term.chi)
    chi = Term(term.coeff * (-scale), term.factors, term.dN, term.dQ, term.h, term.deltas,
               term.dim, term.chi + 1)
    return [k4, chi]


def _expand_h(tprime, a, j, full, order):
    """Expectation of h_aj(t) * tprime (tprime carries Sum_j without 1/N)."""
    if not full:
        return derivative(tprime, a, j, DiffMode.LEADING)
    lifted = Term(tprime.coeff, tprime.factors, tprime.dN + 1, tprime.dQ,
                  tprime.h, tprime.deltas, tprime.dim, tprime.chi)
    with_h = Term(lifted.coeff * CoeffPoly.monomial(s=1), lifted.factors, lifted.dN, lifted.dQ,
                  tuple(sorted(lifted.h + ((min(a, j), max(a, j)),))), lifted.deltas,
                  lifted.dim, lifted.chi)
    hpart, _ = cumulant_expand(with_h, order, pair=(min(a, j), max(a, j)))
    wpart = gaussian_expand(lifted.with_coeff(lifted.coeff * CoeffPoly.monomial(u="1/2")), a, j)
    return hpart + wpart


def rule1(term, site, reflected=False, full=False, order=4):
    """Expand one off-diagonal entry G_xy (site = (factor index, x, y))."""
    fi, x, y = site
    if x == y:
        raise ValueError("rule 1 needs an off-diagonal entry")
    if (min(x, y), max(x, y)) not in {(ex, ey) for ex, ey, _ in term.factors[fi]}:
        raise ValueError("entry not present")
    a, b = (y, x) if reflected else (x, y)
    j = fresh_index(term.index_set())
    rest = _without_entry(term.factors[fi], a, b)
    tprime = _replace_factor(term, fi, rest + [(j, b)], coeff=term.coeff * Fraction(1, 2))
    out = _expand_h(tprime, a, j, full, order)
    if full:
        d = _replace_factor(term, fi, rest, coeff=term.coeff * Fraction(-1, 2),
                            deltas=tuple(sorted(term.deltas + ((min(a, b), max(a, b)),))))
        out = out + [d] + _zshift_terms(term, Fraction(1, 2))
    return RuleOutput(out, "R1'" if reflected else "R1", (fi, x, y))


def rule2(term, fi=0, full=False, order=4):
    """Insert 1 = (1/N) Sum h_jk G_kj - (2/N) Sum G_jj + ... into factor fi."""
    used = term.index_set()
    j = fresh_index(used)
    k = fresh_index(used | {j})
    base = list(term.factors[fi])
    tprime = _replace_factor(term, fi, base + [(k, j)])
    out = _expand_h(tprime, j, k, full, order)
    diag = _replace_factor(term, fi, base + [(j, j)], coeff=term.coeff * -2)
    out = out + [diag]
    if full:
        ins = _replace_factor(term, fi, base + [(j, j)])
        out = out + _zshift_terms(ins, Fraction(1))
    return RuleOutput(out, "R2", (fi,))


def rule3(term, a, fi=0, full=False, order=4):
    """Insert 1 = Sum_j h_aj G_ja - 2 G_aa + ... into factor fi."""
    if a not in term.index_set():
        raise ValueError(f"index {a} not in term")
    j = fresh_index(term.index_set())
    base = list(term.factors[fi])
    tprime = _replace_factor(term, fi, base + [(a, j)])
    out = _expand_h(tprime, a, j, full, order)
    diag = _replace_factor(term, fi, base + [(a, a)], coeff=term.coeff * -2)
    out = out + [diag]
    if full:
        ins = _replace_factor(term, fi, base + [(a, a)])
        out = out + _zshift_terms(ins, Fraction(1))
    return RuleOutput(out, "R3", (fi, a))


# ---------------------------------------------------------------- registration

def _has_empty_factor(t):
    return t.dim and any(not f for f in t.factors)


def register(container, start, output, case, full=False, strict=True):
    """Map rule output to an Identity over classIds (leading part only)."""
    acc = {}
    tags = Counter()
    terms = [start.with_coeff(-start.coeff)] + list(output.terms)
    if full:
        terms = collect(terms)
    for t in terms:
        if _has_empty_factor(t):
            tags["zero"] += 1
            continue
        if full:
            try:
                tag = classify(t, case)
            except ClassificationError:
                if strict:
                    raise
                tag = "unclassified"
            tags[tag] += 1
            if tag != LEADING:
                continue
        base = Term(ALPHA, t.factors, t.dN, t.dQ, t.h, t.deltas, t.dim, t.chi)
        cid = container.insert(base)
        acc[cid] = acc.get(cid, CoeffPoly()) + t.coeff
    entries = {}
    alpha_red = ALPHA.reduced()
    for cid, c in acc.items():
        r = c.ratio_to(ALPHA)
        if r is None:
            r = c.reduced().ratio_to(alpha_red)
        if r is None:
            raise ClassificationError(f"non-scalar leading coefficient {c}")
        if r:
            entries[cid] = r
    start_id = None if _has_empty_factor(start) else container.find(
        Term(ALPHA, start.factors, start.dN, start.dQ, start.h, start.deltas, start.dim, start.chi))
    output.tags = tags
    return Identity(entries, start_id, output.rule, output.site)


def rule_outputs(term, case="m", full=False, order=4):
    """All rule applications prescribed for one start term, in rule order."""
    occ = term.occurrences()
    n = term.n_indices()
    out = []
    empty = [i for i, f in enumerate(term.factors) if not f] if case == "F" else []
    if not empty:
        sites1 = [(fi, x, y) for fi, f in enumerate(term.factors) for x, y, _ in f if x != y]
        for reflected in (False, True):
            out.extend(rule1(term, site, reflected, full, order) for site in sites1)
    sites = empty if empty else list(range(len(term.factors)))
    if n <= 3:
        for fi in sites:
            out.append(rule2(term, fi, full, order))
    limit = 4 if case == "m" else 3
    for label, v in (("R3-a", 0), ("R3-b", 1)):
        if v < n and occ[v] < limit:
            for fi in sites:
                r = rule3(term, v, fi, full, order)
                r.rule = label
                out.append(r)
    return out


def generate_all(case="m", n_max=4, full=False, order=4, starts=None):
    """Return (identities, container, stats) for the whole start set."""
    container = TermContainer()
    starts = enumerate_start_terms(n_max, case) if starts is None else starts
    for t in starts:
        if not _has_empty_factor(t):
            container.insert(Term(ALPHA, t.factors, t.dN, t.dQ, dim=t.dim))
    identities = []
    seen = set()
    stats = Counter(starts=len(starts))
    for t in starts:
        for ro in rule_outputs(t, case, full, order):
            ident = register(container, t, ro, case, full)
            stats.update({f"tag:{k}": v for k, v in ro.tags.items()})
            stats["raw"] += 1
            if not ident.entries:
                stats["trivial"] += 1
                continue
            key = ident.vector_key()
            if key in seen:
                stats["duplicate"] += 1
                continue
            seen.add(key)
            ident.start_term = t
            identities.append(ident)
    stats["identities"] = len(identities)
    stats["classes"] = len(container)
    return identities, container, stats


# ---------------------------------------------------------------- assembly

class AssemblyError(RuntimeError):
    pass


@dataclass
class AssembledSystem:
    case: str
    matrix: SparseMatrix
    rhs: dict
    row_class: list
    identities: list = None

    def class_row(self):
        return {c: r for r, c in enumerate(self.row_class)}


def assemble(identities, container, target, case="m"):
    """Matrix with one column per identity and one row per used basis class.

    ``target`` maps classId -> rational; every target class must be a row.
    """
    used = []
    seen = set()
    for ident in identities:
        for cid in sorted(ident.entries):
            if cid not in seen:
                seen.add(cid)
                used.append(cid)
    row_of = {c: r for r, c in enumerate(used)}
    missing = [c for c in target if c not in row_of]
    if missing:
        raise AssemblyError(f"target classes outside the identity basis: {missing}")
    cols = []
    for ident in identities:
        cols.append({row_of[c]: v for c, v in ident.entries.items()})
    mat = SparseMatrix.from_columns(len(used), cols)
    rhs = {row_of[c]: Fraction(v) for c, v in target.items() if v}
    return AssembledSystem(case, mat, rhs, used, identities)


# ---------------------------------------------------------------- system files

def system_text(system):
    """Text system file: header, column-major triplets, rhs lines."""
    m = system.matrix
    lines = [f"case {system.case}", f"rows {m.nrows}", f"cols {m.ncols}", f"nnz {m.nnz()}"]
    for c, col in enumerate(m.cols):
        for r in sorted(col):
            v = col[r]
            lines.append(f"{r} {c} {v.numerator}/{v.denominator}")
    for r in sorted(system.rhs):
        v = system.rhs[r]
        lines.append(f"rhs {r} {v.numerator}/{v.denominator}")
    return "\n".join(lines) + "\n"


def read_system(text):
    """Parse a system file; returns (case, SparseMatrix, rhs dict)."""
    case = None
    nrows = ncols = nnz = None
    cols = None
    rhs = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "case":
            case = parts[1]
        elif parts[0] == "rows":
            nrows = int(parts[1])
        elif parts[0] == "cols":
            ncols = int(parts[1])
            cols = [dict() for _ in range(ncols)]
        elif parts[0] == "nnz":
            nnz = int(parts[1])
        elif parts[0] == "rhs":
            rhs[int(parts[1])] = Fraction(parts[2])
        else:
            r, c, v = int(parts[0]), int(parts[1]), Fraction(parts[2])
            if v:
                cols[c][r] = v
    mat = SparseMatrix(nrows, ncols, cols)
    if nnz is not None and mat.nnz() != nnz:
        raise ValueError(f"nnz header {nnz} disagrees with {mat.nnz()} triplets")
    return case, mat, rhs


def provenance_json(system, container):
    """Sidecar with identity provenance and basis term texts."""
    from .terms import to_text
    return json.dumps({
        "case": system.case,
        "basis": [to_text(container[c]) for c in system.row_class],
        "identities": [
            {"rule": i.rule, "site": list(i.site),
             "start": to_text(i.start_term) if getattr(i, "start_term", None) else None}
            for i in system.identities or []
        ],
    }, indent=1, sort_keys=True)
