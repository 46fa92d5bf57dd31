"""Averaged products of Green function entries.

A term stands for

    coeff * N^dN / (q^dQ N^#I) * sum_I  delta^deltas  E[ h^h  G-part ]

where the G-part is either a single product of entries (plain term) or
F^(i0)(X) times i0 Dim-factors (F-term).  Indices are small nonnegative
integers, every index is summed, and the N^#I normalization is implied.

A factor (GreenProduct) is a sorted tuple of (x, y, power) with x <= y.
"""

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache

from .coeff import CoeffPoly


class TermError(ValueError):
    pass


def make_factor(entries):
    """Normalize an iterable of pairs (x, y) or triples (x, y, power)."""
    acc = Counter()
    for e in entries:
        if len(e) == 2:
            x, y = e
            p = 1
        else:
            x, y, p = e
        if p < 0:
            raise TermError(f"negative power {p}")
        if p == 0:
            continue
        if x > y:
            x, y = y, x
        acc[(x, y)] += p
    return tuple(sorted((x, y, p) for (x, y), p in acc.items()))


def factor_size(f):
    return sum(p for _, _, p in f)


def factor_degree(f):
    return sum(p for x, y, p in f if x != y)


def _pairs(seq):
    return tuple(sorted((min(x, y), max(x, y)) for x, y in seq))


@dataclass(frozen=True)
class Term:
    coeff: CoeffPoly
    factors: tuple
    dN: int = 1
    dQ: int = 2
    h: tuple = ()
    deltas: tuple = ()
    dim: bool = False
    chi: int = 0
    _shape: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.dQ < 0 or self.chi < 0:
            raise TermError("negative exponent")
        if not self.factors:
            raise TermError("a term needs at least one factor")
        if not self.dim and len(self.factors) != 1:
            raise TermError("plain terms carry exactly one product")
        for f in self.factors:
            for x, y, p in f:
                if p < 1 or x > y:
                    raise TermError(f"malformed entry {(x, y, p)}")
        object.__setattr__(self, "_shape", (
            self.dim, self.chi, self.dN, self.dQ,
            tuple(sorted(self.factors)), self.h, self.deltas))

    @property
    def shape(self):
        """Everything except the coefficient, with factors in sorted order."""
        return self._shape

    @property
    def f_order(self):
        return len(self.factors) if self.dim else 1

    @property
    def p_h(self):
        return len(self.h)

    @property
    def d_delta(self):
        return len(self.deltas)

    def index_set(self):
        s = set()
        for f in self.factors:
            for x, y, _ in f:
                s.add(x)
                s.add(y)
        for x, y in self.h + self.deltas:
            s.add(x)
            s.add(y)
        return s

    def n_indices(self):
        return len(self.index_set())

    def degree(self):
        return sum(factor_degree(f) for f in self.factors)

    def occurrences(self):
        """Occurrence count of each index among the Green function entries."""
        occ = Counter()
        for f in self.factors:
            for x, y, p in f:
                occ[x] += p
                occ[y] += p
        for v in self.index_set():
            occ.setdefault(v, 0)
        return occ

    def is_unmatched(self):
        return any(c % 2 for c in self.occurrences().values())

    def type_signature(self):
        """Sorted occurrence counts, e.g. (4, 2, 2) for a type-A term."""
        return tuple(sorted(self.occurrences().values(), reverse=True))

    def term_type(self):
        """'0', 'A', 'AB' or None."""
        occ = list(self.occurrences().values())
        if any(c not in (2, 4) for c in occ):
            return None
        fours = sum(1 for c in occ if c == 4)
        return {0: "0", 1: "A", 2: "AB"}.get(fours)

    def with_coeff(self, coeff):
        return replace(self, coeff=coeff)

    def relabel(self, mapping):
        def rf(f):
            return make_factor((mapping[x], mapping[y], p) for x, y, p in f)
        return Term(self.coeff, tuple(rf(f) for f in self.factors), self.dN, self.dQ,
                    _pairs((mapping[x], mapping[y]) for x, y in self.h),
                    _pairs((mapping[x], mapping[y]) for x, y in self.deltas),
                    self.dim, self.chi)

    def __str__(self):
        return to_text(self)


def plain(coeff, entries, dN=1, dQ=2, **kw):
    return Term(coeff, (make_factor(entries),), dN, dQ, **kw)


def fterm(coeff, factors, dN=1, dQ=2, **kw):
    return Term(coeff, tuple(make_factor(f) for f in factors), dN, dQ, dim=True, **kw)


# ---------------------------------------------------------------- canonical form

def _relabeled_shape(shape, mapping):
    dim, chi, dN, dQ, factors, h, deltas = shape
    fs = tuple(sorted(
        tuple(sorted((min(mapping[x], mapping[y]), max(mapping[x], mapping[y]), p)
                     for x, y, p in f))
        for f in factors))
    return (dim, chi, dN, dQ, fs,
            _pairs((mapping[x], mapping[y]) for x, y in h),
            _pairs((mapping[x], mapping[y]) for x, y in deltas))


def _cells(shape):
    """Group indices by occurrence data; cells are ordered, labels follow."""
    _, _, _, _, factors, h, deltas = shape
    occ = Counter()
    inh = Counter()
    ind = Counter()
    for f in factors:
        for x, y, p in f:
            occ[x] += p
            occ[y] += p
    for x, y in h:
        inh[x] += 1
        inh[y] += 1
        occ.setdefault(x, 0)
        occ.setdefault(y, 0)
    for x, y in deltas:
        ind[x] += 1
        ind[y] += 1
        occ.setdefault(x, 0)
        occ.setdefault(y, 0)
    groups = {}
    for v in occ:
        groups.setdefault((-occ[v], inh[v], ind[v]), []).append(v)
    return [sorted(groups[k]) for k in sorted(groups)]


@lru_cache(maxsize=1 << 18)
def _canonical_shape(shape):
    cells = _cells(shape)
    best = None
    best_map = None
    for perms in itertools.product(*(itertools.permutations(c) for c in cells)):
        mapping = {}
        nxt = 0
        for perm in perms:
            for v in perm:
                mapping[v] = nxt
                nxt += 1
        cand = _relabeled_shape(shape, mapping)
        if best is None or cand < best:
            best = cand
            best_map = mapping
    if best is None:
        return shape, {}
    return best, best_map


def canonical_mapping(term):
    return dict(_canonical_shape(term.shape)[1])


def canonicalize(term):
    """Unique representative of the equivalence class of ``term``.

    Indices with more occurrences get smaller labels (so the distinguished
    indices of type-A/AB terms are 0 and 1); ties are broken by taking the
    lexicographically smallest relabeled structure.
    """
    shape, _ = _canonical_shape(term.shape)
    dim, chi, dN, dQ, factors, h, deltas = shape
    return Term(term.coeff, factors, dN, dQ, h, deltas, dim, chi)


def canonical_key(term):
    """Hashable class key: canonical structure plus coefficient."""
    return (_canonical_shape(term.shape)[0], term.coeff)


# ---------------------------------------------------------------- auid and equivalence

def auid(term):
    """Permutation-invariant co-occurrence key."""
    if term.h or term.deltas:
        raise TermError("auid is defined only for terms without h or delta prefactors")
    idx = sorted(term.index_set())
    counts = []
    sizes = []
    for f in term.factors:
        c = Counter()
        for x, y, p in f:
            c[(x, y)] += p
        counts.append(c)
        sizes.append(factor_size(f))
    outer = []
    for v2 in idx:
        mid = []
        for v in idx:
            key = (min(v, v2), max(v, v2))
            mid.append(tuple(sorted((c[key], n) for c, n in zip(counts, sizes))))
        outer.append(tuple(sorted(mid)))
    return tuple(sorted(outer))


def _profile(term):
    """Per-index data preserved by any structure-preserving bijection."""
    prof = {v: [] for v in term.index_set()}
    for i, f in enumerate(term.factors):
        n = factor_size(f)
        local = Counter()
        diag = Counter()
        for x, y, p in f:
            local[x] += p
            local[y] += p
            if x == y:
                diag[x] += p
        for v in local:
            prof[v].append((local[v], diag[v], n))
    hc = Counter(v for pr in term.h for v in pr)
    dc = Counter(v for pr in term.deltas for v in pr)
    return {v: (tuple(sorted(p)), hc[v], dc[v]) for v, p in prof.items()}


def _pair_table(term):
    """(v, w) -> sorted tuple over factors of (multiplicity of {v, w}, n_i)."""
    table = {}
    sizes = [factor_size(f) for f in term.factors]
    for i, f in enumerate(term.factors):
        for x, y, p in f:
            table.setdefault((x, y), [0] * len(term.factors))[i] += p
    return {k: tuple(sorted(zip(v, sizes))) for k, v in table.items()}


def _same_header(t1, t2):
    return (t1.dim == t2.dim and t1.chi == t2.chi and t1.dN == t2.dN and t1.dQ == t2.dQ
            and len(t1.factors) == len(t2.factors) and len(t1.h) == len(t2.h)
            and len(t1.deltas) == len(t2.deltas) and t1.coeff == t2.coeff)


def find_bijection(t1, t2):
    """Index bijection mapping t1 onto t2, or None (pruned backtracking)."""
    if not _same_header(t1, t2):
        return None
    p1, p2 = _profile(t1), _profile(t2)
    if sorted(p1.values()) != sorted(p2.values()):
        return None
    tab1, tab2 = _pair_table(t1), _pair_table(t2)
    hc1, hc2 = Counter(t1.h), Counter(t2.h)
    dc1, dc2 = Counter(t1.deltas), Counter(t2.deltas)
    # most constrained first: rare profiles, then many neighbours
    freq = Counter(p1.values())
    order = sorted(p1, key=lambda v: (freq[p1[v]], -sum(1 for k in tab1 if v in k), v))
    cands = {v: [w for w in p2 if p2[w] == p1[v]] for v in order}
    target = t2.shape[4]
    mapping = {}
    used = set()

    def pair_ok(v, w):
        a, b = mapping[v], mapping[w]
        k1 = (min(v, w), max(v, w))
        k2 = (min(a, b), max(a, b))
        return (tab1.get(k1) == tab2.get(k2) and hc1[k1] == hc2[k2] and dc1[k1] == dc2[k2])

    def rec(i):
        if i == len(order):
            return _relabeled_shape(t1.shape, mapping)[4] == target
        v = order[i]
        for w in cands[v]:
            if w in used:
                continue
            mapping[v] = w
            used.add(w)
            if all(pair_ok(v, u) for u in order[:i + 1]):
                if rec(i + 1):
                    return True
            used.discard(w)
            del mapping[v]
        return False

    return dict(mapping) if rec(0) else None


def equivalent(t1, t2):
    if not t1.h and not t1.deltas and not t2.h and not t2.deltas:
        if not _same_header(t1, t2) or auid(t1) != auid(t2):
            return False
    return find_bijection(t1, t2) is not None


class TermContainer:
    """Hash table of equivalence classes keyed by auid.

    Exact representations seen before are cached, so repeated inserts of
    the same raw term skip the bijection search.
    """

    def __init__(self):
        self.terms = []
        self._buckets = {}
        self._exact = {}

    def __len__(self):
        return len(self.terms)

    def _key(self, t):
        return (t.dim, t.chi, t.dN, t.dQ, len(t.factors), t.coeff, auid(t))

    def find(self, t):
        cid = self._exact.get((t.shape, t.coeff))
        if cid is not None:
            return cid
        for cid in self._buckets.get(self._key(t), ()):
            if find_bijection(t, self.terms[cid]) is not None:
                self._exact[(t.shape, t.coeff)] = cid
                return cid
        return None

    def insert(self, t):
        cid = self.find(t)
        if cid is not None:
            return cid
        rep = canonicalize(t)
        cid = len(self.terms)
        self.terms.append(rep)
        self._buckets.setdefault(self._key(rep), []).append(cid)
        self._exact[(t.shape, t.coeff)] = cid
        self._exact[(rep.shape, rep.coeff)] = cid
        return cid

    def __getitem__(self, cid):
        return self.terms[cid]


# ---------------------------------------------------------------- serialization

def _fmt_pairs(pairs):
    return "[" + ", ".join(f"{x}-{y}" for x, y in pairs) + "]"


def _parse_pairs(text):
    text = text.strip()[1:-1].strip()
    if not text:
        return ()
    out = []
    for tok in text.split(","):
        x, y = tok.strip().split("-")
        out.append((int(x), int(y)))
    return _pairs(out)


def to_text(t):
    head = f"F^({len(t.factors)})" if t.dim else "G"
    fs = " ".join("{" + ", ".join(f"{x}-{y}^{p}" for x, y, p in f) + "}" for f in t.factors)
    parts = [str(t.coeff), str(t.dN), str(t.dQ), _fmt_pairs(t.h), head, fs]
    if t.deltas:
        parts.append("delta " + _fmt_pairs(t.deltas))
    if t.chi:
        parts.append(f"chi {t.chi}")
    return " | ".join(parts)


def from_text(line):
    parts = [p.strip() for p in line.split(" | ")]
    coeff = CoeffPoly.parse(parts[0])
    dN, dQ = int(parts[1]), int(parts[2])
    h = _parse_pairs(parts[3])
    dim = parts[4].startswith("F")
    factors = []
    for chunk in parts[5].split("}"):
        chunk = chunk.strip()
        if not chunk:
            continue
        body = chunk.lstrip("{").strip()
        entries = []
        if body:
            for tok in body.split(","):
                pair, p = tok.strip().split("^")
                x, y = pair.split("-")
                entries.append((int(x), int(y), int(p)))
        factors.append(make_factor(entries))
    deltas = ()
    chi = 0
    for extra in parts[6:]:
        if extra.startswith("delta"):
            deltas = _parse_pairs(extra[len("delta"):])
        elif extra.startswith("chi"):
            chi = int(extra.split()[1])
    return Term(coeff, tuple(factors), dN, dQ, h, deltas, dim, chi)


def to_json(t):
    return {
        "F_derivative": len(t.factors) if t.dim else 0,
        "prod_dict": [{f"{x},{y}": p for x, y, p in f} for f in t.factors],
        "q_deg": t.dQ,
        "N_deg": t.dN,
        "coeff": t.coeff.to_json(),
        "h_list": [list(p) for p in t.h],
        "delta_list": [list(p) for p in t.deltas],
        "chi": t.chi,
    }


def from_json(d):
    if isinstance(d, str):
        d = json.loads(d)
    factors = []
    for f in d["prod_dict"]:
        factors.append(make_factor(tuple(map(int, k.split(","))) + (p,) for k, p in f.items()))
    return Term(CoeffPoly.from_json(d["coeff"]), tuple(factors), d["N_deg"], d["q_deg"],
                _pairs(map(tuple, d.get("h_list", []))), _pairs(map(tuple, d.get("delta_list", []))),
                d["F_derivative"] > 0, d.get("chi", 0))
