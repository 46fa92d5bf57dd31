"""Differentiation rules, cumulant expansion and leading/non-leading tags.

All derivatives are taken with respect to a symmetric entry h_ab (or w_ab)
where a and b are distinct summation indices; the a = b contribution is
carried by an explicit delta_ab prefactor as in the differentiation rules.
"""

import enum
from collections import Counter

from .coeff import CoeffPoly
from .terms import Term, make_factor


class DiffMode(enum.Enum):
    FULL_H = "full_h"
    GAUSS_W = "gauss_w"
    LEADING = "leading"
    D_OP = "d_op"


class ClassificationError(RuntimeError):
    pass


ONE = CoeffPoly.const(1)
S = CoeffPoly.monomial(s=1)
S2 = CoeffPoly.monomial(s=2)
R = CoeffPoly.monomial(u="1/2")


def kappa(k):
    """Normalized cumulant symbol; kappa_1 = 0 and kappa_2 = 1."""
    if k == 1:
        return CoeffPoly()
    if k == 2:
        return ONE
    return CoeffPoly.monomial(**{f"k{k}": 1})


def fresh_index(used):
    i = 0
    while i in used:
        i += 1
    return i


def _entry_rules(mode, x, y, a, b, u):
    """(coeff, replacement entries, new h pairs, new delta pairs) for d G_xy."""
    e1 = ((x, a), (b, y))
    e2 = ((x, b), (a, y))
    loop = ((x, u), (u, y))
    ab = ((a, b),)
    if mode is DiffMode.LEADING:
        return [(-ONE, e1, (), ()), (-ONE, e2, (), ())]
    if mode is DiffMode.D_OP:
        return [(-ONE, e1, (), ()), (-ONE, e2, (), ()), (ONE, e1, (), ab)]
    if mode is DiffMode.GAUSS_W:
        return [(-R, e1, (), ()), (-R, e2, (), ()), (R, e1, (), ab)]
    if mode is DiffMode.FULL_H:
        return [(-S, e1, (), ()), (-S, e2, (), ()), (S, e1, (), ab),
                (S2 * 4, loop, ab, ()), (S2 * -2, loop, ab, ab)]
    raise ValueError(mode)


def _x_rules(mode, a, b, v):
    """(coeff, new Dim-factor entries, new h pairs, new delta pairs) for dX."""
    ab = ((a, b),)
    new = ((a, b),)
    loop = ((v, v),)
    if mode is DiffMode.LEADING:
        return [(ONE * -2, new, (), ())]
    if mode is DiffMode.D_OP:
        return [(ONE * -2, new, (), ()), (ONE, new, (), ab)]
    if mode is DiffMode.GAUSS_W:
        return [(R * -2, new, (), ()), (R, new, (), ab)]
    if mode is DiffMode.FULL_H:
        return [(S * -2, new, (), ()), (S, new, (), ab),
                (S2 * 4, loop, ab, ()), (S2 * -2, loop, ab, ab)]
    raise ValueError(mode)


def _remove_one(factor, x, y):
    out = []
    for ex, ey, p in factor:
        if (ex, ey) == (x, y):
            if p > 1:
                out.append((ex, ey, p - 1))
        else:
            out.append((ex, ey, p))
    return out


def _sorted_pairs(pairs):
    return tuple(sorted((min(x, y), max(x, y)) for x, y in pairs))


def _with_added(term, coeff, factors, h_add, d_add, h_remove=None):
    h = list(term.h)
    if h_remove is not None:
        h.remove(h_remove)
    return Term(term.coeff * coeff, tuple(factors), term.dN, term.dQ,
                _sorted_pairs(h + list(h_add)), _sorted_pairs(list(term.deltas) + list(d_add)),
                term.dim, term.chi)


def diff_entries(term, a, b, mode):
    """Product rule over all Green function entries (inside every Dim-factor)."""
    if a == b:
        raise ValueError("derivative pair must consist of two distinct indices")
    u = fresh_index(term.index_set() | {a, b})
    out = []
    for fi, f in enumerate(term.factors):
        for x, y, p in f:
            rest = _remove_one(f, x, y)
            for c, repl, h_add, d_add in _entry_rules(mode, x, y, a, b, u):
                nf = list(term.factors)
                nf[fi] = make_factor(rest + list(repl))
                out.append(_with_added(term, c * p, nf, h_add, d_add))
    return out


def diff_x(term, a, b, mode):
    """Chain-rule contribution F^(i0)(X) -> F^(i0+1)(X) dX/dh_ab."""
    if not term.dim:
        return []
    v = fresh_index(term.index_set() | {a, b})
    out = []
    for c, new, h_add, d_add in _x_rules(mode, a, b, v):
        nf = list(term.factors) + [make_factor(new)]
        out.append(_with_added(term, c, nf, h_add, d_add))
    return out


def diff_h_prefactor(term, a, b):
    """d/dh_ab of the explicit h prefactors (only for derivatives in h)."""
    key = (min(a, b), max(a, b))
    m = term.h.count(key)
    if not m:
        return []
    return [_with_added(term, ONE * m, term.factors, (), (), h_remove=key)]


def derivative(term, a, b, mode):
    """All terms of d(term)/dh_ab (or d/dw_ab for GAUSS_W)."""
    out = diff_x(term, a, b, mode) + diff_entries(term, a, b, mode)
    if mode is DiffMode.FULL_H:
        out += diff_h_prefactor(term, a, b)
    return out


def collect(terms):
    """Merge terms with identical structure (no relabeling), drop zeros."""
    acc = {}
    order = []
    for t in terms:
        k = t.shape
        if k in acc:
            acc[k] = acc[k].with_coeff(acc[k].coeff + t.coeff)
        else:
            acc[k] = t
            order.append(k)
    return [acc[k] for k in order if not acc[k].coeff.is_zero()]


def nth_derivative(term, a, b, k, mode=DiffMode.FULL_H):
    terms = [term]
    for _ in range(k):
        nxt = []
        for t in terms:
            nxt.extend(derivative(t, a, b, mode))
        terms = collect(nxt)
    return terms


def cumulant_expand(term, order=8, pair=None):
    """Expand E[h_ab f] for one h prefactor of ``term``.

    Returns (terms, remainder) where terms are the k = 1 .. order-1
    contributions kappa_{k+1} / (N q^{k-1}) E[d^k f / dh_ab^k] and
    remainder describes the truncated tail.
    """
    if not term.h:
        raise ValueError("cumulant expansion needs an h prefactor")
    if order < 1:
        raise ValueError("order must be >= 1")
    pair = pair or term.h[0]
    a, b = pair
    h = list(term.h)
    h.remove((min(a, b), max(a, b)))
    f = Term(term.coeff, term.factors, term.dN - 1, term.dQ, tuple(h), term.deltas,
             term.dim, term.chi)
    out = []
    derivs = [f]
    for k in range(1, order):
        nxt = []
        for t in derivs:
            nxt.extend(derivative(t, a, b, DiffMode.FULL_H))
        derivs = collect(nxt)
        kap = kappa(k + 1)
        if kap.is_zero():
            continue
        for t in derivs:
            out.append(Term(t.coeff * kap, t.factors, t.dN, t.dQ + k - 1, t.h, t.deltas,
                            t.dim, t.chi))
    remainder = {"order": order, "dQ_min": term.dQ + order - 1, "tag": "Negligible"}
    return out, remainder


def gaussian_expand(term, a, b):
    """E[w_ab f] = (1/N) E[df/dw_ab]; ``term`` is f without the w prefactor."""
    f = Term(term.coeff, term.factors, term.dN - 1, term.dQ, term.h, term.deltas,
             term.dim, term.chi)
    return collect(derivative(f, a, b, DiffMode.GAUSS_W))


# ---------------------------------------------------------------- classification

LEADING = "Leading"
NEGLIGIBLE = "Negligible"


def _offdiag_occurrences(term):
    occ = Counter()
    for f in term.factors:
        for x, y, p in f:
            if x != y:
                occ[x] += p
                occ[y] += p
    return occ


def classify(term, case="m", truncation=8):
    """Tag a term as Leading or with its non-leading class.

    Lowest case number wins when several apply.
    """
    if term.dQ >= 2 * truncation - 2:
        return NEGLIGIBLE
    if case == "m":
        if term.chi:
            if term.dN <= 1 and term.dQ >= 2:
                return "TauG2"
            raise ClassificationError(f"unclassifiable term {term}")
        if term.dN <= 1:
            if term.dQ >= 4 and term.degree() >= 2:
                return "TauG1-case1"
            if term.h:
                special = {v for pr in term.h for v in pr}
                occ = _offdiag_occurrences(term)
                if any(c >= 2 for v, c in occ.items() if v not in special):
                    return "TauG1-case2"
                if term.dQ >= 1:
                    return "TauG1-case3"
            if term.deltas and term.dQ >= 1:
                return "TauG1-case4"
            if not term.h and not term.deltas and term.dQ >= 1 and term.is_unmatched():
                return "TauG1-case5"
        if (term.dQ == 2 and term.dN == 1 and not term.h and not term.deltas
                and not term.is_unmatched() and term.degree() >= 2):
            return LEADING
        raise ClassificationError(f"unclassifiable term {term}")
    if case == "F":
        if term.chi:
            if term.dN <= 1 and term.dQ >= 2:
                return "TauF2"
            raise ClassificationError(f"unclassifiable term {term}")
        if term.dN <= 1:
            if term.h:
                return "TauF1-case1"
            if term.deltas:
                return "TauF1-case2"
            if term.dQ >= 4:
                return "TauF1-case3"
            if term.is_unmatched():
                return "TauF1-case4"
        if term.dQ == 2 and term.dN == 1 and not term.h and not term.deltas and not term.is_unmatched():
            return LEADING
        raise ClassificationError(f"unclassifiable term {term}")
    raise ValueError(case)
