"""Worked identities used as golden checks of the rule implementations.

Indices a, b, c, d, e are written 0..4.  Each entry lists the start term,
the rule application and the expected leading identity.
"""

import time
from collections import Counter
from fractions import Fraction

from .identities import ALPHA, register, rule1, rule2, rule3
from .terms import Term, TermContainer, make_factor

F = Fraction

WORKED = [
    {
        "name": "rule1-offdiagonal",
        "case": "m",
        "start": [[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)]],
        "rule": ("R1", (0, 0, 2)),
        "expected": [
            (F(-1), [[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)]]),
            (F(-5, 2), [[(0, 0), (0, 1), (0, 2), (1, 1), (1, 3), (2, 3)]]),
            (F(-1), [[(0, 1), (0, 1), (0, 2), (0, 3), (1, 1), (2, 3)]]),
            (F(-1, 2), [[(0, 0), (0, 1), (0, 1), (1, 1), (2, 3), (2, 3)]]),
            (F(-1, 2), [[(0, 0), (0, 1), (0, 3), (1, 1), (1, 3), (2, 2)]]),
            (F(-1, 2), [[(0, 0), (0, 0), (1, 1), (1, 2), (1, 3), (2, 3)]]),
        ],
    },
    {
        "name": "rule3-existing-index",
        "case": "m",
        "start": [[(0, 1), (0, 1)]],
        "rule": ("R3", (0, 0)),
        "expected": [
            (F(-2), [[(0, 0), (0, 1), (0, 2), (1, 2)]]),
            (F(-1), [[(0, 0), (0, 1), (0, 1), (2, 2)]]),
            (F(-2), [[(0, 0), (0, 1), (0, 1)]]),
            (F(-3), [[(0, 1), (0, 1), (0, 2), (0, 2)]]),
            (F(-1), [[(0, 1), (0, 1)]]),
        ],
    },
    {
        "name": "F-rule1-offdiagonal",
        "case": "F",
        "start": [[(0, 0), (0, 0), (1, 1), (1, 1), (2, 3)], [(2, 3)]],
        "rule": ("R1", (0, 2, 3)),
        "expected": [
            (F(-1, 2), [[(0, 0), (0, 0), (1, 1), (1, 1), (2, 3), (4, 4)], [(2, 3)]]),
            (F(-1, 2), [[(0, 0), (0, 0), (1, 1), (1, 1), (3, 4)], [(2, 2), (3, 4)]]),
            (F(-1), [[(0, 0), (0, 0), (1, 1), (1, 1), (2, 3)], [(2, 3)]]),
            (F(-1), [[(0, 0), (0, 0), (1, 1), (1, 1), (3, 4)], [(2, 3)], [(2, 4)]]),
            (F(-1, 2), [[(0, 0), (0, 0), (1, 1), (1, 1), (2, 4), (3, 4)], [(2, 3)]]),
            (F(-1, 2), [[(0, 0), (0, 0), (1, 1), (1, 1), (3, 4)], [(2, 3), (2, 4)]]),
            (F(-4), [[(0, 0), (0, 2), (0, 4), (1, 1), (1, 1), (3, 4)], [(2, 3)]]),
        ],
    },
    {
        "name": "F-rule2-insert",
        "case": "F",
        "start": [[(0, 0)], [(0, 0)]],
        "rule": ("R2", (0,)),
        "expected": [
            (F(-2), [[(0, 0)], [(0, 0), (1, 1)]]),
            (F(-1), [[(0, 0)], [(0, 0), (1, 1), (2, 2)]]),
            (F(-1), [[(0, 0)], [(0, 0)]]),
            (F(-2), [[(0, 0)], [(0, 0), (1, 2)], [(1, 2)]]),
            (F(-1), [[(0, 0)], [(0, 0), (1, 2), (1, 2)]]),
            (F(-2), [[(0, 0)], [(0, 1), (0, 2), (1, 2)]]),
            (F(-2), [[(0, 0), (1, 2)], [(0, 1), (0, 2)]]),
        ],
    },
    {
        "name": "F-rule3-empty-factor",
        "case": "F",
        "start": [[], [(0, 0), (0, 0), (1, 1)]],
        "rule": ("R3", (0, 1)),
        "expected": [
            (F(-2), [[(0, 0), (0, 0), (1, 1)], [(1, 1)]]),
            (F(-1), [[(0, 0), (0, 0), (1, 1)], [(1, 1), (2, 2)]]),
            (F(-2), [[(0, 0), (0, 0), (1, 1)], [(1, 2)], [(1, 2)]]),
            (F(-2), [[(0, 0), (0, 0), (1, 1), (1, 2)], [(1, 2)]]),
            (F(-1), [[(0, 0), (0, 0), (1, 1)], [(1, 2), (1, 2)]]),
            (F(-4), [[(0, 0), (0, 1), (0, 2), (1, 1)], [(1, 2)]]),
        ],
    },
]

# leading basis terms listed first for the plain system, in that order
FIRST_BASIS = [
    [(0, 0), (0, 2), (0, 4), (1, 1), (1, 1), (2, 3), (3, 4)],
    [(0, 0), (0, 0), (1, 1), (1, 1), (2, 2), (3, 4), (3, 4)],
    [(0, 0), (0, 0), (1, 1), (1, 1), (2, 3), (2, 4), (3, 4)],
    [(0, 0), (0, 0), (1, 1), (1, 1), (2, 3), (2, 3)],
    [(0, 0), (0, 0), (1, 1), (1, 2), (1, 2)],
    [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)],
]


def build_term(factors, case):
    fs = tuple(make_factor(f) for f in factors)
    return Term(ALPHA, fs, dim=(case == "F"))


def derive(example, full=False):
    """Run the rule of one worked example; returns (container, identity)."""
    case = example["case"]
    start = build_term(example["start"], case)
    kind, args = example["rule"]
    if kind == "R1":
        out = rule1(start, args, False, full=full)
    elif kind == "R2":
        out = rule2(start, args[0], full=full)
    else:
        out = rule3(start, args[1], args[0], full=full)
    container = TermContainer()
    ident = register(container, start, out, case, full=full)
    return container, ident


def compare(example, full=False):
    """Match derived and expected identities class by class.

    Returns a dict with the derived and expected coefficient multisets and
    whether every expected term is matched with its coefficient.
    """
    container, ident = derive(example, full)
    expected = {}
    for c, fs in example["expected"]:
        t = build_term(fs, example["case"])
        cid = container.find(t)
        key = cid if cid is not None else ("missing", len(expected))
        expected[key] = expected.get(key, 0) + c
    ok = expected == ident.entries
    return {
        "name": example["name"],
        "match": ok,
        "derived": sorted(ident.entries.values()),
        "expected": sorted(c for c, _ in example["expected"]),
        "multiset_match": Counter(ident.entries.values()) == Counter(c for c, _ in example["expected"]),
    }


def run_all(full=False):
    t0 = time.perf_counter()
    results = [compare(ex, full) for ex in WORKED]
    return results, time.perf_counter() - t0


def first_basis_distinct():
    c = TermContainer()
    ids = [c.insert(build_term([f], "m")) for f in FIRST_BASIS]
    return len(set(ids)) == len(ids)
