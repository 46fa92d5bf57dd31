"""Sparse exact Gaussian elimination over the rationals.

Matrices are stored column-major as a list of {row: value} dicts.  Values
are Fractions at the interface; elimination runs on gmpy2.mpq, which is
the same exact arithmetic with a faster backend.
"""

import heapq
import time
from dataclasses import dataclass, field
from fractions import Fraction

from gmpy2 import mpq

SMALLEST = "smallest"
FIRST = "first"
MARKOWITZ = "markowitz"
STRATEGIES = (SMALLEST, FIRST, MARKOWITZ)


class DimensionError(ValueError):
    pass


class FillInExceeded(RuntimeError):
    def __init__(self, nnz, cap, step):
        super().__init__(f"fill-in {nnz} exceeded cap {cap} after {step} pivots")
        self.nnz = nnz
        self.cap = cap
        self.step = step


class SparseMatrix:
    def __init__(self, nrows, ncols, cols=None):
        self.nrows = nrows
        self.ncols = ncols
        self.cols = cols if cols is not None else [dict() for _ in range(ncols)]
        if len(self.cols) != ncols:
            raise DimensionError("column count mismatch")
        for col in self.cols:
            for r, v in list(col.items()):
                if not 0 <= r < nrows:
                    raise DimensionError(f"row {r} out of range")
                if v == 0:
                    del col[r]
                else:
                    col[r] = Fraction(v)

    @classmethod
    def from_columns(cls, nrows, cols):
        return cls(nrows, len(cols), [dict(c) for c in cols])

    @classmethod
    def from_dense(cls, rows):
        nrows = len(rows)
        ncols = len(rows[0]) if rows else 0
        cols = [{r: Fraction(rows[r][c]) for r in range(nrows) if rows[r][c] != 0}
                for c in range(ncols)]
        return cls(nrows, ncols, cols)

    @classmethod
    def identity(cls, n):
        return cls(n, n, [{i: Fraction(1)} for i in range(n)])

    def nnz(self):
        return sum(len(c) for c in self.cols)

    def to_dense(self):
        out = [[Fraction(0)] * self.ncols for _ in range(self.nrows)]
        for c, col in enumerate(self.cols):
            for r, v in col.items():
                out[r][c] = v
        return out

    def rows(self):
        rows = [dict() for _ in range(self.nrows)]
        for c, col in enumerate(self.cols):
            for r, v in col.items():
                rows[r][c] = v
        return rows

    def matvec(self, x):
        """Exact A x for sparse x given as {col: value}."""
        acc = {}
        for c, xv in x.items():
            if not xv:
                continue
            for r, v in self.cols[c].items():
                acc[r] = acc.get(r, 0) + v * xv
        return {r: Fraction(v) for r, v in acc.items() if v}

    def __eq__(self, other):
        return (isinstance(other, SparseMatrix) and self.nrows == other.nrows
                and self.ncols == other.ncols and self.cols == other.cols)


@dataclass
class SolveReport:
    rank: int
    solution: dict = None
    feasible: bool = True
    certificate: dict = None
    pivots: list = field(default_factory=list)
    residual_exact_zero: bool = False
    strategy: str = ""
    seconds: float = 0.0
    max_nnz: int = 0


def default_strategy(ncols):
    return SMALLEST if ncols <= 500 else MARKOWITZ


class _Eliminator:
    """Forward elimination on row dicts with column incidence sets."""

    def __init__(self, A, b=None, cap=10**7):
        self.rows = [dict() for _ in range(A.nrows)]
        for c, col in enumerate(A.cols):
            for r, v in col.items():
                self.rows[r][c] = mpq(v.numerator, v.denominator)
        self.rhs = [mpq(0)] * A.nrows
        if b:
            for r, v in b.items():
                v = Fraction(v)
                self.rhs[r] = mpq(v.numerator, v.denominator)
        self.col_rows = [set() for _ in range(A.ncols)]
        for r, row in enumerate(self.rows):
            for c in row:
                self.col_rows[c].add(r)
        self.active = set(r for r in range(A.nrows) if self.rows[r])
        self.zero_rows = [r for r in range(A.nrows) if not self.rows[r]]
        self.ncols = A.ncols
        self.nnz = sum(len(r) for r in self.rows)
        self.max_nnz = self.nnz
        self.cap = cap
        self.pivots = []
        self._next_col = 0

    def pick_smallest(self):
        best = None
        for r in self.active:
            row = self.rows[r]
            for c, v in row.items():
                key = (abs(v), len(row), len(self.col_rows[c]), r, c)
                if best is None or key < best:
                    best = key
        return None if best is None else (best[3], best[4])

    def pick_first(self):
        while self._next_col < self.ncols:
            rows = self.col_rows[self._next_col]
            if rows:
                return min(rows), self._next_col
            self._next_col += 1
        return None

    def pick_markowitz(self, ncand=4):
        """Minimize (row count - 1)(column count - 1) over the sparsest columns."""
        live = [c for c in self._live if self.col_rows[c]]
        self._live = live
        if not live:
            return None
        best = None
        for c in heapq.nsmallest(ncand, live, key=lambda c: (len(self.col_rows[c]), c)):
            cc = len(self.col_rows[c]) - 1
            for r in self.col_rows[c]:
                key = ((len(self.rows[r]) - 1) * cc, len(self.rows[r]), r, c)
                if best is None or key < best:
                    best = key
        return best[2], best[3]

    def run(self, strategy):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown pivot strategy {strategy!r}")
        if strategy == MARKOWITZ:
            self._live = list(range(self.ncols))
        pick = {SMALLEST: self.pick_smallest, FIRST: self.pick_first,
                MARKOWITZ: self.pick_markowitz}[strategy]
        while self.active:
            p = pick()
            if p is None:
                break
            r, c = p
            self.active.discard(r)
            prow = self.rows[r]
            for cc in prow:
                self.col_rows[cc].discard(r)
            pv = prow[c]
            prhs = self.rhs[r]
            for r2 in list(self.col_rows[c]):
                row2 = self.rows[r2]
                f = row2[c] / pv
                before = len(row2)
                for cc, v in prow.items():
                    nv = row2.get(cc, 0) - f * v
                    if nv:
                        if cc not in row2:
                            self.col_rows[cc].add(r2)
                        row2[cc] = nv
                    elif cc in row2:
                        del row2[cc]
                        self.col_rows[cc].discard(r2)
                if prhs:
                    self.rhs[r2] -= f * prhs
                self.nnz += len(row2) - before
                if not row2:
                    self.active.discard(r2)
                    self.zero_rows.append(r2)
            self.pivots.append((r, c))
            self.max_nnz = max(self.max_nnz, self.nnz)
            if self.nnz > self.cap:
                raise FillInExceeded(self.nnz, self.cap, len(self.pivots))
        return self.pivots

    def back_substitute(self):
        x = {}
        for r, c in reversed(self.pivots):
            row = self.rows[r]
            acc = self.rhs[r]
            for cc, v in row.items():
                if cc != c and cc in x:
                    acc -= v * x[cc]
            val = acc / row[c]
            if val:
                x[c] = val
        return {c: Fraction(int(v.numerator), int(v.denominator)) for c, v in x.items()}


def eliminate(A, strategy=None, cap=10**7):
    """Forward elimination; returns (rank, pivot list)."""
    strategy = strategy or default_strategy(A.ncols)
    el = _Eliminator(A, cap=cap)
    el.run(strategy)
    return len(el.pivots), list(el.pivots)


def rank(A, strategy=None, cap=10**7):
    return eliminate(A, strategy, cap)[0]


def verify(A, x, b):
    """True iff A x - b is exactly zero."""
    ax = A.matvec(x)
    b = {r: Fraction(v) for r, v in b.items() if v}
    return ax == b


def solve(A, b, strategy=None, cap=10**7):
    """Exact solution of A x = b (free variables zero) or infeasibility."""
    if any(not 0 <= r < A.nrows for r in b):
        raise DimensionError("rhs row outside matrix")
    strategy = strategy or default_strategy(A.ncols)
    t0 = time.perf_counter()
    el = _Eliminator(A, b, cap)
    el.run(strategy)
    bad = [r for r in el.zero_rows if el.rhs[r]]
    rep = SolveReport(rank=len(el.pivots), pivots=list(el.pivots), strategy=strategy,
                      max_nnz=el.max_nnz)
    if bad:
        r = min(bad)
        rep.feasible = False
        v = el.rhs[r]
        rep.certificate = {"row": r, "reduced_rhs": str(Fraction(int(v.numerator), int(v.denominator)))}
    else:
        rep.solution = el.back_substitute()
        rep.residual_exact_zero = verify(A, rep.solution, b)
    rep.seconds = time.perf_counter() - t0
    return rep


def augmented_rank(A, b, strategy=None):
    col = {r: Fraction(v) for r, v in b.items() if v}
    B = SparseMatrix(A.nrows, A.ncols + 1, [dict(c) for c in A.cols] + [col])
    return rank(B, strategy)


__all__ = ["SparseMatrix", "SolveReport", "eliminate", "rank", "solve", "verify",
           "augmented_rank", "SMALLEST", "FIRST", "MARKOWITZ", "STRATEGIES", "FillInExceeded", "DimensionError"]
