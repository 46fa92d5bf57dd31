"""Exact polynomial coefficients over cumulant and time symbols.

Symbols are plain strings: ``k3, k4, ...`` for the normalized cumulants,
``u`` for e^{-t} and ``s`` for (1 - e^{-t})^{1/2}.  Exponents are
Fractions so that e^{-t/2} = u^{1/2} and 1/s are representable.
"""

from fractions import Fraction


def _mono(items):
    return tuple(sorted((k, Fraction(e)) for k, e in items if e != 0))


def _mono_mul(m1, m2):
    acc = dict(m1)
    for k, e in m2:
        acc[k] = acc.get(k, 0) + e
    return _mono(acc.items())


class CoeffPoly:
    """Finite sum of rational multiples of monomials in the symbols."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for mono, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[mono] = clean.get(mono, 0) + c
        self.terms = {m: c for m, c in clean.items() if c}
        self._hash = None

    @classmethod
    def const(cls, c):
        return cls({(): c})

    @classmethod
    def monomial(cls, c=1, **exps):
        return cls({_mono(exps.items()): c})

    @classmethod
    def alpha(cls, c=1):
        """c * e^{-t} (1 - e^{-t})."""
        return cls.monomial(c, u=1, s=2)

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        if not isinstance(other, CoeffPoly):
            other = CoeffPoly.const(other)
        acc = dict(self.terms)
        for m, c in other.terms.items():
            acc[m] = acc.get(m, 0) + c
        return CoeffPoly(acc)

    __radd__ = __add__

    def __neg__(self):
        return CoeffPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, CoeffPoly):
            other = Fraction(other)
            return CoeffPoly({m: c * other for m, c in self.terms.items()})
        acc = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, 0) + c1 * c2
        return CoeffPoly(acc)

    __rmul__ = __mul__

    def reduced(self):
        """Normal form under u + s^2 = 1 (nonnegative powers of s below 2)."""
        out = CoeffPoly()
        todo = list(self.terms.items())
        while todo:
            mono, c = todo.pop()
            d = dict(mono)
            e = d.get("s", 0)
            if e >= 2:
                d["s"] = e - 2
                base = _mono(d.items())
                todo.append((base, c))
                todo.append((_mono_mul(base, (("u", Fraction(1)),)), -c))
            else:
                out = out + CoeffPoly({mono: c})
        return out

    def equals_mod_time(self, other):
        return (self - other).reduced().is_zero()

    def ratio_to(self, base):
        """Rational r with self == r * base, or None."""
        if self.is_zero():
            return Fraction(0)
        if len(self.terms) != len(base.terms):
            return None
        m0, b0 = next(iter(base.terms.items()))
        if m0 not in self.terms:
            return None
        r = self.terms[m0] / b0
        if all(self.terms.get(m) == r * c for m, c in base.terms.items()):
            return r
        return None

    def __eq__(self, other):
        if not isinstance(other, CoeffPoly):
            other = CoeffPoly.const(other)
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms):
            c = self.terms[mono]
            syms = "*".join(k if e == 1 else f"{k}^{e}" for k, e in mono)
            if not syms:
                parts.append(str(c))
            elif c == 1:
                parts.append(syms)
            else:
                parts.append(f"{c}*{syms}")
        return " + ".join(parts)

    __repr__ = __str__

    def to_json(self):
        return [[str(c), [[k, str(e)] for k, e in mono]] for mono, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, data):
        return cls({_mono((k, Fraction(e)) for k, e in mono): Fraction(c) for c, mono in data})

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if text == "0":
            return cls()
        acc = {}
        for part in text.split(" + "):
            c = Fraction(1)
            exps = []
            for tok in part.split("*"):
                if "^" in tok:
                    k, e = tok.split("^")
                    exps.append((k, Fraction(e)))
                elif tok[0].isalpha():
                    exps.append((tok, Fraction(1)))
                else:
                    c = Fraction(tok)
            m = _mono(exps)
            acc[m] = acc.get(m, 0) + c
        return cls(acc)
