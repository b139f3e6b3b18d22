"""Truncated Novikov-ring elements.

An element is a finite sum  sum_j a_j T^(lambda_j)  with exact rational
exponents lambda_j >= 0 and Gaussian-rational coefficients a_j.  Elements may
carry a truncation level E: terms above E are dropped and the element is
flagged ``truncated`` so exact identities can be told apart from cut ones.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import sympy as sp


Term = Tuple[Fraction, sp.Expr]


def as_fraction(value: Any) -> Fraction:
    """Exact rational from int / Fraction / "p/q" / sympy Rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, sp.Rational):
        return Fraction(int(value.p), int(value.q))
    if isinstance(value, float):
        raise ValueError(f"refusing float {value!r} where an exact rational is required")
    return Fraction(value)


def as_coefficient(value: Any) -> sp.Expr:
    """Gaussian rational a + b*I, or ValueError."""
    c = sp.expand(sp.sympify(value))
    re, im = c.as_real_imag()
    if not (re.is_Rational and im.is_Rational):
        raise ValueError(f"coefficient {value!r} is not a Gaussian rational")
    return re + sp.I * im


def _min_truncation(a: Optional[Fraction], b: Optional[Fraction]) -> Optional[Fraction]:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


@dataclass(frozen=True)
class NovikovElement:
    terms: Tuple[Term, ...] = ()
    truncation: Optional[Fraction] = None
    truncated: bool = False

    def __post_init__(self):
        previous = None
        for exponent, coeff in self.terms:
            if exponent < 0:
                raise ValueError(f"negative exponent {exponent} is outside Lambda_0")
            if previous is not None and exponent <= previous:
                raise ValueError("exponents must be strictly increasing")
            if coeff == 0:
                raise ValueError("zero coefficients are not stored")
            if self.truncation is not None and exponent > self.truncation:
                raise ValueError(f"exponent {exponent} exceeds truncation {self.truncation}")
            previous = exponent

    # ---- construction ---------------------------------------------------
    @classmethod
    def from_terms(cls, pairs: Iterable[Tuple[Any, Any]], truncation: Any = None,
                   truncated: bool = False) -> "NovikovElement":
        cutoff = None if truncation is None else as_fraction(truncation)
        merged: Dict[Fraction, sp.Expr] = {}
        for exponent, coeff in pairs:
            e = as_fraction(exponent)
            merged[e] = merged.get(e, sp.Integer(0)) + as_coefficient(coeff)
        kept: List[Term] = []
        dropped = False
        for e in sorted(merged):
            c = sp.expand(merged[e])
            if c == 0:
                continue
            if cutoff is not None and e > cutoff:
                dropped = True
                continue
            kept.append((e, c))
        return cls(tuple(kept), cutoff, truncated or dropped)

    @classmethod
    def monomial(cls, exponent: Any, coeff: Any = 1, truncation: Any = None) -> "NovikovElement":
        """T^exponent (Q = T^lambda is the single-term element with exponent lambda)."""
        return cls.from_terms([(exponent, coeff)], truncation)

    @classmethod
    def zero(cls, truncation: Any = None) -> "NovikovElement":
        return cls.from_terms([], truncation)

    def normalized(self) -> "NovikovElement":
        return NovikovElement.from_terms(self.terms, self.truncation, self.truncated)

    # ---- arithmetic -----------------------------------------------------
    def __add__(self, other: "NovikovElement") -> "NovikovElement":
        return nov_add(self, other)

    def __mul__(self, other: "NovikovElement") -> "NovikovElement":
        return nov_mul(self, other)

    def __neg__(self) -> "NovikovElement":
        return self.scale(-1)

    def __sub__(self, other: "NovikovElement") -> "NovikovElement":
        return nov_add(self, -other)

    def scale(self, k: Any) -> "NovikovElement":
        factor = as_coefficient(k)
        return NovikovElement.from_terms(((e, c * factor) for e, c in self.terms),
                                         self.truncation, self.truncated)

    def is_zero(self) -> bool:
        return not self.terms

    def __str__(self) -> str:
        return format_element(self)

    # ---- serialization --------------------------------------------------
    def to_records(self) -> List[Dict[str, int]]:
        records = []
        for e, c in self.terms:
            re, im = c.as_real_imag()
            records.append({
                "num": e.numerator, "den": e.denominator,
                "coeff_re_num": int(re.p), "coeff_re_den": int(re.q),
                "coeff_im_num": int(im.p), "coeff_im_den": int(im.q),
            })
        return records

    @classmethod
    def from_records(cls, records: Iterable[Dict[str, int]], truncation: Any = None) -> "NovikovElement":
        pairs = []
        for r in records:
            coeff = sp.Rational(r["coeff_re_num"], r["coeff_re_den"]) \
                + sp.I * sp.Rational(r.get("coeff_im_num", 0), r.get("coeff_im_den", 1))
            pairs.append((Fraction(r["num"], r["den"]), coeff))
        return cls.from_terms(pairs, truncation)


def nov_add(a: NovikovElement, b: NovikovElement) -> NovikovElement:
    cutoff = _min_truncation(a.truncation, b.truncation)
    return NovikovElement.from_terms(a.terms + b.terms, cutoff, a.truncated or b.truncated)


def nov_mul(a: NovikovElement, b: NovikovElement) -> NovikovElement:
    cutoff = _min_truncation(a.truncation, b.truncation)
    products = [(ea + eb, ca * cb) for ea, ca in a.terms for eb, cb in b.terms]
    return NovikovElement.from_terms(products, cutoff, a.truncated or b.truncated)


def nov_val(a: NovikovElement):
    """T-adic valuation; +inf for the zero element."""
    if not a.terms:
        return math.inf
    return a.terms[0][0]


def nov_eval(a: NovikovElement, t: float) -> complex:
    if not 0.0 < t < 1.0:
        raise ValueError(f"evaluation parameter t={t} must lie in (0, 1)")
    log_t = np.log(t)
    total = 0j
    for e, c in a.terms:
        total += complex(c) * np.exp(float(e) * log_t)
    return complex(total)


def format_element(a: NovikovElement, q_exponent: Optional[Fraction] = None) -> str:
    """Readable form, e.g. ``1 + 2*T^(1/2)``; T^lambda prints as Q when given."""
    if not a.terms:
        return "0"
    parts = []
    for e, c in a.terms:
        if q_exponent is not None and e == q_exponent:
            base = "Q"
        elif e == 0:
            base = ""
        elif e == 1:
            base = "T"
        else:
            base = f"T^({e})"
        if c == 1 and base:
            parts.append(base)
        elif base:
            coeff = str(c) if c.is_Rational else f"({c})"
            parts.append(f"{coeff}*{base}")
        else:
            parts.append(str(c))
    return " + ".join(parts).replace("+ -", "- ")
