"""Rational polytopes in facet form and Gelfand-Cetlin polytopes for SO(n).

A polytope is the set { u : <v_i, u> - tau_i >= 0 for all i } with primitive
integer normals v_i and rational offsets tau_i.  Everything here is exact:
vertices are found by solving every N-subset of facet equalities over the
rationals and keeping the feasible solutions.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.optimize import linprog

from novikov import as_fraction

log = logging.getLogger(__name__)

Facet = Tuple[Tuple[int, ...], Fraction]
Point = Tuple[Fraction, ...]


class PolytopeError(ValueError):
    pass


@dataclass(frozen=True)
class FacetSystem:
    dim: int
    facets: Tuple[Facet, ...]
    scale: Optional[Fraction] = None
    # user-asserted: central fiber is Fano with a small resolution
    small_resolution: bool = False
    labels: Tuple[str, ...] = ()

    def normals(self) -> List[Tuple[int, ...]]:
        return [v for v, _ in self.facets]

    def offsets(self) -> List[Fraction]:
        return [tau for _, tau in self.facets]


@dataclass(frozen=True)
class FiberPoint:
    u: Tuple[Any, ...]


def _primitive(normal: Sequence[int], offset: Fraction) -> Facet:
    ints = tuple(int(x) for x in normal)
    if any(x != int(x) for x in normal):
        raise PolytopeError(f"normal {list(normal)} is not an integer vector")
    g = reduce(math.gcd, (abs(x) for x in ints), 0)
    if g == 0:
        raise PolytopeError("facet normal must be nonzero")
    return tuple(x // g for x in ints), offset / g


def make_facet_system(normals: Sequence[Sequence[int]], offsets: Sequence[Any],
                      scale: Any = None, small_resolution: bool = False,
                      labels: Sequence[str] = (), validate: bool = True) -> FacetSystem:
    """Build a FacetSystem, dividing each normal by its gcd.

    Validation enumerates vertices, so an empty or unbounded system raises
    PolytopeError here rather than later.
    """
    if len(normals) != len(offsets):
        raise PolytopeError(f"{len(normals)} normals but {len(offsets)} offsets")
    if not normals:
        raise PolytopeError("facet list is empty")
    dim = len(normals[0])
    facets: List[Facet] = []
    for v, tau in zip(normals, offsets):
        if len(v) != dim:
            raise PolytopeError(f"normal {list(v)} has length {len(v)}, expected {dim}")
        facet = _primitive(v, as_fraction(tau))
        if facet not in facets:
            facets.append(facet)
    system = FacetSystem(
        dim=dim,
        facets=tuple(facets),
        scale=None if scale is None else as_fraction(scale),
        small_resolution=small_resolution,
        labels=tuple(labels) if labels else tuple(f"u{j + 1}" for j in range(dim)),
    )
    if validate:
        vertices(system)
    return system


# ------------------------------------------------------------
# 1. Affine values and membership
# ------------------------------------------------------------
def _coords(F: FacetSystem, u) -> Tuple[Any, ...]:
    coords = u.u if isinstance(u, FiberPoint) else tuple(u)
    if len(coords) != F.dim:
        raise PolytopeError(f"point has {len(coords)} coordinates, polytope has dim {F.dim}")
    return coords


def ell(F: FacetSystem, i: int, u) -> Any:
    """l_i(u) = <v_i, u> - tau_i, exact when u is rational."""
    if not 0 <= i < len(F.facets):
        raise IndexError(f"facet index {i} out of range 0..{len(F.facets) - 1}")
    coords = _coords(F, u)
    v, tau = F.facets[i]
    return sum(vj * uj for vj, uj in zip(v, coords)) - tau


def contains(F: FacetSystem, u, strict: bool = False, tol: float = 0.0) -> bool:
    values = [ell(F, i, u) for i in range(len(F.facets))]
    if strict:
        return all(val > tol for val in values)
    return all(val >= -tol for val in values)


# ------------------------------------------------------------
# 2. Vertex enumeration
# ------------------------------------------------------------
def _check_bounded(F: FacetSystem) -> None:
    # recession cone {d : V d >= 0} must be trivial
    if F.dim == 0:
        return
    V = np.array(F.normals(), dtype=float)
    for j in range(F.dim):
        for sign in (1.0, -1.0):
            c = np.zeros(F.dim)
            c[j] = -sign
            res = linprog(c, A_ub=-V, b_ub=np.zeros(len(V)), bounds=[(-1, 1)] * F.dim, method="highs")
            if res.status == 0 and -res.fun > 1e-9:
                raise PolytopeError(f"polytope is unbounded along {'+' if sign > 0 else '-'}{F.labels[j]}")


def vertices(F: FacetSystem) -> List[Point]:
    """Exact vertex set, deduplicated and sorted."""
    if F.dim == 0:
        return [()]
    _check_bounded(F)
    A = sp.Matrix([list(v) for v, _ in F.facets])
    b = sp.Matrix([sp.Rational(tau.numerator, tau.denominator) for _, tau in F.facets])
    cols = list(range(F.dim))
    found = set()
    for rows in combinations(range(len(F.facets)), F.dim):
        sub = A.extract(list(rows), cols)
        if sub.det() == 0:
            continue
        x = sub.LUsolve(b.extract(list(rows), [0]))
        point = tuple(as_fraction(xi) for xi in x)
        if contains(F, point):
            found.add(point)
    if not found:
        raise PolytopeError("polytope is empty")
    return sorted(found)


def centroid(points: Sequence[Point]) -> Point:
    n = len(points)
    return tuple(sum(p[j] for p in points) / n for j in range(len(points[0])))


def diameter(F: FacetSystem) -> float:
    pts = np.array([[float(x) for x in p] for p in vertices(F)], dtype=float)
    if len(pts) < 2:
        return 0.0
    diffs = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diffs ** 2).sum(axis=-1)).max())


# ------------------------------------------------------------
# 3. Transformations
# ------------------------------------------------------------
def translate(F: FacetSystem, shift: Sequence[Any]) -> FacetSystem:
    """Polytope of u - shift; translating by a vertex puts the origin inside."""
    s = [as_fraction(x) for x in _coords(F, shift)]
    facets = tuple((v, tau - sum(vj * sj for vj, sj in zip(v, s))) for v, tau in F.facets)
    return FacetSystem(F.dim, facets, F.scale, F.small_resolution, F.labels)


def scale_offsets(F: FacetSystem, c: Any) -> FacetSystem:
    factor = as_fraction(c)
    if factor <= 0:
        raise PolytopeError("scale factor must be positive")
    scale = None if F.scale is None else F.scale * factor
    return FacetSystem(F.dim, tuple((v, tau * factor) for v, tau in F.facets), scale,
                       F.small_resolution, F.labels)


def permute_coordinates(F: FacetSystem, perm: Sequence[int]) -> FacetSystem:
    """New coordinate j is old coordinate perm[j]."""
    if sorted(perm) != list(range(F.dim)):
        raise PolytopeError(f"{list(perm)} is not a permutation of {F.dim} coordinates")
    facets = tuple((tuple(v[p] for p in perm), tau) for v, tau in F.facets)
    labels = tuple(F.labels[p] for p in perm)
    return FacetSystem(F.dim, facets, F.scale, F.small_resolution, labels)


# ------------------------------------------------------------
# 4. Gelfand-Cetlin patterns for SO(n)
# ------------------------------------------------------------
Label = Tuple[int, int]  # (row k, position i); row n is the top row


@dataclass(frozen=True)
class GCPattern:
    n: int
    parity: str
    top_row: Tuple[Fraction, ...]
    entries: Tuple[Label, ...]
    absolute: Tuple[Label, ...]
    # (a, b, "ge") means a >= b ; (a, b, "ge_abs") means a >= |b|
    constraints: Tuple[Tuple[Label, Label, str], ...]
    forced: Dict[Label, Fraction] = field(default_factory=dict)


def entry_label(label: Label) -> str:
    k, i = label
    return f"lambda^({k})_{i}"


def _check_top_row(n: int, top: Sequence[Fraction]) -> str:
    m = n // 2
    if len(top) != m:
        raise PolytopeError(f"SO({n}) top row needs {m} entries, got {len(top)}")
    if n % 2 == 1:
        if any(top[i] < top[i + 1] for i in range(m - 1)) or top[-1] < 0:
            raise PolytopeError("type B top row must satisfy lambda_1 >= ... >= lambda_m >= 0")
        return "B"
    if any(top[i] < top[i + 1] for i in range(m - 2)) or (m >= 2 and top[m - 2] < abs(top[m - 1])):
        raise PolytopeError("type D top row must satisfy lambda_1 >= ... >= lambda_{m-1} >= |lambda_m|")
    return "D"


def gc_pattern(n: int, top_row: Sequence[Any]) -> GCPattern:
    if n < 3:
        raise PolytopeError(f"Gelfand-Cetlin patterns need n >= 3, got {n}")
    top = tuple(as_fraction(x) for x in top_row)
    parity = _check_top_row(n, top)

    entries: List[Label] = []
    absolute: List[Label] = []
    constraints: List[Tuple[Label, Label, str]] = []
    for k in range(n - 1, 1, -1):
        up = k + 1
        width = k // 2
        entries.extend((k, i) for i in range(1, width + 1))
        if up % 2 == 1:
            # odd row over even row: mu_1 >= nu_1 >= mu_2 >= ... >= mu_j >= |nu_j|
            j = width
            for i in range(1, j):
                constraints.append(((up, i), (k, i), "ge"))
                constraints.append(((k, i), (up, i + 1), "ge"))
            constraints.append(((up, j), (k, j), "ge_abs"))
            absolute.append((k, j))
        else:
            # even row over odd row: nu_1 >= rho_1 >= ... >= rho_{j-1} >= |nu_j|
            j = up // 2
            for i in range(1, j):
                constraints.append(((up, i), (k, i), "ge"))
            for i in range(1, j - 1):
                constraints.append(((k, i), (up, i + 1), "ge"))
            constraints.append(((k, j - 1), (up, j), "ge_abs"))

    forced = _forced_entries(n, top, entries, constraints)
    return GCPattern(n, parity, top, tuple(entries), tuple(absolute), tuple(constraints), forced)


def _forced_entries(n, top, entries, constraints) -> Dict[Label, Fraction]:
    lo: Dict[Label, Any] = {e: -math.inf for e in entries}
    hi: Dict[Label, Any] = {e: math.inf for e in entries}
    for i, value in enumerate(top, start=1):
        lo[(n, i)] = hi[(n, i)] = value

    changed = True
    while changed:
        changed = False
        for a, b, rel in constraints:
            new_hi_b = min(hi[b], hi[a])
            if rel == "ge":
                new_lo_b = lo[b]
                new_lo_a = max(lo[a], lo[b])
            else:
                new_lo_b = max(lo[b], -hi[a])
                abs_lo = lo[b] if lo[b] > 0 else (-hi[b] if hi[b] < 0 else 0)
                new_lo_a = max(lo[a], abs_lo)
            if (new_hi_b, new_lo_b, new_lo_a) != (hi[b], lo[b], lo[a]):
                hi[b], lo[b], lo[a] = new_hi_b, new_lo_b, new_lo_a
                changed = True
    return {e: as_fraction(lo[e]) for e in entries if lo[e] == hi[e]}


def gc_polytope(n: int, top_row: Sequence[Any]) -> Tuple[GCPattern, FacetSystem]:
    """Pattern plus its FacetSystem in the free lambda^(k)_i coordinates."""
    pattern = gc_pattern(n, top_row)
    constants: Dict[Label, Fraction] = dict(pattern.forced)
    constants.update({(n, i): v for i, v in enumerate(pattern.top_row, start=1)})
    free = sorted((e for e in pattern.entries if e not in constants), key=lambda e: (e[0], e[1]))
    index = {e: j for j, e in enumerate(free)}

    def side(label: Label, sign: int, coeffs: List[int], const: Fraction) -> Fraction:
        if label in constants:
            return const + sign * constants[label]
        coeffs[index[label]] += sign
        return const

    normals: List[List[int]] = []
    offsets: List[Fraction] = []
    for a, b, rel in pattern.constraints:
        signs = [(1, -1)] if rel == "ge" else [(1, -1), (1, 1)]
        for sa, sb in signs:
            coeffs = [0] * len(free)
            const = side(a, sa, coeffs, Fraction(0))
            const = side(b, sb, coeffs, const)
            if not any(coeffs):
                if const < 0:
                    raise PolytopeError(f"top row violates {entry_label(a)} {rel} {entry_label(b)}")
                continue
            normals.append(coeffs)
            offsets.append(-const)

    labels = [entry_label(e) for e in free]
    if not free:
        system = FacetSystem(0, (), None, False, ())
        return pattern, system
    scale = pattern.top_row[0] if pattern.top_row[0] > 0 else None
    system = make_facet_system(normals, offsets, scale=scale, labels=labels)
    log.debug("GC polytope SO(%d): %d free entries, %d facets", n, len(free), len(system.facets))
    return pattern, system


def rank3_moment_polytope(n: int, lam: Any) -> FacetSystem:
    """{lam >= nu_{n-1} >= ... >= nu_3 >= |nu_2|} in coordinates (nu_2, ..., nu_{n-1})."""
    if n < 4:
        raise PolytopeError(f"rank-3 degeneration needs n >= 4, got {n}")
    lam = as_fraction(lam)
    dim = n - 2
    normals: List[List[int]] = []
    offsets: List[Fraction] = []

    def unit(j: int, sign: int = 1) -> List[int]:
        v = [0] * dim
        v[j] = sign
        return v

    normals.append(unit(dim - 1, -1))
    offsets.append(-lam)
    for j in range(1, dim - 1):
        v = unit(j + 1)
        v[j] = -1
        normals.append(v)
        offsets.append(Fraction(0))
    for sign in (1, -1):
        v = unit(1)
        v[0] = -sign
        normals.append(v)
        offsets.append(Fraction(0))
    labels = [f"nu_{k}" for k in range(2, n)]
    return make_facet_system(normals, offsets, scale=lam if lam > 0 else None, labels=labels)


def gc_equals_moment_polytope(n: int, lam: Any) -> bool:
    """Rank-one GC polytope vs the rank-3 moment polytope, via lambda^(k)_1 <-> nu_k."""
    if n < 4:
        raise PolytopeError(f"comparison needs n >= 4, got {n}")
    top = [lam] + [0] * (n // 2 - 1)
    _, gc = gc_polytope(n, top)
    expected = tuple(entry_label((k, 1)) for k in range(2, n))
    if gc.labels != expected:
        log.debug("GC free entries %s differ from %s", gc.labels, expected)
        return False
    moment = rank3_moment_polytope(n, lam)
    return set(vertices(gc)) == set(vertices(moment))


def facet_records(F: FacetSystem) -> List[Dict[str, Any]]:
    return [{"normal": list(v), "offset": str(tau)} for v, tau in F.facets]
