"""Intersection arithmetic for Maslov-two disks on toric surface degenerations.

A boundary is a cycle of curves with self-intersection numbers; adjacent
curves meet once and non-adjacent curves are disjoint.  A disk class is
m*beta + sum k_i [C_i] where beta is the smooth disk class, given only through
its pairings with the boundary curves (beta . beta = 0).  Liftability of a
stable configuration is decided by the negativity test: a class whose pairing
with an already lifted class is negative cannot appear in the smoothing.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)

LIFTABLE = "liftable"
OBSTRUCTED = "obstructed"
UNESTABLISHED = "unestablished"


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class SurfaceBoundary:
    curves: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        if len(self.curves) < 3:
            raise CycleError(f"a boundary cycle needs at least 3 curves, got {len(self.curves)}")
        ids = [c for c, _ in self.curves]
        if len(set(ids)) != len(ids):
            raise CycleError(f"duplicate curve ids in {ids}")
        for cid, self_int in self.curves:
            if not isinstance(self_int, (int, np.integer)) or isinstance(self_int, bool):
                raise CycleError(f"self-intersection of {cid} must be an integer, got {self_int!r}")

    @classmethod
    def of(cls, curves: Sequence[Tuple[str, int]]) -> "SurfaceBoundary":
        return cls(tuple((str(c), int(k)) for c, k in curves))

    @property
    def ids(self) -> List[str]:
        return [c for c, _ in self.curves]

    def index(self, cid: str) -> int:
        try:
            return self.ids.index(cid)
        except ValueError:
            raise CycleError(f"unknown boundary curve {cid!r}") from None

    def self_intersection(self, cid: str) -> int:
        return self.curves[self.index(cid)][1]

    def curve_pairing(self, a: str, b: str) -> int:
        i, j = self.index(a), self.index(b)
        if i == j:
            return self.curves[i][1]
        n = len(self.curves)
        return 1 if (i - j) % n in (1, n - 1) else 0

    def rotated(self, shift: int) -> "SurfaceBoundary":
        shift %= len(self.curves)
        return SurfaceBoundary(self.curves[shift:] + self.curves[:shift])

    def reflected(self) -> "SurfaceBoundary":
        return SurfaceBoundary(tuple(reversed(self.curves)))


@dataclass(frozen=True)
class DiskClass:
    base: int
    anchor: Tuple[Tuple[str, int], ...]
    spheres: Tuple[Tuple[str, int], ...] = ()

    @classmethod
    def make(cls, anchor: Mapping[str, int], base: int = 1,
             spheres: Optional[Mapping[str, int]] = None) -> "DiskClass":
        spheres = {c: int(k) for c, k in (spheres or {}).items() if int(k) != 0}
        if any(k < 0 for k in spheres.values()):
            raise CycleError(f"sphere multiplicities must be non-negative: {spheres}")
        return cls(int(base), tuple(sorted((str(c), int(v)) for c, v in anchor.items())),
                   tuple(sorted(spheres.items())))

    def multiplicity(self, cid: str) -> int:
        return dict(self.spheres).get(cid, 0)

    def plus(self, cid: str, k: int = 1) -> "DiskClass":
        spheres = dict(self.spheres)
        spheres[cid] = spheres.get(cid, 0) + k
        return DiskClass.make(dict(self.anchor), self.base, spheres)

    def vector(self, S: SurfaceBoundary) -> np.ndarray:
        for cid, _ in self.spheres:
            S.index(cid)
        return np.array([self.base] + [self.multiplicity(c) for c in S.ids], dtype=int)


def boundary_sum(S: SurfaceBoundary, anchor: Mapping[str, int]) -> DiskClass:
    return DiskClass.make(anchor, 0, {c: 1 for c in S.ids})


def gram_matrix(S: SurfaceBoundary, anchor: Mapping[str, int]) -> Tuple[List[str], np.ndarray]:
    """Gram matrix on (beta, C_1, ..., C_n)."""
    missing = [c for c in S.ids if c not in anchor]
    if missing:
        raise CycleError(f"missing pairing datum beta.{missing[0]}")
    unknown = [c for c in anchor if c not in S.ids]
    if unknown:
        raise CycleError(f"anchor pairs with unknown curve {unknown[0]!r}")
    n = len(S.curves)
    G = np.zeros((n + 1, n + 1), dtype=int)
    for i, a in enumerate(S.ids):
        G[0, i + 1] = G[i + 1, 0] = int(anchor[a])
        for j, b in enumerate(S.ids):
            G[i + 1, j + 1] = S.curve_pairing(a, b)
    return ["beta"] + S.ids, G


def pairing(a: DiskClass, b: DiskClass, S: SurfaceBoundary) -> int:
    if a.anchor != b.anchor:
        raise CycleError("classes carry different anchor pairings")
    anchor = dict(a.anchor)
    u, w = a.vector(S), b.vector(S)
    needed = [c for k, c in enumerate(S.ids)
              if (u[0] and w[k + 1]) or (w[0] and u[k + 1])]
    missing = [c for c in needed if c not in anchor]
    if missing:
        raise CycleError(f"missing pairing datum beta.{missing[0]}")
    full = {c: anchor.get(c, 0) for c in S.ids}
    _, G = gram_matrix(S, full)
    return int(u @ G @ w)


def maslov(a: DiskClass, S: SurfaceBoundary) -> int:
    return 2 * pairing(a, boundary_sum(S, dict(a.anchor)), S)


# ------------------------------------------------------------
# Verdicts
# ------------------------------------------------------------
@dataclass(frozen=True)
class Verdict:
    status: str
    detail: Optional[str] = None
    certificate: Optional[int] = None
    moduli: Optional[str] = None


def _single_curve_anchor(a: DiskClass, S: SurfaceBoundary) -> Optional[str]:
    hits = [c for c, v in a.anchor if v != 0]
    if a.base != 1 or len(hits) != 1 or dict(a.anchor)[hits[0]] != 1:
        return None
    return hits[0]


def _is_single_minus_two(a: DiskClass, S: SurfaceBoundary) -> Optional[str]:
    """The (-2)-curve D when a lives on a boundary with exactly one (-2)-curve met once by beta."""
    minus_two = [c for c, k in S.curves if k == -2]
    hit = _single_curve_anchor(a, S)
    if len(minus_two) != 1 or hit != minus_two[0]:
        return None
    if any(c != hit for c, _ in a.spheres):
        return None
    return hit


def liftable(a: DiskClass, S: SurfaceBoundary, max_multiplicity: int = 3) -> Verdict:
    D = _is_single_minus_two(a, S)
    if D is not None:
        k = a.multiplicity(D)
        if k == 0:
            return Verdict(LIFTABLE, "smooth-domain", moduli="S^1")
        if k == 1:
            return Verdict(LIFTABLE, "must-smooth-node")
        lifted = DiskClass.make(dict(a.anchor), 1, {D: 1})
        return Verdict(OBSTRUCTED, certificate=pairing(a, lifted, S))
    if _single_curve_anchor(a, S) is not None and not a.spheres:
        return Verdict(LIFTABLE, "smooth-domain", moduli="S^1")
    try:
        table = classify_cycle(S, max_multiplicity=max(max_multiplicity, max((k for _, k in a.spheres), default=0)))
    except CycleError:
        return Verdict(UNESTABLISHED)
    anchor = _single_curve_anchor(a, S)
    for row in table.rows():
        if row.anchor == anchor and row.spheres == a.spheres and a.base == 1:
            return Verdict(row.status, row.detail, row.certificate)
    return Verdict(UNESTABLISHED)


# ------------------------------------------------------------
# Cycle classification
# ------------------------------------------------------------
@dataclass(frozen=True)
class ConfigurationRow:
    anchor: Optional[str]
    spheres: Tuple[Tuple[str, int], ...]
    label: str
    status: str
    maslov: int
    detail: Optional[str] = None
    certificate: Optional[int] = None


@dataclass
class CycleClassification:
    smooth: ConfigurationRow
    singular: List[ConfigurationRow] = field(default_factory=list)
    obstructed: List[ConfigurationRow] = field(default_factory=list)

    def rows(self) -> List[ConfigurationRow]:
        return [self.smooth] + self.singular + self.obstructed


def _label(spheres: Sequence[Tuple[str, int]]) -> str:
    parts = ["D^2"] + [c if k == 1 else f"{k}*{c}" for c, k in spheres]
    return " u ".join(parts)


def minus_two_chains(S: SurfaceBoundary) -> List[List[str]]:
    """Maximal runs of consecutive (-2)-curves, in cyclic order."""
    start = next((i for i, (_, k) in enumerate(S.curves) if k != -2), None)
    if start is None:
        raise CycleError("every boundary curve is a (-2)-curve; the criterion is not established there")
    rotated = S.rotated(start)
    chains, run = [], []
    for cid, k in rotated.curves + rotated.curves[:1]:
        if k == -2:
            run.append(cid)
        elif run:
            chains.append(run)
            run = []
    return chains


def _anchor_for(S: SurfaceBoundary, cid: str) -> Dict[str, int]:
    return {c: (1 if c == cid else 0) for c in S.ids}


def classify_cycle(S: SurfaceBoundary, anchors: Optional[Sequence[str]] = None,
                   max_multiplicity: int = 3) -> CycleClassification:
    """Liftable singular configurations D^2 u (chain of (-2)-spheres), plus obstructed rows.

    A configuration attaches the disk to an end curve of a connected sub-chain of
    a maximal (-2)-chain.  It is kept when it pairs non-negatively with the base
    lift beta_a + [a] of its own anchor a.  Rows beta_a + k[a] with k >= 2 are
    listed as obstructed with certificate 1 - k.
    """
    bad = [(c, k) for c, k in S.curves if k not in (-1, -2)]
    if bad:
        raise CycleError(f"curve {bad[0][0]} has self-intersection {bad[0][1]}; "
                         "only (-1)/(-2) cycles are classified")
    chains = minus_two_chains(S)
    allowed = set(anchors) if anchors is not None else None

    first_anchor = (anchors[0] if anchors else None) or min(c for c, k in S.curves if k == -1)
    smooth = DiskClass.make(_anchor_for(S, first_anchor))
    table = CycleClassification(ConfigurationRow(first_anchor, (), "D^2", LIFTABLE, maslov(smooth, S),
                                                 "smooth-domain"))

    for chain in chains:
        for lo, hi in itertools.combinations(range(len(chain) + 1), 2):
            sub = chain[lo:hi]
            ends = [sub[0]] if len(sub) == 1 else [sub[0], sub[-1]]
            for a in ends:
                if allowed is not None and a not in allowed:
                    continue
                anchor = _anchor_for(S, a)
                config = DiskClass.make(anchor, 1, {c: 1 for c in sub})
                base_lift = DiskClass.make(anchor, 1, {a: 1})
                value = pairing(config, base_lift, S)
                if value < 0:
                    log.debug("configuration %s fails the negativity test (%d)", sub, value)
                    continue
                table.singular.append(ConfigurationRow(
                    a, config.spheres, _label(config.spheres), LIFTABLE, maslov(config, S),
                    "must-smooth-node" if len(sub) == 1 else "must-smooth-nodes",
                ))
        for a in chain:
            if allowed is not None and a not in allowed:
                continue
            anchor = _anchor_for(S, a)
            base_lift = DiskClass.make(anchor, 1, {a: 1})
            for k in range(2, max_multiplicity + 1):
                config = DiskClass.make(anchor, 1, {a: k})
                table.obstructed.append(ConfigurationRow(
                    a, config.spheres, _label(config.spheres), OBSTRUCTED, maslov(config, S),
                    certificate=pairing(config, base_lift, S),
                ))
    log.info("✅ classified %d-cycle: %d liftable singular, %d obstructed",
             len(S.curves), len(table.singular), len(table.obstructed))
    return table


# ------------------------------------------------------------
# Fixtures
# ------------------------------------------------------------
def f2_boundary() -> Tuple[SurfaceBoundary, Dict[str, int]]:
    """Hirzebruch F_2: D(-2), F1(0), Dinf(2), F2(0); the disk alpha meets D once."""
    S = SurfaceBoundary.of([("D", -2), ("F1", 0), ("Dinf", 2), ("F2", 0)])
    return S, {"D": 1, "F1": 0, "Dinf": 0, "F2": 0}


def cubic_boundary() -> SurfaceBoundary:
    """Nine-curve cycle (-1, -2, -2) three times."""
    curves = []
    for j in range(1, 4):
        curves += [(f"E{j}", -1), (f"D{j}'", -2), (f"D{j}''", -2)]
    return SurfaceBoundary.of(curves)
