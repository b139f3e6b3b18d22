"""Potential functions of toric moment polytopes and their critical points.

For a FacetSystem with facets l_i(u) = <v_i, u> - tau_i the potential is

    PO = sum_i e^{<v_i, x>} T^{l_i(u)}  =  sum_i T^{-tau_i} y^{v_i},   y_j = e^{x_j} T^{u_j}.

Critical points are located numerically at sampled values T = t, one batch of
damped Newton runs per sample, in logarithmic coordinates z = log y.  Points
found at different t are linked by parameter continuation in log t and the
valuation of each coordinate is read off as the slope of log|y_j| against
log t.
"""

import itertools
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.stats import linregress

from novikov import NovikovElement, format_element, nov_eval
from polytope import FacetSystem, _coords, contains, diameter, ell

log = logging.getLogger(__name__)

# -------------------- CONFIG --------------------------------
STARTS              = int(os.getenv("CRIT_STARTS", "200"))
T_SAMPLES           = tuple(float(x) for x in os.getenv("CRIT_T_SAMPLES", "0.2,0.1,0.05").split(","))
TOLERANCE           = float(os.getenv("CRIT_TOLERANCE", "1e-10"))
MAX_ITER            = int(os.getenv("CRIT_MAX_ITER", "100"))
SEED                = int(os.getenv("CRIT_SEED", "0"))
VALUATION_TOLERANCE = float(os.getenv("VALUATION_TOLERANCE", "0.02"))
FAMILY_SAMPLES      = int(os.getenv("FAMILY_SAMPLES", "50"))

CERTIFICATE_LABEL = "potential-critical fiber (non-displaceable under the small-resolution hypothesis)"


class PotentialError(ValueError):
    pass


class FamilyError(ValueError):
    pass


@dataclass
class SolverConfig:
    seed: int = SEED
    t_samples: Tuple[float, ...] = T_SAMPLES
    starts: int = STARTS
    tolerance: float = TOLERANCE
    max_iter: int = MAX_ITER
    dedupe_tol: float = 1e-6
    nondegeneracy: float = 1e-8
    rank_tol: float = 1e-6
    valuation_tol: float = VALUATION_TOLERANCE
    max_denominator: int = 12
    max_step: float = 2.0
    continuation_steps: int = 8
    locus_step: float = 1e-3
    direction_bound: int = 2


# ------------------------------------------------------------
# 1. Potential and Laurent forms
# ------------------------------------------------------------
@dataclass(frozen=True)
class PotentialTerm:
    facet: int
    exponent: Tuple[int, ...]
    coefficient: NovikovElement


@dataclass(frozen=True)
class PotentialFunction:
    base: FacetSystem
    terms: Tuple[PotentialTerm, ...]


@dataclass(frozen=True)
class LaurentPoly:
    dim: int
    terms: Tuple[Tuple[Tuple[int, ...], NovikovElement], ...]

    @classmethod
    def from_pairs(cls, dim: int, pairs) -> "LaurentPoly":
        merged: Dict[Tuple[int, ...], NovikovElement] = {}
        for mono, coeff in pairs:
            mono = tuple(int(a) for a in mono)
            if len(mono) != dim:
                raise PotentialError(f"monomial {mono} does not have {dim} exponents")
            merged[mono] = merged[mono] + coeff if mono in merged else coeff
        kept = tuple((m, c) for m, c in sorted(merged.items()) if not c.is_zero())
        return cls(dim, kept)

    def as_dict(self) -> Dict[Tuple[int, ...], NovikovElement]:
        return dict(self.terms)


def build_potential(F: FacetSystem, truncation: Any = None) -> PotentialFunction:
    bad = [i for i, (_, tau) in enumerate(F.facets) if tau > 0]
    if bad:
        raise PotentialError(
            f"facets {[i + 1 for i in bad]} have tau > 0; translate the polytope so the origin "
            "lies inside it (e.g. polytope.translate(F, vertex)) before building the potential"
        )
    energies = [-tau for _, tau in F.facets]
    if truncation is None and F.scale is not None:
        truncation = max([2 * F.scale] + energies)
    terms = tuple(
        PotentialTerm(i, v, NovikovElement.monomial(-tau, 1, truncation))
        for i, (v, tau) in enumerate(F.facets)
    )
    return PotentialFunction(F, terms)


def laurent_form(P: PotentialFunction) -> LaurentPoly:
    return LaurentPoly.from_pairs(P.base.dim, ((t.exponent, t.coefficient) for t in P.terms))


def fiber_series(P: PotentialFunction, u) -> List[Tuple[Tuple[int, ...], Fraction]]:
    """(v_i, l_i(u)) for every term, sorted by energy."""
    if not contains(P.base, u):
        raise PotentialError(f"fiber point {tuple(str(x) for x in _coords(P.base, u))} lies outside the polytope")
    series = [(t.exponent, ell(P.base, t.facet, u)) for t in P.terms]
    return sorted(series, key=lambda item: item[1])


def gradient(L: LaurentPoly, logarithmic: bool = True) -> List[LaurentPoly]:
    """y_j dL/dy_j per component, or the plain dL/dy_j when logarithmic=False."""
    components = []
    for j in range(L.dim):
        pairs = []
        for mono, coeff in L.terms:
            if mono[j] == 0:
                continue
            shifted = mono if logarithmic else tuple(a - (1 if k == j else 0) for k, a in enumerate(mono))
            pairs.append((shifted, coeff.scale(mono[j])))
        components.append(LaurentPoly.from_pairs(L.dim, pairs))
    return components


def _monomial_text(mono: Sequence[int]) -> Tuple[List[str], List[str]]:
    num = [f"y{j + 1}" + (f"^{a}" if a > 1 else "") for j, a in enumerate(mono) if a > 0]
    den = [f"y{j + 1}" + (f"^{-a}" if a < -1 else "") for j, a in enumerate(mono) if a < 0]
    return num, den


def format_laurent(L: LaurentPoly, q_exponent: Optional[Fraction] = None) -> str:
    """Global form as a string, e.g. ``y2*y3 + Q/y1 + ...`` (Q = T^q_exponent)."""
    pieces = []
    for mono, coeff in L.terms:
        num, den = _monomial_text(mono)
        sign = "+"
        if len(coeff.terms) == 1 and coeff.terms[0][1].is_Rational:
            e, k = coeff.terms[0]
            sign = "-" if k < 0 else "+"
            base = "Q" if q_exponent is not None and e == q_exponent else ("" if e == 0 else f"T^({e})")
            mag = "" if abs(k) == 1 and (base or num) else str(abs(k))
            head = [p for p in [mag, base] + num if p]
        else:
            head = [f"({format_element(coeff, q_exponent)})"] + num
        text = "*".join(head) if head else "1"
        if den:
            text += "/" + (den[0] if len(den) == 1 else "(" + "*".join(den) + ")")
        pieces.append((sign, text))
    if not pieces:
        return "0"
    out = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
    for sign, text in pieces[1:]:
        out += f" {sign} {text}"
    return out


# ------------------------------------------------------------
# 2. Numeric evaluation
# ------------------------------------------------------------
def _numeric(L: LaurentPoly, t: float) -> Tuple[np.ndarray, np.ndarray]:
    A = np.array([m for m, _ in L.terms], dtype=float).reshape(len(L.terms), L.dim)
    c = np.array([nov_eval(coeff, t) for _, coeff in L.terms], dtype=complex)
    return A, c


def evaluate(L: LaurentPoly, y: Sequence[complex], t: float) -> complex:
    A, c = _numeric(L, t)
    y = np.asarray(y, dtype=complex)
    return complex(np.sum(c * np.prod(y[None, :] ** A, axis=1)))


def _system(A: np.ndarray, c: np.ndarray, Z: np.ndarray):
    """Terms, log-gradient and log-Hessian for a batch of points Z (S x N)."""
    E = c[None, :] * np.exp(Z @ A.T)
    G = E @ A
    H = np.einsum("sm,mj,mk->sjk", E, A, A)
    return E, G, H


def _term_scale(E: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.abs(E).max(axis=-1))


def _residual(E: np.ndarray, G: np.ndarray) -> np.ndarray:
    return np.abs(G).max(axis=1) / _term_scale(E)


def _pinv_step(H: np.ndarray, G: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    U, s, Vh = np.linalg.svd(H)
    cutoff = rcond * s[:, :1]
    s_inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    rhs = np.einsum("sji,sj->si", U.conj(), G) * s_inv
    return -np.einsum("sji,sj->si", Vh.conj(), rhs)


def _wrap(Z: np.ndarray) -> np.ndarray:
    return Z.real + 1j * np.angle(np.exp(1j * Z.imag))


def _newton(A, c, Z0, cfg: SolverConfig, window: float, polish: int = 2):
    """Damped Newton / Gauss-Newton on the log-gradient; returns (Z, residual, converged)."""
    Z = np.array(Z0, dtype=complex, copy=True)
    S = len(Z)
    converged = np.zeros(S, dtype=bool)
    alive = np.ones(S, dtype=bool)
    extra = np.zeros(S, dtype=int)
    res = np.full(S, np.inf)
    with np.errstate(all="ignore"):
        for _ in range(cfg.max_iter + polish):
            work = alive & (extra < polish)
            if not work.any():
                break
            idx = np.flatnonzero(work)
            E, G, H = _system(A, c, Z[idx])
            finite = np.isfinite(E).all(axis=1) & np.isfinite(H).all(axis=(1, 2))
            alive[idx[~finite]] = False
            idx, E, G, H = idx[finite], E[finite], G[finite], H[finite]
            if not len(idx):
                continue
            res[idx] = _residual(E, G)
            now = res[idx] < cfg.tolerance
            converged[idx[now]] = True
            extra[idx[converged[idx]]] += 1
            step = _pinv_step(H, G)
            norm = np.linalg.norm(step, axis=1)
            step *= np.minimum(1.0, cfg.max_step / np.maximum(norm, 1e-300))[:, None]
            Z[idx] = Z[idx] + step
            escaped = np.abs(Z[idx].real).max(axis=1) > window
            alive[idx[escaped]] = False
        # residual at the final iterate
        idx = np.flatnonzero(alive)
        if len(idx):
            E, G, _ = _system(A, c, Z[idx])
            res[idx] = _residual(E, G)
    ok = alive & np.isfinite(res) & (res < cfg.tolerance)
    return _wrap(Z), res, ok


# ------------------------------------------------------------
# 3. Report types
# ------------------------------------------------------------
@dataclass
class CriticalPoint:
    y: Tuple[complex, ...]
    residual: float
    hessian_det: complex
    nondegenerate: bool
    rank_deficient: bool


@dataclass
class SuspectedLocus:
    direction: Optional[Tuple[int, ...]]
    invariants: List[Tuple[Tuple[int, ...], complex]]
    witnesses: List[Tuple[complex, ...]]
    size: int
    confirmed: bool


@dataclass
class SampleResult:
    t: float
    starts: int
    converged: int
    points: List[CriticalPoint] = field(default_factory=list)
    loci: List[SuspectedLocus] = field(default_factory=list)


@dataclass
class ValuationChain:
    y: List[Tuple[complex, ...]]
    matched: List[Optional[int]]
    valuation: Tuple[float, ...]
    snapped: Optional[Tuple[str, ...]]
    r_squared: Tuple[float, ...]
    stderr: Tuple[float, ...]
    ill_conditioned: bool
    interior: bool
    snapped_interior: Optional[bool]


@dataclass
class Certificate:
    chain: int
    label: str
    valuation: Tuple[float, ...]
    snapped: Optional[Tuple[str, ...]]
    max_residual: float
    min_abs_det: float
    small_resolution: bool


@dataclass
class CriticalReport:
    t_samples: Tuple[float, ...]
    samples: List[SampleResult]
    chains: List[ValuationChain]
    certificates: List[Certificate]
    small_resolution: bool
    presentation: str = "numeric-plus-regression"

    @property
    def converged(self) -> bool:
        return all(s.converged > 0 for s in self.samples)

    def to_dict(self) -> Dict[str, Any]:
        return _jsonable(asdict(self)) | {"converged": self.converged}


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ------------------------------------------------------------
# 4. Classification helpers
# ------------------------------------------------------------
def _log_distance(z1: np.ndarray, z2: np.ndarray) -> float:
    d = z1 - z2
    d = d.real + 1j * np.angle(np.exp(1j * d.imag))
    return float(np.abs(d).max())


def _dedupe(Z: np.ndarray, tol: float) -> np.ndarray:
    Y = np.exp(Z)
    keys = np.column_stack([v for j in range(Y.shape[1]) for v in (Y[:, j].real, Y[:, j].imag)])
    order = np.lexsort(keys.T[::-1]) if len(Z) else np.array([], dtype=int)
    kept: List[np.ndarray] = []
    for i in order:
        if not any(_log_distance(Z[i], k) <= tol * max(1.0, float(np.abs(k).max())) for k in kept):
            kept.append(Z[i])
    return np.array(kept, dtype=complex).reshape(len(kept), Z.shape[1])


def _integer_direction(v: np.ndarray, max_den: int = 12) -> Optional[Tuple[int, ...]]:
    j = int(np.argmax(np.abs(v)))
    w = v / v[j]
    if np.abs(w.imag).max() > 1e-6:
        return None
    fracs = [Fraction(float(x)).limit_denominator(max_den) for x in w.real]
    if any(abs(float(f) - x) > 1e-6 for f, x in zip(fracs, w.real)):
        return None
    lcm = math.lcm(*(f.denominator for f in fracs))
    ints = [int(f * lcm) for f in fracs]
    g = math.gcd(*ints)
    ints = [x // g for x in ints]
    first = next(x for x in ints if x != 0)
    return tuple(x if first > 0 else -x for x in ints)


def _orthogonal_lattice(d: Tuple[int, ...]) -> List[Tuple[int, ...]]:
    basis = []
    for vec in sp.Matrix([list(d)]).nullspace():
        den = math.lcm(*(int(sp.fraction(x)[1]) for x in vec))
        ints = [int(x * den) for x in vec]
        g = math.gcd(*ints)
        basis.append(tuple(x // g for x in ints))
    return basis


def _confirm_locus(A, c, z, v, cfg, window) -> Tuple[bool, np.ndarray]:
    stepped = (z + cfg.locus_step * v)[None, :]
    Z, _, ok = _newton(A, c, stepped, cfg, window)
    moved = _log_distance(Z[0], z) > cfg.locus_step / 2
    return bool(ok[0] and moved), Z[0]


def _third(A: np.ndarray, E: np.ndarray) -> np.ndarray:
    return np.einsum("m,mj,mk,ml->jkl", E, A, A, A)


def _polish_singular(A, c, z: np.ndarray, cfg: SolverConfig) -> Optional[np.ndarray]:
    """Gauss-Newton on gradient and Hessian together, converging quadratically where the Hessian vanishes.

    Plain Newton stalls about sqrt(tolerance) away from such a point.  Returns None when z is not near one.
    """
    dim = len(z)
    w = np.array(z, dtype=complex, copy=True)
    with np.errstate(all="ignore"):
        for _ in range(cfg.max_iter):
            E = c * np.exp(A @ w)
            H = np.einsum("m,mj,mk->jk", E, A, A)
            F = np.concatenate([E @ A, H.ravel()])
            J = np.vstack([H, _third(A, E).reshape(dim * dim, dim)])
            if not (np.isfinite(F).all() and np.isfinite(J).all()):
                return None
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
            w = w + step
            if np.linalg.norm(step) <= 1e-14 * max(1.0, float(np.linalg.norm(w))):
                break
        E, G, H = _system(A, c, w[None, :])
    if not (np.isfinite(G).all() and np.isfinite(H).all()):
        return None
    stacked = max(float(np.abs(G).max()), float(np.abs(H).max())) / float(_term_scale(E)[0])
    if stacked >= cfg.tolerance or _log_distance(w, z) > cfg.locus_step:
        return None
    return _wrap(w[None, :])[0]


def _lattice_directions(dim: int, bound: int):
    for d in itertools.product(range(-bound, bound + 1), repeat=dim):
        if any(d) and math.gcd(*d) == 1 and next(x for x in d if x) > 0:
            yield np.array(d, dtype=float)


def _tangent_cone(A, c, z: np.ndarray, kernel: np.ndarray, cfg: SolverConfig) -> List[np.ndarray]:
    """Lattice directions d in ker H with T[d, d] in range H: tangents of critical curves through z."""
    E, _, H = _system(A, c, z[None, :])
    E, H = E[0], H[0]
    scale = float(_term_scale(E))
    U, s, _ = np.linalg.svd(H)
    R = U[:, s >= cfg.rank_tol * scale]
    T = _third(A, E)
    found = []
    for d in _lattice_directions(len(z), cfg.direction_bound):
        v = d / np.linalg.norm(d)
        if np.linalg.norm(v - kernel.T @ (kernel.conj() @ v)) > 1e-6:
            continue
        q = np.einsum("jkl,k,l->j", T, v, v)
        q = q - R @ (R.conj().T @ q)
        if np.linalg.norm(q) <= cfg.rank_tol * scale:
            found.append(v.astype(complex))
    return found


def _group_loci(A, c, flagged: List[Tuple[np.ndarray, np.ndarray]], cfg,
                window) -> Tuple[List[SuspectedLocus], List[int]]:
    """Group rank-deficient points into loci; also return the points no confirmed locus took."""
    loci: List[SuspectedLocus] = []
    homeless: List[int] = []
    for idx, (z, kernel) in enumerate(flagged):
        y = tuple(complex(x) for x in np.exp(z))
        directions = _tangent_cone(A, c, z, kernel, cfg) if len(kernel) > 1 else [kernel[0]]
        placed = False
        for v in directions:
            confirmed, other = _confirm_locus(A, c, z, v, cfg, window)
            if not confirmed:
                continue
            placed = True
            direction = _integer_direction(v, cfg.max_denominator)
            invariants = []
            if direction is not None:
                invariants = [(b, complex(np.exp(np.dot(b, z)))) for b in _orthogonal_lattice(direction)]
            home = None
            if direction is not None:
                for locus in loci:
                    if locus.direction == direction and all(
                        abs(val - ref) <= 1e-6 * max(1.0, abs(ref))
                        for (_, val), (_, ref) in zip(invariants, locus.invariants)
                    ):
                        home = locus
                        break
            if home is None:
                loci.append(SuspectedLocus(direction, invariants,
                                           [y, tuple(complex(x) for x in np.exp(other))], 1, True))
            else:
                home.size += 1
                if len(home.witnesses) < 5:
                    home.witnesses.append(y)
        if not placed:
            loci.append(SuspectedLocus(None, [], [y], 1, False))
            homeless.append(idx)
    return loci, homeless


def _classify(A, c, Z: np.ndarray, cfg: SolverConfig):
    """(det, nondegenerate, rank_deficient, kernel rows) per point, against the size of the terms."""
    E, G, H = _system(A, c, Z)
    scale = _term_scale(E)
    out = []
    for k in range(len(Z)):
        det = complex(np.linalg.det(H[k]))
        _, s, Vh = np.linalg.svd(H[k])
        small = s < cfg.rank_tol * scale[k]
        nondeg = abs(det) > cfg.nondegeneracy * scale[k] ** Z.shape[1]
        deficient = bool(small.any() or not nondeg)
        kernel = Vh[small].conj() if small.any() else Vh[-1:].conj()
        out.append((det, bool(nondeg and not deficient), deficient, kernel))
    return out


# ------------------------------------------------------------
# 5. Critical points
# ------------------------------------------------------------
def _solve_sample(A, c, t, dim, diam, cfg, rng) -> Tuple[SampleResult, List[Tuple[int, np.ndarray]]]:
    span = 2.0 * max(diam, 0.5) * abs(math.log(t))
    window = 2.0 * span + 10.0
    moduli = rng.uniform(-span, span, size=(cfg.starts, dim))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(cfg.starts, dim))
    Z, res, ok = _newton(A, c, moduli + 1j * phases, cfg, window)
    kept = _dedupe(Z[ok], cfg.dedupe_tol)
    sample = SampleResult(t=t, starts=cfg.starts, converged=int(ok.sum()))
    if not len(kept):
        log.warning("⚠️ no converged critical point at t=%g", t)
        return sample, []

    E, G, _ = _system(A, c, kept)
    residuals = _residual(E, G)
    singular = []
    isolated_nondeg = []
    for k, (det, nondeg, deficient, _) in enumerate(_classify(A, c, kept, cfg)):
        if deficient:
            polished = _polish_singular(A, c, kept[k], cfg)
            singular.append(kept[k] if polished is None else polished)
            continue
        sample.points.append(CriticalPoint(
            y=tuple(complex(x) for x in np.exp(kept[k])),
            residual=float(residuals[k]),
            hessian_det=det,
            nondegenerate=nondeg,
            rank_deficient=False,
        ))
        isolated_nondeg.append((len(sample.points) - 1, kept[k]))

    if singular:
        S = _dedupe(np.array(singular, dtype=complex), math.sqrt(cfg.tolerance))
        classes = _classify(A, c, S, cfg)
        # points where several families cross come first so they head their loci
        order = sorted(range(len(S)), key=lambda k: -len(classes[k][3]))
        flagged = [(S[k], classes[k][3]) for k in order]
        sample.loci, homeless = _group_loci(A, c, flagged, cfg, window)
        E1, G1, _ = _system(A, c, np.array([z for z, _ in flagged]))
        singular_res = _residual(E1, G1)
        for j, k in enumerate(order):
            # a vanishing Hessian, or a rank drop that no family explains
            if len(classes[k][3]) > 1 or j in homeless:
                sample.points.append(CriticalPoint(tuple(complex(x) for x in np.exp(S[k])),
                                                   float(singular_res[j]), classes[k][0], False, True))
    log.info("✅ t=%g: %d converged, %d isolated, %d suspected loci",
             t, sample.converged, len(sample.points), sum(l.confirmed for l in sample.loci))
    return sample, isolated_nondeg


def _track(L: LaurentPoly, z: np.ndarray, t_from: float, t_to: float, cfg: SolverConfig,
           window: float) -> Optional[np.ndarray]:
    """Continue a critical point from t_from to t_to in log t."""
    current = z[None, :]
    for s in np.linspace(math.log(t_from), math.log(t_to), cfg.continuation_steps + 1)[1:]:
        A, c = _numeric(L, math.exp(s))
        current, _, ok = _newton(A, c, current, cfg, window)
        if not ok[0]:
            return None
    return current[0]


def _adopt(L: LaurentPoly, sample: SampleResult, isolated: List[Tuple[int, np.ndarray]],
           z: np.ndarray, cfg: SolverConfig) -> Optional[int]:
    """Add a point reached by continuation that the multistart missed at this t."""
    A, c = _numeric(L, sample.t)
    E, G, H = _system(A, c, z[None, :])
    residual = float(_residual(E, G)[0])
    det, nondeg, deficient, _ = _classify(A, c, z[None, :], cfg)[0]
    if residual >= cfg.tolerance or not nondeg or deficient:
        return None
    sample.points.append(CriticalPoint(tuple(complex(x) for x in np.exp(z)), residual, det, True, False))
    isolated.append((len(sample.points) - 1, z))
    log.debug("continuation added a critical point at t=%g", sample.t)
    return len(sample.points) - 1


def _regress(t_samples: Sequence[float], ys: List[Tuple[complex, ...]], cfg: SolverConfig):
    x = np.log(np.asarray(t_samples, dtype=float))
    Y = np.log(np.abs(np.array(ys, dtype=complex)))
    slopes, r2s, errs = [], [], []
    ill = len(set(np.round(x, 12))) < 2
    for j in range(Y.shape[1]):
        if ill:
            slopes.append(float("nan")); r2s.append(float("nan")); errs.append(float("inf"))
            continue
        fit = linregress(x, Y[:, j])
        fitted = fit.intercept + fit.slope * x
        ss_res = float(np.sum((Y[:, j] - fitted) ** 2))
        ss_tot = float(np.sum((Y[:, j] - Y[:, j].mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 1e-14 else (1.0 if ss_res < 1e-14 else 0.0)
        stderr = float(fit.stderr) if len(x) > 2 else 0.0
        slopes.append(float(fit.slope)); r2s.append(r2); errs.append(stderr)
    ill = ill or any(e > cfg.valuation_tol for e in errs)
    return tuple(slopes), tuple(r2s), tuple(errs), ill


def _interior(F: FacetSystem, u: Sequence[float], tol: float) -> bool:
    # strict interiority that survives a perturbation of u by tol in each coordinate
    return all(float(ell(F, i, u)) > tol * sum(abs(x) for x in v) for i, (v, _) in enumerate(F.facets))


def _snap(u: Sequence[float], cfg: SolverConfig) -> Optional[Tuple[Fraction, ...]]:
    if any(not math.isfinite(x) for x in u):
        return None
    snapped = tuple(Fraction(x).limit_denominator(cfg.max_denominator) for x in u)
    if any(abs(float(s) - x) > cfg.valuation_tol for s, x in zip(snapped, u)):
        return None
    return snapped


def find_critical_points(P: PotentialFunction, t_samples: Optional[Sequence[float]] = None,
                         cfg: Optional[SolverConfig] = None) -> CriticalReport:
    cfg = cfg or SolverConfig()
    ts = tuple(float(t) for t in (t_samples if t_samples is not None else cfg.t_samples))
    if len(ts) < 2:
        raise PotentialError("valuation regression needs at least two t samples")
    if any(not 0.0 < t < 1.0 for t in ts):
        raise PotentialError(f"t samples {ts} must lie in (0, 1)")

    L = laurent_form(P)
    dim = P.base.dim
    diam = diameter(P.base)
    log.info("🟢 critical points: %d terms, dim %d, t=%s, %d starts", len(L.terms), dim, ts, cfg.starts)

    samples: List[SampleResult] = []
    # per sample: (index into sample.points, log coordinates) of nondegenerate points
    isolated: List[List[Tuple[int, np.ndarray]]] = []
    for k, t in enumerate(ts):
        A, c = _numeric(L, t)
        rng = np.random.default_rng([cfg.seed, k])
        sample, nondeg = _solve_sample(A, c, t, dim, diam, cfg, rng)
        samples.append(sample)
        isolated.append(nondeg)

    window = 4.0 * max(diam, 0.5) * max(abs(math.log(t)) for t in ts) + 10.0
    chains: List[ValuationChain] = []
    claimed = [set() for _ in ts]
    for k0 in range(len(ts)):
        j0 = 0
        while j0 < len(isolated[k0]):
            i0, z0 = isolated[k0][j0]
            j0 += 1
            if i0 in claimed[k0]:
                continue
            path: List[Optional[np.ndarray]] = [None] * len(ts)
            path[k0] = z0
            for k in list(range(k0 + 1, len(ts))):
                prev = path[k - 1]
                path[k] = None if prev is None else _track(L, prev, ts[k - 1], ts[k], cfg, window)
            for k in range(k0 - 1, -1, -1):
                nxt = path[k + 1]
                path[k] = None if nxt is None else _track(L, nxt, ts[k + 1], ts[k], cfg, window)
            if any(p is None for p in path):
                log.warning("⚠️ continuation lost a critical point seeded at t=%g", ts[k0])
                continue
            matched: List[Optional[int]] = []
            for k, z in enumerate(path):
                hit = next((i for i, w in isolated[k] if _log_distance(z, w) <= 1e3 * cfg.dedupe_tol), None)
                if hit is None:
                    hit = _adopt(L, samples[k], isolated[k], z, cfg)
                matched.append(hit)
                if hit is not None:
                    claimed[k].add(hit)
            ys = [tuple(complex(x) for x in np.exp(z)) for z in path]
            slopes, r2s, errs, ill = _regress(ts, ys, cfg)
            snapped = _snap(slopes, cfg)
            interior = (not ill) and _interior(P.base, slopes, cfg.valuation_tol)
            chains.append(ValuationChain(
                y=ys, matched=matched, valuation=slopes,
                snapped=None if snapped is None else tuple(str(s) for s in snapped),
                r_squared=r2s, stderr=errs, ill_conditioned=ill, interior=interior,
                snapped_interior=None if snapped is None else contains(P.base, snapped, strict=True),
            ))

    report = CriticalReport(ts, samples, chains, [], P.base.small_resolution)
    for idx, chain in enumerate(chains):
        cert = _certify(P, ts, chain, idx, cfg)
        if cert is not None:
            report.certificates.append(cert)
    log.info("✅ %d valuation chains, %d certificates", len(chains), len(report.certificates))
    return report


def _point_checks(P: PotentialFunction, ts, ys, cfg: SolverConfig) -> Tuple[float, float, bool]:
    L = laurent_form(P)
    worst_res, worst_det, nondeg = 0.0, math.inf, True
    for t, y in zip(ts, ys):
        A, c = _numeric(L, t)
        z = np.log(np.array(y, dtype=complex))[None, :]
        E, G, _ = _system(A, c, z)
        worst_res = max(worst_res, float(_residual(E, G)[0]))
        det, point_nondeg, _, _ = _classify(A, c, z, cfg)[0]
        worst_det = min(worst_det, abs(det))
        nondeg = nondeg and point_nondeg
    return worst_res, worst_det, nondeg


def _certify(P, ts, chain: ValuationChain, idx: int, cfg: SolverConfig) -> Optional[Certificate]:
    if chain.ill_conditioned or not chain.interior:
        return None
    worst_res, worst_det, nondeg = _point_checks(P, ts, chain.y, cfg)
    if worst_res >= cfg.tolerance or not nondeg:
        return None
    return Certificate(idx, CERTIFICATE_LABEL, chain.valuation, chain.snapped, worst_res, worst_det,
                       P.base.small_resolution)


def recheck_certificate(P: PotentialFunction, report: CriticalReport, cert: Certificate,
                        cfg: Optional[SolverConfig] = None) -> bool:
    """Fresh pass over a certificate: residual, nondegeneracy, robust interiority."""
    cfg = cfg or SolverConfig()
    chain = report.chains[cert.chain]
    worst_res, _, nondeg = _point_checks(P, report.t_samples, chain.y, cfg)
    slopes, _, _, ill = _regress(report.t_samples, chain.y, cfg)
    return bool(worst_res < cfg.tolerance and nondeg and not ill
                and _interior(P.base, slopes, cfg.valuation_tol))


# ------------------------------------------------------------
# 6. Closed-form families of critical points
# ------------------------------------------------------------
@dataclass
class FamilyReport:
    name: str
    free: Tuple[str, ...]
    components: Dict[str, str]
    t: float
    samples: int
    max_residual: float
    tolerance: float
    passed: bool


def verify_family(P: PotentialFunction, family: Mapping[str, str], samples: int = FAMILY_SAMPLES,
                  free: Sequence[str] = ("y1",), t: float = 0.1, seed: int = SEED,
                  tolerance: float = 1e-10, name: str = "family") -> FamilyReport:
    """Sample a closed-form family y(params, Q) and report its worst gradient residual."""
    dim = P.base.dim
    if P.base.scale is None:
        raise FamilyError("closed-form families need a polytope scale lambda for Q = T^lambda")
    names = [f"y{j + 1}" for j in range(dim)]
    unknown = set(family) - set(names)
    if unknown:
        raise FamilyError(f"family names unknown coordinates {sorted(unknown)}")
    missing = [n for n in names if n not in family and n not in free]
    if missing:
        raise FamilyError(f"coordinates {missing} are neither free nor given by the family")

    params = sp.symbols(list(free))
    Q = sp.Symbol("Q")
    local = {str(p): p for p in params} | {"Q": Q}
    exprs = []
    for n in names:
        if n in family:
            try:
                exprs.append(sp.sympify(family[n], locals=local))
            except (sp.SympifyError, SyntaxError) as exc:
                raise FamilyError(f"cannot parse family component {n} = {family[n]!r}: {exc}") from exc
        else:
            exprs.append(local[n])
    fn = sp.lambdify(list(params) + [Q], exprs, modules="numpy")

    L = laurent_form(P)
    A, c = _numeric(L, t)
    q_value = t ** float(P.base.scale)
    rng = np.random.default_rng([seed, 7])
    worst = 0.0
    for _ in range(samples):
        moduli = np.exp(rng.uniform(-1.0, 1.0, len(params)) * abs(math.log(t)))
        values = moduli * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, len(params)))
        y = np.array([complex(v) for v in fn(*values, q_value)], dtype=complex)
        for n, v in zip(names, y):
            if not np.isfinite(v) or abs(v) < 1e-300:
                raise FamilyError(f"family component {n} evaluates to 0 or a non-finite value")
        E, G, _ = _system(A, c, np.log(y)[None, :])
        worst = max(worst, float(_residual(E, G)[0]))
    return FamilyReport(name, tuple(free), dict(family), t, samples, worst, tolerance, worst < tolerance)
