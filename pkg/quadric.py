"""Moment maps and Gelfand-Cetlin values on quadric hypersurfaces.

Points are homogeneous coordinates x in C^n on a projective space carrying
lambda times the Fubini-Study form.  Everything here is invariant under
x -> c*x.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

log = logging.getLogger(__name__)

CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class ProjPoint:
    x: Tuple[complex, ...]
    lam: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"scale lambda={self.lam} must be positive")
        if not any(abs(c) > 0 for c in self.x):
            raise ValueError("homogeneous coordinates must not all vanish")

    @classmethod
    def of(cls, x: Sequence[complex], lam: float = 1.0) -> "ProjPoint":
        return cls(tuple(complex(c) for c in x), float(lam))

    @property
    def n(self) -> int:
        return len(self.x)

    def array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=complex)

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.array()) ** 2))


@dataclass(frozen=True)
class GCValues:
    stage: int
    values: Tuple[float, ...]
    labels: Tuple[str, ...]


def moment_nu(p: ProjPoint, n: Optional[int] = None) -> Tuple[float, ...]:
    """(nu_2, ..., nu_{n-1}) of the torus action in the rotated coordinates."""
    n = n or p.n
    x = p.array()[:n]
    norm2 = p.norm2()
    nu2 = -2.0 * p.lam * float(np.imag(x[0] * np.conj(x[1]))) / norm2
    mass = np.cumsum(np.abs(x) ** 2) * p.lam / norm2
    return (nu2,) + tuple(float(mass[k - 1]) for k in range(3, n))


def so_moment(p: ProjPoint, k: int) -> np.ndarray:
    """Real skew k x k block: M_ij = sqrt(-1)*lam*(x_i conj(x_j) - conj(x_i) x_j) / |x|^2."""
    if not 2 <= k <= p.n:
        raise ValueError(f"block size k={k} must lie in 2..{p.n}")
    x = p.array()[:k]
    outer = np.outer(x, np.conj(x))
    return -2.0 * p.lam * outer.imag / p.norm2()


def so_moment_exact(x: Sequence, lam=1, k: Optional[int] = None) -> sp.Matrix:
    """Exact so_moment for Gaussian-rational coordinates."""
    xs = [sp.nsimplify(c) for c in x]
    k = k or len(xs)
    norm2 = sp.expand(sum(c * sp.conjugate(c) for c in xs))
    lam = sp.nsimplify(lam)
    return sp.Matrix(k, k, lambda i, j: sp.simplify(
        sp.expand(sp.I * lam * (xs[i] * sp.conjugate(xs[j]) - sp.conjugate(xs[i]) * xs[j]) / norm2)))


def nu2_exact(x: Sequence, lam=1) -> sp.Expr:
    xs = [sp.nsimplify(c) for c in x]
    norm2 = sp.expand(sum(c * sp.conjugate(c) for c in xs))
    prod = sp.expand(xs[0] * sp.conjugate(xs[1]))
    return sp.simplify(sp.expand(-2 * sp.nsimplify(lam) * sp.im(prod) / norm2))


def lambda1(p: ProjPoint, k: int) -> float:
    """Largest eigenvalue lambda_1^(k) of the k x k block, via the closed form.

    For k = 2 this is the signed entry M_12, which equals nu_2.
    """
    if k == 2:
        return float(so_moment(p, 2)[0, 1])
    if not 3 <= k <= p.n:
        raise ValueError(f"stage k={k} must lie in 3..{p.n}")
    x = p.array()[:k]
    norm2 = p.norm2()
    mass = p.lam * float(np.sum(np.abs(x) ** 2)) / norm2
    square = p.lam * complex(np.sum(x ** 2)) / norm2
    value = mass ** 2 - abs(square) ** 2
    if value < -CLAMP_TOL * max(1.0, p.lam ** 2):
        raise ValueError(f"closed form for lambda_1^({k}) is negative ({value:.3e})")
    return float(np.sqrt(max(value, 0.0)))


def lambda1_oracle(p: ProjPoint, k: int) -> float:
    """Largest eigenvalue of the Hermitian matrix sqrt(-1)*M."""
    return float(np.linalg.eigvalsh(1j * so_moment(p, k))[-1])


def gc_values(p: ProjPoint, n: Optional[int] = None, k: Optional[int] = None) -> GCValues:
    """Phi_k = (lambda_1^(2), ..., lambda_1^(k-1), nu_k, ..., nu_{n-1})."""
    n = n or p.n
    k = n if k is None else k
    if not 3 <= k <= n:
        raise ValueError(f"stage k={k} must lie in 3..{n}")
    nu = moment_nu(p, n)
    values = [lambda1(p, j) for j in range(2, k)] + [nu[j - 2] for j in range(k, n)]
    labels = [f"lambda^({j})_1" for j in range(2, k)] + [f"nu_{j}" for j in range(k, n)]
    return GCValues(k, tuple(float(v) for v in values), tuple(labels))


def quadric_defect(p: ProjPoint, rank: Optional[int] = None) -> float:
    """|x_1^2 + ... + x_rank^2| / |x|^2."""
    rank = rank or p.n
    x = p.array()[:rank]
    return abs(complex(np.sum(x ** 2))) / p.norm2()


def sample_quadric_point(rng: np.random.Generator, n: int, rank: Optional[int] = None,
                         lam: float = 1.0, max_tries: int = 100) -> ProjPoint:
    """Random point of {x_1^2 + ... + x_rank^2 = 0} in P^(n-1), solving for x_rank."""
    rank = rank or n
    if not 2 <= rank <= n:
        raise ValueError(f"rank={rank} must lie in 2..{n}")
    for _ in range(max_tries):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x[rank - 1] = np.sqrt(-np.sum(x[:rank - 1] ** 2))
        if abs(x[rank - 1]) > 1e-3 * np.linalg.norm(x):
            return ProjPoint.of(x, lam)
    raise RuntimeError(f"could not sample a non-degenerate quadric point in {max_tries} tries")


# ------------------------------------------------------------
# Segre embedding and the real structure on P^3
# ------------------------------------------------------------
def segre(z: Sequence[complex], w: Sequence[complex], lam: float = 1.0) -> ProjPoint:
    z0, z1 = (complex(c) for c in z)
    w0, w1 = (complex(c) for c in w)
    x = (
        z0 * w0 - z1 * w1,
        1j * (z0 * w1 - z1 * w0),
        z0 * w1 + z1 * w0,
        1j * (z0 * w0 + z1 * w1),
    )
    return ProjPoint.of(x, lam)


def involution(p: ProjPoint) -> ProjPoint:
    if p.n != 4:
        raise ValueError("the involution acts on P^3")
    x = np.conj(p.array())
    x[3] = -x[3]
    return ProjPoint.of(x, p.lam)


def projectively_equal(p: ProjPoint, q: ProjPoint, tol: float = 1e-10) -> bool:
    a, b = p.array(), q.array()
    if a.shape != b.shape:
        return False
    j = int(np.argmax(np.abs(a)))
    if abs(b[j]) < tol * np.linalg.norm(b):
        return False
    return bool(np.abs(a / a[j] - b / b[j]).max() <= tol)


def antidiagonal_points(rng: np.random.Generator, count: int, lam: float = 1.0) -> List[ProjPoint]:
    """Segre images of (z, conj(z)), the real locus L of the involution."""
    out = []
    for _ in range(count):
        z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        out.append(segre(z, np.conj(z), lam))
    return out
