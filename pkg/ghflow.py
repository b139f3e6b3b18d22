"""Gradient-Hamiltonian flow of the pencil f = -(x1^2 + x2^2 + x3^2) / x4^2 on P^3.

Everything lives in the affine chart x4 = sqrt(-1), where f = x1^2 + x2^2 + x3^2
and the Kaehler metric is lam * d d^c log(1 + |x|^2).  The integrator works on
R^6 = (Re x, Im x); the field is V = -grad Re f / |grad Re f|^2, so Re f is a
clock running backwards at unit speed and Im f is conserved.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import RK45

from quadric import ProjPoint

log = logging.getLogger(__name__)

# -------------------- CONFIG --------------------------------
FLOW_RTOL      = float(os.getenv("FLOW_RTOL", "1e-9"))
FLOW_GUARD     = float(os.getenv("FLOW_GUARD", "1e-6"))
FLOW_HORIZON   = float(os.getenv("FLOW_HORIZON", "1e3"))
FLOW_DRIFT_TOL = float(os.getenv("FLOW_DRIFT_TOL", "1e-6"))


class FlowError(RuntimeError):
    pass


class SingularFiber(FlowError):
    """|grad Re f| fell below the guard."""


@dataclass
class FlowConfig:
    lam: float = 1.0
    rtol: float = FLOW_RTOL
    atol: float = FLOW_RTOL
    guard: float = FLOW_GUARD
    horizon: float = FLOW_HORIZON
    drift_tol: float = FLOW_DRIFT_TOL
    clock_tol: float = 1e-6
    max_step: float = 0.01
    min_step: float = 1e-14


@dataclass(frozen=True)
class ChartPoint:
    x: Tuple[complex, complex, complex]
    s: float = 0.0

    @classmethod
    def of(cls, x: Sequence[complex], s: float = 0.0) -> "ChartPoint":
        if len(x) != 3:
            raise ValueError(f"chart points have 3 coordinates, got {len(x)}")
        return cls(tuple(complex(c) for c in x), float(s))

    def array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=complex)


def to_chart(p: ProjPoint) -> ChartPoint:
    if p.n != 4:
        raise ValueError("the flow lives on P^3")
    x = p.array()
    if abs(x[3]) < 1e-12 * np.linalg.norm(x):
        raise ValueError("point lies on the chart boundary x4 = 0")
    return ChartPoint.of(x[:3] * (1j / x[3]))


def from_chart(c: ChartPoint, lam: float = 1.0) -> ProjPoint:
    return ProjPoint.of(list(c.x) + [1j], lam)


def _real(x: np.ndarray) -> np.ndarray:
    return np.concatenate([x.real, x.imag])


def _complex(v: np.ndarray) -> np.ndarray:
    return v[:3] + 1j * v[3:]


# ------------------------------------------------------------
# 1. Function, metric, gradients
# ------------------------------------------------------------
def f_value(p) -> complex:
    x = p.array() if isinstance(p, ChartPoint) else np.asarray(p, dtype=complex)
    return complex(np.sum(x ** 2))


def fs_metric(p, lam: float = 1.0) -> np.ndarray:
    """h_ab = lam * (delta_ab / (1+|x|^2) - conj(x_a) x_b / (1+|x|^2)^2)."""
    x = p.array() if isinstance(p, ChartPoint) else np.asarray(p, dtype=complex)
    rho = 1.0 + float(np.sum(np.abs(x) ** 2))
    return lam * (np.eye(3) / rho - np.outer(np.conj(x), x) / rho ** 2)


def real_metric(x: np.ndarray, lam: float = 1.0) -> np.ndarray:
    """6 x 6 form of Re h on (Re v, Im v)."""
    h = fs_metric(x, lam)
    P, S = h.real, h.imag
    return np.block([[P, S], [-S, P]])


def euclidean_gradient(x: np.ndarray) -> np.ndarray:
    """d Re f in R^6 coordinates."""
    fp = 2.0 * x
    return np.concatenate([fp.real, -fp.imag])


def real_gradient(x: np.ndarray, lam: float = 1.0) -> np.ndarray:
    return np.linalg.solve(real_metric(x, lam), euclidean_gradient(x))


def grad_norm(p, lam: float = 1.0) -> float:
    x = p.array() if isinstance(p, ChartPoint) else np.asarray(p, dtype=complex)
    return float(np.sqrt(euclidean_gradient(x) @ real_gradient(x, lam)))


def gradient_re_f(p, lam: float = 1.0) -> np.ndarray:
    x = p.array() if isinstance(p, ChartPoint) else np.asarray(p, dtype=complex)
    return _complex(real_gradient(x, lam))


def hamiltonian_field(p, lam: float = 1.0) -> np.ndarray:
    """xi_{Im f} with i_xi omega = -d Im f; for holomorphic f this is -grad Re f."""
    return -gradient_re_f(p, lam)


def gh_field(p, lam: float = 1.0, guard: float = FLOW_GUARD) -> np.ndarray:
    x = p.array() if isinstance(p, ChartPoint) else np.asarray(p, dtype=complex)
    e = euclidean_gradient(x)
    grad = real_gradient(x, lam)
    norm2 = float(e @ grad)
    if np.sqrt(max(norm2, 0.0)) <= guard:
        raise SingularFiber(f"|grad Re f| = {np.sqrt(max(norm2, 0.0)):.3e} at {x}")
    return -_complex(grad) / norm2


# ------------------------------------------------------------
# 2. Integration
# ------------------------------------------------------------
@dataclass
class FlowSample:
    s: float
    x: Tuple[complex, complex, complex]
    f: complex
    grad_norm: float
    field_norm: float
    step: float


@dataclass
class Trajectory:
    samples: List[FlowSample] = field(default_factory=list)
    reason: str = "duration"
    reverse: bool = False
    message: Optional[str] = None

    @property
    def end(self) -> ChartPoint:
        last = self.samples[-1]
        return ChartPoint.of(last.x, last.s)

    @property
    def gap(self) -> float:
        """Distance of the endpoint from the singular point (0, 0, 0)."""
        return float(np.linalg.norm(self.end.array()))

    @property
    def im_drift(self) -> float:
        values = [s.f.imag for s in self.samples]
        return float(max(values) - min(values)) if values else 0.0


def _sample(s: float, x: np.ndarray, cfg: FlowConfig, step: float) -> FlowSample:
    g = grad_norm(x, cfg.lam)
    return FlowSample(float(s), tuple(complex(c) for c in x), f_value(x), g,
                      1.0 / g if g > 0 else float("inf"), float(step))


def _rhs(cfg: FlowConfig, sign: float):
    def rhs(_s, v):
        x = _complex(v)
        e = euclidean_gradient(x)
        with np.errstate(all="ignore"):
            grad = real_gradient(x, cfg.lam)
            return -sign * grad / float(e @ grad)
    return rhs


def integrate(p0: ChartPoint, duration: float, cfg: Optional[FlowConfig] = None,
              reverse: bool = False) -> Trajectory:
    """Adaptive RK45 along V (or -V when reverse) for flow time ``duration``."""
    cfg = cfg or FlowConfig()
    if duration < 0:
        raise ValueError(f"duration={duration} must be non-negative")
    x0 = p0.array()
    gh_field(x0, cfg.lam, cfg.guard)
    sign = -1.0 if reverse else 1.0
    traj = Trajectory(samples=[_sample(p0.s, x0, cfg, 0.0)], reverse=reverse)
    if duration == 0:
        return traj

    s_end = p0.s + duration
    im0 = f_value(x0).imag
    rhs = _rhs(cfg, sign)
    max_step = cfg.max_step
    solver = RK45(rhs, p0.s, _real(x0), s_end, rtol=cfg.rtol, atol=cfg.atol, max_step=max_step)
    log.debug("⏳ flow from %s for %g (reverse=%s)", p0.x, duration, reverse)

    while solver.status == "running":
        s_prev, y_prev = solver.t, solver.y.copy()
        x_prev = _complex(y_prev)
        if grad_norm(x_prev, cfg.lam) <= cfg.guard:
            traj.reason = "singular_fiber"
            break
        message = solver.step()
        if solver.status == "failed":
            raise FlowError(f"step-size underflow at s={s_prev:.6g}: {message}")
        x = _complex(solver.y)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > cfg.horizon:
            traj.reason = "chart_horizon"
            traj.message = f"left the chart window |x| <= {cfg.horizon:g} after s={s_prev:.6g}"
            break
        ds = solver.t - s_prev
        clock = (f_value(x).real - f_value(x_prev).real) + sign * ds
        if abs(clock) >= cfg.clock_tol:
            max_step = ds / 2.0
            if max_step < cfg.min_step:
                raise FlowError(f"step-size underflow at s={s_prev:.6g}: Re f clock error {clock:.3e}")
            solver = RK45(rhs, s_prev, y_prev, s_end, rtol=cfg.rtol, atol=cfg.atol, max_step=max_step)
            continue
        traj.samples.append(_sample(solver.t, x, cfg, ds))
        if abs(f_value(x).imag - im0) > cfg.drift_tol:
            traj.reason = "drift"
            traj.message = f"Im f drifted by {abs(f_value(x).imag - im0):.3e} at s={solver.t:.6g}"
            break

    if traj.reason != "duration":
        log.warning("⚠️ flow stopped early (%s) at s=%.6g, gap %.3e", traj.reason, traj.end.s, traj.gap)
    return traj


@dataclass
class TransportResult:
    start: ChartPoint
    trajectory: Optional[Trajectory]
    error: Optional[str] = None


def transport_points(points: Sequence[ChartPoint], duration: float, cfg: Optional[FlowConfig] = None,
                     reverse: bool = False) -> List[TransportResult]:
    cfg = cfg or FlowConfig()
    results = []
    for i, p in enumerate(points):
        try:
            results.append(TransportResult(p, integrate(p, duration, cfg, reverse)))
        except (FlowError, ValueError) as exc:
            log.warning("⚠️ transport of point %d failed: %s", i, exc)
            results.append(TransportResult(p, None, str(exc)))
    return results
