import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from ghflow import (
    ChartPoint,
    FlowConfig,
    FlowError,
    SingularFiber,
    euclidean_gradient,
    f_value,
    fs_metric,
    from_chart,
    gh_field,
    grad_norm,
    hamiltonian_field,
    integrate,
    real_gradient,
    real_metric,
    to_chart,
    transport_points,
)
from quadric import ProjPoint, antidiagonal_points, gc_values, moment_nu

START = ChartPoint.of([0.8 + 0.3j, -0.4 + 0.2j, 0.5 - 0.1j])


def random_chart(rng):
    return rng.standard_normal(3) + 1j * rng.standard_normal(3)


def as_real(x):
    return np.concatenate([x.real, x.imag])


# ---- function and metric ---------------------------------------------------------

def test_f_value_on_axis():
    assert f_value(ChartPoint.of([1, 0, 0])) == 1
    assert f_value([1j, 0, 0]) == -1


def test_metric_at_origin_is_scaled_identity():
    assert np.allclose(fs_metric([0, 0, 0], lam=2.0), 2.0 * np.eye(3))


def test_real_metric_is_symmetric_positive_definite():
    rng = np.random.default_rng(0)
    for _ in range(20):
        G = real_metric(random_chart(rng), lam=1.5)
        assert np.allclose(G, G.T)
        assert np.linalg.eigvalsh(G).min() > 0


def test_euclidean_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = random_chart(rng)
    e = euclidean_gradient(x)
    h = 1e-6
    for _ in range(5):
        w = rng.standard_normal(6)
        dx = (w[:3] + 1j * w[3:]) * h
        numeric = (f_value(x + dx).real - f_value(x - dx).real) / (2 * h)
        assert numeric == pytest.approx(e @ w, rel=1e-6, abs=1e-8)


def test_real_gradient_solves_metric_equation():
    rng = np.random.default_rng(2)
    x = random_chart(rng)
    assert np.allclose(real_metric(x) @ real_gradient(x), euclidean_gradient(x))


@pytest.mark.parametrize("r", np.linspace(0.05, 3.0, 50))
def test_hamiltonian_field_on_the_real_axis(r):
    v = hamiltonian_field([r, 0, 0])
    assert 2 * v[0].real == pytest.approx(-4 * r * (1 + r * r) ** 2, rel=1e-10)
    assert np.allclose(v[1:], 0)


def test_flow_field_runs_the_clock_and_keeps_im_f():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = random_chart(rng)
        V = as_real(gh_field(x))
        assert euclidean_gradient(x) @ V == pytest.approx(-1.0, rel=1e-9)
        d_im_f = np.concatenate([2 * x.imag, 2 * x.real])
        assert abs(d_im_f @ V) < 1e-9 * max(1.0, np.linalg.norm(V))


@pytest.mark.parametrize("seed", range(5))
def test_field_commutes_with_the_involution_pointwise(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        x = random_chart(rng)
        v = gh_field(x)
        assert np.abs(gh_field(np.conj(x)) - np.conj(v)).max() <= 1e-10 * max(1.0, np.abs(v).max())


@pytest.mark.parametrize("seed", range(5))
def test_field_commutes_with_rotations_pointwise(seed):
    rng = np.random.default_rng(seed)
    x = random_chart(rng)
    v = gh_field(x)
    for R in Rotation.random(20, random_state=seed).as_matrix():
        assert np.abs(gh_field(R @ x) - R @ v).max() <= 1e-10 * max(1.0, np.abs(v).max())


def test_field_is_singular_at_the_critical_point():
    with pytest.raises(SingularFiber):
        gh_field([0, 0, 0])
    assert grad_norm([0, 0, 0]) == 0


# ---- chart ------------------------------------------------------------------------

def test_chart_round_trip():
    c = ChartPoint.of([1 + 1j, 2, -0.5j])
    assert np.allclose(to_chart(from_chart(c)).array(), c.array())


def test_chart_rejects_boundary_points():
    with pytest.raises(ValueError):
        to_chart(ProjPoint.of([1, 1j, 0, 0]))
    with pytest.raises(ValueError):
        ChartPoint.of([1, 2])


def test_lagrangian_is_the_real_unit_sphere():
    rng = np.random.default_rng(4)
    for p in antidiagonal_points(rng, 10):
        x = to_chart(p).array()
        assert np.abs(x.imag).max() < 1e-12
        assert f_value(x) == pytest.approx(1.0, abs=1e-12)


# ---- integration --------------------------------------------------------------------

@pytest.fixture(scope="module")
def vanishing():
    return integrate(ChartPoint.of([1, 0, 0]), 0.999)


def test_vanishing_cycle_reaches_the_singular_point(vanishing):
    assert vanishing.reason == "duration"
    assert vanishing.end.s == pytest.approx(0.999)
    assert vanishing.gap < 0.05
    assert vanishing.samples[-1].f.real == pytest.approx(1e-3, abs=1e-6)


def test_vanishing_cycle_stays_on_the_axis(vanishing):
    for s in vanishing.samples:
        x = np.asarray(s.x)
        assert np.abs(x[1:]).max() < 1e-12
        assert abs(x[0].imag) < 1e-12


def test_re_f_is_a_clock(vanishing):
    for s in vanishing.samples:
        assert s.f.real == pytest.approx(1 - s.s, abs=1e-6)
    assert vanishing.im_drift < 1e-6


def test_guard_stops_before_the_critical_point():
    traj = integrate(ChartPoint.of([1, 0, 0]), 1.5, FlowConfig(guard=0.05))
    assert traj.reason == "singular_fiber"
    assert traj.gap < 0.05


def test_zero_duration_returns_the_start():
    traj = integrate(START, 0.0)
    assert len(traj.samples) == 1
    assert traj.reason == "duration"
    assert traj.end.x == START.x


def test_negative_duration_is_rejected():
    with pytest.raises(ValueError):
        integrate(START, -1.0)


def test_reverse_flow_returns_to_the_start():
    forward = integrate(START, 0.3)
    back = integrate(forward.end, 0.3, reverse=True)
    assert np.abs(back.end.array() - START.array()).max() < 1e-6
    assert back.samples[-1].f.real == pytest.approx(f_value(START).real, abs=1e-6)


def test_flow_commutes_with_the_involution():
    a = integrate(START, 0.3)
    b = integrate(ChartPoint.of(np.conj(START.array())), 0.3)
    assert np.abs(b.end.array() - np.conj(a.end.array())).max() < 1e-7


def test_flow_commutes_with_rotations():
    base = integrate(START, 0.3).end.array()
    for R in Rotation.random(20, random_state=7).as_matrix():
        rotated = integrate(ChartPoint.of(R @ START.array()), 0.3).end.array()
        assert np.abs(rotated - R @ base).max() < 1e-6


def test_lagrangian_collapses_radially():
    rng = np.random.default_rng(5)
    for p in antidiagonal_points(rng, 5):
        start = to_chart(p)
        traj = integrate(start, 0.999)
        assert traj.reason == "duration"
        assert traj.gap < 0.05
        direction = traj.end.array().real / traj.gap
        assert np.allclose(direction, start.array().real, atol=1e-6)


def test_transport_preserves_the_gc_values():
    rng = np.random.default_rng(6)
    starts = [ChartPoint.of([1, 0, 0])] + [to_chart(p) for p in antidiagonal_points(rng, 3)]
    for res in transport_points(starts, 0.999):
        assert res.error is None
        start = gc_values(from_chart(res.start), 4, 4).values
        end = moment_nu(from_chart(res.trajectory.end), 4)
        assert np.allclose(end, start, atol=0.05)


def test_transport_records_failures_per_point():
    results = transport_points([ChartPoint.of([0, 0, 0]), START], 0.1)
    assert results[0].trajectory is None
    assert "grad Re f" in results[0].error
    assert results[1].error is None
    assert results[1].trajectory.reason == "duration"


def test_flow_error_is_a_runtime_error():
    assert issubclass(SingularFiber, FlowError)
    assert issubclass(FlowError, RuntimeError)
