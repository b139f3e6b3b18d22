from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import interval_system, octahedron_system, square_system
from novikov import NovikovElement
from polytope import FacetSystem, FiberPoint, contains, permute_coordinates, translate
from potential import (
    CERTIFICATE_LABEL,
    FamilyError,
    PotentialError,
    SolverConfig,
    _classify,
    _numeric,
    _polish_singular,
    build_potential,
    evaluate,
    fiber_series,
    find_critical_points,
    format_laurent,
    gradient,
    laurent_form,
    recheck_certificate,
    verify_family,
)

OCTAHEDRON_TERMS = {
    (0, 1, 1): 0, (-1, 0, 0): 1, (0, -1, 0): 1, (1, 0, 1): 0,
    (0, 1, 0): 0, (-1, 0, -1): 1, (0, -1, -1): 1, (1, 0, 0): 0,
}

FAMILIES = [
    {"y2": "-y1", "y3": "-1"},
    {"y2": "-y1", "y3": "Q/y1**2"},
    {"y2": "Q/y1", "y3": "-1"},
]


@pytest.fixture(scope="module")
def octahedron_report():
    P = build_potential(octahedron_system(1))
    cfg = SolverConfig(seed=0, t_samples=(0.2, 0.1, 0.05), starts=200)
    return P, find_critical_points(P, cfg=cfg)


# ---- construction --------------------------------------------------------------

def test_octahedron_laurent_form():
    L = laurent_form(build_potential(octahedron_system(1)))
    terms = L.as_dict()
    assert set(terms) == set(OCTAHEDRON_TERMS)
    for mono, energy in OCTAHEDRON_TERMS.items():
        assert terms[mono].terms == ((Fraction(energy), 1),)


def test_octahedron_global_form_text():
    L = laurent_form(build_potential(octahedron_system(1)))
    pieces = set(format_laurent(L, Fraction(1)).split(" + "))
    assert pieces == {"y2*y3", "Q/y1", "Q/y2", "y1*y3", "y2", "Q/(y1*y3)", "Q/(y2*y3)", "y1"}


def test_interval_and_square_forms():
    assert set(format_laurent(laurent_form(build_potential(interval_system(2))), Fraction(2)).split(" + ")) \
        == {"y1", "Q/y1"}
    assert set(format_laurent(laurent_form(build_potential(square_system(1))), Fraction(1)).split(" + ")) \
        == {"y1", "y2", "Q/y1", "Q/y2"}


def test_terms_match_facets(octahedron):
    P = build_potential(octahedron)
    assert len(P.terms) == len(octahedron.facets)
    assert [t.exponent for t in P.terms] == octahedron.normals()
    assert [-t.coefficient.terms[0][0] if t.coefficient.terms else 0 for t in P.terms] == octahedron.offsets()


def test_default_truncation_is_twice_lambda(octahedron):
    P = build_potential(octahedron)
    assert all(t.coefficient.truncation == 2 for t in P.terms)


def test_positive_offset_rejected_with_guidance(octahedron):
    shifted = translate(octahedron, (Fraction(-1, 2), 0, 0))
    with pytest.raises(PotentialError, match="translate"):
        build_potential(shifted)


def test_fiber_series_at_center(octahedron):
    series = fiber_series(build_potential(octahedron), (Fraction(1, 2), Fraction(1, 2), 0))
    assert [e for _, e in series] == [Fraction(1, 2)] * 8


def test_fiber_series_sorted_and_outside(octahedron):
    P = build_potential(octahedron)
    energies = [e for _, e in fiber_series(P, (Fraction(1, 4), Fraction(1, 2), Fraction(1, 8)))]
    assert energies == sorted(energies)
    assert min(energies) > 0
    assert min(e for _, e in fiber_series(P, (1, 0, 0))) == 0
    with pytest.raises(PotentialError):
        fiber_series(P, (2, 2, 2))


def test_fiber_series_outside_as_fiber_point(octahedron):
    with pytest.raises(PotentialError, match="outside"):
        fiber_series(build_potential(octahedron), FiberPoint((2, 2, 2)))


# ---- differentiation -----------------------------------------------------------

def test_gradient_matches_central_differences(octahedron):
    L = laurent_form(build_potential(octahedron))
    grads = gradient(L, logarithmic=False)
    rng = np.random.default_rng(11)
    for _ in range(20):
        t = rng.uniform(0.05, 0.9)
        y = rng.uniform(0.5, 2.0, 3) * np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
        for j in range(3):
            h = 1e-6 * abs(y[j])
            step = np.zeros(3, dtype=complex)
            step[j] = h
            fd = (evaluate(L, y + step, t) - evaluate(L, y - step, t)) / (2 * h)
            exact = evaluate(grads[j], y, t)
            assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


def test_log_gradient_is_y_times_gradient(octahedron):
    L = laurent_form(build_potential(octahedron))
    y = np.array([0.7 + 0.2j, -1.1j, 1.3])
    for j, (plain, logd) in enumerate(zip(gradient(L, False), gradient(L, True))):
        assert evaluate(logd, y, 0.3) == pytest.approx(y[j] * evaluate(plain, y, 0.3), rel=1e-12)


# ---- critical points -----------------------------------------------------------

def relation_points(sample, tol=1e-8):
    Q = sample.t
    good = []
    for p in sample.points:
        y1, y2, y3 = p.y
        if (abs(y1 ** 4 - Q ** 2) < tol and abs(y2 - y1 ** 3 / Q) < tol
                and abs(y3 - y1 ** 2 / Q) < tol):
            good.append(p)
    return good


def test_octahedron_critical_quadruple(octahedron_report):
    _, report = octahedron_report
    assert report.converged
    assert report.presentation == "numeric-plus-regression"
    assert report.small_resolution is True
    for sample in report.samples:
        good = relation_points(sample)
        assert len(good) == 4
        assert sum(p.nondegenerate for p in good) == 2
        assert sum(p.rank_deficient for p in good) == 2
        assert all(p.residual < 1e-10 for p in sample.points)


def test_octahedron_valuations_and_certificates(octahedron_report):
    P, report = octahedron_report
    assert len(report.certificates) == 2
    for cert in report.certificates:
        assert cert.label == CERTIFICATE_LABEL
        assert np.allclose(cert.valuation, (0.5, 0.5, 0.0), atol=0.02)
        assert cert.snapped == ("1/2", "1/2", "0")
        assert report.chains[cert.chain].interior
        assert recheck_certificate(P, report, cert)
    starts = {np.sign(report.chains[c.chain].y[0][0].real) for c in report.certificates}
    assert starts == {-1.0, 1.0}


def test_octahedron_families_detected(octahedron_report):
    _, report = octahedron_report
    for sample in report.samples:
        directions = {l.direction for l in sample.loci if l.confirmed and l.direction is not None}
        assert {(1, 1, 0), (1, 1, -2), (1, -1, 0)} <= directions


def test_degenerate_pair_lies_on_every_family(octahedron_report):
    _, report = octahedron_report
    moduli = []
    for sample in report.samples:
        Q = sample.t
        pair = [p for p in relation_points(sample) if p.rank_deficient]
        for p in pair:
            y1, y2, y3 = p.y
            assert abs(y1 ** 2 + Q) < 1e-8
            assert abs(y2 + y1) < 1e-8 and abs(y3 + 1) < 1e-8
            homes = {l.direction for l in sample.loci if l.confirmed
                     and any(np.allclose(w, p.y, atol=1e-8) for w in l.witnesses)}
            assert homes == {(1, 1, 0), (1, 1, -2), (1, -1, 0)}
        moduli.append(np.log(np.abs(pair[0].y)))
    slopes = np.polyfit(np.log(report.t_samples), np.array(moduli), 1)[0]
    assert np.allclose(slopes, (0.5, 0.5, 0.0), atol=0.02)


def test_valuation_chains_match_across_t(octahedron_report):
    _, report = octahedron_report
    certified = [report.chains[c.chain] for c in report.certificates]
    for chain in certified:
        assert all(m is not None for m in chain.matched)
        assert min(chain.r_squared) > 0.999


def octahedron_log_point(t, y1):
    """Log coordinates of the critical point with first coordinate y1 on y1^4 = Q^2."""
    return np.log(np.array([y1, y1 ** 3 / t, y1 ** 2 / t], dtype=complex))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.02, 0.5), st.sampled_from([1, -1]))
def test_vanishing_hessian_is_rank_deficient(t, sign):
    A, c = _numeric(laurent_form(build_potential(octahedron_system(1))), t)
    z = octahedron_log_point(t, sign * 1j * np.sqrt(t))
    _, nondeg, deficient, kernel = _classify(A, c, z[None, :], SolverConfig())[0]
    assert deficient and not nondeg
    assert kernel.shape == (3, 3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.02, 0.5), st.sampled_from([1, -1]))
def test_real_pair_is_nondegenerate(t, sign):
    A, c = _numeric(laurent_form(build_potential(octahedron_system(1))), t)
    z = octahedron_log_point(t, sign * np.sqrt(t))
    _, nondeg, deficient, _ = _classify(A, c, z[None, :], SolverConfig())[0]
    assert nondeg and not deficient


@pytest.mark.parametrize("seed", range(5))
def test_singular_point_polishes_to_full_precision(seed):
    t = 0.1
    A, c = _numeric(laurent_form(build_potential(octahedron_system(1))), t)
    exact = octahedron_log_point(t, 1j * np.sqrt(t))
    rng = np.random.default_rng(seed)
    start = exact + 1e-5 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
    polished = _polish_singular(A, c, start, SolverConfig())
    assert polished is not None
    assert np.abs(np.exp(polished) - np.exp(exact)).max() < 1e-12


def test_polish_rejects_a_nondegenerate_point():
    t = 0.1
    A, c = _numeric(laurent_form(build_potential(octahedron_system(1))), t)
    assert _polish_singular(A, c, octahedron_log_point(t, np.sqrt(t)), SolverConfig()) is None


@pytest.mark.parametrize("system,dim", [(interval_system(2), 1), (square_system(1), 2)])
def test_direct_algebra_cross_check(system, dim):
    P = build_potential(system)
    lam = float(system.scale)
    report = find_critical_points(P, cfg=SolverConfig(seed=0, starts=60))
    for sample in report.samples:
        Q = sample.t ** lam
        assert len(sample.points) == 2 ** dim
        for p in sample.points:
            assert all(abs(y ** 2 - Q) < 1e-10 for y in p.y)
    assert report.certificates
    for cert in report.certificates:
        assert np.allclose(cert.valuation, [lam / 2] * dim, atol=1e-6)


def test_permuting_coordinates_permutes_valuations():
    base = octahedron_system(1)
    perm = (1, 0, 2)
    cfg = SolverConfig(seed=3, starts=120)
    a = find_critical_points(build_potential(base), cfg=cfg)
    b = find_critical_points(build_potential(permute_coordinates(base, perm)), cfg=cfg)
    vals_a = {tuple(round(c.valuation[p], 4) for p in perm) for c in a.certificates}
    vals_b = {tuple(round(v, 4) for v in c.valuation) for c in b.certificates}
    assert vals_a == vals_b


def test_same_seed_same_report():
    P = build_potential(square_system(1))
    cfg = SolverConfig(seed=5, starts=30)
    assert find_critical_points(P, cfg=cfg).to_dict() == find_critical_points(P, cfg=cfg).to_dict()


def test_regression_needs_two_samples(octahedron):
    with pytest.raises(PotentialError):
        find_critical_points(build_potential(octahedron), t_samples=[0.1])


def test_t_samples_follow_the_potential_positionally():
    report = find_critical_points(build_potential(interval_system(2)), (0.3, 0.1), SolverConfig(seed=0, starts=60))
    assert report.t_samples == (0.3, 0.1)
    assert all(len(s.points) == 2 for s in report.samples)


# ---- families ------------------------------------------------------------------

@pytest.mark.parametrize("family", FAMILIES)
def test_octahedron_families(octahedron, family):
    res = verify_family(build_potential(octahedron), family, samples=50, t=0.1)
    assert res.passed
    assert res.max_residual < 1e-10


def test_wrong_family_fails(octahedron):
    res = verify_family(build_potential(octahedron), {"y2": "y1", "y3": "1"}, samples=10)
    assert not res.passed


def test_family_component_zero(octahedron):
    with pytest.raises(FamilyError):
        verify_family(build_potential(octahedron), {"y2": "-y1", "y3": "0"}, samples=3)


def test_family_needs_scale():
    unscaled = FacetSystem(1, (((1,), Fraction(0)), ((-1,), Fraction(-1))))
    with pytest.raises(FamilyError):
        verify_family(build_potential(unscaled), {}, samples=3)
