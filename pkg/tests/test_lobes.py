import numpy as np
import pytest
from hypothesis import given, strategies as st

from extremal.boundary import InfeasibleInputError
from extremal.lobes import (
    BoundaryPair,
    LobeInvariantError,
    decompose_lobes,
    lobe_containing,
    random_monotone_pair,
    tan_arg_rate,
    total_varg,
    winding_number,
    winding_numbers,
)

TWO_PI = 2 * np.pi


def crossing_winding(poly, x):
    """Independent oracle: signed crossings of the rightward ray from x."""
    p = np.asarray(poly) - x
    q = np.roll(p, -1)
    up = (p.imag <= 0) & (q.imag > 0)
    down = (p.imag > 0) & (q.imag <= 0)
    cross = (p.real * q.imag - q.real * p.imag)  # > 0 when x is left of the edge
    return int(np.sum(up & (cross > 0)) - np.sum(down & (cross < 0)))


@pytest.fixture(scope="module")
def sin_pair():
    return decompose_lobes(BoundaryPair.from_maps("sin:a=0.4", "id"))


# --- examples ---------------------------------------------------------------


def test_identical_maps_have_no_lobes():
    d = decompose_lobes(BoundaryPair.from_maps("id", "id"))
    assert d.lobes == []
    assert d.X_measure == pytest.approx(TWO_PI)
    assert total_varg(d) == 0.0


def test_sine_pair_two_half_lobes(sin_pair):
    # alpha - beta = 0.4 sin(theta) vanishes at 0 and pi only
    assert len(sin_pair.lobes) == 2
    assert sin_pair.X_measure == 0.0
    assert [lb.tilde_theta for lb in sin_pair.lobes] == [pytest.approx((0, np.pi)), pytest.approx((np.pi, TWO_PI))]
    for lb in sin_pair.lobes:
        assert lb.varg == pytest.approx(np.pi, abs=1e-12)
    assert total_varg(sin_pair) == pytest.approx(TWO_PI)


def test_second_harmonic_four_lobes():
    d = decompose_lobes(BoundaryPair.from_maps("sin:a=0.2,k=2", "id"))
    assert len(d.lobes) == 4
    np.testing.assert_allclose([lb.varg for lb in d.lobes], np.pi / 2, atol=1e-12)


def test_lobe_signs_alternate(sin_pair):
    assert [lb.sign for lb in sin_pair.lobes] == [1, -1]


def test_mirror_symmetry_of_sine_pair(sin_pair):
    # gamma(2 pi - theta) = conj(gamma(theta)) for this pair
    a, b = sin_pair.lobes
    np.testing.assert_allclose(b.centroid(), np.conj(a.centroid()), atol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_coinciding_arc_measure(seed):
    rng = np.random.default_rng(seed)
    d = decompose_lobes(random_monotone_pair(rng, 4096, arc=1.0))
    step = TWO_PI / 4096
    assert abs(d.X_measure - 1.0) <= 2 * step
    assert total_varg(d) == pytest.approx(TWO_PI - d.X_measure, abs=10 / 4096)


def test_total_varg_rejects_inconsistent_measure(sin_pair):
    sin_pair.X_measure, saved = 1.0, sin_pair.X_measure
    try:
        with pytest.raises(LobeInvariantError):
            total_varg(sin_pair)
    finally:
        sin_pair.X_measure = saved


# --- winding numbers -------------------------------------------------------


def test_circle_winding():
    c = np.exp(1j * np.linspace(0, TWO_PI, 400, endpoint=False))
    assert winding_number(c, 0) == 1
    assert winding_number(c, 3) == 0
    assert winding_number(c[::-1], 0.2j) == -1


def test_point_on_curve_raises():
    c = np.exp(1j * np.linspace(0, TWO_PI, 400, endpoint=False))
    with pytest.raises(ValueError):
        winding_number(c, c[7])


def test_lobe_polygon_winds_once_about_centroid(sin_pair):
    for lb in sin_pair.lobes:
        c = lb.centroid()
        assert winding_number(lb.polygon(), c) == 1 == crossing_winding(lb.polygon(), c)


def test_full_curve_counts_overlapping_lobes(sin_pair):
    # the two mirror lobes overlap, so the whole curve winds twice there
    c = sin_pair.lobes[0].centroid()
    assert winding_number(sin_pair.pair.curve(), c) == 2
    assert lobe_containing(sin_pair, c) == 0
    assert lobe_containing(sin_pair, 5.0) is None


@given(st.integers(0, 10_000), st.sampled_from([0.0, 1.0]))
def test_winding_is_additive_over_lobes(seed, arc):
    rng = np.random.default_rng(seed)
    pair = random_monotone_pair(rng, 1024, arc=arc)
    d = decompose_lobes(pair)
    pts = 0.4 * (rng.normal(size=25) + 1j * rng.normal(size=25))
    full = winding_numbers(pair.curve(), pts)
    parts = sum((winding_numbers(lb.polygon(), pts) for lb in d.lobes), np.zeros(len(pts), dtype=int))
    np.testing.assert_array_equal(full, parts)
    np.testing.assert_array_equal(full, [crossing_winding(pair.curve(), x) for x in pts])


# --- invariants on random pairs -------------------------------------------


@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.7, 1.5]))
def test_random_pair_invariants(seed, arc):
    d = decompose_lobes(random_monotone_pair(np.random.default_rng(seed), 2048, arc=arc))
    total = total_varg(d)
    assert total <= TWO_PI + 10 / 2048
    assert total == pytest.approx(TWO_PI - d.X_measure, abs=10 / 2048)
    assert d.continuity_ok
    for lb in d.lobes:
        assert lb.monotone_violations <= 2048 // 1024
        assert lb.segment_failures == 0
        # monotone argument: the lobe is star-shaped about 0
        inner = 0.5 * lb.curve[len(lb.curve) // 2]
        assert abs(winding_number(lb.polygon(), inner)) == 1


def test_tan_arg_rate_matches_finite_differences():
    a = lambda t: t + 0.4 * np.sin(t)
    da = lambda t: 1 + 0.4 * np.cos(t)
    b = lambda t: t + 0.1 * np.sin(2 * t)
    db = lambda t: 1 + 0.2 * np.cos(2 * t)
    t = np.linspace(0.3, 2.8, 23)
    g = lambda t: np.exp(1j * a(t)) - np.exp(1j * b(t))
    tan = lambda t: g(t).imag / g(t).real
    h = 1e-6
    fd = (tan(t + h) - tan(t - h)) / (2 * h)
    np.testing.assert_allclose(tan_arg_rate(a(t), b(t), da(t), db(t)), fd, rtol=1e-6)


def test_rejects_non_monotone_samples():
    theta = TWO_PI * np.arange(64) / 64
    with pytest.raises(InfeasibleInputError):
        BoundaryPair(theta - 0.5 * np.sin(3 * theta), theta)
    with pytest.raises(InfeasibleInputError):
        BoundaryPair(theta[:5], theta[:5])


def test_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        decompose_lobes(BoundaryPair.from_maps("sin:a=0.4", "id", 256), tol=0)


def test_as_dict_roundtrip_fields(sin_pair):
    d = sin_pair.as_dict()
    assert len(d["lobes"]) == 2 and d["n_samples"] == 4096
