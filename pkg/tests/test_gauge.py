import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ablab.errors import DomainError, GeometryError, InvalidInputError
from ablab.gauge import (
    TWO_PI,
    GaugeFunction,
    IdealFluxTube,
    PhaseValue,
    PolylinePath,
    enclosed_flux,
    gauge_transform,
    loop_phase,
    path_phase,
    reduce_phase,
    winding_number,
)

from .oracles import (
    crossing_winding,
    even_odd_inside,
    segment_distance,
    star_polygon,
    trapezoid_line_integral,
)

SQUARE = [(-1, -1), (1, -1), (1, 1), (-1, 1)]


def random_loop(rng, n=50, box=3.0, avoid=(0.0, 0.0), clearance=0.3):
    while True:
        v = rng.uniform(-box, box, size=(n, 2))
        if segment_distance(v, avoid) > clearance:
            return v


# --- types -----------------------------------------------------------------

def test_phase_value_reduction_idempotent():
    for x in [-7.0, -TWO_PI, 0.0, 1.0, TWO_PI, 13.5, 1e6]:
        r = PhaseValue(x).reduced
        assert 0.0 <= r < TWO_PI
        assert reduce_phase(r) == r


def test_path_validation():
    with pytest.raises(InvalidInputError):
        PolylinePath([(0, 0)])
    with pytest.raises(InvalidInputError):
        PolylinePath([(0, 0), (0, 0), (1, 0)])
    closed = PolylinePath(SQUARE + [SQUARE[0]], closed=True)
    assert len(closed.vertices) == 4


def test_flux_tube_continuous_at_core():
    tube = IdealFluxTube((0.3, -0.2), core_radius=0.5, nu=0.7)
    for t in np.linspace(0, TWO_PI, 7):
        r_in, r_out = 0.5 - 1e-12, 0.5 + 1e-12
        a_in = np.array(tube(0.3 + r_in * np.cos(t), -0.2 + r_in * np.sin(t)))
        a_out = np.array(tube(0.3 + r_out * np.cos(t), -0.2 + r_out * np.sin(t)))
        assert np.allclose(a_in, a_out, atol=1e-9)
        # magnitude nu/r outside in these units (Phi / 2 pi r with Phi = 2 pi nu)
        assert math.isclose(np.hypot(*a_out), 0.7 / r_out, rel_tol=1e-9)


def test_curl_over_disk_equals_flux():
    # Stokes by direct quadrature of the curl: curl A = 2 nu / R^2 inside the core,
    # zero outside; integrate the finite-difference curl over a disk of radius 1.
    tube = IdealFluxTube((0, 0), core_radius=0.4, nu=0.3)
    h = 1e-5
    n = 800
    xs = np.linspace(-1, 1, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    _, ay_p = tube(X + h, Y)
    _, ay_m = tube(X - h, Y)
    ax_p, _ = tube(X, Y + h)
    ax_m, _ = tube(X, Y - h)
    curl = (ay_p - ay_m) / (2 * h) - (ax_p - ax_m) / (2 * h)
    disk = X**2 + Y**2 <= 1.0
    flux = curl[disk].sum() * (xs[1] - xs[0]) ** 2
    assert flux == pytest.approx(TWO_PI * 0.3, rel=2e-2)


# --- path_phase --------------------------------------------------------------

def test_radial_segment_has_zero_phase():
    tube = IdealFluxTube((0, 0), 0.1, nu=0.83)
    assert path_phase(PolylinePath([(1, 0), (2, 0)]), tube, 1) == pytest.approx(0.0, abs=1e-15)


def test_cooper_pair_circle_at_half_quantum():
    tube = IdealFluxTube((0, 0), 0.1, nu=0.5)
    phase = path_phase(PolylinePath.circle((0, 0), 2.0, n=256), tube, q=2)
    assert phase == pytest.approx(TWO_PI, abs=1e-9)


def test_quarter_arc_against_trapezoid_oracle():
    tube = IdealFluxTube((0, 0), 0.1, nu=1.0)
    arc = PolylinePath.arc((0, 0), 3.0, 0.0, math.pi / 2, n=64)
    phase = path_phase(arc, tube, 1)
    oracle = trapezoid_line_integral(tube, arc.vertices, closed=False)
    assert phase == pytest.approx(oracle, abs=1e-9)
    assert phase == pytest.approx(math.pi / 2, abs=1e-9)


def test_core_exclusion_mode():
    tube = IdealFluxTube((0, 0), 0.5, nu=0.2)
    path = PolylinePath([(0.1, 0.1), (2, 0)])
    path_phase(path, tube)
    with pytest.raises(DomainError):
        path_phase(path, tube, exclude_core=True)


def test_phase_through_core_matches_oracle():
    # a chord through the core is legal for open paths; check the adaptive rule there
    tube = IdealFluxTube((0, 0), 0.5, nu=0.4)
    path = PolylinePath([(-2, -0.2), (2, 0.3)])
    oracle = trapezoid_line_integral(tube, path.vertices, closed=False, n_total=2_000_000)
    assert path_phase(path, tube, 3) == pytest.approx(3 * oracle, abs=1e-8)


def test_charge_must_be_nonzero_integer():
    tube = IdealFluxTube()
    with pytest.raises(InvalidInputError):
        path_phase(PolylinePath([(1, 0), (2, 0)]), tube, 0)
    with pytest.raises(InvalidInputError):
        path_phase(PolylinePath([(1, 0), (2, 0)]), tube, 1.5)


# --- loop_phase / enclosed_flux ---------------------------------------------

def test_loop_without_winding_has_no_phase():
    tube = IdealFluxTube((0, 0), 0.1, nu=0.77)
    loop = PolylinePath([(2, 2), (3, 2), (3, 3), (2, 3)], closed=True)
    assert loop_phase(loop, tube, 2) == pytest.approx(0.0, abs=1e-10)


def test_unit_square_full_quantum_is_two_pi():
    tube = IdealFluxTube((0, 0), 0.1, nu=1.0)
    phase = loop_phase(PolylinePath(SQUARE, closed=True), tube, 1)
    assert phase == pytest.approx(TWO_PI, abs=1e-9)
    assert min(phase.reduced, TWO_PI - phase.reduced) < 1e-9


def test_random_50_gon_cooper_pair():
    rng = np.random.default_rng(50)
    tube = IdealFluxTube((0, 0), 0.1, nu=0.3)
    for _ in range(5):
        v = random_loop(rng)
        w = crossing_winding(v, (0, 0))
        assert loop_phase(PolylinePath(v, closed=True), tube, 2) == pytest.approx(
            TWO_PI * 2 * w * 0.3, abs=1e-8
        )


def test_loop_phase_rejects_open_and_core_crossing():
    tube = IdealFluxTube((0, 0), 0.5, nu=0.3)
    with pytest.raises(InvalidInputError):
        loop_phase(PolylinePath(SQUARE), tube)
    thin = PolylinePath([(-0.2, -1), (0.2, -1), (0.2, 1), (-0.2, 1)], closed=True)
    with pytest.raises(DomainError):
        loop_phase(thin, tube)


@pytest.mark.parametrize("turns,nu,expected", [(1, 0.5, 0.5), (-2, 0.7, -1.4)])
def test_enclosed_flux(turns, nu, expected):
    tube = IdealFluxTube((0, 0), 0.1, nu=nu)
    loop = PolylinePath.circle((0.2, 0.1), 1.5, n=40, turns=turns)
    assert winding_number(loop, (0, 0)) == turns
    assert enclosed_flux(loop, tube) == pytest.approx(expected, abs=1e-10)


def test_enclosed_flux_zero_for_unlinked_loop():
    tube = IdealFluxTube((0, 0), 0.1, nu=0.9)
    assert enclosed_flux(PolylinePath.circle((5, 5), 1.0), tube) == pytest.approx(0.0, abs=1e-10)


# --- winding_number ----------------------------------------------------------

def test_square_winding_and_orientation():
    sq = PolylinePath(SQUARE, closed=True)
    assert winding_number(sq, (0, 0)) == 1
    assert winding_number(sq.reversed(), (0, 0)) == -1


def test_point_on_path_is_rejected():
    with pytest.raises(GeometryError):
        winding_number(PolylinePath(SQUARE, closed=True), (1.0, 0.3))


def test_winding_matches_ray_casting_on_simple_polygons():
    rng = np.random.default_rng(200)
    v = star_polygon(rng, 200, (0.1, -0.2))
    path = PolylinePath(v, closed=True)
    for p in rng.uniform(-3.5, 3.5, size=(300, 2)):
        if segment_distance(v, p) < 1e-6:
            continue
        w = winding_number(path, p)
        assert w == (1 if even_odd_inside(v, p) else 0)
        assert w == crossing_winding(v, p)


def test_double_traversal_gives_two():
    rng = np.random.default_rng(7)
    v = star_polygon(rng, 200, (0, 0))
    doubled = PolylinePath(np.vstack([v, v]), closed=True)
    assert winding_number(doubled, (0, 0)) == 2
    assert winding_number(doubled.reversed(), (0, 0)) == -2


# --- gauge_transform ---------------------------------------------------------

def test_constant_gauge_leaves_field_unchanged():
    tube = IdealFluxTube((0, 0), 0.2, nu=0.4)
    shifted = gauge_transform(tube, GaugeFunction.constant(3.7))
    pts = np.random.default_rng(1).uniform(-2, 2, size=(50, 2))
    assert np.array_equal(np.array(shifted(*pts.T)), np.array(tube(*pts.T)))


@pytest.mark.parametrize("q", [1, 2, -3])
def test_linear_gauge_shifts_open_path(q):
    tube = IdealFluxTube((0.5, -1.0), 0.2, nu=0.4)
    lam = GaugeFunction.from_expression("3x+y")
    seg = PolylinePath([(0, 0), (1, 2)])
    diff = path_phase(seg, gauge_transform(tube, lam), q) - path_phase(seg, tube, q)
    assert diff == pytest.approx(5 * q, abs=1e-9)


def test_trig_gauge_leaves_loops_invariant():
    rng = np.random.default_rng(100)
    tube = IdealFluxTube((0, 0), 0.1, nu=0.3)
    lam = GaugeFunction.from_expression("sin(x)*cos(y)")
    shifted = gauge_transform(tube, lam)
    for _ in range(100):
        v = random_loop(rng, n=12)
        loop = PolylinePath(v, closed=True)
        assert abs(loop_phase(loop, shifted, 2) - loop_phase(loop, tube, 2)) < 1e-8


def test_gauge_gradient_check_catches_bad_gradient():
    good = GaugeFunction.from_expression("x**2 - exp(y)")
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    assert good.check_gradient(pts) < 1e-6
    bad = GaugeFunction(lambda x, y: x * y, lambda x, y: (y, 2 * x))
    with pytest.raises(InvalidInputError):
        bad.check_gradient(pts)


def test_expression_rejects_unknown_symbols():
    with pytest.raises(InvalidInputError):
        GaugeFunction.from_expression("3x + z")


# --- properties --------------------------------------------------------------

coords = st.floats(-3, 3, allow_nan=False)
nus = st.floats(-2, 2, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), nus, st.sampled_from([1, 2, -1]))
def test_holonomy_depends_only_on_winding(seed, nu, q):
    rng = np.random.default_rng(seed)
    tube = IdealFluxTube((0, 0), 0.1, nu=nu)
    v = star_polygon(rng, 16, rng.uniform(-1, 1, 2), rmin=1.5, rmax=3.0)
    if segment_distance(v, (0, 0)) < 0.3:
        return
    w = crossing_winding(v, (0, 0))
    deformed = v + rng.normal(scale=0.05, size=v.shape)
    if segment_distance(deformed, (0, 0)) < 0.3 or crossing_winding(deformed, (0, 0)) != w:
        return
    a = loop_phase(PolylinePath(v, closed=True), tube, q)
    b = loop_phase(PolylinePath(deformed, closed=True), tube, q)
    assert abs(a - b) < 1e-8
    assert abs(a - TWO_PI * q * w * nu) < 1e-8


@settings(max_examples=40, deadline=None)
@given(coords, coords, coords, coords, coords, coords, nus)
def test_additivity_and_antisymmetry(x0, y0, x1, y1, x2, y2, nu):
    a, b, c = (x0, y0), (x1, y1), (x2, y2)
    if a == b or b == c:
        return
    tube = IdealFluxTube((0.05, 0.02), 0.1, nu=nu)
    ab = path_phase(PolylinePath([a, b]), tube)
    bc = path_phase(PolylinePath([b, c]), tube)
    abc = path_phase(PolylinePath([a, b, c]), tube)
    assert abs(abc - (ab + bc)) < 1e-12
    assert abs(path_phase(PolylinePath([c, b, a]), tube) + abc) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), nus, nus)
def test_loop_phase_linear_in_flux(seed, nu1, nu2):
    rng = np.random.default_rng(seed)
    v = random_loop(rng, n=10)
    loop = PolylinePath(v, closed=True)

    def phase(nu):
        return loop_phase(loop, IdealFluxTube((0, 0), 0.1, nu=nu), 1)

    assert abs(phase(nu1 + nu2) - (phase(nu1) + phase(nu2))) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2), st.sampled_from([1, 2]))
def test_open_path_gauge_covariance(seed, a, b, q):
    rng = np.random.default_rng(seed)
    tube = IdealFluxTube((0, 0), 0.1, nu=0.37)
    lam = GaugeFunction.from_expression(f"{a}*x*y + sin({b}*x) + y**2")
    v = rng.uniform(-3, 3, size=(6, 2))
    path = PolylinePath(v)
    shift = path_phase(path, gauge_transform(tube, lam), q) - path_phase(path, tube, q)
    expected = q * (lam(*v[-1]) - lam(*v[0]))
    assert abs(shift - expected) < 1e-9


def test_caret_is_power():
    lam = GaugeFunction.from_expression("x^2*y")
    assert lam(3.0, 2.0) == pytest.approx(18.0)
    assert lam.grad(3.0, 2.0) == pytest.approx((12.0, 9.0))
