import random
from fractions import Fraction

import pytest

from cornerlayer.calculus_ops import dxx_lambda, dy_gamma_plus, r_delta, r_dyy, r_neumann
from cornerlayer.coeff_field import Poly
from cornerlayer.formal_series import GradedSeries, Window, WindowError, geometric_series
from cornerlayer.matching_engine import (
    CoefficientBook,
    DataGapError,
    ProfileCornerIngest,
    SigmaLedger,
    TableIngest,
    ZeroIngest,
    build_Rminus,
    build_Rplus,
    build_Sinf_series,
    build_u0_series,
    corner_coeff,
    graded_residual,
    layer_corrector,
    layer_correctors,
    layer_field,
    layer_field_from_traces,
    match_coeff,
    matching_matrices_check,
    read_profile,
    sigma_recursion,
    tangent_coeff,
    write_table,
)
from cornerlayer.oracle import brute_force_singular, tangent_from_bernoulli
from cornerlayer.sing_spaces import PiElement, evaluate, phi

from conftest import make_config


def _pairs(ops):
    return [(op.deg_eps.value, op.deg_A.value) for op in ops]


def test_operator_degrees(config):
    assert _pairs(build_Rplus(config)) == [(0, 2), (2, -2), (2, 0), (1, -1)]
    assert _pairs(build_Rminus(config)) == [(2, 2), (0, -2), (2, 0), (0, -1)]
    for vd, vp, ops in ((1, 2, build_Rplus(config)), (-1, 2, build_Rminus(config))):
        assert all(vd * a + vp * e > 0 for e, a in _pairs(ops))


def test_identity_cells(config):
    lat = config.lattice
    for j in (1, 2):
        d = lat.pi_multiple(j)
        assert abs(match_coeff("Su", d, d, d, 0, config) - 1) < 1e-12
        assert abs(match_coeff("uS", d, d, -d, 0, config) - 1) < 1e-12


def test_cells_off_the_constraint_set_vanish(irrational):
    lat = irrational.lattice
    d = lat.pi_multiple(1)
    # p + d not in P
    assert match_coeff("uS", -d, d, lat.integer(0), 0, irrational) == 0
    assert match_coeff("Su", d, d, lat.integer(1), -1, irrational) == 0
    with pytest.raises(ValueError):
        match_coeff("uS", lat.integer(1), d, lat.integer(1), 0, irrational)
    with pytest.raises(ValueError):
        match_coeff("uu", d, d, d, 0, irrational)


def test_book_refuses_cells_beyond_its_window(right_angle):
    lat = right_angle.lattice
    book = CoefficientBook(right_angle, 2)
    d = lat.pi_multiple(1)
    with pytest.raises(WindowError):
        book.coeff("Su", d, d, lat.integer(6), 0)


def test_matching_matrices_invert(config):
    rep = matching_matrices_check(config, 4)
    assert rep.size > 0
    assert rep.qp_deviation < 1e-9
    assert rep.q_diagonal_deviation < 1e-12
    assert rep.p_diagonal_deviation < 1e-12
    empty = matching_matrices_check(config, 0)
    assert empty.size == 0 and empty.qp_deviation == 0


def test_parallel_fill_matches_serial(right_angle):
    lat = right_angle.lattice
    seeds = lat.pi_lattice_between(-4, 4)
    a, b = CoefficientBook(right_angle, 3), CoefficientBook(right_angle, 3)
    a.fill("Su", seeds, 1)
    b.fill("Su", seeds, 3)
    s = right_angle.scalars
    assert write_table(a.rows("Su", seeds), s)[0] == write_table(b.rows("Su", seeds), s)[0]


# ---------------------------------------------------------------- corner coefficients

def test_corner_coefficients_in_zero_profile_mode():
    # at Theta = 2 pi/3 resonant log terms reach negative grades, so cells are nonzero
    cfg = make_config("pi*2/3")
    lat = cfg.lattice
    book = CoefficientBook(cfg, 8)
    assert corner_coeff(lat.pi_multiple(-1), lat.pi_multiple(1), lat.integer(2), 0, book) == 0
    found = 0
    for d in (lat.pi_multiple(-3), lat.pi_multiple(-2)):
        for dp in (lat.pi_multiple(1), lat.pi_multiple(2)):
            for p in lat.P_upto(6):
                for l in range(3):
                    v = corner_coeff(d, dp, p, l, book)
                    ref = 0
                    for p1 in lat.P_upto(p):
                        p2 = p - p1
                        for d1 in lat.pi_lattice_between(0.5, p2.value + 0.5):
                            for l1 in range(l + 1):
                                ref += book.coeff("uS", d, d1, p1, l1) * book.coeff("Su", d1, dp, p2, l - l1)
                    assert abs(v - ref) < 1e-12
                    found += abs(v) > 1e-6
    assert found


def test_corner_coefficients_vanish_off_the_common_lattice():
    cfg = make_config(2.0)
    lat = cfg.lattice
    book = CoefficientBook(cfg, 6)
    d, dp = lat.pi_multiple(-1), lat.pi_multiple(1)
    for p in lat.P_upto(5):
        # d - d' = -2 pi/Theta is not an integer for irrational Theta
        assert corner_coeff(d, dp, p, 0, book) == 0


def test_corner_coefficients_report_missing_profiles(right_angle):
    lat = right_angle.lattice
    book = CoefficientBook(right_angle, 8)
    d = lat.pi_multiple(-1)
    with pytest.raises(DataGapError) as info:
        corner_coeff(d, lat.pi_multiple(1), lat.integer(6), 0, book, profile={})
    assert info.value.cells


# ---------------------------------------------------------------- layer correctors

def test_first_layer_correctors():
    r = Fraction(1, 2)
    U = layer_correctors(2, r)
    assert U[0] == [r, r]
    assert U[1][0] == r / 3
    assert U[2][0] == 2 * r / 15
    assert layer_corrector(0)[0] == 1


def _peval(c, y):
    return sum(x * y ** k for k, x in enumerate(c))


def _deriv(c):
    return [k * x for k, x in enumerate(c)][1:]


def test_layer_correctors_solve_their_system():
    r = Fraction(3, 7)
    U = layer_correctors(8, r)
    assert _deriv(_deriv(U[0])) == [] or all(x == 0 for x in _deriv(_deriv(U[0])))
    assert _peval(_deriv(U[0]), 0) == r
    for n, Un in enumerate(U):
        assert _peval(Un, -1) == 0
        if n:
            lhs = _deriv(_deriv(Un))
            rhs = [-x for x in U[n - 1]]
            assert lhs + [0] * (len(rhs) - len(lhs)) == rhs
            assert _peval(_deriv(Un), 0) == 0
        assert Un[0] == r * tangent_from_bernoulli(n)


def test_tangent_numbers():
    assert [tangent_coeff(n) for n in range(4)] == [1, Fraction(1, 3), Fraction(2, 15), Fraction(17, 315)]
    for n in range(10):
        assert tangent_coeff(n) == tangent_from_bernoulli(n)
    with pytest.raises(ValueError):
        tangent_coeff(-1)


def test_layer_correctors_float_path():
    U = layer_correctors(8, 0.5)
    for n, Un in enumerate(U):
        assert abs(Un[0] - 0.5 * float(tangent_coeff(n))) < 1e-12


def test_layer_field_examples(right_angle):
    lat = right_angle.lattice
    assert layer_field_from_traces([], right_angle) == {}
    assert layer_field({}, lat.zero, right_angle) == {}
    d = lat.integer(1)
    out = layer_field_from_traces([{d: Poly([2.0])}], right_angle)
    r = right_angle.mu_ratio
    assert (out[d].at_Y(0) - Poly([2.0 * r])).max_abs() < 1e-15
    assert out[d].at_Y(-1).max_abs() == 0


def test_layer_fields_satisfy_the_layer_equation(right_angle):
    cfg = right_angle
    lat = cfg.lattice
    rng = random.Random(31)
    traces = {lat.integer(j): {lat.deg(j, 1): Poly([complex(rng.uniform(-1, 1), rng.uniform(-1, 1)),
                                                     rng.uniform(-1, 1)])}
              for j in range(4)}
    for p in (lat.integer(3), lat.integer(4)):
        hi = PiElement(lat, (), layer_field(traces, p, cfg))
        lo = PiElement(lat, (), layer_field(traces, p - 2, cfg))
        for x, y in ((0.5, -0.2), (1.3, -0.8)):
            lhs = evaluate(hi, "lambda", x, y, (0, 2))
            rhs = -(evaluate(lo, "lambda", x, y, (2, 0)) + cfg.k1_sq * evaluate(lo, "lambda", x, y))
            assert abs(lhs - rhs) < 1e-10 * max(1, abs(lhs))


# ---------------------------------------------------------------- sigma recursion

class RandomIngest:
    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.cache = {}

    def _draw(self, key):
        if key not in self.cache:
            self.cache[key] = complex(self.rng.gauss(0, 1), self.rng.gauss(0, 1))
        return self.cache[key]

    def far(self, p, d, l, ledger):
        return self._draw(("far", p, d, l))

    def corner(self, p, d, l, ledger):
        return self._draw(("corner", p, d, l))


def test_zero_ingest_gives_zero_singular_cells(config):
    led = sigma_recursion(SigmaLedger(config.lattice), 3, config, ZeroIngest())
    assert all(v == 0 for _, v in led.items())
    assert not led.support_violations()


@pytest.mark.parametrize("theta", ["pi/2", "pi*2/3", 2.0])
def test_recursion_matches_brute_force(theta):
    cfg = make_config(theta)
    lat = cfg.lattice
    book = CoefficientBook(cfg, 4)
    led = sigma_recursion(SigmaLedger(lat), 4, cfg, RandomIngest(3), l_max=1, book=book)
    assert not led.support_violations()
    checked = 0
    for (fld, p, d, l), v in led.items():
        if led.provenance[(fld, p, d, l)] == "ingested":
            continue
        ref = brute_force_singular(lat, led.values, book.coeff, p, d, l, fld)
        assert abs(ref - v) < 1e-12 * max(1, abs(ref))
        if fld == "far":
            assert v == 0 or d >= -p
        checked += 1
    assert checked


def test_recursion_is_a_convolution():
    cfg = make_config("pi/2")
    lat = cfg.lattice
    book = CoefficientBook(cfg, 6)
    dp = lat.pi_multiple(-1)

    def run(p0, l0):
        src = SigmaLedger(lat)
        src.set("corner", p0, dp, l0, 1 + 0j)
        return sigma_recursion(SigmaLedger(lat), 6, cfg, TableIngest(src, missing_zero=True),
                               l_max=2, book=book)

    base = run(lat.zero, 0)
    shifted = run(lat.integer(1), 1)
    nonzero = 0
    for (fld, p, d, l), v in base.items():
        if fld != "far" or d.value > 0 or p + 1 > lat.integer(6) or l + 1 > 2:
            continue
        assert abs(shifted.get("far", p + 1, d, l + 1) - v) < 1e-13
        nonzero += v != 0
    assert nonzero


def test_tables_do_not_depend_on_the_ledger():
    cfg = make_config("pi*2/3")
    lat = cfg.lattice
    seeds = lat.pi_lattice_between(-5, 5)
    texts = []
    for seed in (1, 2):
        book = CoefficientBook(cfg, 4)
        sigma_recursion(SigmaLedger(lat), 4, cfg, RandomIngest(seed), book=book)
        book.fill("uS", seeds)
        texts.append(write_table(book.rows("uS", seeds), cfg.scalars)[0])
    assert texts[0] == texts[1]


def test_recursion_lists_every_gap(right_angle):
    lat = right_angle.lattice
    with pytest.raises(DataGapError) as info:
        sigma_recursion(SigmaLedger(lat), 2, right_angle, TableIngest(SigmaLedger(lat)))
    assert ("far", [0, 0], lat.pi_multiple(1).pair(), 0) in info.value.cells
    assert len(info.value.cells) > 1


def test_profile_ingest_rebuilds_corner_cells(right_angle):
    lat = right_angle.lattice
    step = lat.pi_multiple(1)
    far = SigmaLedger(lat)
    far.set("far", lat.zero, step, 0, 1 + 0j)
    prof = {(d1, d2, n): 0.5 for d1 in lat.pi_lattice_between(-9, -0.1)
            for d2 in lat.pi_lattice_between(0.1, 9) for n in range(4)}
    led = sigma_recursion(SigmaLedger(lat), 4, right_angle,
                          ProfileCornerIngest(prof, TableIngest(far, missing_zero=True)))
    for (fld, p, d, l), v in led.items():
        if fld == "corner" and d.value < 0:
            ref = sum(w * 0.5 for (f2, pp, d2, l2), w in led.items()
                      if f2 == "corner" and l2 == l and d2.value > 0 and (p - pp).is_natural()
                      and (p - pp).a % 2 == 0)
            assert abs(v - ref) < 1e-12


# ---------------------------------------------------------------- series and files

def test_series_from_the_ledger(config):
    lat = config.lattice
    d = lat.pi_multiple(1)
    win = Window(lat.integer(2), d + 4, +1)
    assert not build_u0_series(SigmaLedger(lat), win, config)
    led = SigmaLedger(lat)
    led.set("far", lat.zero, d, 0, 1 + 0j)
    far = build_u0_series(led, win, config)
    ref = geometric_series(build_Rplus(config), GradedSeries(lat, {(lat.zero, d, 0): phi(d)}), win)
    assert far.distance(ref) == 0
    res = graded_residual(far, config)
    assert res["checked"] > 0
    assert max(res["omega"], res["lambda"], res["gamma"], res["continuity"]) < 1e-10
    led.set("corner", lat.zero, -d, 0, 1 + 0j)
    corner = build_Sinf_series(led, Window(lat.integer(2), d + 4, -1), config)
    res = graded_residual(corner, config)
    assert max(res["omega"], res["lambda"], res["gamma"], res["continuity"]) < 1e-10
    with pytest.raises(WindowError):
        build_u0_series(led, Window(lat.integer(2), d, -1), config)


def test_grouped_layer_source_agrees_with_the_split_generators(config):
    """Each cell equals seed - k0^2 R_delta u + mu R_N dy u - R_dyy((dxx + k1^2) u), the layer source taken whole."""
    lat = config.lattice
    d = lat.pi_multiple(1)
    win = Window(lat.integer(3), d + 4, +1)
    led = SigmaLedger(lat)
    led.set("far", lat.zero, d, 0, 1 + 0j)
    far = build_u0_series(led, win, config)
    checked = 0
    for (p, g, l), e in far.cells.items():
        if (p, g, l) == (lat.zero, d, 0):
            continue
        lap = r_delta(far.get(p, g - 2, l)).scale(-config.k0_sq)
        flux = r_neumann(dy_gamma_plus(far.get(p - 1, g + 1, l)), lat).scale(config.mu_ratio)
        below, level = far.get(p - 2, g + 2, l), far.get(p - 2, g, l)
        source = dict(dxx_lambda(below))
        for key, Q in level.lam.items():
            Q = Q.scale(config.k1_sq)
            source[key] = source[key] + Q if key in source else Q
        layer = r_dyy(source, lat).scale(-1)
        assert (lap + flux + layer).distance(e) < 1e-12 * max(1, e.max_abs())
        checked += 1
    assert checked > 3


def test_ledger_files_roundtrip(tmp_path, right_angle):
    lat = right_angle.lattice
    led = sigma_recursion(SigmaLedger(lat), 3, right_angle, RandomIngest(5))
    csv_path = tmp_path / "ledger.csv"
    csv_path.write_text(led.to_csv(["config demo"]))
    back = SigmaLedger.read(lat, csv_path)
    assert back.values == led.values and back.provenance == led.provenance
    json_path = tmp_path / "ledger.json"
    import json
    json_path.write_text(json.dumps(led.to_json()))
    assert SigmaLedger.read(lat, json_path).values == led.values
    bare = tmp_path / "bare.csv"
    bare.write_text("field,p_a,p_b,d_a,d_b,l,re,im\nfar,0,0,0,1,0,1.5,0\n")
    got = SigmaLedger.read(lat, bare)
    assert got.get("far", lat.zero, lat.pi_multiple(1), 0) == 1.5
    bad = tmp_path / "bad.csv"
    bad.write_text("field,p_a\nfar,x\n")
    with pytest.raises(ValueError):
        SigmaLedger.read(lat, bad)


def test_support_violations_are_reported(right_angle):
    lat = right_angle.lattice
    led = SigmaLedger(lat)
    led.set("far", lat.zero, lat.pi_multiple(-1), 0, 1.0)
    assert led.support_violations() == [("far", [0, 0], lat.pi_multiple(-1).pair(), 0)]
    led.set("far", lat.zero, lat.pi_multiple(-1), 0, 0.0)
    assert not led.support_violations()


def test_profile_file(tmp_path, right_angle):
    lat = right_angle.lattice
    path = tmp_path / "profile.csv"
    path.write_text("# profile\nd1_a,d1_b,d2_a,d2_b,n,re,im\n0,-1,0,1,0,0.25,0.5\n")
    assert read_profile(lat, path) == {(lat.pi_multiple(-1), lat.pi_multiple(1), 0): 0.25 + 0.5j}


def test_table_export_header(right_angle):
    lat = right_angle.lattice
    text, doc = write_table([(lat.pi_multiple(1), lat.pi_multiple(1), lat.pi_multiple(1), 0, 1 + 0j)],
                            right_angle.scalars, ["config abc"])
    lines = text.splitlines()
    assert lines[0] == "# config abc"
    assert lines[1] == "d_a,d_b,dp_a,dp_b,p_a,p_b,l,re,im"
    assert doc["entries"][0]["l"] == 0
