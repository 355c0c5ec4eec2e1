import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orliczlab import degiorgi as DG
from orliczlab import domain as D
from orliczlab import growth as G
from orliczlab import solve as S
from orliczlab.errors import PreconditionError, ResolutionError

from conftest import step_exterior


def naive_gap(gf, u, s, x0, r, R, k):
    """Every term of the class inequality by explicit loops over nodes."""
    dom = u.domain
    X, v, h, d, q = dom.coords, u.values, dom.h, dom.dim, gf.q_upper
    dist = lambda a, b: float(np.linalg.norm(a - b))
    f = lambda t: float(gf.f(np.array([t]))[0])
    df = lambda t: float(gf.df(np.array([t]))[0])
    wp = [max(x - k, 0.0) for x in v]
    wm = [max(k - x, 0.0) for x in v]
    rho = [dist(X[i], np.asarray(x0, float)) for i in range(dom.n_nodes)]
    Br = [i for i in range(dom.n_nodes) if rho[i] <= r * (1 + 1e-12)]
    BR = [i for i in range(dom.n_nodes) if rho[i] <= R * (1 + 1e-12)]
    sem = cross = 0.0
    for i in Br:
        for j in range(dom.n_nodes):
            if i == j:
                continue
            rr = dist(X[i], X[j])
            w = (1 - s) * h ** (2 * d) / rr ** d
            if j in Br:
                sem += w * f(abs(wp[i] - wp[j]) / rr ** s)
            if v[j] < k:
                cross += w * df(wm[j] / rr ** s) * wp[i] / rr ** s
    ratio = R / (R - r)
    local = ratio ** q * sum(h ** d * f(wp[i] / R ** s) for i in BR)
    l1 = sum(h ** d * wp[i] for i in BR)
    tail = sum(h ** d * df(wp[j] / rho[j] ** s) * rho[j] ** (-d - s)
               for j in range(dom.n_nodes) if rho[j] > r * (1 + 1e-12))
    tail *= (1 - s) * ratio ** (d + s * q) * l1
    return sem, cross, local, tail


@pytest.fixture(scope="module")
def minimizer():
    dom = D.build_grid(1, 1 / 16, 1.0, 4.0)
    u, _ = S.minimize(G.power(2), D.kernel_one(), dom, step_exterior(dom), s=0.5)
    return u


@pytest.mark.parametrize("gf", [G.power(2), G.sum_pq(2, 3)], ids=["power", "sum"])
def test_gap_matches_naive_loops(minimizer, gf):
    u = minimizer
    for x0, r, R, k in ((0.0, 0.25, 0.5, 0.4), (0.125, 0.1875, 0.75, 0.6), (-0.25, 0.3, 0.5, 0.2)):
        rep = DG.caccioppoli_gap(gf, u, 0.5, [x0], r, R, k)
        sem, cross, local, tail = naive_gap(gf, u, 0.5, [x0], r, R, k)
        assert rep.lhs_seminorm == pytest.approx(sem, rel=1e-12)
        assert rep.lhs_cross == pytest.approx(cross, rel=1e-12)
        assert rep.rhs_local == pytest.approx(local, rel=1e-12)
        assert rep.rhs_tail == pytest.approx(tail, rel=1e-12)
        assert rep.c_min == pytest.approx((sem + cross) / (local + tail), rel=1e-12)
        assert math.isfinite(rep.c_min) and rep.flag == "ok"


def test_gap_in_two_dimensions_matches_loops():
    dom = D.build_grid(2, 0.25, 1.0, 4.0)
    rng = np.random.default_rng(3)
    u = D.GridFunction(dom, rng.normal(size=dom.n_nodes))
    gf = G.sum_pq(2, 3)
    rep = DG.caccioppoli_gap(gf, u, 0.4, [0.0, 0.25], 0.3, 0.6, 0.1)
    sem, cross, local, tail = naive_gap(gf, u, 0.4, [0.0, 0.25], 0.3, 0.6, 0.1)
    assert (rep.lhs_seminorm, rep.lhs_cross) == pytest.approx((sem, cross), rel=1e-12)
    assert (rep.rhs_local, rep.rhs_tail) == pytest.approx((local, tail), rel=1e-12)


def test_trivial_cases(minimizer):
    dom = minimizer.domain
    c = D.GridFunction.constant(dom, 0.3)
    rep = DG.caccioppoli_gap(G.power(2), c, 0.5, [0.0], 0.25, 0.5, 0.1)
    assert rep.lhs_seminorm == 0 and rep.lhs_cross == 0 and rep.c_min == 0
    rep = DG.caccioppoli_gap(G.power(2), minimizer, 0.5, [0.0], 0.25, 0.5,
                             float(minimizer.values.max()))
    assert (rep.lhs, rep.rhs, rep.c_min) == (0.0, 0.0, 0.0)


def test_zero_denominator_flag():
    assert DG._c_min(1.0, 0.0) == (math.inf, "zero_denominator")
    assert DG._c_min(0.0, 0.0) == (0.0, "ok")
    rep = DG.CaccioppoliReport([0.0], 0.1, 0.2, 0.0, "plus", 1.0, 0.0, 0.0, 0.0, math.inf,
                               "zero_denominator")
    assert rep.to_dict()["c_min"] == "inf"


def test_gap_errors(minimizer):
    with pytest.raises(PreconditionError):
        DG.caccioppoli_gap(G.power(2), minimizer, 0.5, [0.0], 0.5, 0.25, 0.0)
    with pytest.raises(PreconditionError):
        DG.caccioppoli_gap(G.power(2), minimizer, 0.5, [0.75], 0.25, 0.5, 0.0)
    with pytest.raises(PreconditionError):
        DG.caccioppoli_gap(G.power(2), minimizer, 0.5, [0.0], 0.25, 0.5, 0.0, sign="both")
    with pytest.raises(ResolutionError):
        DG.caccioppoli_gap(G.power(2), minimizer, 0.5, [0.03], 0.01, 0.5, 0.0)


def test_sign_symmetry(minimizer):
    gf = G.sum_pq(2, 3)
    a = DG.caccioppoli_gap(gf, minimizer, 0.5, [0.0], 0.25, 0.5, 0.4, sign="minus")
    b = DG.caccioppoli_gap(gf, -minimizer, 0.5, [0.0], 0.25, 0.5, -0.4, sign="plus")
    for name in ("lhs_seminorm", "lhs_cross", "rhs_local", "rhs_tail", "c_min"):
        assert getattr(a, name) == getattr(b, name)
    assert a.sign == "minus" and a.k_level == 0.4


@given(k1=st.floats(-0.5, 1.5), dk=st.floats(0, 1))
def test_monotone_in_level(minimizer, k1, dk):
    gf = G.power(2)
    lo = DG.caccioppoli_gap(gf, minimizer, 0.5, [0.0], 0.25, 0.5, k1)
    hi = DG.caccioppoli_gap(gf, minimizer, 0.5, [0.0], 0.25, 0.5, k1 + dk)
    assert hi.lhs_seminorm <= lo.lhs_seminorm * (1 + 1e-12) + 1e-300
    ball = minimizer.domain.ball([0.0], 0.5)
    l1 = lambda k: np.sum(np.maximum(minimizer.values[ball] - k, 0))
    assert l1(k1 + dk) <= l1(k1)


def test_all_fields_nonnegative(minimizer):
    spec = DG.SampleSpec(n_samples=20, seed=4, R_range=(0.2, 0.5))
    res = DG.dg_membership(G.sum_pq(2, 3), minimizer, 0.5, spec)
    for rep in res["reports"]:
        assert min(rep.lhs_seminorm, rep.lhs_cross, rep.rhs_local, rep.rhs_tail, rep.c_min) >= 0


def test_transfer_power_unchanged_and_sum_bounded(minimizer):
    rep = DG.caccioppoli_gap(G.power(2), minimizer, 0.5, [0.0], 0.25, 0.5, 0.4)
    out = DG.transfer_to_g(rep, G.power(2))
    assert out.growth == "g" and out.flag == "ok"
    assert out.c_min == pytest.approx(rep.c_min, rel=1e-10)
    gf = G.sum_pq(2, 3)
    dom = minimizer.domain
    u, _ = S.minimize(gf, D.kernel_one(), dom, step_exterior(dom), s=0.5)
    for k in (0.2, 0.5, 0.8):
        rep = DG.caccioppoli_gap(gf, u, 0.5, [0.0], 0.25, 0.5, k)
        out = DG.transfer_to_g(rep, gf)
        assert out.c_min <= 1.5 * rep.c_min * (1 + 1e-6)
        assert out.flag == "ok"


def test_transfer_constant_and_missing_u():
    dom = D.build_grid(1, 0.25, 1.0, 4.0)
    c = D.GridFunction.constant(dom, 1.0)
    rep = DG.caccioppoli_gap(G.sum_pq(2, 3), c, 0.5, [0.0], 0.25, 0.5, 0.5)
    out = DG.transfer_to_g(rep, G.sum_pq(2, 3))
    assert out.lhs == 0 and out.c_min == 0
    bare = DG.CaccioppoliReport([0.0], 0.25, 0.5, 0.5, "plus", 0, 0, 0, 0, 0.0)
    with pytest.raises(PreconditionError):
        DG.transfer_to_g(bare, G.power(2))


# --- sampling -------------------------------------------------------------------

def test_constant_membership_is_zero():
    dom = D.build_grid(1, 1 / 16, 1.0, 4.0)
    res = DG.dg_membership(G.power(2), D.GridFunction.constant(dom, 2.0), 0.5, DG.SampleSpec(10))
    assert res["c_empirical"] == 0.0
    assert res["sample_based"] and res["generator"] == DG.GENERATOR


def test_samples_respect_spec():
    dom = D.build_grid(2, 1 / 8, 1.0, 4.0)
    spec = DG.SampleSpec(n_samples=40, seed=9, R_range=(0.25, 0.6), r_ratio=(0.3, 0.8))
    for x0, r, R, qt, sg in DG.draw_samples(dom, spec):
        assert 0.3 <= r / R <= 0.8
        assert dom.dist_to_boundary(x0) >= R - 1e-12
        assert np.allclose(np.round(x0 / dom.h) * dom.h, x0)
        assert np.isclose(round(2 * R / dom.h), 2 * R / dom.h)
        assert qt in spec.quantiles and sg in spec.signs


def test_samples_deterministic_and_snapped_across_grids():
    spec = DG.SampleSpec(n_samples=25, seed=1, snap=1 / 16)
    a = DG.draw_samples(D.build_grid(1, 1 / 16, 1.0, 4.0), spec)
    b = DG.draw_samples(D.build_grid(1, 1 / 32, 1.0, 4.0), spec)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa[0], sb[0]) and sa[1:] == sb[1:]


def test_spike_raises_empirical_constant(minimizer):
    spec = DG.SampleSpec(n_samples=30, seed=2, R_range=(0.2, 0.5))
    base = DG.dg_membership(G.power(2), minimizer, 0.5, spec)
    vals = minimizer.values.copy()
    vals[minimizer.domain.node_index([0.0])] += 1.0
    spiked = DG.dg_membership(G.power(2), D.GridFunction(minimizer.domain, vals), 0.5, spec)
    assert spiked["c_empirical"] > base["c_empirical"]


def test_membership_reproducible_and_exports(minimizer):
    spec = DG.SampleSpec(n_samples=15, seed=5)
    a = DG.dg_membership(G.power(2), minimizer, 0.5, spec)
    b = DG.dg_membership(G.power(2), minimizer, 0.5, spec)
    assert DG.reports_to_json(a["reports"]) == DG.reports_to_json(b["reports"])
    assert a["c_empirical"] == max(rep.c_min for rep in a["reports"])
    parsed = json.loads(DG.reports_to_json(a["reports"]))
    assert len(parsed) == 15 and "c_min" in parsed[0]
    lines = DG.reports_to_csv(a["reports"]).splitlines()
    assert lines[0] == "x0,r,R,k,sign,c_min" and len(lines) == 16


# --- the growth-lemma recursion ---------------------------------------------------

def test_fast_convergence_examples():
    res = DG.fast_convergence(0.25, 1.0, 4.0, 1.0, 10)
    seq = res["sequence"]
    assert seq[1] == 0.0625 and seq[2] == 0.015625
    assert seq[1] == 0.25 * 4 ** -1
    assert res["bound_ok"] and res["below_threshold"] and res["converges"]
    zero = DG.fast_convergence(0.0, 1.0, 4.0, 1.0, 10)
    assert all(y == 0.0 for y in zero["sequence"])
    big = DG.fast_convergence(0.9, 1.0, 4.0, 1.0, 30)
    assert big["diverged"] and not big["converges"] and not big["below_threshold"]
    with pytest.raises(PreconditionError):
        DG.fast_convergence(0.1, -1.0, 4.0, 1.0, 5)


@given(C=st.floats(0.1, 10), b=st.floats(1.01, 10), beta=st.floats(0.1, 2), frac=st.floats(0, 1))
def test_fast_convergence_bound_below_threshold(C, b, beta, frac):
    thr = C ** (-1 / beta) * b ** (-1 / beta ** 2)
    res = DG.fast_convergence(frac * thr, C, b, beta, 40)
    assert res["below_threshold"] and res["bound_ok"]
    for j, y in enumerate(res["sequence"]):
        assert y <= frac * thr * b ** (-j / beta) * (1 + 1e-12)
