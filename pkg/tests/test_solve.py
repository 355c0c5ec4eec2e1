import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from orliczlab import domain as D
from orliczlab import energy as E
from orliczlab import growth as G
from orliczlab import solve as S
from orliczlab.errors import (
    NumericError,
    PreconditionError,
    StructureConditionError,
    UnsupportedConfigurationError,
)

from conftest import quadratic_oracle, small_grid, step_exterior


def pair_energy(gf, dom, full, s):
    """Independent energy: all ordered pairs not both exterior."""
    X = dom.coords[:, 0]
    R = np.abs(X[:, None] - X[None, :])
    np.fill_diagonal(R, np.inf)
    keep = dom.is_interior[:, None] | dom.is_interior[None, :]
    W = np.where(keep, (1 - s) * dom.h ** 2 / R, 0.0)
    return float(np.sum(W * gf.f(np.abs(full[:, None] - full[None, :]) / R ** s)))


def coordinate_descent(gf, dom, ext, s, sweeps=3000, tol=1e-13):
    """Cyclic exact minimisation in one interior value at a time."""
    X = dom.coords[:, 0]
    full = ext.values.copy()
    full[dom.interior] = 0.5
    for _ in range(sweeps):
        old = full[dom.interior].copy()
        for a in dom.interior:
            r = np.abs(X[a] - X)
            r[a] = np.inf
            wa = (1 - s) * dom.h ** 2 / r

            # both orientations of every pair through node a
            def e1(x):
                return 2.0 * float(np.sum(wa * gf.f(np.abs(x - full) / r ** s)))

            full[a] = minimize_scalar(e1, bracket=(full[a] - 0.1, full[a] + 0.1),
                                      options={"xtol": 1e-14}).x
        if np.max(np.abs(full[dom.interior] - old)) < tol:
            break
    return full[dom.interior]


@pytest.mark.parametrize("n", [4, 16])
@pytest.mark.parametrize("s", [0.3, 0.7])
def test_quadratic_matches_dense_solve(n, s):
    dom = small_grid(n)
    ext = step_exterior(dom)
    u, rep = S.minimize(G.power(2), D.kernel_one(), dom, ext, s=s)
    assert rep.converged
    assert np.max(np.abs(u.interior_values - quadratic_oracle(dom, ext, s))) <= 1e-8
    assert np.array_equal(u.exterior_values, ext.exterior_values)


def test_gradient_method_matches_dense_solve():
    dom = small_grid(4)
    ext = step_exterior(dom)
    u, rep = S.minimize(G.power(2), D.kernel_one(), dom, ext, s=0.3, method="gradient")
    assert rep.method == "gradient" and rep.converged
    assert np.max(np.abs(u.interior_values - quadratic_oracle(dom, ext, 0.3))) <= 1e-8


def test_sum_matches_coordinate_descent():
    dom = small_grid(4)
    ext = step_exterior(dom)
    gf = G.sum_pq(2, 3)
    u, _ = S.minimize(gf, D.kernel_one(), dom, ext, s=0.5)
    oracle = coordinate_descent(gf, dom, ext, 0.5)
    assert np.max(np.abs(u.interior_values - oracle)) <= 1e-6


def test_pair_energy_oracle_agrees_with_library():
    dom = small_grid(5)
    u = D.GridFunction(dom, np.random.default_rng(0).normal(size=dom.n_nodes))
    gf = G.sum_pq(2, 3)
    assert pair_energy(gf, dom, u.values, 0.4) == pytest.approx(
        E.energy_If(gf, D.kernel_one(), u, 0.4), rel=1e-12)


def test_constant_exterior_gives_constant_minimizer():
    dom = small_grid(8)
    ext = D.GridFunction.constant(dom, 2.5)
    u, rep = S.minimize(G.sum_pq(2, 3), D.kernel_checker(2.0), dom, ext, s=0.5,
                        u0=ext.with_interior(np.linspace(0, 1, 8)))
    assert np.allclose(u.values, 2.5, atol=1e-9)
    assert rep.final_energy <= 1e-15


@pytest.mark.parametrize("gf", [G.power(2), G.sum_pq(2, 3)], ids=["power", "sum"])
def test_gradient_matches_finite_differences(gf):
    dom = small_grid(8)
    rng = np.random.default_rng(42)
    k = D.kernel_checker(2.0)
    for _ in range(5):
        u = D.GridFunction(dom, rng.normal(size=dom.n_nodes))
        g = S.energy_gradient(gf, k, u, 0.4)
        fd = np.empty_like(g)
        for n, a in enumerate(dom.interior):
            up, dn = u.values.copy(), u.values.copy()
            up[a] += 1e-6
            dn[a] -= 1e-6
            fd[n] = (E.energy_If(gf, k, D.GridFunction(dom, up), 0.4)
                     - E.energy_If(gf, k, D.GridFunction(dom, dn), 0.4)) / 2e-6
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-9 * np.abs(g).max())


def test_energy_descent_and_report():
    for n, method in ((16, "newton"), (4, "gradient")):
        dom = small_grid(n)
        ext = step_exterior(dom)
        _, rep = S.minimize(G.sum_pq(2, 3), D.kernel_one(), dom, ext, s=0.4, method=method)
        hist = np.array(rep.energy_history)
        assert np.all(np.diff(hist) <= 8 * np.finfo(float).eps * hist[:-1])
        assert rep.final_energy <= rep.initial_energy
        assert rep.gradient_norm <= 1e-8
        d = rep.to_dict()
        assert "wall_time" not in d and "wall_time" in rep.to_dict(include_time=True)


def test_maximum_principle_heuristic():
    dom = D.build_grid(1, 1 / 32, 1.0, 4.0)
    ext = step_exterior(dom)
    for gf in (G.power(2), G.sum_pq(2, 3)):
        u, _ = S.minimize(gf, D.kernel_checker(2.0), dom, ext, s=0.6)
        assert -0.05 <= u.interior_values.min() and u.interior_values.max() <= 1.05


def test_scale_covariance_power():
    dom = small_grid(16)
    ext = D.GridFunction(dom, np.where(dom.is_interior, 0.0, np.cos(dom.coords[:, 0])))
    for p in (2.0, 3.0):
        u1, _ = S.minimize(G.power(p), D.kernel_one(), dom, ext, s=0.5, tol=1e-12)
        u3, _ = S.minimize(G.power(p), D.kernel_one(), dom, ext * 3.0, s=0.5, tol=1e-12)
        assert np.max(np.abs(u3.values - 3.0 * u1.values)) <= 1e-8


def test_minimize_errors():
    dom = small_grid(4)
    ext = step_exterior(dom)
    with pytest.raises(UnsupportedConfigurationError):
        S.minimize(G.power(1.0), D.kernel_one(), dom, ext, s=0.5)
    with pytest.raises(PreconditionError):
        S.minimize(G.power(2), D.kernel_one(), small_grid(8), ext, s=0.5)
    with pytest.raises(PreconditionError):
        S.minimize(G.power(2), D.kernel_one(), dom, ext, s=0.5,
                   u0=D.GridFunction.constant(dom, 9.0))
    with pytest.raises(NumericError) as exc:
        S.minimize(G.sum_pq(2, 3), D.kernel_one(), dom, ext, s=0.5, max_iter=1, tol=1e-14)
    assert isinstance(exc.value.diagnostics["report"], S.SolveReport)
    assert exc.value.diagnostics["u"].domain is dom


# --- structure functions and residuals ------------------------------------------

def structure_samples(n=200, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1, 1, (n, 1)), rng.uniform(-1, 1, (n, 1)), rng.uniform(-5, 5, n)


def test_check_structure_examples():
    gf = G.power(2)
    rep = S.check_structure(S.euler_lagrange(gf, D.kernel_one()), structure_samples())
    assert rep["Lambda_tight"] == pytest.approx(1.0)
    rep = S.check_structure(S.euler_lagrange(gf, D.kernel_one(), factor=0.5), structure_samples())
    assert rep["Lambda_declared"] == 2.0 and rep["Lambda_tight"] == pytest.approx(2.0)
    cubic = S.StructureFunction(lambda X, Y, t: t ** 3, 10.0, gf, "cubic")
    with pytest.raises(StructureConditionError) as exc:
        S.check_structure(cubic, structure_samples())
    assert "index" in exc.value.sample
    with pytest.raises(PreconditionError):
        S.check_structure(cubic, (np.zeros((0, 1)), np.zeros((0, 1)), np.zeros(0)))


def test_check_structure_detects_asymmetry():
    gf = G.power(2)
    skew = S.StructureFunction(lambda X, Y, t: 2 * t * (1.2 + 0.5 * np.tanh(X[..., 0] - Y[..., 0])),
                               3.0, gf, "skew")
    with pytest.raises(StructureConditionError):
        S.check_structure(skew, structure_samples())


def loop_weak_residual(hs, u, phi, s):
    dom = u.domain
    X = dom.coords
    total = 0.0
    for i in range(dom.n_nodes):
        for j in range(dom.n_nodes):
            if i == j or not (dom.is_interior[i] or dom.is_interior[j]):
                continue
            r = float(np.linalg.norm(X[i] - X[j]))
            w = (1 - s) * dom.h ** (2 * dom.dim) / r ** dom.dim
            t = (u.values[i] - u.values[j]) / r ** s
            hv = float(hs(X[i][None], X[j][None], np.array([t]))[0])
            total += w * hv * (phi.values[i] - phi.values[j]) / r ** s
    return total


def test_weak_residual_matches_double_loop():
    dom = D.build_grid(2, 0.5, 1.0, 4.0)
    rng = np.random.default_rng(5)
    u = D.GridFunction(dom, rng.normal(size=dom.n_nodes))
    phi = D.GridFunction(dom, np.where(dom.is_interior, rng.normal(size=dom.n_nodes), 0.0))
    hs = S.euler_lagrange(G.sum_pq(2, 3), D.kernel_checker(2.0))
    assert S.weak_residual(hs, u, phi, 0.4) == pytest.approx(loop_weak_residual(hs, u, phi, 0.4),
                                                            rel=1e-12)


def test_weak_residual_trivial_cases():
    dom = small_grid(8)
    hs = S.euler_lagrange(G.power(2), D.kernel_one())
    c = D.GridFunction.constant(dom, 1.5)
    phi = D.GridFunction(dom, np.where(dom.is_interior, 1.0, 0.0))
    assert S.weak_residual(hs, c, phi, 0.5) == 0.0
    assert S.weak_residual(hs, step_exterior(dom), D.GridFunction.constant(dom, 0.0), 0.5) == 0.0
    assert S.residual_norm(hs, c, 0.5) == 0.0
    with pytest.raises(PreconditionError):
        S.weak_residual(hs, c, D.GridFunction.constant(dom, 1.0), 0.5)


def test_residual_vector_is_scaled_gradient():
    dom = small_grid(8)
    u = D.GridFunction(dom, np.random.default_rng(1).normal(size=dom.n_nodes))
    gf, k = G.sum_pq(2, 3), D.kernel_checker(2.0)
    hs = S.euler_lagrange(gf, k)
    rv = S.residual_vector(hs, u, 0.4)
    assert np.allclose(rv, S.energy_gradient(gf, k, u, 0.4) / dom.cell, rtol=1e-12)
    for n, a in enumerate(dom.interior):
        hat = np.zeros(dom.n_nodes)
        hat[a] = 1.0
        assert S.weak_residual(hs, u, D.GridFunction(dom, hat), 0.4) / dom.cell == pytest.approx(
            rv[n], rel=1e-12)


def test_minimizer_is_weak_solution_and_bump_increases_residual():
    dom = D.build_grid(1, 1 / 16, 1.0, 4.0)
    ext = step_exterior(dom)
    gf, k = G.power(2), D.kernel_one()
    tol = 1e-8
    u, _ = S.minimize(gf, k, dom, ext, tol=tol, s=0.5)
    hs = S.euler_lagrange(gf, k)
    r0 = S.residual_norm(hs, u, 0.5)
    assert r0 <= 10 * tol
    bump = np.where(dom.is_interior, np.maximum(0.0, 1 - np.abs(dom.coords[:, 0]) / 0.5), 0.0)
    assert S.residual_norm(hs, D.GridFunction(dom, u.values + 0.1 * bump), 0.5) > r0


@given(seed=st.integers(0, 1000), c=st.floats(-3, 3))
def test_weak_residual_linear_in_phi(seed, c):
    dom = small_grid(5)
    rng = np.random.default_rng(seed)
    u = D.GridFunction(dom, rng.normal(size=dom.n_nodes))
    a = D.GridFunction(dom, np.where(dom.is_interior, rng.normal(size=dom.n_nodes), 0.0))
    b = D.GridFunction(dom, np.where(dom.is_interior, rng.normal(size=dom.n_nodes), 0.0))
    hs = S.euler_lagrange(G.sum_pq(2, 3), D.kernel_one())
    lhs = S.weak_residual(hs, u, D.GridFunction(dom, a.values + c * b.values), 0.3)
    rhs = S.weak_residual(hs, u, a, 0.3) + c * S.weak_residual(hs, u, b, 0.3)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)
