"""Minimisation of the discrete energy and weak-form residuals.

The energy is convex in the interior values, so a stationary point is a
global minimiser.  The default optimiser is a damped Newton method with a
Levenberg shift and Armijo backtracking; ``method="gradient"`` selects
diagonally preconditioned gradient descent instead.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .domain import GridDomain, GridFunction, KernelCoefficient, QuadratureTable
from .energy import vsf_pairs
from .errors import (
    NumericError,
    PreconditionError,
    StructureConditionError,
    UnsupportedConfigurationError,
)
from .growth import GrowthFunction

MAX_ITER = 50_000
ARMIJO_C = 1e-4


@dataclass
class SolveReport:
    iterations: int
    final_energy: float
    gradient_norm: float
    wall_time: float
    initial_energy: float = float("nan")
    converged: bool = False
    method: str = "newton"
    energy_history: list = field(default_factory=list, repr=False)

    def to_dict(self, include_time: bool = False) -> dict:
        d = {
            "iterations": self.iterations,
            "initial_energy": self.initial_energy,
            "final_energy": self.final_energy,
            "gradient_norm": self.gradient_norm,
            "converged": self.converged,
            "method": self.method,
        }
        if include_time:
            d["wall_time"] = self.wall_time
        return d


class _Problem:
    """Pair data for the energy as a function of the interior values."""

    def __init__(self, gf, k, dom, ext_values, s, check_kernel=True):
        self.gf, self.dom, self.s = gf, dom, s
        table = QuadratureTable(dom, s)
        Wm, r = vsf_pairs(table)
        w, _ = table.interior_block()
        cols = np.arange(dom.n_nodes)
        K = k.block(dom, dom.interior, cols)
        if check_kernel:
            k.check(dom, dom.interior, cols, K)
        self.rs = r ** s
        self.WK = Wm * K           # energy weights, both orientations of mixed pairs
        self.wK = w * K            # gradient weights
        self.base = np.array(ext_values, dtype=float)
        self.int_cols = dom.interior
        self.n = dom.interior.size

    def full(self, v):
        u = self.base.copy()
        u[self.int_cols] = v
        return u

    def _t(self, v):
        du = v[:, None] - self.full(v)[None, :]
        return du, np.abs(du) / self.rs

    def energy(self, v):
        _, t = self._t(v)
        return float(np.sum(self.WK * self.gf.f(t)))

    def gradient(self, v):
        du, t = self._t(v)
        return 2.0 * np.sum(self.wK * self.gf.df(t) * np.sign(du) / self.rs, axis=1)

    def hessian(self, v):
        _, t = self._t(v)
        with np.errstate(all="ignore"):
            fpp = self.gf.d2f(np.maximum(t, 1e-12))
        fpp = np.where(np.isfinite(fpp), fpp, 1e12)
        A = 2.0 * self.wK * fpp / self.rs ** 2
        H = -A[:, self.int_cols]
        H[np.diag_indices(self.n)] = np.sum(A, axis=1)
        return H

    def precond(self):
        return 2.0 * np.sum(self.wK / self.rs ** 2, axis=1)


def energy_gradient(gf: GrowthFunction, k: KernelCoefficient, u: GridFunction, s: float):
    """Gradient of I_f with respect to the interior values of u."""
    prob = _Problem(gf, k, u.domain, u.values, s)
    return prob.gradient(u.interior_values)


def minimize(gf: GrowthFunction, k: KernelCoefficient, dom: GridDomain,
             exterior_data: GridFunction, u0: GridFunction | None = None,
             tol: float = 1e-8, *, s: float, method: str = "newton",
             max_iter: int = MAX_ITER, check_kernel: bool = True):
    """Minimise I_f over interior values with exterior values fixed.

    Stops when max_a |dI/du_a| / h^d <= tol.  Returns (u, SolveReport).
    Raises NumericError carrying ``diagnostics["report"]`` and
    ``diagnostics["u"]`` when the iteration cap is reached.
    """
    if gf.p_lower <= 1.0:
        raise UnsupportedConfigurationError("minimize needs p_lower > 1")
    if not 0.0 < s < 1.0:
        raise PreconditionError("s must lie in (0, 1)")
    if method not in ("newton", "gradient"):
        raise UnsupportedConfigurationError(f"unknown method {method!r}")
    if exterior_data.domain is not dom:
        raise PreconditionError("exterior data lives on a different grid")
    if u0 is None:
        u0 = exterior_data.with_interior(0.0)
    elif not np.array_equal(u0.exterior_values, exterior_data.exterior_values):
        raise PreconditionError("u0 must agree with the exterior data outside Omega")

    start = time.perf_counter()
    prob = _Problem(gf, k, dom, exterior_data.values, s, check_kernel)
    scale = dom.cell
    v = u0.interior_values.copy()
    E = prob.energy(v)
    g = prob.gradient(v)
    report = SolveReport(0, E, float(np.max(np.abs(g), initial=0.0)) / scale, 0.0,
                         initial_energy=E, method=method, energy_history=[E])
    D = prob.precond()
    alpha_gd = 1.0
    mu = 0.0

    for it in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(g), initial=0.0)) / scale
        if gnorm <= tol:
            report.converged = True
            break
        slack = 8.0 * np.finfo(float).eps * max(abs(E), 1e-300)
        step = None
        if method == "newton":
            H = prob.hessian(v)
            shift = mu
            for _ in range(30):
                try:
                    cf = linalg.cho_factor(H + shift * np.eye(prob.n), check_finite=True)
                    d = -linalg.cho_solve(cf, g)
                    if float(g @ d) < 0:
                        break
                except (linalg.LinAlgError, ValueError):
                    pass
                shift = max(10.0 * shift, 1e-12 * max(float(np.abs(np.diag(H)).max()), 1.0))
            else:
                d = -g / D
            step = _armijo(prob, v, E, g, d, 1.0, slack)
            mu = shift / 10.0 if step is not None else max(10.0 * shift, 1e-8)
        if step is None:
            d = -g / D
            step = _armijo(prob, v, E, g, d, min(2.0 * alpha_gd, 1e6), slack)
            if step is not None:
                alpha_gd = step[0]
        if step is None:
            report.iterations = it
            break
        _, v, E, g = step
        report.energy_history.append(E)
    else:
        it = max_iter

    report.iterations = it if not report.converged else it - 1
    report.final_energy = E
    report.gradient_norm = float(np.max(np.abs(g), initial=0.0)) / scale
    report.wall_time = time.perf_counter() - start
    u = exterior_data.with_interior(v)
    if not report.converged:
        raise NumericError(
            f"minimize did not reach tol={tol} (gradient norm {report.gradient_norm:.3e} "
            f"after {report.iterations} iterations)",
            {"report": report, "u": u},
        )
    return u, report


def _armijo(prob, v, E, g, d, alpha, slack):
    """Backtracking line search; returns (alpha, v_new, E_new, g_new) or None.

    Near the minimum energy differences drop below rounding; a step is then
    also accepted if it stays within ``slack`` of E and lowers the gradient.
    """
    gd = float(g @ d)
    gmax = float(np.max(np.abs(g)))
    while alpha > 1e-20:
        vn = v + alpha * d
        En = prob.energy(vn)
        if En <= E + ARMIJO_C * alpha * gd:
            return alpha, vn, En, prob.gradient(vn)
        if En <= E + slack:
            gn = prob.gradient(vn)
            if float(np.max(np.abs(gn))) < gmax:
                return alpha, vn, En, gn
        alpha *= 0.5
    return None


# ---------------------------------------------------------------------------
# structure functions and weak residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructureFunction:
    """h(x, y, t), vectorised: ``evaluator(X, Y, t)`` with X, Y of shape (..., dim)."""

    evaluator: Callable
    Lambda: float
    gf: GrowthFunction
    name: str = "custom"

    def __call__(self, X, Y, t):
        return self.evaluator(np.asarray(X, dtype=float), np.asarray(Y, dtype=float),
                              np.asarray(t, dtype=float))


def euler_lagrange(gf: GrowthFunction, kernel: KernelCoefficient,
                   factor: float = 1.0) -> StructureFunction:
    """h(x, y, t) = factor * sign(t) f'(|t|) k(x, y)."""

    def ev(X, Y, t):
        return factor * np.sign(t) * gf.df(np.abs(t)) * kernel(X, Y)

    lam = kernel.Lambda * max(factor, 1.0 / factor)
    return StructureFunction(ev, lam, gf, f"euler_lagrange:{kernel.name}")


def check_structure(hs: StructureFunction, samples) -> dict:
    """Check symmetry and the two-sided envelope of condition (h).

    ``samples`` is a tuple (X, Y, t) of arrays with shapes (n, dim), (n, dim)
    and (n,).  For t < 0 the envelope is read through oddness:
    f'(|t|)/Lambda <= |h| <= Lambda f'(|t|) with sign(h) = sign(t).
    Returns the tightest admissible Lambda found.
    """
    X, Y, t = (np.asarray(a, dtype=float) for a in samples)
    if t.size == 0:
        raise PreconditionError("samples must be nonempty")
    X = X.reshape(t.size, -1)
    Y = Y.reshape(t.size, -1)
    hv = hs(X, Y, t)
    hsym = hs(Y, X, t)
    asym = np.abs(hv - hsym) > 1e-12 * (np.abs(hv) + np.abs(hsym)) + 1e-300
    if np.any(asym):
        i = int(np.argmax(asym))
        raise StructureConditionError(
            f"h is not symmetric at sample {i}",
            sample={"index": i, "x": X[i].tolist(), "y": Y[i].tolist(), "t": float(t[i])},
        )
    fp = hs.gf.df(np.abs(t))
    with np.errstate(divide="ignore", invalid="ignore"):
        wrong_sign = (np.sign(hv) != np.sign(t)) & ((fp > 0) | (hv != 0))
        ratio = np.where(fp > 0, np.maximum(np.abs(hv) / fp, fp / np.abs(hv)),
                         np.where(hv == 0, 1.0, np.inf))
    ratio = np.where(wrong_sign, np.inf, ratio)
    tight = float(np.max(ratio))
    if tight > hs.Lambda * (1 + 1e-12):
        i = int(np.argmax(ratio))
        raise StructureConditionError(
            f"h leaves the envelope at sample {i} (needs Lambda >= {tight:.6g}, "
            f"declared {hs.Lambda:g})",
            sample={"index": i, "x": X[i].tolist(), "y": Y[i].tolist(), "t": float(t[i]),
                    "h": float(hv[i])},
        )
    return {"symmetric": True, "Lambda_declared": hs.Lambda, "Lambda_tight": tight,
            "n_samples": int(t.size)}


def _pair_data(u: GridFunction, s: float):
    dom = u.domain
    table = QuadratureTable(dom, s)
    w, r = table.interior_block()
    rs = r ** s
    Xa = dom.coords[dom.interior][:, None, :]
    Xj = dom.coords[None, :, :]
    t = (u.interior_values[:, None] - u.values[None, :]) / rs
    return w, rs, Xa, Xj, t


def weak_residual(hs: StructureFunction, u: GridFunction, phi: GridFunction, s: float) -> float:
    """sum over (Omega^c x Omega^c)^c of w h(x_i, x_j, du/r^s) dphi/r^s."""
    dom = u.domain
    if np.any(phi.exterior_values != 0):
        raise PreconditionError("test function must vanish outside Omega")
    w, rs, Xa, Xj, t = _pair_data(u, s)
    dphi = (phi.interior_values[:, None] - phi.values[None, :]) / rs
    H1 = hs(Xa, Xj, t)
    total = np.sum(w * H1 * dphi)
    ext = ~dom.is_interior
    H2 = hs(Xj[:, ext], Xa, -t[:, ext])
    total += np.sum(w[:, ext] * H2 * (-dphi[:, ext]))
    return float(total)


def residual_vector(hs: StructureFunction, u: GridFunction, s: float) -> np.ndarray:
    """weak_residual against every interior nodal basis function, divided by h^d."""
    w, rs, Xa, Xj, t = _pair_data(u, s)
    H1 = hs(Xa, Xj, t)
    H2 = hs(Xj, Xa, -t)
    return np.sum(w / rs * (H1 - H2), axis=1) / u.domain.cell


def residual_norm(hs: StructureFunction, u: GridFunction, s: float) -> float:
    return float(np.max(np.abs(residual_vector(hs, u, s)), initial=0.0))
