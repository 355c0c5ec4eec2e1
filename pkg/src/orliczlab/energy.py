"""Discrete Orlicz modulars, Luxemburg norms, the energy I_f and the f'-tail."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import GridDomain, GridFunction, KernelCoefficient, QuadratureTable
from .errors import DomainError, NumericError
from .growth import GrowthFunction, gen_inverse_fprime

SPHERE_MEASURE = {1: 2.0, 2: 2.0 * math.pi}


@dataclass(frozen=True)
class ModularKind:
    """Which modular to evaluate.

    ``Lf`` sums h^d f(|u|) over ``region``; ``Wsf`` is the Gagliardo-type
    double sum over ordered pairs in region x region; ``Vsf`` runs over
    all ordered pairs with at least one point in Omega.
    """

    kind: str
    region: tuple | None = None
    s: float | None = None

    def __post_init__(self):
        if self.kind not in ("Lf", "Wsf", "Vsf"):
            raise DomainError(f"unknown modular kind {self.kind!r}")
        if self.kind != "Lf" and (self.s is None or not 0.0 < self.s < 1.0):
            raise DomainError("Wsf and Vsf modulars need s in (0, 1)")

    @classmethod
    def Lf(cls, region=None):
        return cls("Lf", None if region is None else tuple(int(i) for i in region))

    @classmethod
    def Wsf(cls, region, s):
        return cls("Wsf", tuple(int(i) for i in region), float(s))

    @classmethod
    def Vsf(cls, s):
        return cls("Vsf", None, float(s))


def _region(dom: GridDomain, region) -> np.ndarray:
    if region is None:
        return dom.interior
    idx = np.asarray(region, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= dom.n_nodes):
        raise DomainError("region contains nodes outside the grid")
    return idx


def vsf_pairs(table: QuadratureTable):
    """Weights and distances of the pairs (Omega^c x Omega^c)^c.

    Rows are interior nodes and columns all nodes; exterior columns carry
    a factor 2 so that both orientations of a mixed pair are counted.
    """
    dom = table.domain
    w, r = table.interior_block()
    mult = np.where(dom.is_interior, 1.0, 2.0)
    return w * mult[None, :], r


def pair_terms(kind: ModularKind, u: GridFunction, table: QuadratureTable | None = None):
    """Return (W, t) with modular = sum W * f(t)."""
    dom = u.domain
    if kind.kind == "Lf":
        idx = _region(dom, kind.region)
        return np.full(idx.size, dom.cell), np.abs(u.values[idx])
    table = table if table is not None else QuadratureTable(dom, kind.s)
    if kind.kind == "Wsf":
        idx = _region(dom, kind.region)
        W, r = table.block(idx, idx)
        du = u.values[idx][:, None] - u.values[idx][None, :]
    else:
        W, r = vsf_pairs(table)
        du = u.values[dom.interior][:, None] - u.values[None, :]
    t = np.abs(du) / r ** kind.s
    return W, t


def modular(kind: ModularKind, gf: GrowthFunction, u: GridFunction,
            table: QuadratureTable | None = None) -> float:
    W, t = pair_terms(kind, u, table)
    return float(np.sum(W * gf.f(t)))


def luxemburg_norm(kind: ModularKind, gf: GrowthFunction, u: GridFunction,
                   table: QuadratureTable | None = None, max_iter: int = 200,
                   rtol: float = 1e-12) -> float:
    """inf{lam > 0 : modular(u / lam) <= 1} by bracketing and bisection."""
    W, t = pair_terms(kind, u, table)
    mask = (W > 0) & (t > 0)
    W, t = W[mask], t[mask]
    if t.size == 0:
        return 0.0

    def phi(lam):
        return float(np.sum(W * gf.f(t / lam)))

    hi = 2.0 * float(t.max()) * max(float(W.sum()), 1.0) ** (1.0 / gf.p_lower)
    for _ in range(max_iter):
        if phi(hi) <= 1.0:
            break
        hi *= 2.0
    else:
        raise NumericError("Luxemburg norm: upper bracket not found", {"lambda_hi": hi})
    lo = hi / 2.0
    for _ in range(max_iter):
        if phi(lo) > 1.0:
            break
        hi, lo = lo, lo / 2.0
    else:
        raise NumericError("Luxemburg norm: lower bracket not found", {"lambda_lo": lo})
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            return hi
        mid = 0.5 * (lo + hi)
        if phi(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    raise NumericError("Luxemburg norm: bisection hit the iteration cap",
                       {"lambda_lo": lo, "lambda_hi": hi})


def energy_If(gf: GrowthFunction, k: KernelCoefficient, u: GridFunction, s: float,
              table: QuadratureTable | None = None, check_kernel: bool = True) -> float:
    """Discrete I_f(u) = sum over (Omega^c x Omega^c)^c of w k f(|du| / r^s)."""
    dom = u.domain
    table = table if table is not None else QuadratureTable(dom, s)
    W, r = vsf_pairs(table)
    K = k.block(dom, dom.interior, np.arange(dom.n_nodes))
    if check_kernel:
        k.check(dom, dom.interior, np.arange(dom.n_nodes), K)
    du = u.values[dom.interior][:, None] - u.values[None, :]
    return float(np.sum(W * K * gf.f(np.abs(du) / r ** s)))


def _center(dom: GridDomain, x0) -> np.ndarray:
    """x0 is a point in space (a scalar is accepted in dimension 1)."""
    return np.asarray(x0, dtype=float).reshape(dom.dim)


def tail_integral(gf: GrowthFunction, u: GridFunction, x0, R: float, s: float,
                  strict: bool = False) -> float:
    """(1-s) R^s sum_{|y-x0| >= R} h^d f'(|u(y)| / rho^s) rho^{-d-s}.

    Nodes at distance exactly R carry half weight (their cell straddles
    the sphere).  With ``strict`` those nodes are dropped instead.
    """
    dom = u.domain
    c = _center(dom, x0)
    rho = dom.distances(c)
    tol = 1e-9 * dom.h
    on = np.abs(rho - R) <= tol
    out = rho > R + tol
    wgt = np.where(out, 1.0, np.where(on, 0.0 if strict else 0.5, 0.0))
    sel = wgt > 0
    d = dom.dim
    terms = wgt[sel] * gf.df(np.abs(u.values[sel]) / rho[sel] ** s) * rho[sel] ** (-d - s)
    return (1.0 - s) * R ** s * dom.cell * float(np.sum(terms))


def tail_fprime_bounds(gf: GrowthFunction, u: GridFunction, x0, R: float, s: float) -> dict:
    """Truncated tail and an upper bound accounting for |y - x0| > R_infinity.

    Outside the grid |u| is bounded by its largest exterior value, which
    bounds the missing part of the integral in closed form.
    """
    dom = u.domain
    if not 0.0 < s < 1.0:
        raise DomainError("s must lie in (0, 1)")
    if not R > 0:
        raise DomainError("R must be positive")
    c = _center(dom, x0)
    reach = dom.R_infinity - float(np.linalg.norm(c - np.asarray(dom.center)))
    if R > reach:
        raise DomainError("B_R(x0) leaves the represented region")
    integral = tail_integral(gf, u, c, R, s)
    sup = float(np.max(np.abs(u.exterior_values))) if dom.exterior.size else 0.0
    extra = ((1.0 - s) * R ** s * float(gf.df(np.array([sup / reach ** s]))[0])
             * SPHERE_MEASURE[dom.dim] * reach ** (-s) / s)
    tail = R ** s * gen_inverse_fprime(gf, integral)
    upper = R ** s * gen_inverse_fprime(gf, integral + extra)
    return {"tail": float(tail), "tail_upper_bound": float(upper),
            "integral": integral, "truncation_correction": extra}


def tail_fprime(gf: GrowthFunction, u: GridFunction, x0, R: float, s: float) -> float:
    """Tail_{f'}(u; x0, R) = R^s (f')^{-1}(tail integral), truncated at R_infinity."""
    return tail_fprime_bounds(gf, u, x0, R, s)["tail"]
