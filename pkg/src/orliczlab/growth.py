"""Convex growth functions f and the objects derived from them.

A :class:`GrowthFunction` is a convex, increasing f : [0, inf) -> [0, inf)
together with exponents ``p_lower <= q_upper`` such that

    p_lower * f(t) <= t f'(t) <= q_upper * f(t)      for t > 0.

Everything is vectorised over numpy arrays.  Scalar inputs give Python
floats back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import (
    DegenerateFunctionError,
    DomainError,
    GrowthConditionError,
    NumericError,
)

CLOSED_FORM_RTOL = 1e-8
BACKED_RTOL = 1e-4
QUAD_EPS = 1e-8

CLOSED_FORM_FAMILIES = ("power", "sum", "powerlog", "polynomial")


# ---------------------------------------------------------------------------
# raw family kernels: each returns (f, f', f'') acting on nonnegative arrays
# ---------------------------------------------------------------------------

def _power_kernels(params):
    p = float(params["p"])

    def f(t):
        return t ** p

    def df(t):
        return p * t ** (p - 1.0)

    def d2f(t):
        with np.errstate(divide="ignore"):
            return p * (p - 1.0) * t ** (p - 2.0)

    return f, df, d2f


def _polynomial_kernels(params):
    terms = [(float(c), float(e)) for c, e in params["terms"]]

    def f(t):
        out = np.zeros_like(t)
        for c, e in terms:
            out = out + c * t ** e
        return out

    def df(t):
        out = np.zeros_like(t)
        for c, e in terms:
            if e != 0.0:
                out = out + c * e * t ** (e - 1.0)
        return out

    def d2f(t):
        out = np.zeros_like(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            for c, e in terms:
                if e not in (0.0, 1.0):
                    out = out + c * e * (e - 1.0) * t ** (e - 2.0)
        return out

    return f, df, d2f


def _powerlog_kernels(params):
    p = float(params["p"])

    def f(t):
        return t ** p * np.log1p(t)

    def df(t):
        return p * t ** (p - 1.0) * np.log1p(t) + t ** p / (1.0 + t)

    def d2f(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = p * (p - 1.0) * t ** (p - 2.0) * np.log1p(t)
            a = np.where(t > 0, a, 0.0 if p > 1.0 else 0.0)
            return a + 2.0 * p * t ** (p - 1.0) / (1.0 + t) - t ** p / (1.0 + t) ** 2

    return f, df, d2f


def _sampled_kernels(params):
    nodes = np.asarray(params["nodes"], dtype=float)
    values = np.asarray(params["values"], dtype=float)
    derivs = np.asarray(params["derivs"], dtype=float)
    p_lo = float(params["p_extrap_low"])
    q_hi = float(params["q_extrap_high"])
    spline = CubicHermiteSpline(nodes, values, derivs, extrapolate=False)
    dspline = spline.derivative()
    d2spline = dspline.derivative()
    t0, tn = nodes[0], nodes[-1]
    f0, fn = values[0], values[-1]

    def f(t):
        out = np.empty_like(t)
        lo, hi = t < t0, t > tn
        mid = ~(lo | hi)
        out[lo] = f0 * (t[lo] / t0) ** p_lo
        out[hi] = fn * (t[hi] / tn) ** q_hi
        out[mid] = spline(t[mid])
        return out

    def df(t):
        out = np.empty_like(t)
        lo, hi = t < t0, t > tn
        mid = ~(lo | hi)
        out[lo] = p_lo * f0 / t0 * (t[lo] / t0) ** (p_lo - 1.0)
        out[hi] = q_hi * fn / tn * (t[hi] / tn) ** (q_hi - 1.0)
        out[mid] = dspline(t[mid])
        return out

    def d2f(t):
        out = np.empty_like(t)
        lo, hi = t < t0, t > tn
        mid = ~(lo | hi)
        with np.errstate(divide="ignore"):
            out[lo] = p_lo * (p_lo - 1.0) * f0 / t0 ** 2 * (t[lo] / t0) ** (p_lo - 2.0)
        out[hi] = q_hi * (q_hi - 1.0) * fn / tn ** 2 * (t[hi] / tn) ** (q_hi - 2.0)
        out[mid] = d2spline(t[mid])
        return out

    return f, df, d2f


def _auxiliary_kernels(params):
    base = growth_from_dict(params["base"])

    def f(t):
        return _aux_integral(base, t)

    def df(t):
        out = np.empty_like(t)
        pos = t > 0
        out[pos] = base.f(t[pos]) / t[pos]
        out[~pos] = base.df(np.zeros(int((~pos).sum())))
        return out

    def d2f(t):
        out = np.zeros_like(t)
        pos = t > 0
        tp = t[pos]
        out[pos] = (tp * base.df(tp) - base.f(tp)) / tp ** 2
        return out

    return f, df, d2f


_KERNELS: dict[str, Callable] = {
    "power": _power_kernels,
    "polynomial": _polynomial_kernels,
    "sum": _polynomial_kernels,
    "powerlog": _powerlog_kernels,
    "sampled": _sampled_kernels,
    "auxiliary": _auxiliary_kernels,
}


@dataclass(frozen=True, eq=False)
class GrowthFunction:
    """f(t) = (raw(arg_scale * t) - offset) / scale for one of the families.

    ``family`` is one of ``power``, ``sum``, ``powerlog``, ``polynomial``,
    ``sampled`` or ``auxiliary``; use the factory functions rather than
    calling the constructor.
    """

    family: str
    params: dict
    p_lower: float
    q_upper: float
    c0: float | None = None
    offset: float = 0.0
    scale: float = 1.0
    arg_scale: float = 1.0
    _kernels: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.family not in _KERNELS:
            raise DomainError(f"unknown growth family {self.family!r}")
        if not (1.0 <= self.p_lower <= self.q_upper):
            raise DomainError(
                f"need 1 <= p_lower <= q_upper, got ({self.p_lower}, {self.q_upper})"
            )
        if self.c0 is not None and self.c0 <= 0:
            raise DomainError("c0 must be positive when given")
        object.__setattr__(self, "_kernels", _KERNELS[self.family](self.params))

    @property
    def rtol(self) -> float:
        """Tolerance regime: closed-form identities vs spline/quadrature-backed."""
        return CLOSED_FORM_RTOL if self.family in CLOSED_FORM_FAMILIES else BACKED_RTOL

    def f(self, t):
        raw = self._kernels[0](self.arg_scale * t)
        return (raw - self.offset) / self.scale

    def df(self, t):
        return self.arg_scale * self._kernels[1](self.arg_scale * t) / self.scale

    def d2f(self, t):
        return self.arg_scale ** 2 * self._kernels[2](self.arg_scale * t) / self.scale

    def rescaled(self, a: float) -> "GrowthFunction":
        """The function t -> f(a t) / a, whose derivative is t -> f'(a t)."""
        return GrowthFunction(
            self.family, self.params, self.p_lower, self.q_upper, None,
            self.offset, self.scale * a, self.arg_scale * a,
        )

    def to_dict(self) -> dict:
        params = dict(self.params)
        if self.offset != 0.0 or self.scale != 1.0 or self.arg_scale != 1.0:
            params["transform"] = {
                "offset": self.offset, "scale": self.scale, "arg_scale": self.arg_scale,
            }
        return {
            "family": self.family,
            "params": params,
            "p_lower": self.p_lower,
            "q_upper": self.q_upper,
            "c0": self.c0,
        }

    def __repr__(self):
        return (f"GrowthFunction({self.family}, {self.params!r}, p={self.p_lower}, "
                f"q={self.q_upper})")


def growth_from_dict(d: dict) -> GrowthFunction:
    """Inverse of :meth:`GrowthFunction.to_dict`.

    Factory-style dicts such as ``{"family": "power", "params": {"p": 2}}``
    without explicit exponents are accepted too.
    """
    family = d["family"]
    params = dict(d.get("params", {}))
    transform = params.pop("transform", None)
    if "p_lower" not in d or "q_upper" not in d:
        gf = _FACTORIES[family](**params)
        if transform is None:
            return gf
        return GrowthFunction(gf.family, gf.params, gf.p_lower, gf.q_upper, gf.c0,
                              **transform)
    transform = transform or {}
    return GrowthFunction(family, params, float(d["p_lower"]), float(d["q_upper"]),
                          d.get("c0"), **transform)


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------

def power(p: float) -> GrowthFunction:
    """f(t) = t^p."""
    return GrowthFunction("power", {"p": float(p)}, float(p), float(p), c0=1.0)


def polynomial(terms) -> GrowthFunction:
    """f(t) = sum c_i t^{e_i} with c_i >= 0, e_i in {0} or [1, inf); not normalised.

    ``polynomial([(1, 2), (5, 0)])`` is t^2 + 5.
    """
    terms = [(float(c), float(e)) for c, e in terms]
    if any(c < 0 for c, _ in terms):
        raise DomainError("polynomial growth needs nonnegative coefficients")
    exps = [e for c, e in terms if e > 0 and c > 0]
    if not exps or any(0 < e < 1 for e in exps):
        raise DomainError("polynomial growth needs exponents >= 1")
    return GrowthFunction("polynomial", {"terms": [list(t) for t in terms]},
                          min(exps), max(exps))


def sum_pq(p: float, q: float) -> GrowthFunction:
    """f(t) = (t^p + t^q) / 2, normalised so f(1) = 1."""
    p, q = float(p), float(q)
    return GrowthFunction("sum", {"terms": [[1.0, p], [1.0, q]]}, min(p, q), max(p, q),
                          c0=0.5, scale=2.0)


def power_log(p: float) -> GrowthFunction:
    """f(t) = t^p log(1+t) / log 2; (p, q) = (p, p+1), no c0 bound."""
    p = float(p)
    return GrowthFunction("powerlog", {"p": p}, p, p + 1.0, scale=math.log(2.0))


def sampled(nodes, values, derivs=None, p_lower=None, q_upper=None) -> GrowthFunction:
    """Growth function interpolating samples at positive, increasing nodes.

    Without ``derivs`` the node derivatives come from a monotone (PCHIP)
    fit in log-log coordinates, which reproduces power laws exactly.  The
    interpolant is a C^1 cubic Hermite spline; below the first node it is
    continued by t^p_lower and above the last by t^q_upper.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0) or nodes[0] <= 0:
        raise DomainError("sampled nodes must be positive and strictly increasing")
    if np.any(values <= 0) or np.any(np.diff(values) < 0):
        raise DomainError("sampled values must be positive and nondecreasing")
    if derivs is None:
        loglog = PchipInterpolator(np.log(nodes), np.log(values))
        derivs = values / nodes * loglog.derivative()(np.log(nodes))
    derivs = np.asarray(derivs, dtype=float)

    spline = CubicHermiteSpline(nodes, values, derivs)
    dense = np.concatenate([np.linspace(a, b, 64, endpoint=False)
                            for a, b in zip(nodes[:-1], nodes[1:])] + [nodes[-1:]])
    fd = spline(dense)
    dfd = spline.derivative()(dense)
    if np.any(np.diff(dfd) < -1e-10 * (1.0 + np.abs(dfd[1:]))):
        raise DomainError("sampled data is not convex: interpolated f' decreases")
    ratio = dense * dfd / fd
    if p_lower is None:
        p_lower = max(1.0, float(ratio.min()))
    if q_upper is None:
        q_upper = float(ratio.max())
    p_lower, q_upper = float(p_lower), float(q_upper)
    # continuation exponents must keep f' monotone across the end nodes
    p_lo = min(p_lower, nodes[0] * derivs[0] / values[0])
    q_hi = max(q_upper, nodes[-1] * derivs[-1] / values[-1])
    fprime0 = 0.0 if p_lo > 1.0 else values[0] / nodes[0]
    params = {
        "nodes": nodes.tolist(), "values": values.tolist(), "derivs": derivs.tolist(),
        "p_extrap_low": p_lo, "q_extrap_high": q_hi, "fprime0": fprime0,
    }
    return GrowthFunction("sampled", params, p_lower, q_upper)


def auxiliary_growth(gf: GrowthFunction) -> GrowthFunction:
    """The auxiliary function g(t) = F(t^p) = int_0^t f(s)/s ds as a growth function.

    g satisfies (p, q)-growth with the exponents of f; it is not normalised.
    """
    return GrowthFunction("auxiliary", {"base": gf.to_dict()}, gf.p_lower, gf.q_upper)


_FACTORIES = {
    "power": power,
    "sum": sum_pq,
    "powerlog": power_log,
    "polynomial": polynomial,
    "sampled": sampled,
}


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _as_nonneg(t, name="t"):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be nonnegative, got {t!r}")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def eval_f(gf: GrowthFunction, t):
    arr = _as_nonneg(t)
    return _out(gf.f(np.atleast_1d(arr)).reshape(arr.shape), t)


def eval_fprime(gf: GrowthFunction, t):
    arr = _as_nonneg(t)
    return _out(gf.df(np.atleast_1d(arr)).reshape(arr.shape), t)


def normalize(gf_raw: GrowthFunction) -> GrowthFunction:
    """Return (f - f(0)) / (f(1) - f(0)); a no-op on normalised input."""
    f0, f1 = gf_raw.f(np.array([0.0, 1.0]))
    if not f1 > f0:
        raise DegenerateFunctionError("f(1) == f(0): cannot normalise")
    if f0 == 0.0 and f1 == 1.0:
        return gf_raw
    c0 = None if gf_raw.c0 is None else gf_raw.c0 / (f1 - f0)
    if f0 != 0.0:
        c0 = None
    return GrowthFunction(
        gf_raw.family, gf_raw.params, gf_raw.p_lower, gf_raw.q_upper, c0,
        gf_raw.offset + gf_raw.scale * f0, gf_raw.scale * (f1 - f0), gf_raw.arg_scale,
    )


def log_grid(lo=1e-4, hi=1e4, n=200) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


def growth_ratio(gf: GrowthFunction, t) -> np.ndarray:
    """t f'(t) / f(t) on positive t."""
    t = np.asarray(t, dtype=float)
    ft = gf.f(t)
    if np.any(ft <= 0):
        bad = t[ft <= 0][0]
        raise DegenerateFunctionError(f"f({bad}) = 0 at a positive argument")
    return t * gf.df(t) / ft


def check_growth_bounds(gf: GrowthFunction, t_grid, tol: float | None = None):
    """Estimate the growth exponents on a grid and check them against gf.

    Returns ``(p_est, q_est)`` = (min, max) of t f'(t)/f(t).  Raises
    :class:`GrowthConditionError` when the estimates leave
    [p_lower, q_upper] or when t^-q f fails to decrease / t^-p f fails to
    increase along the sorted grid.
    """
    t = np.sort(np.asarray(t_grid, dtype=float))
    if t.size == 0 or np.any(t <= 0):
        raise DomainError("t_grid must be nonempty and strictly positive")
    tol = gf.rtol if tol is None else tol
    ratio = growth_ratio(gf, t)
    p_est, q_est = float(ratio.min()), float(ratio.max())
    if p_est < gf.p_lower - tol or q_est > gf.q_upper + tol:
        raise GrowthConditionError(
            f"growth ratio range [{p_est}, {q_est}] leaves "
            f"[{gf.p_lower}, {gf.q_upper}]"
        )
    ft = gf.f(t)
    # work in logs so the monotonicity test is insensitive to magnitude
    up = np.log(ft) - gf.q_upper * np.log(t)
    down = np.log(ft) - gf.p_lower * np.log(t)
    if np.any(np.diff(up) > tol) or np.any(np.diff(down) < -tol):
        raise GrowthConditionError("t^-q f(t) or t^-p f(t) is not monotone on the grid")
    return p_est, q_est


class DoublingReport(NamedTuple):
    lower: bool
    upper: bool
    subadditive: bool

    def __bool__(self):
        return self.lower and self.upper and self.subadditive


def doubling_check(gf: GrowthFunction, lam, t, rtol: float | None = None) -> DoublingReport:
    """Two-sided doubling bounds for f' and its subadditivity at (t, lam*t).

    For lam >= 1:  (p/q) lam^{p-1} f'(t) <= f'(lam t) <= (q/p) lam^{q-1} f'(t);
    for lam <= 1 the exponents swap.  Subadditivity is
    (f'(t) + f'(s))/2 <= f'(t+s) <= (q/p) 2^{q-1} (f'(t) + f'(s)).
    Broadcasts over arrays; a bound holds only if it holds everywhere.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("lambda must be positive")
    t = _as_nonneg(t)
    lam, t = np.broadcast_arrays(lam, t)
    lam, t = lam.ravel(), t.ravel()
    rtol = gf.rtol if rtol is None else rtol
    p, q = gf.p_lower, gf.q_upper
    d_t = gf.df(t)
    d_lt = gf.df(lam * t)
    big = lam >= 1.0
    e_lo = np.where(big, p - 1.0, q - 1.0)
    e_hi = np.where(big, q - 1.0, p - 1.0)
    lower = (p / q) * lam ** e_lo * d_t
    upper = (q / p) * lam ** e_hi * d_t
    s = lam * t
    d_s = d_lt
    d_sum = gf.df(t + s)
    sub_lo = 0.5 * (d_t + d_s)
    sub_hi = (q / p) * 2.0 ** (q - 1.0) * (d_t + d_s)
    return DoublingReport(
        bool(np.all(_leq(lower, d_lt, rtol))),
        bool(np.all(_leq(d_lt, upper, rtol))),
        bool(np.all(_leq(sub_lo, d_sum, rtol) & _leq(d_sum, sub_hi, rtol))),
    )


def _leq(a, b, rtol, scale=None):
    """a <= b up to rtol relative to the magnitude of the compared terms."""
    mag = np.maximum(np.abs(a), np.abs(b))
    if scale is not None:
        mag = np.maximum(mag, np.abs(scale))
    return a <= b + rtol * mag + 1e-300


def gen_inverse_fprime(gf: GrowthFunction, y, max_t: float = 1e300):
    """Generalised inverse inf{t >= 0 : f'(t) >= y} by monotone bisection.

    The returned t always satisfies f'(t) >= y; on a plateau of f' it is
    the left end point (to float resolution).
    """
    yv = _as_nonneg(y, "y")
    ya = np.atleast_1d(yv).astype(float).ravel()
    res = np.zeros_like(ya)
    active = ya > 0
    if np.any(active):
        active &= gf.df(np.zeros_like(ya)) < ya
    if np.any(active):
        yy = ya[active]
        hi = np.ones_like(yy)
        need = gf.df(hi) < yy
        while np.any(need):
            hi[need] *= 2.0
            if np.any(hi > max_t):
                raise NumericError(
                    "generalised inverse: y exceeds sup f' on the search bracket",
                    {"y": yy[need].tolist(), "bracket_hi": max_t},
                )
            need = gf.df(hi) < yy
        lo = np.zeros_like(yy)
        for _ in range(2200):
            mid = lo + 0.5 * (hi - lo)
            done = (mid <= lo) | (mid >= hi)
            if np.all(done):
                break
            ok = gf.df(mid) >= yy
            hi = np.where(ok & ~done, mid, hi)
            lo = np.where(~ok & ~done, mid, lo)
        else:
            raise NumericError("generalised inverse: bisection did not converge",
                               {"lo": lo.tolist(), "hi": hi.tolist()})
        res[active] = hi
    return _out(res.reshape(np.shape(yv)), y)


def legendre(gf: GrowthFunction, y):
    """Legendre transform f*(y) = sup_{t >= 0} (y t - f(t)).

    The supremum of the concave map t -> y t - f(t) is attained where f'
    first reaches y, so the maximiser is the generalised inverse of f'.
    """
    yv = _as_nonneg(y, "y")
    ya = np.atleast_1d(yv).astype(float).ravel()
    if gf.family == "power" and gf.p_lower > 1 and gf.offset == 0.0:
        p = gf.p_lower
        # f = t^p (a t)^... reduces to c t^p with c = a^p / scale
        c = gf.arg_scale ** p / gf.scale
        out = (p - 1.0) * (ya / (p * c)) ** (p / (p - 1.0)) * c
    else:
        tstar = np.atleast_1d(gen_inverse_fprime(gf, ya))
        out = ya * tstar - gf.f(tstar)
        out = np.maximum(out, 0.0)
    return _out(out.reshape(np.shape(yv)), y)


# ---------------------------------------------------------------------------
# auxiliary pair F, g
# ---------------------------------------------------------------------------

def _aux_closed_form(gf: GrowthFunction, t: np.ndarray):
    """Exact g for the power-sum families, or None when no closed form applies."""
    if gf.family == "power":
        terms = [(1.0, float(gf.params["p"]))]
    elif gf.family in ("sum", "polynomial"):
        terms = [(float(c), float(e)) for c, e in gf.params["terms"]]
    else:
        return None
    const = sum(c for c, e in terms if e == 0.0) - gf.offset
    if abs(const) > 1e-12 * gf.scale:
        return None
    a = gf.arg_scale
    out = np.zeros_like(t)
    for c, e in terms:
        if e > 0.0:
            out = out + c * (a * t) ** e / e
    return out / gf.scale


def _aux_integral(gf: GrowthFunction, t, method: str = "auto") -> np.ndarray:
    """g(t) = int_0^t f(s)/s ds, vectorised over t.

    ``method="auto"`` uses the exact antiderivative for power-sum families
    and adaptive quadrature otherwise; ``"quad"`` forces quadrature.
    """
    t = np.asarray(t, dtype=float)
    if method == "auto":
        exact = _aux_closed_form(gf, t)
        if exact is not None:
            return exact
    flat = t.ravel()
    out = np.zeros_like(flat)
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = np.zeros_like(uniq)
    p, q = gf.p_lower, gf.q_upper
    head_coef = 0.5 * (1.0 / p + 1.0 / q)

    def integrand(v):
        return float(gf.f(np.array([math.exp(v)]))[0])

    for i, ti in enumerate(uniq):
        if ti <= 0:
            continue
        a = QUAD_EPS * min(1.0, ti)
        head = float(gf.f(np.array([a]))[0]) * head_coef
        val, err = integrate.quad(integrand, math.log(a), math.log(ti),
                                  epsabs=0.0, epsrel=1e-12, limit=200)
        if not np.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300):
            raise NumericError("auxiliary quadrature did not converge",
                               {"t": float(ti), "value": val, "error": err})
        vals[i] = val + head
    out = vals[inv]
    return out.reshape(t.shape)


def auxiliary_g(gf: GrowthFunction, t, method: str = "auto"):
    """g(t) = F(t^p) = int_0^t f(s)/s ds."""
    arr = _as_nonneg(t)
    return _out(_aux_integral(gf, np.atleast_1d(arr), method).reshape(arr.shape), t)


def auxiliary_F(gf: GrowthFunction, t, method: str = "auto"):
    """F(t) = int_0^{t^{1/p}} f(s)/s ds with p = gf.p_lower."""
    arr = _as_nonneg(t)
    g_arg = np.atleast_1d(arr) ** (1.0 / gf.p_lower)
    return _out(_aux_integral(gf, g_arg, method).reshape(arr.shape), t)


def auxiliary_gprime(gf: GrowthFunction, t):
    """g'(t) = f(t)/t (f'(0) at t = 0)."""
    arr = np.atleast_1d(_as_nonneg(t))
    out = np.empty_like(arr, dtype=float)
    pos = arr > 0
    out[pos] = gf.f(arr[pos]) / arr[pos]
    out[~pos] = gf.df(np.zeros(int((~pos).sum())))
    return _out(out.reshape(np.shape(t)), t)


def auxiliary_Fprime(gf: GrowthFunction, t):
    """F'(t) = f(t^{1/p}) / (p t)."""
    arr = np.atleast_1d(_as_nonneg(t))
    p = gf.p_lower
    out = np.zeros_like(arr, dtype=float)
    pos = arr > 0
    out[pos] = gf.f(arr[pos] ** (1.0 / p)) / (p * arr[pos])
    return _out(out.reshape(np.shape(t)), t)


# ---------------------------------------------------------------------------
# the lemma suite
# ---------------------------------------------------------------------------

def lemma_suite(gf: GrowthFunction, t_grid=None) -> dict:
    """Run every structural inequality for growth functions on a grid.

    Returns a mapping check-name -> bool, plus ``p_est``/``q_est``.
    Closed-form identities use ``gf.rtol``; checks that go through the
    auxiliary quadrature use the backed tolerance.
    """
    t = log_grid() if t_grid is None else np.sort(np.asarray(t_grid, dtype=float))
    rtol = gf.rtol
    qtol = max(rtol, BACKED_RTOL)
    p, q = gf.p_lower, gf.q_upper
    ft, dft = gf.f(t), gf.df(t)
    out = {}

    p_est, q_est = check_growth_bounds(gf, t)
    out["p_est"], out["q_est"] = p_est, q_est
    out["growth_bounds"] = True

    out["monotone"] = bool(np.all(np.diff(ft) >= -rtol * ft[1:]))
    a, b = t[:-1], t[1:]
    mid = gf.f(0.5 * (a + b))
    out["convex_midpoint"] = bool(np.all(_leq(mid, 0.5 * (gf.f(a) + gf.f(b)), rtol)))

    lams_up = np.array([1.0, 1.5, 2.0, 4.0, 10.0])
    L, T = np.meshgrid(lams_up, t, indexing="ij")
    f_lt, f_t = gf.f(L * T), gf.f(T)
    out["lemma_upper_monotone"] = bool(np.all(np.diff(np.log(ft) - q * np.log(t)) <= rtol))
    out["lemma_upper_scaling_ge1"] = bool(np.all(_leq(f_lt, L ** q * f_t, rtol)))
    out["lemma_lower_monotone"] = bool(np.all(np.diff(np.log(ft) - p * np.log(t)) >= -rtol))
    out["lemma_lower_scaling_ge1"] = bool(np.all(_leq(L ** p * f_t, f_lt, rtol)))
    Ls = 1.0 / L
    f_st = gf.f(Ls * T)
    out["lemma_upper_scaling_le1"] = bool(np.all(_leq(Ls ** q * f_t, f_st, rtol)))
    out["lemma_lower_scaling_le1"] = bool(np.all(_leq(f_st, Ls ** p * f_t, rtol)))

    out["convex_slope_increasing"] = bool(np.all(np.diff(ft / t) >= -rtol * (ft / t)[1:]))
    out["convex_p1_lower"] = bool(np.all(_leq(ft, t * dft, rtol)))

    lam_all = np.concatenate([1.0 / lams_up[::-1], lams_up[1:]])
    LL, TT = np.meshgrid(lam_all, t, indexing="ij")
    out["doubling"] = bool(doubling_check(gf, LL, TT, rtol))

    f1 = float(gf.f(np.array([1.0]))[0])
    out["growth_envelope"] = bool(
        np.all(_leq(f1 * (t ** p - 1.0), ft, rtol)) and np.all(_leq(ft, f1 * (t ** q + 1.0), rtol))
    )
    if gf.c0 is not None:
        out["nondegeneracy"] = bool(np.all(_leq(gf.c0 * t ** p, ft, rtol)))

    A, B = np.meshgrid(t[::4], t[::4], indexing="ij")
    fa, fb, fab, dfa = gf.f(A), gf.f(B), gf.f(A + B), gf.df(A)
    ok = True
    for theta in (0.0, 0.5, 1.0):
        rhs = theta * dfa * B + (1.0 - theta) * fb
        ok &= bool(np.all(_leq(rhs, fab - fa, rtol, scale=fab)))
    out["convex_increment"] = ok

    ok = True
    dfb = gf.df(B)
    f_ab = gf.f(np.abs(A - B))
    for mu in (0.0, 0.25, 0.5, 0.75, 1.0):
        lhs = gf.f(np.abs(mu * A - B)) - f_ab
        ok &= bool(np.all(_leq(lhs, dfb * A, rtol, scale=np.maximum(f_ab, gf.f(np.abs(mu * A - B))))))
    out["truncation_increment"] = ok

    ok = True
    for c in (1.5, 2.0, 10.0):
        hit = fa <= c * fb
        ok &= bool(np.all(A[hit] <= c * B[hit] * (1.0 + rtol)))
    out["inverse_bound"] = ok

    g = auxiliary_g(gf, t, method="quad")
    out["aux_sandwich"] = bool(np.all(_leq(ft / q, g, qtol)) and np.all(_leq(g, ft / p, qtol)))
    gp = auxiliary_gprime(gf, t)
    out["aux_derivative_sandwich"] = bool(
        np.all(_leq(dft / q, gp, rtol)) and np.all(_leq(gp, dft / p, rtol))
    )
    # F on the image t^p of the grid: F(tau) = g(tau^{1/p})
    tau = t ** p
    F = g
    Fp = auxiliary_Fprime(gf, tau)
    out["aux_F_growth"] = bool(
        np.all(_leq(F, tau * Fp, qtol)) and np.all(_leq(tau * Fp, (q / p) * F, qtol))
    )
    out["aux_F_convex"] = bool(np.all(np.diff(Fp) >= -rtol * Fp[1:]))

    y = dft
    fstar = legendre(gf, y)
    out["legendre_identity"] = bool(np.all(np.abs(fstar - (y * t - ft)) <= rtol * (1.0 + ft)))
    S, TT2 = np.meshgrid(y[::4], t[::4], indexing="ij")
    fs = legendre(gf, y[::4])[:, None]
    out["fenchel"] = bool(np.all(_leq(S * TT2, gf.f(TT2) + fs, rtol)))
    out["legendre_q_bound"] = bool(np.all(_leq(fstar, (q - 1.0) * ft, rtol)))

    inv_y = gen_inverse_fprime(gf, y)
    out["inverse_compositions"] = bool(
        np.all(inv_y <= t * (1.0 + 1e-12)) and np.all(gf.df(np.atleast_1d(gen_inverse_fprime(gf, t))) >= t * (1 - 1e-12))
    )
    return out
