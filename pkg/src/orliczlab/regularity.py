"""Empirical checks of the Hölder and local boundedness estimates and of
the fractional Sobolev, isoperimetric and interpolation inequalities."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .domain import GridFunction
from .energy import tail_fprime_bounds
from .errors import PreconditionError, ResolutionError, UnsupportedConfigurationError
from .growth import GrowthFunction

UNIT_BALL = {1: 2.0, 2: math.pi}


@dataclass
class RegularityReport:
    alpha_hat: float = float("nan")
    holder_constant: float = float("nan")
    osc_decay: list = field(default_factory=list)
    sup_bound_checks: list = field(default_factory=list)
    p_star: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        return x if math.isfinite(x) else "inf"
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def p_star(d: int, s: float, p: float) -> float:
    """Fractional Sobolev exponent dp/(d - sp); requires sp < d."""
    if s * p >= d:
        raise UnsupportedConfigurationError(f"sp = {s * p} >= d = {d}: no Sobolev exponent")
    return d * p / (d - s * p)


def holder_seminorm(u: GridFunction, alpha: float, region, max_dist: float | None = None) -> float:
    """max over node pairs in region of |u_i - u_j| / |x_i - x_j|^alpha."""
    if not 0 < alpha <= 1:
        raise PreconditionError("alpha must lie in (0, 1]")
    idx = np.asarray(region, dtype=int)
    if idx.size < 2:
        raise ResolutionError("region needs at least two nodes")
    X = u.domain.coords[idx]
    r = np.sqrt(np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2))
    du = np.abs(u.values[idx][:, None] - u.values[idx][None, :])
    mask = r > 0
    if max_dist is not None:
        mask &= r <= max_dist
    if not np.any(mask):
        return 0.0
    return float(np.max(du[mask] / r[mask] ** alpha))


def oscillation(u: GridFunction, x0, r: float) -> float:
    ball = u.domain.ball(x0, r)
    if ball.size == 0:
        raise ResolutionError(f"ball of radius {r} holds no nodes")
    vals = u.values[ball]
    return float(vals.max() - vals.min())


class AlphaFit(NamedTuple):
    alpha_hat: float
    fit_residual: float
    constant: bool
    osc_decay: list


def estimate_alpha(u: GridFunction, x0, radii, n_fit: int = 4) -> AlphaFit:
    """Least-squares slope of log osc(B_r(x0)) against log r.

    Radii below 3h are discarded; the ``n_fit`` largest remaining radii
    enter the fit.  The slope is clipped to (0, 1].
    """
    h = u.domain.h
    radii = sorted((float(r) for r in radii), reverse=True)
    if len(radii) < 4:
        raise PreconditionError("estimate_alpha needs at least four radii")
    usable = [r for r in radii if r >= 3 * h * (1 - 1e-12)]
    if len(usable) < 2:
        raise ResolutionError("fewer than two radii are above the 3h resolution floor")
    usable = usable[:n_fit]
    decay = [(r, oscillation(u, x0, r)) for r in usable]
    if decay[0][1] == 0.0:
        return AlphaFit(1.0, 0.0, True, decay)
    pts = [(math.log(r), math.log(o)) for r, o in decay if o > 0]
    if len(pts) < 2:
        return AlphaFit(1.0, 0.0, True, decay)
    lx, ly = np.array(pts).T
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    alpha = float(min(max(coef[0], 1e-12), 1.0))
    return AlphaFit(alpha, resid, False, decay)


def _check_inside(u: GridFunction, x0, radius: float, what: str):
    if u.domain.dist_to_boundary(x0) < radius * (1 - 1e-12):
        raise PreconditionError(f"{what} is not contained in Omega")


def verify_holder_bound(gf: GrowthFunction, u: GridFunction, s: float, x0, R: float,
                        alpha: float | None = None, n_radii: int = 4) -> dict:
    """Both sides of R^a [u]_{C^a(B_R)} <= C ||u||_{L^inf(B_4R)} + Tail(u; x0, 4R).

    The exponent is fitted from the oscillation on radii 4R, 2R, R, ...
    unless given.  ``C_fit`` is the smallest C making the bound hold,
    (lhs - tail)/sup clipped at 0.
    """
    dom = u.domain
    x0 = np.asarray(x0, dtype=float).reshape(dom.dim)
    _check_inside(u, x0, 8 * R, "B_8R(x0)")
    fit = None
    if alpha is None:
        radii = [4 * R * 2.0 ** (-j) for j in range(n_radii + 8)]
        radii = [r for r in radii if r >= 3 * dom.h * (1 - 1e-12)]
        if len(radii) < 4:
            raise ResolutionError("grid too coarse for four radii >= 3h below 4R")
        fit = estimate_alpha(u, x0, radii, n_fit=n_radii)
        alpha = fit.alpha_hat
    ball = dom.ball(x0, R)
    lhs = R ** alpha * holder_seminorm(u, alpha, ball)
    sup = float(np.max(np.abs(u.values[dom.ball(x0, 4 * R)])))
    tb = tail_fprime_bounds(gf, u, x0, 4 * R, s)
    tail = tb["tail"]
    if sup > 0:
        C_fit = max(0.0, (lhs - tail) / sup)
    else:
        C_fit = 0.0 if lhs <= tail else math.inf
    return {
        "lhs": lhs,
        "rhs": C_fit * sup + tail,
        "supnorm": sup,
        "tail": tail,
        "tail_upper_bound": tb["tail_upper_bound"],
        "C_fit": C_fit,
        "C_sup_only": lhs / sup if sup > 0 else 0.0,
        "alpha_hat": alpha,
        "fit_residual": None if fit is None else fit.fit_residual,
        "osc_decay": [] if fit is None else fit.osc_decay,
        "holds": bool(lhs <= C_fit * sup + tail + 1e-12 * max(lhs, 1.0)),
    }


def local_bound_exponents(d: int, s: float, p: float, q: float):
    """(p*, delta exponent, mean exponent) of the local boundedness estimate."""
    ps = p_star(d, s, p)
    if q >= ps:
        raise UnsupportedConfigurationError(f"q = {q} >= p* = {ps}")
    e_delta = -(q - 1.0) * (ps / p) / (ps - q)
    e_mean = (ps - p) / (p * (ps - q))
    return ps, e_delta, e_mean


def verify_local_bound(gf: GrowthFunction, u: GridFunction, s: float, x0, R: float,
                       deltas) -> dict:
    """sup_{B_R}|u| <= delta Tail(u;x0,R) + C delta^e (mean_{B_R}|u|^q)^m + delta^{(q-1)/q}.

    For each delta the smallest admissible C is computed; ``C_fit`` is
    their maximum, so one constant serves every delta.
    """
    dom = u.domain
    x0 = np.asarray(x0, dtype=float).reshape(dom.dim)
    p, q = gf.p_lower, gf.q_upper
    ps, e_delta, e_mean = local_bound_exponents(dom.dim, s, p, q)
    _check_inside(u, x0, 2 * R, "B_2R(x0)")
    deltas = [float(dl) for dl in deltas]
    if not deltas or any(not 0 < dl < 1 for dl in deltas):
        raise PreconditionError("deltas must be a nonempty list in (0, 1)")
    ball = dom.ball(x0, R)
    absu = np.abs(u.values[ball])
    lhs = float(absu.max())
    mean_q = float(np.mean(absu ** q))
    A = mean_q ** e_mean
    tail = tail_fprime_bounds(gf, u, x0, R, s)["tail"]
    rows = []
    for dl in deltas:
        rest = lhs - dl * tail - dl ** ((q - 1.0) / q)
        coef = dl ** e_delta * A
        if rest <= 0:
            c = 0.0
        elif coef > 0:
            c = rest / coef
        else:
            c = math.inf
        rows.append({"delta": dl, "lhs": lhs, "C_delta": c, "tail": tail,
                     "mean_term": coef, "delta_term": dl ** ((q - 1.0) / q)})
    C_fit = max(r["C_delta"] for r in rows)
    for r in rows:
        r["rhs"] = r["delta"] * tail + C_fit * r["mean_term"] + r["delta_term"]
        r["holds"] = bool(r["lhs"] <= r["rhs"] * (1 + 1e-12))
    return {"p_star": ps, "C_fit": C_fit, "rows": rows, "tail": tail, "sup": lhs,
            "mean_q": mean_q}


# ---------------------------------------------------------------------------
# functional inequalities
# ---------------------------------------------------------------------------

def _gagliardo(u: GridFunction, rows, cols, sigma: float, p: float) -> float:
    """sum h^{2d} |u_i - u_j|^p / |x_i - x_j|^{d + sigma p} over i in rows, j in cols."""
    dom = u.domain
    X = dom.coords
    rows, cols = np.asarray(rows), np.asarray(cols)
    r = np.sqrt(np.sum((X[rows][:, None, :] - X[cols][None, :, :]) ** 2, axis=2))
    du = np.abs(u.values[rows][:, None] - u.values[cols][None, :])
    mask = r > 0
    d = dom.dim
    return float(dom.cell ** 2 * np.sum(du[mask] ** p / r[mask] ** (d + sigma * p)))


def sobolev_embedding_check(u: GridFunction, s: float, p: float, R_ball: float, x0=None) -> dict:
    """||u||_{L^p*(B_R)}^p against (1-s)/(d-sp)^{p-1} [u]^p + R^{-sp} ||u||_p^p.

    ``ratio`` is lhs over the bracket, i.e. the constant the data needs.
    """
    dom = u.domain
    d = dom.dim
    ps = p_star(d, s, p)
    x0 = np.asarray(dom.center if x0 is None else x0, dtype=float).reshape(d)
    ball = dom.ball(x0, R_ball)
    if ball.size < 2:
        raise ResolutionError("ball holds fewer than two nodes")
    vals = np.abs(u.values[ball])
    lhs = (dom.cell * float(np.sum(vals ** ps))) ** (p / ps)
    gag = _gagliardo(u, ball, ball, s, p)
    rhs = (1.0 - s) / (d - s * p) ** (p - 1.0) * gag + R_ball ** (-s * p) * dom.cell * float(np.sum(vals ** p))
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio, "p_star": ps, "gagliardo": gag}


def isoperimetric_check(u: GridFunction, s: float, p: float, R_ball: float, h_level: float,
                        k_level: float, gamma: float, gamma0: float, C0: float,
                        x0=None) -> dict:
    """Degenerate-case isoperimetric inequality on B_R(x0).

    The three hypotheses (two measure bounds and the energy bound) are
    checked first; when any fails the result has ``hypotheses_met=False``
    and no constant.  Otherwise ``holds_with_C`` is the smallest admissible
    C; it is +inf (and ``band_empty`` is set) when {h < u < k} has no nodes.
    """
    if not k_level > h_level:
        raise PreconditionError("need k_level > h_level")
    dom = u.domain
    d = dom.dim
    x0 = np.asarray(dom.center if x0 is None else x0, dtype=float).reshape(d)
    ball = dom.ball(x0, R_ball)
    vals = u.values[ball]
    cell = dom.cell
    vol = cell * ball.size
    low = cell * float(np.sum(vals <= h_level))
    high = cell * float(np.sum(vals >= k_level))
    band = cell * float(np.sum((vals > h_level) & (vals < k_level)))
    gag = _gagliardo(u, ball, ball, s, p)
    seminorm = gag ** (1.0 / p)
    energy = cell * float(np.sum(np.abs(vals) ** p)) + (1.0 - s) * R_ball ** (s * p) * gag
    hyp = {
        "low_measure": low >= gamma * vol,
        "high_measure": high >= gamma0 * vol,
        "energy": energy <= C0 * R_ball ** d * (k_level - h_level) ** p,
    }
    out = {"hypotheses": hyp, "hypotheses_met": all(hyp.values()),
           "measure_low": low, "measure_high": high, "measure_band": band,
           "band_empty": band == 0.0, "lhs": None, "rhs": None, "holds_with_C": None}
    if not out["hypotheses_met"]:
        return out
    lhs = (k_level - h_level) * (low * high) ** ((d - 1.0) / d)
    rhs = R_ball ** (d - 2.0 + s) * (1.0 - s) ** (1.0 / p) * seminorm * band ** ((p - 1.0) / p)
    out["lhs"], out["rhs"] = lhs, rhs
    out["holds_with_C"] = lhs / rhs if rhs > 0 else math.inf
    return out


def interpolation_check(u: GridFunction, sigma: float, p: float, sigma_t: float, p_t: float,
                        inner, outer) -> dict:
    """Lower-order Gagliardo seminorm bounded through Hölder's inequality.

    Checks (sum |du|^pt / r^{d+st pt})^{1/pt} <= C |inner|^{(p-pt)/(p pt)}
    diam(outer)^{sigma-st} (sum |du|^p / r^{d+sigma p})^{1/p} with the
    explicit constant C; pairs run over inner x outer.
    """
    if not (0 < sigma_t < sigma < 1 and 1 <= p_t < p):
        raise PreconditionError("need 0 < sigma_t < sigma < 1 and 1 <= p_t < p")
    dom = u.domain
    d = dom.dim
    inner, outer = np.asarray(inner), np.asarray(outer)
    X = dom.coords[outer]
    diam = float(np.max(np.sqrt(np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2))))
    lhs = _gagliardo(u, inner, outer, sigma_t, p_t) ** (1.0 / p_t)
    e = (p - p_t) / (p * p_t)
    C = (d * (p - p_t) / ((sigma - sigma_t) * p * p_t) * UNIT_BALL[d]) ** e
    rhs = (C * (dom.cell * inner.size) ** e * diam ** (sigma - sigma_t)
           * _gagliardo(u, inner, outer, sigma, p) ** (1.0 / p))
    return {"lhs": lhs, "rhs": rhs, "constant": C, "holds": bool(lhs <= rhs * (1 + 1e-12))}
