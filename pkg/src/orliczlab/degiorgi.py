"""The De Giorgi class inequality evaluated on grid functions.

For a centre x0, radii r < R and a level k, :func:`caccioppoli_gap`
computes both sides of the Caccioppoli-type inequality defining the
classes G_+ / G_- and the smallest constant c that makes it hold.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .domain import GridFunction, QuadratureTable
from .errors import PreconditionError, ResolutionError
from .growth import GrowthFunction, auxiliary_growth

GENERATOR = "numpy.random.PCG64/1"


@dataclass
class CaccioppoliReport:
    x0: list
    r: float
    R: float
    k_level: float
    sign: str
    lhs_seminorm: float
    lhs_cross: float
    rhs_local: float
    rhs_tail: float
    c_min: float
    flag: str = "ok"
    growth: str = "f"
    s: float = field(default=float("nan"), repr=False)
    _u: GridFunction | None = field(default=None, repr=False, compare=False)

    @property
    def lhs(self) -> float:
        return self.lhs_seminorm + self.lhs_cross

    @property
    def rhs(self) -> float:
        return self.rhs_local + self.rhs_tail

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("_u")
        d.pop("s")
        d["c_min"] = _json_float(self.c_min)
        return d


def _json_float(x: float):
    return x if math.isfinite(x) else "inf"


def _c_min(lhs: float, rhs: float):
    if rhs > 0:
        return lhs / rhs, "ok"
    if lhs > 0:
        return math.inf, "zero_denominator"
    return 0.0, "ok"


def caccioppoli_gap(gf: GrowthFunction, u: GridFunction, s: float, x0, r: float, R: float,
                    k_level: float, sign: str = "plus") -> CaccioppoliReport:
    """Both sides of the class inequality for one (x0, r, R, k) sample.

    ``sign="minus"`` evaluates the G_- inequality, which is the G_+
    inequality for -u at level -k.
    """
    if sign not in ("plus", "minus"):
        raise PreconditionError("sign must be 'plus' or 'minus'")
    if sign == "minus":
        rep = caccioppoli_gap(gf, -u, s, x0, r, R, -k_level, "plus")
        rep.sign, rep.k_level, rep._u = "minus", float(k_level), u
        return rep
    dom = u.domain
    x0 = np.asarray(x0, dtype=float).reshape(dom.dim)
    if not 0 < r < R:
        raise PreconditionError("need 0 < r < R")
    if dom.dist_to_boundary(x0) < R * (1 - 1e-12):
        raise PreconditionError("B_R(x0) is not contained in Omega")
    d = dom.dim
    q = gf.q_upper
    table = QuadratureTable(dom, s)

    rho = dom.distances(x0)
    Br = np.flatnonzero(rho <= r * (1 + 1e-12))
    BR = np.flatnonzero(rho <= R * (1 + 1e-12))
    if Br.size == 0:
        raise ResolutionError(f"B_r(x0) with r={r} holds no grid nodes")
    wp = np.maximum(u.values - k_level, 0.0)
    wm = np.maximum(k_level - u.values, 0.0)

    W, dist = table.block(Br, Br)
    lhs_sem = float(np.sum(W * gf.f(np.abs(wp[Br][:, None] - wp[Br][None, :]) / dist ** s)))

    Am = np.flatnonzero(u.values < k_level)
    act = Br[wp[Br] > 0]
    if Am.size and act.size:
        W2, d2 = table.block(act, Am)
        ds = d2 ** s
        lhs_cross = float(np.sum(W2 * gf.df(wm[Am][None, :] / ds) * wp[act][:, None] / ds))
    else:
        lhs_cross = 0.0

    ratio = R / (R - r)
    rhs_local = ratio ** q * dom.cell * float(np.sum(gf.f(wp[BR] / R ** s)))
    l1 = dom.cell * float(np.sum(wp[BR]))
    outside = np.flatnonzero(rho > r * (1 + 1e-12))
    po = rho[outside]
    tail_sum = dom.cell * float(np.sum(gf.df(wp[outside] / po ** s) * po ** (-d - s)))
    rhs_tail = (1.0 - s) * ratio ** (d + s * q) * l1 * tail_sum

    c, flag = _c_min(lhs_sem + lhs_cross, rhs_local + rhs_tail)
    return CaccioppoliReport(x0.tolist(), float(r), float(R), float(k_level), "plus",
                             lhs_sem, lhs_cross, rhs_local, rhs_tail, c, flag,
                             s=float(s), _u=u)


def transfer_to_g(report: CaccioppoliReport, gf: GrowthFunction, u: GridFunction | None = None,
                  s: float | None = None) -> CaccioppoliReport:
    """Recompute a report with the auxiliary function g in place of f.

    Termwise sandwiches give c_min(g) <= (q/p) c_min(f); the result carries
    ``growth="g"`` and a flag ``transfer_bound_violated`` if that fails.
    """
    u = report._u if u is None else u
    s = report.s if s is None else s
    if u is None:
        raise PreconditionError("the report does not carry its grid function; pass u")
    g = auxiliary_growth(gf)
    out = caccioppoli_gap(g, u, s, report.x0, report.r, report.R, report.k_level, report.sign)
    out.growth = "g"
    bound = gf.q_upper / gf.p_lower * report.c_min
    if out.c_min > bound * (1 + 1e-4) + 1e-300:
        out.flag = "transfer_bound_violated"
    return out


@dataclass(frozen=True)
class SampleSpec:
    """Recipe for random (x0, r, R, k, sign) samples.

    Centres and radii are drawn in physical units and snapped to multiples
    of ``snap`` (default: the grid spacing) so the same seed gives the same
    geometric samples on a grid and on its refinements.
    """

    n_samples: int = 50
    seed: int = 0
    R_range: tuple = (0.2, 0.5)
    r_ratio: tuple = (0.3, 0.8)
    quantiles: tuple = (0.2, 0.4, 0.6, 0.8)
    signs: tuple = ("plus", "minus")
    snap: float | None = None


def draw_samples(dom, spec: SampleSpec) -> list:
    """Geometric samples (x0, r, R, quantile, sign) for ``spec``; u-independent."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    snap = dom.h if spec.snap is None else float(spec.snap)
    half = snap / 2.0
    c = np.asarray(dom.center)
    out = []
    attempts = 0
    while len(out) < spec.n_samples:
        attempts += 1
        if attempts > 100 * spec.n_samples:
            raise ResolutionError("could not draw admissible samples; check R_range")
        R = round(rng.uniform(*spec.R_range) / half) * half
        ratio = rng.uniform(*spec.r_ratio)
        r = round(ratio * R / half) * half
        width = dom.omega_radius - R
        x0 = c + rng.uniform(-width, width, size=dom.dim)
        x0 = np.round(x0 / snap) * snap
        qt = spec.quantiles[int(rng.integers(len(spec.quantiles)))]
        sg = spec.signs[int(rng.integers(len(spec.signs)))]
        if not (R > 0 and 0 < r < R and spec.r_ratio[0] <= r / R <= spec.r_ratio[1]):
            continue
        if dom.dist_to_boundary(x0) < R * (1 - 1e-12):
            continue
        out.append((x0, float(r), float(R), float(qt), sg))
    return out


def dg_membership(gf: GrowthFunction, u: GridFunction, s: float, sample_spec: SampleSpec) -> dict:
    """Largest c_min over the samples; an empirical, sample-based class constant."""
    dom = u.domain
    reports = []
    for x0, r, R, qt, sg in draw_samples(dom, sample_spec):
        ball = dom.ball(x0, R)
        k = float(np.quantile(u.values[ball], qt))
        reports.append(caccioppoli_gap(gf, u, s, x0, r, R, k, sg))
    worst = max(reports, key=lambda rep: rep.c_min)
    return {
        "c_empirical": worst.c_min,
        "worst_sample": worst,
        "reports": reports,
        "n_samples": len(reports),
        "generator": GENERATOR,
        "seed": sample_spec.seed,
        "sample_based": True,
    }


def reports_to_json(reports) -> str:
    return json.dumps([rep.to_dict() for rep in reports], sort_keys=True, indent=1)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x0", "r", "R", "k", "sign", "c_min"])
    for rep in reports:
        w.writerow([" ".join(repr(float(c)) for c in rep.x0), repr(rep.r), repr(rep.R),
                    repr(rep.k_level), rep.sign, repr(rep.c_min)])
    return buf.getvalue()


def fast_convergence(y0: float, C: float, b: float, beta: float, n_steps: int) -> dict:
    """Iterate y_{j+1} = C b^j y_j^{1+beta} and test the geometric bound.

    When y0 <= C^{-1/beta} b^{-1/beta^2} the iterates satisfy
    y_j <= y0 b^{-j/beta} for every j; ``bound_ok`` records whether that
    held (it is vacuously true above the threshold).  ``converges`` means
    the last iterate is below 1e-12 or the last few iterates shrink
    strictly and stay below y0.
    """
    if not (C > 0 and b > 0 and beta > 0 and y0 >= 0):
        raise PreconditionError("need C, b, beta > 0 and y0 >= 0")
    threshold = C ** (-1.0 / beta) * b ** (-1.0 / beta ** 2)
    seq = [float(y0)]
    y = float(y0)
    diverged = False
    for j in range(n_steps):
        if diverged:
            seq.append(math.inf)
            continue
        try:
            y = C * b ** j * y ** (1.0 + beta)
        except OverflowError:
            y = math.inf
        if not math.isfinite(y) or y > 1e300:
            diverged = True
            y = math.inf
        seq.append(y)
    below = y0 <= threshold
    bound_ok = True
    if below:
        for j, yj in enumerate(seq):
            bound = y0 * b ** (-j / beta)
            if not yj <= bound * (1 + 1e-12):
                bound_ok = False
                break
    # converging: tiny at the end, or a strictly shrinking tail below y0
    tail = seq[-4:]
    shrinking = len(tail) > 1 and all(b < a for a, b in zip(tail, tail[1:])) and seq[-1] < y0
    return {
        "sequence": seq,
        "converges": (not diverged) and (seq[-1] < 1e-12 or shrinking),
        "diverged": diverged,
        "bound_ok": bound_ok,
        "below_threshold": below,
        "threshold": threshold,
    }
