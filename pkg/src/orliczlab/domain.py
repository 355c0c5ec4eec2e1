"""Uniform grids in dimension 1 or 2, grid functions and pair weights.

Nodes are integer multiples of ``h`` inside the closed Euclidean ball of
radius ``R_infinity`` around the domain center.  The discrete Omega is the
open max-norm box of half-width ``omega_radius``; every other node belongs
to the exterior collar.  Nodes are stored with x varying fastest.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, StructureConditionError

_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class GridDomain:
    dim: int
    h: float
    omega_radius: float
    R_infinity: float
    center: tuple = None
    coords: np.ndarray = field(init=False, repr=False)
    is_interior: np.ndarray = field(init=False, repr=False)
    interior: np.ndarray = field(init=False, repr=False)
    exterior: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"dim must be 1 or 2, got {self.dim}")
        if not self.h > 0:
            raise ConfigurationError("h must be positive")
        if self.omega_radius < 2 * self.h * (1 - _EPS):
            raise ConfigurationError("omega_radius must be at least 2h")
        if self.R_infinity < 4 * self.omega_radius * (1 - _EPS):
            raise ConfigurationError(
                f"R_infinity={self.R_infinity} < 4*omega_radius={4 * self.omega_radius}"
            )
        center = (0.0,) * self.dim if self.center is None else tuple(map(float, self.center))
        if len(center) != self.dim:
            raise ConfigurationError("center must have dim coordinates")
        object.__setattr__(self, "center", center)

        h, R = self.h, self.R_infinity
        axes = []
        for c in center:
            lo = math.ceil((c - R) / h - _EPS)
            hi = math.floor((c + R) / h + _EPS)
            axes.append(np.arange(lo, hi + 1) * h)
        if self.dim == 1:
            pts = axes[0][:, None]
        else:
            X, Y = np.meshgrid(axes[0], axes[1])
            pts = np.column_stack([X.ravel(), Y.ravel()])
        c = np.asarray(center)
        keep = np.linalg.norm(pts - c, axis=1) <= R * (1 + 1e-12)
        pts = pts[keep]
        inner = np.max(np.abs(pts - c), axis=1) < self.omega_radius - _EPS * h
        for name, val in (("coords", pts), ("is_interior", inner),
                          ("interior", np.flatnonzero(inner)),
                          ("exterior", np.flatnonzero(~inner))):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def cell(self) -> float:
        """Volume h^d of one grid cell."""
        return self.h ** self.dim

    def dist_to_boundary(self, x) -> float:
        """Max-norm distance from x to the boundary of the box Omega."""
        x = np.asarray(x, dtype=float)
        return float(self.omega_radius - np.max(np.abs(x - np.asarray(self.center))))

    def ball(self, x0, R, closed: bool = True) -> np.ndarray:
        """Indices of nodes in the Euclidean ball B_R(x0)."""
        d = self.distances(x0)
        if closed:
            return np.flatnonzero(d <= R * (1 + 1e-12))
        return np.flatnonzero(d < R * (1 - 1e-12))

    def distances(self, x0) -> np.ndarray:
        x0 = np.asarray(x0, dtype=float).reshape(self.dim)
        return np.linalg.norm(self.coords - x0, axis=1)

    def node_index(self, x) -> int:
        """Index of the node nearest to x."""
        return int(np.argmin(self.distances(x)))

    def to_dict(self) -> dict:
        d = {"dim": self.dim, "h": self.h, "omega_radius": self.omega_radius,
             "R_infinity": self.R_infinity}
        if any(c != 0.0 for c in self.center):
            d["center"] = list(self.center)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_grid(dim: int, h: float, omega_radius: float, R_infinity: float,
               center=None) -> GridDomain:
    """Build the grid; see :class:`GridDomain` for the node classification."""
    return GridDomain(int(dim), float(h), float(omega_radius), float(R_infinity), center)


def domain_from_dict(d: dict) -> GridDomain:
    return build_grid(d["dim"], d["h"], d["omega_radius"], d["R_infinity"], d.get("center"))


def domain_from_json(text: str) -> GridDomain:
    return domain_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# grid functions
# ---------------------------------------------------------------------------

class GridFunction:
    """Immutable nodal values on every node of a :class:`GridDomain`."""

    __slots__ = ("domain", "values")

    def __init__(self, domain: GridDomain, values):
        vals = np.array(values, dtype=float).reshape(-1)
        if vals.size != domain.n_nodes:
            raise DomainError(f"expected {domain.n_nodes} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid function values must be finite")
        vals.setflags(write=False)
        self.domain = domain
        self.values = vals

    @classmethod
    def from_callable(cls, domain: GridDomain, fn: Callable) -> "GridFunction":
        """Evaluate fn on the (N, dim) coordinate array."""
        return cls(domain, np.broadcast_to(fn(domain.coords), (domain.n_nodes,)))

    @classmethod
    def constant(cls, domain: GridDomain, c: float) -> "GridFunction":
        return cls(domain, np.full(domain.n_nodes, float(c)))

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.domain.interior]

    @property
    def exterior_values(self) -> np.ndarray:
        return self.values[self.domain.exterior]

    def with_interior(self, vals) -> "GridFunction":
        new = self.values.copy()
        new[self.domain.interior] = vals
        return GridFunction(self.domain, new)

    def __neg__(self):
        return GridFunction(self.domain, -self.values)

    def __mul__(self, c):
        return GridFunction(self.domain, self.values * float(c))

    __rmul__ = __mul__

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["x", "y"][: self.domain.dim] + ["interior", "value"]
        w.writerow(header)
        for pt, inside, v in zip(self.domain.coords, self.domain.is_interior, self.values):
            w.writerow([repr(float(c)) for c in pt] + [int(inside), repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, domain: GridDomain, source) -> "GridFunction":
        """Read values written by :meth:`to_csv`; ``source`` is a path or CSV text."""
        if "\n" in str(source):
            text = str(source)
        else:
            with open(source) as fh:
                text = fh.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        if len(rows) != domain.n_nodes:
            raise DomainError("CSV node count does not match the domain")
        pts = np.array([[float(r[k]) for k in ("x", "y")[: domain.dim]] for r in rows])
        if not np.allclose(pts, domain.coords, rtol=0, atol=1e-9 * domain.h):
            raise DomainError("CSV coordinates do not match the domain")
        return cls(domain, [float(r["value"]) for r in rows])

    def to_bytes(self) -> bytes:
        """Little-endian float64 values in node order (x fastest)."""
        return self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, domain: GridDomain, data: bytes) -> "GridFunction":
        return cls(domain, np.frombuffer(data, dtype="<f8"))


def level_sets(u: GridFunction, k: float):
    """(A_k^+, A_k^-) = ({u > k}, {u < k}) as index arrays; u == k is in neither."""
    return np.flatnonzero(u.values > k), np.flatnonzero(u.values < k)


# ---------------------------------------------------------------------------
# pair weights
# ---------------------------------------------------------------------------

class QuadratureTable:
    """Pair weights w_ij = (1-s) h^{2d} |x_i - x_j|^{-d}, zero on the diagonal.

    Blocks are computed on demand; the interior-by-all block used by the
    energy and the solver is cached.
    """

    def __init__(self, domain: GridDomain, s: float):
        if not 0.0 < s < 1.0:
            raise DomainError(f"s must lie in (0, 1), got {s}")
        self.domain = domain
        self.s = float(s)
        self._cache = {}

    def distances(self, rows, cols) -> np.ndarray:
        X = self.domain.coords
        diff = X[np.asarray(rows)][:, None, :] - X[np.asarray(cols)][None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))

    def block(self, rows, cols):
        """Return (w, r) for the pair block rows x cols; w = 0 where i == j."""
        rows, cols = np.asarray(rows), np.asarray(cols)
        r = self.distances(rows, cols)
        diag = rows[:, None] == cols[None, :]
        r = np.where(diag, np.inf, r)
        d = self.domain.dim
        w = (1.0 - self.s) * self.domain.h ** (2 * d) * r ** (-d)
        return w, r

    def weight(self, i: int, j: int) -> float:
        if i == j:
            raise KeyError("diagonal pairs are excluded")
        return float(self.block([i], [j])[0][0, 0])

    def interior_block(self):
        """(w, r) for rows = interior nodes, cols = all nodes."""
        if "int" not in self._cache:
            dom = self.domain
            self._cache["int"] = self.block(dom.interior, np.arange(dom.n_nodes))
        return self._cache["int"]


def pair_weights(dom: GridDomain, s: float) -> QuadratureTable:
    return QuadratureTable(dom, s)


# ---------------------------------------------------------------------------
# kernel coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelCoefficient:
    """Symmetric coefficient k(x, y) with values in [1/Lambda, Lambda].

    ``evaluator`` maps coordinate arrays of shape (..., dim) and (..., dim)
    to an array of shape (...).
    """

    evaluator: Callable
    Lambda: float = 1.0
    symmetric: bool = True
    name: str = "one"

    def __call__(self, X, Y):
        return self.evaluator(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))

    def block(self, dom: GridDomain, rows, cols) -> np.ndarray:
        X = dom.coords
        return self(X[np.asarray(rows)][:, None, :], X[np.asarray(cols)][None, :, :])

    def check(self, dom: GridDomain, rows, cols, K=None) -> None:
        """Raise StructureConditionError if (k) fails on the block."""
        if K is None:
            K = self.block(dom, rows, cols)
        lo, hi = 1.0 / self.Lambda, self.Lambda
        bad = (K < lo * (1 - 1e-12)) | (K > hi * (1 + 1e-12)) | ~np.isfinite(K)
        if np.any(bad):
            a, b = np.argwhere(bad)[0]
            i, j = int(np.asarray(rows)[a]), int(np.asarray(cols)[b])
            raise StructureConditionError(
                f"k({i},{j}) = {K[a, b]} outside [{lo}, {hi}]",
                sample={"i": i, "j": j, "value": float(K[a, b])},
            )
        Kt = self.block(dom, cols, rows)
        if not np.allclose(K, Kt.T, rtol=1e-12, atol=0):
            a, b = np.argwhere(~np.isclose(K, Kt.T, rtol=1e-12, atol=0))[0]
            raise StructureConditionError(
                "k is not symmetric",
                sample={"i": int(np.asarray(rows)[a]), "j": int(np.asarray(cols)[b])},
            )


def kernel_one() -> KernelCoefficient:
    return KernelCoefficient(lambda X, Y: np.ones(np.broadcast_shapes(X.shape, Y.shape)[:-1]),
                             1.0, True, "one")


def kernel_lambda(v: float) -> KernelCoefficient:
    """The constant kernel k = v."""
    v = float(v)
    if not v > 0:
        raise ConfigurationError("kernel constant must be positive")
    return KernelCoefficient(
        lambda X, Y: np.full(np.broadcast_shapes(X.shape, Y.shape)[:-1], v),
        max(v, 1.0 / v), True, f"lambda:{v:g}",
    )


def kernel_checker(v: float) -> KernelCoefficient:
    """Checkerboard kernel: v when the cells of x and y have equal parity, else 1/v.

    Cell parity is that of sum_i floor(4 x_i), so the pattern has period 1/2.
    """
    v = float(v)
    if not v > 0:
        raise ConfigurationError("kernel constant must be positive")

    def ev(X, Y):
        px = np.sum(np.floor(4.0 * X + 1e-9), axis=-1)
        py = np.sum(np.floor(4.0 * Y + 1e-9), axis=-1)
        same = (px + py) % 2 == 0
        return np.where(same, v, 1.0 / v)

    return KernelCoefficient(ev, max(v, 1.0 / v), True, f"checker:{v:g}")


def kernel_from_spec(spec: str) -> KernelCoefficient:
    """Parse ``"one"``, ``"lambda:<v>"`` or ``"checker:<v>"``."""
    spec = spec.strip()
    if spec == "one":
        return kernel_one()
    kind, _, val = spec.partition(":")
    try:
        v = float(val)
    except ValueError:
        raise ConfigurationError(f"bad kernel spec {spec!r}") from None
    if kind == "lambda":
        return kernel_lambda(v)
    if kind == "checker":
        return kernel_checker(v)
    raise ConfigurationError(f"bad kernel spec {spec!r}")
