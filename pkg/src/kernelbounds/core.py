"""Exponent algebra, weight functions and evaluation grids.

Everything here is immutable; weights are vectorised callables so that the
quadrature layers can evaluate them on whole node arrays at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ExponentSet:
    """The pair ``(p, q)`` with ``1 < q < p`` and every exponent derived from it.

    ``e_tail``/``e_inner`` are the powers carried by the q-side and p'-side
    factors when the p'-side factor is the integrator; ``e_tail_dual`` and
    ``e_inner_dual`` are the powers for the integration-by-parts form.
    """

    p: float
    q: float
    p_prime: float = field(init=False)
    q_prime: float = field(init=False)
    e_tail: float = field(init=False)
    e_inner: float = field(init=False)
    e_tail_dual: float = field(init=False)
    e_inner_dual: float = field(init=False)
    e_outer: float = field(init=False)

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        if not (math.isfinite(p) and math.isfinite(q)):
            raise ValueError(f"exponents must be finite, got p={p}, q={q}")
        if p <= 1 or q <= 1:
            raise ValueError(f"need p > 1 and q > 1, got p={p}, q={q}")
        if q >= p:
            raise ValueError(
                f"only the regime 1 < q < p is supported, got p={p}, q={q}")
        d = p - q
        values = dict(
            p=p,
            q=q,
            p_prime=p / (p - 1.0),
            q_prime=q / (q - 1.0),
            e_tail=p / d,
            e_inner=p * (q - 1.0) / d,
            e_tail_dual=q / d,
            e_inner_dual=q * (p - 1.0) / d,
            e_outer=d / (p * q),
        )
        for name, value in values.items():
            object.__setattr__(self, name, value)

    @property
    def form_ratio(self) -> float:
        """Exact ratio between the two integral forms of a B constant.

        For continuous factors, integration by parts gives
        ``I_direct = (p'/q) * I_dual`` before the outer power is applied.
        """
        return self.p_prime / self.q

    def dual(self) -> "ExponentSet":
        """Exponents of the adjoint problem, ``(p, q) -> (q', p')``."""
        return ExponentSet(self.q_prime, self.p_prime)


def derive_exponents(p: float, q: float) -> ExponentSet:
    return ExponentSet(p, q)


# --------------------------------------------------------------------------
# weights


class WeightSpec:
    """Base class for nonnegative weights on (0, inf).

    Subclasses implement ``__call__`` on arrays and report the points where
    the weight is not smooth (``breakpoints``) so quadrature can split there.
    """

    role: str | None = None

    def __call__(self, t):
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def scaled(self, factor: float) -> "WeightSpec":
        return Product((Power(factor, 0.0), self))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Power(WeightSpec):
    """``coef * t**exponent``."""

    coef: float = 1.0
    exponent: float = 0.0

    def __post_init__(self):
        if self.coef < 0:
            raise ValueError("power weight needs a nonnegative coefficient")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.exponent == 0.0:
            return np.full_like(t, self.coef)
        with np.errstate(divide="ignore", over="ignore"):
            return self.coef * t ** self.exponent

    def scaled(self, factor):
        return Power(self.coef * factor, self.exponent)

    def to_dict(self):
        return {"kind": "power", "coef": self.coef, "exponent": self.exponent}


def Constant(value: float = 1.0) -> Power:
    return Power(value, 0.0)


@dataclass(frozen=True)
class Window(WeightSpec):
    """Indicator of the half-open interval ``(a, b]``."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"empty window ({self.a}, {self.b}]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return ((t > self.a) & (t <= self.b)).astype(float)

    @property
    def support(self):
        return (self.a, self.b)

    @property
    def breakpoints(self):
        return tuple(x for x in (self.a, self.b) if 0 < x < math.inf)

    def to_dict(self):
        return {"kind": "window", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Table(WeightSpec):
    """Piecewise-linear weight through ``(points, values)``, zero outside."""

    points: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if pts.ndim != 1 or pts.shape != vals.shape or pts.size < 2:
            raise ValueError("table weight needs matching 1-d points/values")
        if np.any(np.diff(pts) <= 0) or pts[0] <= 0:
            raise ValueError("table points must be positive and increasing")
        if np.any(vals < 0):
            raise ValueError("table values must be nonnegative")
        object.__setattr__(self, "points", tuple(pts.tolist()))
        object.__setattr__(self, "values", tuple(vals.tolist()))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.points, self.values, left=0.0, right=0.0)

    @property
    def support(self):
        return (self.points[0], self.points[-1])

    @property
    def breakpoints(self):
        return self.points

    def to_dict(self):
        return {"kind": "table", "points": list(self.points),
                "values": list(self.values)}


@dataclass(frozen=True)
class Product(WeightSpec):
    factors: tuple[WeightSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("product weight needs at least one factor")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        for f in self.factors:
            out = out * f(t)
        # 0 * inf from a singular power outside a window is still outside
        return np.nan_to_num(out, nan=0.0, posinf=np.inf)

    @property
    def support(self):
        lo, hi = 0.0, math.inf
        for f in self.factors:
            a, b = f.support
            lo, hi = max(lo, a), min(hi, b)
        return (lo, hi)

    @property
    def breakpoints(self):
        pts = set()
        for f in self.factors:
            pts.update(f.breakpoints)
        return tuple(sorted(pts))

    def to_dict(self):
        return {"kind": "product", "factors": [f.to_dict() for f in self.factors]}


def eval_weight(w: WeightSpec, t: float) -> float:
    if not t > 0:
        raise ValueError(f"weights live on (0, inf), got t={t}")
    return float(w(np.asarray([t], dtype=float))[0])


def restrict(w: WeightSpec, a: float, b: float) -> WeightSpec:
    """The weight multiplied by the indicator of ``(a, b]``."""
    if a <= 0 and b == math.inf:
        return w
    return Product((w, Window(max(a, 0.0), b)))


def weight_from_dict(d: dict, role: str | None = None) -> WeightSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "power":
        w = Power(float(d.pop("coef", 1.0)), float(d.pop("exponent", 0.0)))
    elif kind == "constant":
        w = Power(float(d.pop("value", 1.0)), 0.0)
    elif kind in ("window", "indicator"):
        w = Window(float(d.pop("a")), float(d.pop("b")))
    elif kind == "table":
        w = Table(tuple(d.pop("points")), tuple(d.pop("values")))
    elif kind == "product":
        w = Product(tuple(weight_from_dict(f) for f in d.pop("factors")))
    else:
        raise ValueError(f"unknown weight kind {kind!r}")
    if d:
        raise ValueError(f"unknown keys for {kind} weight: {sorted(d)}")
    return w


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid:
    """Strictly increasing points in ``(0, inf)`` with their quadrature cells.

    ``edges`` has one more entry than ``points``; cell ``k`` is
    ``(edges[k], edges[k+1]]`` and contains ``points[k]``.
    """

    points: np.ndarray
    spacing: str = "geometric"
    edges: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("grid needs at least one point")
        if not np.all(np.isfinite(pts)) or pts[0] <= 0:
            raise ValueError("grid points must be finite and positive")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.edges is None:
            edges = _default_edges(pts, self.spacing)
        else:
            edges = np.asarray(self.edges, dtype=float)
            if edges.shape != (pts.size + 1,):
                raise ValueError("edges must have len(points) + 1 entries")
            if np.any(edges[:-1] >= pts) or np.any(edges[1:] < pts):
                raise ValueError("each point must lie in its cell")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, edges: Sequence[float], spacing: str = "geometric") -> "Grid":
        edges = np.asarray(edges, dtype=float)
        if edges[0] < 0 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be nonnegative and increasing")
        if spacing == "geometric" and edges[0] > 0:
            pts = np.sqrt(edges[:-1] * edges[1:])
        else:
            pts = 0.5 * (edges[:-1] + edges[1:])
        return cls(pts, spacing, edges)

    @property
    def xmin(self) -> float:
        return float(self.points[0])

    @property
    def xmax(self) -> float:
        return float(self.points[-1])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    def __len__(self):
        return self.points.size

    def refined(self) -> "Grid":
        """Split every cell in two (geometric or arithmetic midpoint)."""
        e = self.edges
        if self.spacing == "geometric" and e[0] > 0:
            mid = np.sqrt(e[:-1] * e[1:])
        else:
            mid = 0.5 * (e[:-1] + e[1:])
        new = np.empty(2 * e.size - 1)
        new[0::2] = e
        new[1::2] = mid
        return Grid.from_edges(new, self.spacing)


def _default_edges(pts: np.ndarray, spacing: str) -> np.ndarray:
    if pts.size == 1:
        return np.array([0.5 * pts[0], 1.5 * pts[0]])
    if spacing == "geometric":
        inner = np.sqrt(pts[:-1] * pts[1:])
        first = pts[0] ** 2 / inner[0]
        last = pts[-1] ** 2 / inner[-1]
    else:
        inner = 0.5 * (pts[:-1] + pts[1:])
        first = 2 * pts[0] - inner[0]
        last = 2 * pts[-1] - inner[-1]
    if first <= 0:
        first = 0.0
    return np.concatenate(([first], inner, [last]))


def make_grid(xmin: float, xmax: float, count: int,
              spacing: str = "geometric") -> Grid:
    if not (0 < xmin < xmax < math.inf):
        raise ValueError(f"need 0 < xmin < xmax < inf, got ({xmin}, {xmax})")
    if count < 2:
        raise ValueError("a grid needs at least two points")
    if spacing == "geometric":
        pts = np.geomspace(xmin, xmax, count)
    elif spacing == "uniform":
        pts = np.linspace(xmin, xmax, count)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    # pin the endpoints exactly; geomspace can be off by an ulp
    pts[0], pts[-1] = xmin, xmax
    return Grid(pts, spacing)


def cell_grid(lo: float, hi: float, count: int,
              spacing: str = "geometric") -> Grid:
    """``count`` cells tiling ``(lo, hi]`` exactly (used for discretisation)."""
    if not (0 < lo < hi < math.inf):
        raise ValueError(f"need 0 < lo < hi < inf, got ({lo}, {hi})")
    if spacing == "geometric":
        edges = np.geomspace(lo, hi, count + 1)
    else:
        edges = np.linspace(lo, hi, count + 1)
    edges[0], edges[-1] = lo, hi
    return Grid.from_edges(edges, spacing)


def locally_integrable(w: WeightSpec, power: float, grid: Grid,
                       tol: float = 1e-8) -> bool:
    """Check ``w**power`` has a finite integral over every cell of ``grid``."""
    from .quadrature import DivergenceError, QuadratureError, integrate_adaptive

    for lo, hi in zip(grid.edges[:-1], grid.edges[1:]):
        try:
            integrate_adaptive(lambda t: w(t) ** power, lo, hi,
                               singularities=w.breakpoints, tol=tol)
        except DivergenceError:
            return False
        except QuadratureError:
            return False
    return True
