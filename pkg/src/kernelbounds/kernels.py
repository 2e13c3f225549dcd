"""Kernels with certified class-O_n decompositions.

A plus-class kernel of order ``n`` splits through any ``x >= t >= s`` as

    K(x, s) ~ sum_{i<n} K_{n,i}(x, t) K_i(t, s) + K(t, s)

(two-sided, constant ``h``), a minus-class kernel as

    K(x, s) ~ sum_{i<n} K_i(x, t) K_{i,n}(t, s) + K(x, t).

A :class:`KernelCertificate` stores the kernel, the companion functions and
the lower-order certificates ``K_0 .. K_{n-1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import Grid, WeightSpec, make_grid
from .quadrature import DEFAULT_RTOL, QuadratureError, adaptive_batch

PLUS, MINUS = "+", "-"


def _one(a, b):
    return np.ones(np.broadcast(np.asarray(a), np.asarray(b)).shape)


def _zero(a, b):
    return np.zeros(np.broadcast(np.asarray(a), np.asarray(b)).shape)


@dataclass(frozen=True)
class KernelCertificate:
    """A kernel on ``{x >= s > 0}`` with its decomposition data.

    ``companions[i]`` is ``K_{n,i}(x, t)`` for the plus class and
    ``K_{i,n}(t, s)`` for the minus class; ``lower[i]`` certifies ``K_i``.
    Both are empty when no decomposition is known (e.g. composed kernels).
    """

    func: Callable
    sign: str = PLUS
    order: int = 0
    h: float | None = 1.0
    companions: tuple[Callable, ...] = ()
    lower: tuple["KernelCertificate", ...] = ()
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sign not in (PLUS, MINUS):
            raise ValueError(f"sign must be '+' or '-', got {self.sign!r}")
        if self.order < 0:
            raise ValueError("kernel order must be nonnegative")
        if self.h is not None and self.h < 1:
            raise ValueError("the decomposition constant h must be >= 1")
        object.__setattr__(self, "companions", tuple(self.companions))
        object.__setattr__(self, "lower", tuple(self.lower))
        if self.has_decomposition and len(self.lower) != self.order:
            raise ValueError("need one lower-order certificate per companion")

    def __call__(self, x, s):
        with np.errstate(all="ignore"):
            return np.asarray(self.func(np.asarray(x, float), np.asarray(s, float)),
                              dtype=float)

    @property
    def has_decomposition(self) -> bool:
        return self.order == 0 or len(self.companions) == self.order

    def companion(self, i: int) -> Callable:
        """``K_{n,i}`` (plus) or ``K_{i,n}`` (minus); index ``n`` gives 1."""
        if i == self.order:
            return _one
        if not self.has_decomposition:
            raise ValueError(f"{self.name} carries no companion kernels")
        return self.companions[i]

    def lower_kernel(self, i: int) -> "KernelCertificate":
        """``K_i``; index ``n`` is the kernel itself."""
        if i == self.order:
            return self
        if not self.has_decomposition:
            raise ValueError(f"{self.name} carries no lower-order kernels")
        return self.lower[i]

    def split_sum(self, x, t, s):
        """The decomposition sum at ``x >= t >= s``."""
        x, t, s = (np.asarray(v, dtype=float) for v in (x, t, s))
        if self.order == 0:
            return self(t, s) if self.sign == PLUS else self(x, t)
        total = np.zeros(np.broadcast(x, t, s).shape)
        with np.errstate(all="ignore"):
            for i in range(self.order + 1):
                c = self.companion(i)
                k = self.lower_kernel(i)
                if self.sign == PLUS:
                    total = total + c(x, t) * k(t, s)
                else:
                    total = total + k(x, t) * c(t, s)
        return total

    def to_dict(self) -> dict:
        return {"name": self.name, "sign": self.sign, "order": self.order,
                "h": self.h, **self.params}


def eval_kernel(k: KernelCertificate, x: float, s: float) -> float:
    if not s > 0:
        raise ValueError(f"kernels live on x >= s > 0, got s={s}")
    if x < s:
        raise ValueError(f"kernels live on x >= s, got x={x} < s={s}")
    return float(k(x, s))


# --------------------------------------------------------------------------
# built-in kernels


def constant(c: float = 1.0, sign: str = PLUS) -> KernelCertificate:
    if c < 0:
        raise ValueError("kernels are nonnegative")
    return KernelCertificate(lambda x, s: c * _one(x, s), sign, 0, 1.0,
                             name="constant", params={"c": c})


def lift(k: KernelCertificate) -> KernelCertificate:
    """Re-certify an order-0 kernel as order 1 with a vanishing companion.

    ``r(s) = 0 * K_0(t, s) + r(s)``, so the decomposition is exact with h = 1.
    """
    if k.order != 0:
        raise ValueError("only order-0 kernels can be lifted this way")
    return replace(k, order=1, h=k.h or 1.0, companions=(_zero,),
                   lower=(constant(1.0, k.sign),))


def log_ratio(sign: str = PLUS) -> KernelCertificate:
    def f(x, s):
        return np.log(x / s)

    return KernelCertificate(f, sign, 1, 1.0, companions=(f,),
                             lower=(constant(1.0, sign),), name="log_ratio")


def _pdiff(alpha, scale=1.0):
    def f(a, b):
        d = np.maximum(np.asarray(a, float) - np.asarray(b, float), 0.0)
        return scale * d ** alpha
    return f


def power_diff(alpha: float, sign: str = PLUS) -> KernelCertificate:
    """``(x - s)**alpha``.

    Integer ``alpha = m`` gets the exact binomial certificate of order ``m``
    with h = 1; any other ``alpha`` the order-1 certificate with companion
    ``(x - t)**alpha`` (plus) or ``(t - s)**alpha`` (minus) and
    ``h = 2**|1 - alpha|``.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError("power_diff needs alpha > 0")
    params = {"alpha": alpha}
    if alpha == int(alpha):
        m = int(alpha)
        comps = tuple(_pdiff(m - i, math.comb(m, i)) for i in range(m))
        lower = tuple(power_diff(i, sign) if i else constant(1.0, sign)
                      for i in range(m))
        return KernelCertificate(_pdiff(m), sign, m, 1.0, comps, lower,
                                 name="power_diff", params=params)
    h = 2.0 ** abs(1.0 - alpha)
    return KernelCertificate(_pdiff(alpha), sign, 1, h, (_pdiff(alpha),),
                             (constant(1.0, sign),), name="power_diff",
                             params=params)


def table(xs: Sequence[float], ss: Sequence[float], values, sign: str = PLUS,
          order: int = 0, h: float | None = None) -> KernelCertificate:
    """Kernel tabulated on ``xs x ss``; bilinear in ``(log x, log s)``, clamped."""
    lx = np.log(np.asarray(xs, dtype=float))
    ls = np.log(np.asarray(ss, dtype=float))
    vals = np.asarray(values, dtype=float)
    if vals.shape != (lx.size, ls.size):
        raise ValueError("table values must have shape (len(xs), len(ss))")
    if np.any(np.diff(lx) <= 0) or np.any(np.diff(ls) <= 0):
        raise ValueError("table axes must be increasing")
    if np.any(vals < 0):
        raise ValueError("kernels are nonnegative")

    def f(x, s):
        x, s = np.broadcast_arrays(np.asarray(x, float), np.asarray(s, float))
        u = np.clip(np.log(x), lx[0], lx[-1])
        w = np.clip(np.log(s), ls[0], ls[-1])
        i = np.clip(np.searchsorted(lx, u) - 1, 0, lx.size - 2)
        j = np.clip(np.searchsorted(ls, w) - 1, 0, ls.size - 2)
        a = (u - lx[i]) / (lx[i + 1] - lx[i])
        b = (w - ls[j]) / (ls[j + 1] - ls[j])
        return ((1 - a) * (1 - b) * vals[i, j] + a * (1 - b) * vals[i + 1, j]
                + (1 - a) * b * vals[i, j + 1] + a * b * vals[i + 1, j + 1])

    return KernelCertificate(f, sign, order, h, name="table",
                             params={"shape": list(vals.shape)})


def builtin(name: str, sign: str = PLUS, **params) -> KernelCertificate:
    if name == "constant":
        return constant(float(params.get("c", 1.0)), sign)
    if name == "log_ratio":
        return log_ratio(sign)
    if name == "power_diff":
        return power_diff(float(params["alpha"]), sign)
    if name == "table":
        return table(params["xs"], params["ss"], params["values"], sign,
                     int(params.get("order", 0)), params.get("h"))
    raise ValueError(f"unknown built-in kernel {name!r}")


# --------------------------------------------------------------------------
# membership checks


@dataclass(frozen=True)
class TripleGrid:
    """All ``(x, t, s)`` with ``x >= t >= s`` drawn from one point set."""

    x: np.ndarray
    t: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        if not (np.all(self.x >= self.t) and np.all(self.t >= self.s)
                and np.all(self.s > 0)):
            raise ValueError("triples must satisfy x >= t >= s > 0")

    @classmethod
    def from_grid(cls, grid: Grid | np.ndarray) -> "TripleGrid":
        pts = grid.points if isinstance(grid, Grid) else np.asarray(grid, float)
        i, j, k = np.meshgrid(*(np.arange(pts.size),) * 3, indexing="ij")
        keep = (i >= j) & (j >= k)
        return cls(pts[i[keep]], pts[j[keep]], pts[k[keep]])

    def __len__(self):
        return self.x.size


def default_triples(count: int = 30) -> TripleGrid:
    return TripleGrid.from_grid(make_grid(1.0, 100.0, count))


@dataclass
class MembershipReport:
    ok: bool
    worst_lower: float
    worst_upper: float
    worst_triple: tuple[float, float, float] | None
    h: float
    failures: int = 0


def _ratios(k: KernelCertificate, g: TripleGrid):
    K = k(g.x, g.s)
    S = k.split_sum(g.x, g.t, g.s)
    with np.errstate(all="ignore"):
        up = np.where(S > 0, K / S, np.where(K > 0, np.inf, 1.0))
        down = np.where(K > 0, S / K, np.where(S > 0, np.inf, 1.0))
    return up, down


def verify_membership(k: KernelCertificate, g: TripleGrid | None = None,
                      tol: float = 1e-10) -> MembershipReport:
    """Check ``S/h <= K <= h*S`` on every triple, ``S`` the decomposition sum.

    ``worst_upper`` is the largest ``K/S`` and ``worst_lower`` the largest
    ``S/K``; the check passes when both stay below ``h * (1 + tol)``.
    """
    g = g or default_triples()
    if not k.has_decomposition:
        raise ValueError(f"{k.name} carries no companions to verify")
    h = k.h if k.h is not None else 1.0
    up, down = _ratios(k, g)
    worst = np.maximum(up, down)
    j = int(np.argmax(worst)) if len(g) else 0
    limit = h * (1.0 + tol)
    failures = int(np.sum((up > limit) | (down > limit)))
    return MembershipReport(
        ok=failures == 0 and _monotone_ok(k, g, tol),
        worst_lower=float(down.max()) if len(g) else 1.0,
        worst_upper=float(up.max()) if len(g) else 1.0,
        worst_triple=(float(g.x[j]), float(g.t[j]), float(g.s[j])) if len(g) else None,
        h=h,
        failures=failures,
    )


def _monotone_ok(k, g, tol):
    # plus class: nondecreasing in x for fixed s; minus: nonincreasing in s
    if k.sign == PLUS:
        a, b = k(g.x, g.s), k(g.t, g.s)
    else:
        a, b = k(g.x, g.s), k(g.x, g.t)
    return bool(np.all(a >= b * (1 - tol) - 1e-300))


def estimate_min_h(k: KernelCertificate, g: TripleGrid | None = None) -> float:
    """Grid lower bound on the smallest admissible decomposition constant.

    Returns ``inf`` when the kernel vanishes where the sum does not (or
    vice versa) on some triple.
    """
    g = g or default_triples()
    if not k.has_decomposition:
        raise ValueError(f"{k.name} carries no companions")
    up, down = _ratios(k, g)
    return float(max(1.0, up.max(), down.max()))


@dataclass
class CompanionReport:
    ok: bool
    monotonicity_failures: list = field(default_factory=list)
    chain_failures: list = field(default_factory=list)
    worst_chain_ratio: float = 0.0


def _companion_table(k: KernelCertificate):
    """``C[(a, b)]`` = K_{a,b} for the plus class, K_{b,a} read as (hi, lo) for minus.

    Indices follow the plus convention ``n >= j >= i``: the entry ``(j, i)``
    is the companion linking order ``j`` down to ``i``.
    """
    table = {}

    def walk(cert, n):
        for i in range(n):
            table.setdefault((n, i), cert.companion(i))
            sub = cert.lower_kernel(i)
            if sub.has_decomposition and sub.order == i and i > 0:
                walk(sub, i)

    walk(k, k.order)
    return table


def check_companion_laws(k: KernelCertificate, g: TripleGrid | None = None,
                         slack: float = 1.0, tol: float = 1e-10) -> CompanionReport:
    """Companion monotonicity and the chain inequality on sampled triples.

    Plus class: ``K_{n,j}(x,t) K_{j,i}(t,s) <= slack * K_{n,i}(x,s)``;
    minus class: ``K_{i,j}(x,t) K_{j,n}(t,s) <= slack * K_{i,n}(x,s)``.
    """
    g = g or default_triples()
    if k.order < 1:
        raise ValueError("companion laws need order >= 1")
    comp = _companion_table(k)
    mono, chain = [], []
    worst = 0.0

    def C(a, b):
        return _one if a == b else comp.get((a, b))

    with np.errstate(all="ignore"):
        for (a, b), c in comp.items():
            # nondecreasing in the first argument, nonincreasing in the second
            v_xt, v_ts, v_xs = c(g.x, g.t), c(g.t, g.s), c(g.x, g.s)
            bad1 = v_xs < v_ts * (1 - tol) - tol
            bad2 = v_xt > v_xs * (1 + tol) + tol
            bad3 = np.any(~np.isfinite(v_xs)) or np.any(v_xs < 0)
            if bad1.any() or bad2.any() or bad3:
                mono.append((a, b))
        n = k.order
        triples = [(n, j, i) for j in range(n + 1) for i in range(j + 1)]
        for top, j, i in triples:
            if i == top:
                continue
            c_top_j, c_j_i, c_top_i = C(top, j), C(j, i), C(top, i)
            if c_top_j is None or c_j_i is None or c_top_i is None:
                continue
            if k.sign == PLUS:
                lhs = c_top_j(g.x, g.t) * c_j_i(g.t, g.s)
            else:
                lhs = c_j_i(g.x, g.t) * c_top_j(g.t, g.s)
            rhs = c_top_i(g.x, g.s)
            ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
            worst = max(worst, float(np.nanmax(ratio)))
            if np.any(lhs > slack * rhs * (1 + tol) + 1e-300):
                chain.append((top, j, i))
    return CompanionReport(not mono and not chain, mono, chain, worst)


# --------------------------------------------------------------------------
# composition


def compose(kA: KernelCertificate, w: WeightSpec, kB: KernelCertificate,
            tol: float = 1e-10) -> KernelCertificate:
    """Kernel of the superposition: ``int_s^x kA(x, t) w(t) kB(t, s) dt``.

    The result has order ``n + m + 1`` and no companions; attach them with
    :func:`with_decomposition` when a closed form is known.
    """
    if kA.sign != kB.sign:
        raise ValueError("composition needs kernels of the same sign class")
    bps = tuple(w.breakpoints)

    def func(x, s):
        x, s = np.broadcast_arrays(np.asarray(x, float), np.asarray(s, float))
        shape = x.shape
        xf, sf = x.ravel(), s.ravel()
        out = np.zeros(xf.size)
        live = xf > sf
        if live.any():
            xl, sl = xf[live], sf[live]

            def f(o, t):
                return kA(xl[o], t) * w(t) * kB(t, sl[o])

            res = adaptive_batch(f, sl, xl, rtol=tol, breakpoints=bps)
            if not res.converged.all():
                raise QuadratureError("inner composition integral did not converge")
            out[live] = res.values
        return out.reshape(shape)

    return KernelCertificate(func, kA.sign, kA.order + kB.order + 1, None,
                             name="compose",
                             params={"inner": [kA.to_dict(), kB.to_dict()]})


def with_decomposition(k: KernelCertificate, companions: Sequence[Callable],
                       lower: Sequence[KernelCertificate],
                       h: float = 1.0) -> KernelCertificate:
    if len(companions) != k.order or len(lower) != k.order:
        raise ValueError(f"order-{k.order} kernel needs {k.order} companions")
    return replace(k, companions=tuple(companions), lower=tuple(lower), h=h)


def estimate_h(k: KernelCertificate, g: TripleGrid | None = None) -> KernelCertificate:
    """Certificate with ``h`` set to the grid estimate (a lower bound)."""
    return replace(k, h=estimate_min_h(k, g))
