"""Adaptive quadrature: Riemann integrals (batched) and Riemann-Stieltjes sums.

The workhorse is :func:`adaptive_batch`, a globally adaptive 7/15-point
Gauss-Legendre scheme that integrates many integrands at once.  Every
interval of every problem is evaluated in a single vectorised call per
refinement round, which is what makes the nested B integrals affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-14
DEFAULT_BUDGET = 10 ** 6
MAX_DEPTH = 200

_X7, _W7 = np.polynomial.legendre.leggauss(7)
_X15, _W15 = np.polynomial.legendre.leggauss(15)
_NODES = np.concatenate([_X15, _X7])


class QuadratureError(ArithmeticError):
    """Tolerance not reached within the evaluation budget."""


class DivergenceError(QuadratureError):
    """The integral does not converge (non-integrable singularity or tail)."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    evaluations: int

    def __post_init__(self):
        if self.error < 0 or self.evaluations < 1:
            raise ValueError("malformed QuadResult")


@dataclass
class BatchResult:
    values: np.ndarray
    errors: np.ndarray
    converged: np.ndarray
    evaluations: int
    # location of the deepest interval per problem (singularity suspect)
    hotspots: np.ndarray
    nonfinite: np.ndarray


def _split_at(lo, hi, owner, points):
    for x in points:
        inside = (lo < x) & (x < hi)
        if not inside.any():
            continue
        lo = np.concatenate([lo, np.full(inside.sum(), x)])
        hi = np.concatenate([np.where(inside, x, hi), hi[inside]])
        owner = np.concatenate([owner, owner[inside]])
    return lo, hi, owner


def adaptive_batch(f: Callable, lo, hi, rtol: float = DEFAULT_RTOL,
                   atol: float = DEFAULT_ATOL, breakpoints: Sequence[float] = (),
                   budget: int = DEFAULT_BUDGET,
                   max_depth: int = MAX_DEPTH) -> BatchResult:
    """Integrate ``f(owner, x)`` over ``[lo[owner], hi[owner]]`` for every owner.

    ``f`` receives two equally shaped arrays (problem index and abscissa)
    and must return integrand values of the same shape.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    n = lo.size
    # the budget is a floor for the whole batch; every problem gets at least
    # a few thousand evaluations of its own
    budget = max(budget, 4000 * n)
    values = np.zeros(n)
    errors = np.zeros(n)
    converged = np.ones(n, dtype=bool)
    nonfinite = np.zeros(n, dtype=bool)
    hotspots = np.full(n, np.nan)
    live = hi > lo
    owner = np.flatnonzero(live)
    il, ir, owner = _split_at(lo[live], hi[live], owner, sorted(set(breakpoints)))
    depth = np.zeros(il.size, dtype=int)
    best_depth = np.full(n, -1)
    evals = 0
    acc_v = np.zeros(n)
    acc_e = np.zeros(n)

    while il.size:
        mid = 0.5 * (il + ir)
        half = 0.5 * (ir - il)
        x = mid[:, None] + half[:, None] * _NODES[None, :]
        own = np.broadcast_to(owner[:, None], x.shape)
        with np.errstate(all="ignore"):
            fx = np.asarray(f(own, x), dtype=float)
        evals += fx.size
        bad = ~np.isfinite(fx)
        if bad.any():
            rows = bad.any(axis=1)
            nonfinite[owner[rows]] = True
            fx = np.where(bad, 0.0, fx)
        g15 = half * (fx[:, :15] @ _W15)
        g7 = half * (fx[:, 15:] @ _W7)
        err = np.abs(g15 - g7)

        tot_v = acc_v + np.bincount(owner, g15, minlength=n)
        tot_e = acc_e + np.bincount(owner, err, minlength=n)
        allowed = np.maximum(rtol * np.abs(tot_v), atol)
        count = np.bincount(owner, minlength=n)
        # accepted errors of each round fit in half of what is still unspent,
        # so their total stays below the allowance
        spare = np.maximum(allowed - acc_e, 0.0)
        share = spare[owner] / (2.0 * np.maximum(count[owner], 1))
        refine = (tot_e[owner] > allowed[owner]) & (err > share)
        too_deep = refine & (depth >= max_depth)
        if too_deep.any():
            np.maximum.at(best_depth, owner[too_deep], depth[too_deep])
            hotspots[owner[too_deep]] = mid[too_deep]
            refine &= ~too_deep
        if evals >= budget:
            refine[:] = False
        keep = ~refine
        np.add.at(acc_v, owner[keep], g15[keep])
        np.add.at(acc_e, owner[keep], err[keep])
        if refine.any():
            deepest = depth[refine]
            np.maximum.at(best_depth, owner[refine], deepest)
            order = np.argsort(deepest, kind="stable")
            hotspots[owner[refine][order]] = mid[refine][order]
        il = np.concatenate([il[refine], mid[refine]])
        ir = np.concatenate([mid[refine], ir[refine]])
        owner = np.concatenate([owner[refine], owner[refine]])
        depth = np.concatenate([depth[refine] + 1, depth[refine] + 1])

    values[:] = acc_v
    errors[:] = acc_e
    allowed = np.maximum(rtol * np.abs(values), atol)
    converged = (errors <= allowed) & ~nonfinite
    converged[~live] = True
    return BatchResult(values, errors, converged, max(evals, 1), hotspots, nonfinite)


def _truncated(f, a, b, point, delta, rtol):
    """Integral of ``f`` over ``[a, b]`` with ``(point-delta, point+delta)`` removed."""
    pieces = []
    if point - delta > a:
        pieces.append((a, min(point - delta, b)))
    if point + delta < b:
        pieces.append((max(point + delta, a), b))
    if not pieces:
        return 0.0
    lo = np.array([p[0] for p in pieces])
    hi = np.array([p[1] for p in pieces])
    res = adaptive_batch(lambda o, x: f(x), lo, hi, rtol=rtol, atol=0.0,
                         budget=200_000, max_depth=60)
    return float(res.values.sum())


def diagnose(f: Callable, a: float, b: float, point: float,
             rtol: float = 1e-10) -> bool:
    """Return True when ``f`` looks non-integrable at ``point``.

    Integrals with shrinking excluded neighbourhoods of ``point`` are
    compared; for an integrable singularity ``|x - point|**-s`` with
    ``s < 1`` the increments shrink geometrically, otherwise they do not.
    """
    width = b - a
    deltas = width * 10.0 ** -np.arange(2, 12, 2)
    vals = [_truncated(f, a, b, point, d, rtol) for d in deltas]
    inc = np.abs(np.diff(vals))
    if not np.all(np.isfinite(vals)):
        return True
    scale = max(abs(vals[-1]), 1e-300)
    if inc[-1] < 1e-9 * scale:
        return False
    ratios = inc[1:] / np.maximum(inc[:-1], 1e-300)
    return bool(np.all(ratios[-2:] >= 0.9))


def integrate_adaptive(f: Callable, a: float, b: float,
                       singularities: Sequence[float] = (),
                       tol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                       budget: int = DEFAULT_BUDGET) -> QuadResult:
    """Adaptive integral of a vectorised ``f`` over the finite interval ``[a, b]``.

    Raises
    ------
    DivergenceError
        if the integrand looks non-integrable near some point.
    QuadratureError
        if the tolerance is not met within ``budget`` evaluations.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("use integrate_semiinfinite for infinite ranges")
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    res = adaptive_batch(lambda o, x: f(x), [a], [b], rtol=tol, atol=atol,
                         breakpoints=singularities, budget=budget)
    value, error = float(res.values[0]), float(res.errors[0])
    if res.converged[0]:
        return QuadResult(value, error, res.evaluations)
    point = res.hotspots[0]
    if not np.isfinite(point):
        point = a
    if res.nonfinite[0]:
        raise DivergenceError(f"integrand not finite near x={point:.6g}", point)
    near = min([a, b, *singularities], key=lambda s: abs(s - point))
    if diagnose(f, a, b, near):
        raise DivergenceError(f"integral diverges near x={near:.6g}", near)
    raise QuadratureError(
        f"tolerance {tol:g} not reached (estimate {value:.6g} +- {error:.2g})")


def integrate_semiinfinite(f: Callable, a: float, tol: float = DEFAULT_RTOL,
                           atol: float = DEFAULT_ATOL,
                           budget: int = DEFAULT_BUDGET) -> QuadResult:
    """Integral of ``f`` over ``[a, inf)`` via ``x = a + s / (1 - s)``."""
    if a < 0:
        raise ValueError("semi-infinite integrals start at a >= 0")

    def g(s):
        s = np.asarray(s, dtype=float)
        one = 1.0 - s
        with np.errstate(all="ignore"):
            return f(a + s / one) / (one * one)

    try:
        return integrate_adaptive(g, 0.0, 1.0, tol=tol, atol=atol, budget=budget)
    except DivergenceError as exc:
        where = "infinity" if exc.point is not None and exc.point > 0.5 else f"x={a:g}"
        raise DivergenceError(f"integral diverges at {where}", exc.point) from None


# --------------------------------------------------------------------------
# Riemann-Stieltjes against monotone integrators


def _prev(x):
    return np.nextafter(x, -np.inf)


def stieltjes_batch(f: Callable, F: Callable, lo, hi, rtol: float = DEFAULT_RTOL,
                    atol: float = DEFAULT_ATOL, budget: int = DEFAULT_BUDGET,
                    max_depth: int = 60, lo_closed=False, hi_closed=True,
                    increasing: bool = True) -> BatchResult:
    """Integrate ``f(owner, x) dF(x)`` over ``(lo, hi]`` for every owner.

    ``F`` is monotone (nondecreasing if ``increasing`` else nonincreasing, in
    which case ``d(-F)`` is used).  Only increments of ``F`` are formed; cell
    sums use the midpoint value of ``f`` and are Richardson-corrected.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    n = lo.size
    sign = 1.0 if increasing else -1.0

    def G(x):
        return sign * np.asarray(F(x), dtype=float)

    live = hi > lo
    owner = np.flatnonzero(live)
    il, ir = lo[live].copy(), hi[live].copy()
    # endpoint values honour the inclusion flags; interior cells use G(r)-G(l)
    gl = G(_prev(il) if lo_closed else il)
    gr = G(ir if hi_closed else _prev(ir))
    depth = np.zeros(il.size, dtype=int)
    acc_v = np.zeros(n)
    acc_e = np.zeros(n)
    hotspots = np.full(n, np.nan)
    nonmono = np.zeros(n, dtype=bool)
    evals = 0
    while il.size:
        m = 0.5 * (il + ir)
        gm = G(m)
        q1, q3 = 0.5 * (il + m), 0.5 * (m + ir)
        own = owner
        fm, f1, f3 = f(own, m), f(own, q1), f(own, q3)
        evals += 4 * il.size
        d1, d2 = gm - gl, gr - gm
        tol_mono = 1e-12 * (np.abs(gl) + np.abs(gr)) + 1e-300
        bad = (d1 < -tol_mono) | (d2 < -tol_mono)
        if bad.any():
            nonmono[owner[bad]] = True
        coarse = fm * (gr - gl)
        fine = f1 * d1 + f3 * d2
        est = fine + (fine - coarse) / 3.0
        err = np.abs(fine - coarse) / 3.0
        tot_v = acc_v + np.bincount(owner, est, minlength=n)
        tot_e = acc_e + np.bincount(owner, err, minlength=n)
        allowed = np.maximum(rtol * np.abs(tot_v), atol)
        count = np.bincount(owner, minlength=n)
        # accepted errors of each round fit in half of what is still unspent,
        # so their total stays below the allowance
        spare = np.maximum(allowed - acc_e, 0.0)
        share = spare[owner] / (2.0 * np.maximum(count[owner], 1))
        refine = (tot_e[owner] > allowed[owner]) & (err > share) & (depth < max_depth)
        if evals >= budget:
            refine[:] = False
        keep = ~refine
        np.add.at(acc_v, owner[keep], est[keep])
        np.add.at(acc_e, owner[keep], err[keep])
        if refine.any():
            hotspots[owner[refine]] = m[refine]
        il, ir = np.concatenate([il[refine], m[refine]]), np.concatenate([m[refine], ir[refine]])
        gl, gr = np.concatenate([gl[refine], gm[refine]]), np.concatenate([gm[refine], gr[refine]])
        owner = np.concatenate([owner[refine], owner[refine]])
        depth = np.concatenate([depth[refine] + 1, depth[refine] + 1])
    allowed = np.maximum(rtol * np.abs(acc_v), atol)
    conv = (acc_e <= allowed) & ~nonmono
    conv[~live] = True
    return BatchResult(acc_v, acc_e, conv, max(evals, 1), hotspots, nonmono)


def integrate_stieltjes(f: Callable, integrator, interval: tuple,
                        tol: float = DEFAULT_RTOL, lo_closed: bool = False,
                        hi_closed: bool = True, increasing: bool = True) -> QuadResult:
    """Riemann-Stieltjes integral of ``f`` against a measure or monotone function.

    ``integrator`` is either a :class:`~kernelbounds.measures.MeasureSpec`
    (atoms, densities and continuous Stieltjes parts are handled by the
    measure) or a monotone callable ``F``; with ``increasing=False`` the
    integral is taken against ``d(-F)``.  The interval is ``(a, b]`` by
    default; the flags select the endpoint convention.
    """
    from .measures import MeasureSpec

    a, b = interval
    if isinstance(integrator, MeasureSpec):
        return integrator.integrate(f, a, b, lo_closed=lo_closed,
                                    hi_closed=hi_closed, tol=tol)
    if not a < b:
        raise ValueError(f"need a < b, got ({a}, {b}]")
    res = stieltjes_batch(lambda o, x: f(x), integrator, [a], [b], rtol=tol,
                          lo_closed=lo_closed, hi_closed=hi_closed,
                          increasing=increasing)
    if res.nonfinite[0]:
        raise QuadratureError("integrator is not monotone on the interval")
    if not res.converged[0]:
        raise QuadratureError(
            f"Stieltjes sum did not reach tolerance {tol:g} "
            f"(estimate {res.values[0]:.6g} +- {res.errors[0]:.2g})")
    return QuadResult(float(res.values[0]), float(res.errors[0]), res.evaluations)
