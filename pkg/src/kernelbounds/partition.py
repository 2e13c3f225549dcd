"""Level-set partition of an accumulated function ``F``.

Given samples of a nondecreasing ``F`` and a constant ``h >= 1``, the
sample points are grouped into intervals ``I_i = [x_i, x_{i+1})`` on which

    (h + 1)**k_i <= F(x) < (h + 1)**(k_i + 1).

This is the block structure the sufficiency arguments run on; here it is a
diagnostic that can be checked on dense samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Grid, WeightSpec
from .kernels import PLUS, KernelCertificate
from .quadrature import adaptive_batch


@dataclass(frozen=True)
class LevelPartition:
    breakpoints: np.ndarray
    levels: np.ndarray
    base: float
    alpha_F: float
    end: float
    empty: bool = False

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float)
        k = np.asarray(self.levels, dtype=int)
        if x.shape != k.shape:
            raise ValueError("one level per breakpoint")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must increase strictly")
        if np.any(np.diff(k) <= 0):
            raise ValueError("levels must increase strictly")
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "levels", k)

    def __len__(self):
        return int(self.breakpoints.size)

    def interval_of(self, x) -> np.ndarray:
        """Index ``i`` with ``x`` in ``[x_i, x_{i+1})``; ``-1`` before ``x_0``."""
        return np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side="right") - 1

    def table(self, F: Callable | None = None) -> list[dict]:
        rows = []
        for i, (x, k) in enumerate(zip(self.breakpoints, self.levels)):
            row = {"i": i, "x_i": float(x), "k_i": int(k)}
            if F is not None:
                row["F(x_i)"] = float(np.asarray(F(np.array([x])))[0])
            rows.append(row)
        return rows


def _level(F, base, rtol=0.0):
    """``floor(log_base F)``, counting values within ``rtol`` below a power as reaching it."""
    G = np.asarray(F, dtype=float) * (1.0 + rtol)
    with np.errstate(divide="ignore"):
        k = np.floor(np.log(G) / math.log(base))
    # floor(log) can be off by one next to exact powers; fix it exactly
    k = np.where(base ** (k + 1) <= G, k + 1, k)
    k = np.where(base ** k > G, k - 1, k)
    return k.astype(int)


def _refine(F: Callable, lo, hi, target, rtol, steps=80):
    """Smallest ``x`` in ``(lo, hi]`` with ``F(x) >= target`` (vectorized bisection)."""
    lo, hi = lo.copy(), hi.copy()
    for _ in range(steps):
        mid = np.where(lo > 0, np.sqrt(lo * hi), 0.5 * (lo + hi))
        mid = np.where((mid <= lo) | (mid >= hi), 0.5 * (lo + hi), mid)
        up = np.asarray(F(mid), dtype=float) * (1.0 + rtol) >= target
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= 4e-16 * hi):
            break
    return hi


def level_partition(x, F, h: float, rtol: float = 1e-12,
                    F_callable: Callable | None = None) -> LevelPartition:
    """Partition from samples ``F(x)``.

    Breakpoints sit at the first sample of each new level.  With
    ``F_callable`` they are moved left by bisection onto the exact crossing
    of ``(h+1)**k`` between the two neighbouring samples.  Values within
    ``rtol`` below a power of ``h + 1`` count as reaching it.
    """
    x = np.asarray(x, dtype=float)
    F = np.asarray(F, dtype=float)
    if x.shape != F.shape or x.ndim != 1 or x.size == 0:
        raise ValueError("x and F must be matching 1-d samples")
    if np.any(np.diff(x) <= 0):
        raise ValueError("sample points must increase strictly")
    if h < 1:
        raise ValueError("h must be >= 1")
    if np.any(F < 0):
        raise ValueError("F must be nonnegative")
    drops = np.diff(F) < -rtol * np.maximum(np.abs(F[:-1]), 1e-300)
    if drops.any():
        j = int(np.flatnonzero(drops)[0])
        raise ValueError(f"F decreases between x={x[j]:.6g} and x={x[j + 1]:.6g}")
    base = h + 1.0
    pos = F > 0
    if not pos.any():
        return LevelPartition(np.array([]), np.array([], dtype=int), base, math.inf,
                              float(x[-1]), empty=True)
    first = int(np.argmax(pos))
    F_run = np.maximum.accumulate(F[first:])     # absorb rounding-level dips
    k = _level(F_run, base, rtol)
    new = np.concatenate([[True], np.diff(k) > 0])
    bps = x[first:][new].copy()
    lev = k[new]
    if F_callable is not None and bps.size > 1:
        idx = np.flatnonzero(new)[1:] + first
        bps[1:] = _refine(F_callable, x[idx - 1], x[idx], base ** lev[1:], rtol)
    return LevelPartition(bps, lev, base, float(x[first]), float(x[-1]))


@dataclass
class PartitionReport:
    ok: bool
    sandwich_violations: list = field(default_factory=list)
    coverage_ok: bool = True
    gap_ok: bool = True
    samples: int = 0


def verify_partition(F: Callable, part: LevelPartition, h: float,
                     samples: int = 1000, rtol: float = 1e-12) -> PartitionReport:
    """Check the sandwich on dense samples of every interval, coverage and gaps.

    The gap condition is ``k_i - 1 >= k_{i-2} + 1``, which follows from the
    strict growth of the levels.
    """
    if part.empty:
        return PartitionReport(True, samples=0)
    base = h + 1.0
    x0, x1 = part.breakpoints[0], part.end
    if x1 > x0:
        xs = np.geomspace(x0, x1, samples) if x0 > 0 else np.linspace(x0, x1, samples)
        xs = np.unique(np.concatenate([xs, part.breakpoints]))
    else:
        xs = part.breakpoints.copy()
    Fx = np.asarray(F(xs), dtype=float)
    idx = part.interval_of(xs)
    k = part.levels[np.clip(idx, 0, len(part) - 1)]
    lo_ok = base ** k <= Fx * (1 + rtol)
    hi_ok = Fx * (1 + rtol) < base ** (k + 1)
    bad = np.flatnonzero(~(lo_ok & hi_ok) & (idx >= 0))
    violations = [(float(xs[j]), float(Fx[j]), int(k[j])) for j in bad[:20]]
    # coverage: every sample with F > 0 past alpha_F lies in some interval
    coverage = bool(np.all(idx[(Fx > 0) & (xs >= part.alpha_F)] >= 0))
    lv = part.levels
    gap = bool(np.all(lv[2:] - 1 >= lv[:-2] + 1)) if lv.size >= 3 else True
    return PartitionReport(not violations and coverage and gap, violations, coverage,
                           gap, int(xs.size))


def interval_masses(part: LevelPartition, mu) -> list[dict]:
    """``mu`` of every interval with the right end open and closed.

    The two sums differ exactly when an atom sits on the right breakpoint;
    ``atom_at_end`` marks those rows.
    """
    rows = []
    ends = np.append(part.breakpoints[1:], part.end)
    for i, (lo, hi) in enumerate(zip(part.breakpoints, ends)):
        opened = mu.mass(lo, hi, lo_closed=True, hi_closed=False)
        closed = mu.mass(lo, hi, lo_closed=True, hi_closed=True)
        rows.append({"i": i, "open": float(opened), "closed": float(closed),
                     "atom_at_end": bool(any(x == hi and m > 0 for x, m in mu.atoms))})
    return rows


def accumulate_F(kernel: KernelCertificate, v: WeightSpec, f: Callable, grid: Grid | np.ndarray,
                 tol: float = 1e-10) -> np.ndarray:
    """``F(x) = int_0^x K(x, s) v(s) f(s) ds`` at the grid points."""
    pts = grid.points if isinstance(grid, Grid) else np.asarray(grid, dtype=float)
    bps = tuple(v.breakpoints)

    def g(o, s):
        with np.errstate(all="ignore"):
            val = kernel(pts[o], s) * v(s) * np.asarray(f(s), dtype=float)
        return val

    res = adaptive_batch(g, np.zeros(pts.size), pts, rtol=tol, breakpoints=bps)
    F = res.values
    if np.any(F < -1e-14):
        raise ValueError("F came out negative: f must be nonnegative")
    if kernel.sign == PLUS and np.any(np.diff(F) < -tol * np.maximum(np.abs(F[1:]), 1e-300)):
        raise ValueError("F is not nondecreasing although the kernel is plus-class")
    return np.maximum(F, 0.0)
