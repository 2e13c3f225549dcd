"""Nonnegative Borel measures on (0, inf]: densities, atoms and Stieltjes parts.

A :class:`MeasureSpec` is a finite sum of

* absolutely continuous parts ``coef * w(x)**r dx``,
* atoms ``(location, mass)``,
* continuous Stieltjes parts given by a continuous nondecreasing
  distribution function ``F`` (``mu((a, b]) = F(b) - F(a)``),
* an optional mass sitting at the point ``inf``.

Everything lives inside the window ``(a, b]``.  Interval endpoints are
explicit flags because tails ``[x, inf]`` and heads ``(0, x]`` must treat
atoms at the endpoints consistently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import WeightSpec, restrict
from .quadrature import (DEFAULT_RTOL, DivergenceError, QuadResult,
                         QuadratureError, adaptive_batch, diagnose,
                         stieltjes_batch)


@dataclass(frozen=True)
class Density:
    weight: WeightSpec
    power: float = 1.0
    coef: float = 1.0

    def __call__(self, x):
        with np.errstate(all="ignore"):
            w = self.weight(x)
            out = self.coef * np.where(w > 0, w, 0.0) ** self.power
        return np.where(w > 0, out, 0.0)


@dataclass(frozen=True)
class Distribution:
    """Continuous nondecreasing ``F``; ``coef`` scales the increments."""

    F: Callable
    coef: float = 1.0

    def __call__(self, x):
        return self.coef * np.asarray(self.F(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class MeasureSpec:
    densities: tuple[Density, ...] = ()
    atoms: tuple[tuple[float, float], ...] = ()
    distributions: tuple[Distribution, ...] = ()
    window: tuple[float, float] = (0.0, math.inf)
    mass_at_infinity: float = 0.0
    kind: str = "sum"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a, b = self.window
        if not (0 <= a < b):
            raise ValueError(f"bad measure window ({a}, {b}]")
        atoms = tuple(sorted((float(x), float(m)) for x, m in self.atoms))
        for x, m in atoms:
            if m < 0:
                raise ValueError("atom masses must be nonnegative")
            if not x > 0:
                raise ValueError("atoms live in (0, inf)")
        object.__setattr__(self, "atoms", atoms)
        if self.mass_at_infinity < 0:
            raise ValueError("mass at infinity must be nonnegative")
        if self.distributions and not math.isfinite(b):
            raise ValueError("Stieltjes parts need a finite window")

    # ---- structure --------------------------------------------------------

    @property
    def breakpoints(self) -> tuple[float, ...]:
        pts = {x for x, _ in self.atoms}
        for d in self.densities:
            pts.update(d.weight.breakpoints)
        a, b = self.window
        pts.update(x for x in (a, b) if 0 < x < math.inf)
        return tuple(sorted(pts))

    def _atoms_in_window(self):
        a, b = self.window
        return [(x, m) for x, m in self.atoms if a < x <= b]

    def __add__(self, other: "MeasureSpec") -> "MeasureSpec":
        a = min(self.window[0], other.window[0])
        b = max(self.window[1], other.window[1])
        # each part keeps its own window through restriction
        dens = tuple(replace(d, weight=restrict(d.weight, *self.window)) for d in self.densities)
        dens += tuple(replace(d, weight=restrict(d.weight, *other.window)) for d in other.densities)
        atoms = tuple(self._atoms_in_window()) + tuple(other._atoms_in_window())
        if self.distributions or other.distributions:
            dists = tuple(_clip_distribution(d, *self.window) for d in self.distributions)
            dists += tuple(_clip_distribution(d, *other.window) for d in other.distributions)
        else:
            dists = ()
        return MeasureSpec(dens, atoms, dists, (a, b),
                           self.mass_at_infinity + other.mass_at_infinity, "sum")

    def scaled(self, factor: float) -> "MeasureSpec":
        if factor < 0:
            raise ValueError("measures scale by nonnegative factors")
        return replace(
            self,
            densities=tuple(replace(d, coef=d.coef * factor) for d in self.densities),
            atoms=tuple((x, m * factor) for x, m in self.atoms),
            distributions=tuple(replace(d, coef=d.coef * factor) for d in self.distributions),
            mass_at_infinity=self.mass_at_infinity * factor,
        )

    def restricted(self, lo: float, hi: float) -> "MeasureSpec":
        """Restrict to ``(lo, hi]``; mass beyond ``hi`` (incl. at inf) moves to ``hi``.

        Used by the criteria, where the right end of the working window acts
        as the point at infinity.
        """
        a, b = max(lo, self.window[0]), min(hi, self.window[1])
        beyond = self.mass_at_infinity
        if math.isfinite(hi):
            beyond += self.mass(hi, math.inf, lo_closed=False, hi_closed=False)
        atoms = [(x, m) for x, m in self._atoms_in_window() if a < x <= b]
        if beyond > 0:
            atoms.append((hi, beyond))
        return replace(
            self,
            densities=tuple(replace(d, weight=restrict(d.weight, a, b)) for d in self.densities),
            atoms=tuple(atoms),
            distributions=tuple(_clip_distribution(d, a, b) for d in self.distributions),
            window=(a, b),
            mass_at_infinity=0.0,
        )

    # ---- evaluation -------------------------------------------------------

    def mass(self, lo: float, hi: float, lo_closed: bool = False,
             hi_closed: bool = True, tol: float = DEFAULT_RTOL) -> float:
        return self.integrate(lambda x: np.ones_like(np.asarray(x, dtype=float)),
                              lo, hi, lo_closed, hi_closed, tol).value

    def tail(self, x: float, tol: float = DEFAULT_RTOL) -> float:
        """``mu([x, inf])``; an atom at ``x`` is included."""
        if not x > 0:
            raise ValueError(f"tails are taken at x > 0, got {x}")
        return self.mass(x, math.inf, lo_closed=True, hi_closed=True, tol=tol)

    def integrate(self, f: Callable, lo: float, hi: float, lo_closed: bool = False,
                  hi_closed: bool = True, tol: float = DEFAULT_RTOL) -> QuadResult:
        """``int f dmu`` over the interval from ``lo`` to ``hi`` (flags pick ends).

        The point ``inf`` belongs to the interval only when ``hi`` is infinite
        and ``hi_closed``; ``f`` is then evaluated at ``inf`` if the mass there
        is positive.
        """
        a, b = self.window
        value, error, evals = 0.0, 0.0, 0

        def inside(x):
            left = x >= lo if lo_closed else x > lo
            right = x <= hi if hi_closed else x < hi
            return left and right and a < x <= b

        picked = [(x, m) for x, m in self.atoms if inside(x)]
        if picked:
            xs = np.array([x for x, _ in picked])
            ms = np.array([m for _, m in picked])
            value += float(np.dot(np.asarray(f(xs), dtype=float), ms))
            evals += len(picked)

        if hi == math.inf and hi_closed and self.mass_at_infinity > 0:
            value += float(np.asarray(f(np.array([math.inf])))[0]) * self.mass_at_infinity
            evals += 1

        s, t = max(lo, a), min(hi, b)
        if s < t:
            for d in self.densities:
                r = _density_integral(f, d, s, t, tol)
                value += r.value
                error += r.error
                evals += r.evaluations
            for d in self.distributions:
                res = stieltjes_batch(lambda o, x: f(x), d, [s], [t], rtol=tol)
                if not res.converged[0]:
                    raise QuadratureError("Stieltjes part did not converge")
                value += float(res.values[0])
                error += float(res.errors[0])
                evals += res.evaluations
        return QuadResult(value, error, max(evals, 1))

    # ---- batched families for the criteria --------------------------------

    def integrate_family(self, g: Callable, z: np.ndarray, side: str,
                         tol: float = DEFAULT_RTOL, budget: int | None = None):
        """Vectorised ``int g(z_j, x) dmu(x)`` over ``[z_j, inf]`` or ``(0, z_j]``.

        ``side="tail"`` integrates over ``x >= z`` (atom at ``z`` included),
        ``side="head"`` over ``x <= z`` (atom at ``z`` included).  Returns
        ``(values, errors)``; raises on divergence or tolerance failure.
        """
        z = np.asarray(z, dtype=float)
        a, b = self.window
        vals = np.zeros(z.size)
        errs = np.zeros(z.size)
        for x, m in self._atoms_in_window():
            sel = (z <= x) if side == "tail" else (z >= x)
            if sel.any():
                with np.errstate(all="ignore"):
                    gv = g(z[sel], np.full(sel.sum(), x))
                vals[sel] += m * gv
        if side == "tail":
            lo, hi = np.maximum(z, a), np.full(z.size, b)
        else:
            lo, hi = np.full(z.size, a), np.minimum(z, b)
        kw = {} if budget is None else {"budget": budget}
        for d in self.densities:
            sa, sb = d.weight.support
            dlo, dhi = np.maximum(lo, sa), np.minimum(hi, sb)
            if not np.all(np.isfinite(dhi)):
                raise ValueError("restrict the measure to a finite window first")
            dhi = np.maximum(dhi, dlo)
            bps = [p for p in d.weight.breakpoints if a < p < b]

            def f(o, x, d=d):
                with np.errstate(all="ignore"):
                    return g(z[o], x) * d(x)

            res = adaptive_batch(f, dlo, dhi, rtol=tol, breakpoints=bps, **kw)
            _check_batch(res, lambda j: (lambda x: f(np.full(np.shape(x), j), x)), dlo, dhi)
            vals += res.values
            errs += res.errors
        for d in self.distributions:
            res = stieltjes_batch(lambda o, x: g(z[o], x), d, lo, hi, rtol=tol, **kw)
            if not res.converged.all():
                raise QuadratureError("Stieltjes family did not converge")
            vals += res.values
            errs += res.errors
        if side == "tail" and self.mass_at_infinity > 0:
            raise ValueError("restrict the measure to a finite window first")
        return vals, errs


def _check_batch(res, scalar_for, lo, hi):
    if res.converged.all():
        return
    j = int(np.flatnonzero(~res.converged)[0])
    f = scalar_for(j)
    point = res.hotspots[j]
    if not np.isfinite(point):
        point = lo[j]
    near = min((lo[j], hi[j]), key=lambda s: abs(s - point))
    if res.nonfinite[j] or diagnose(f, lo[j], hi[j], near if abs(near - point) < 1e-6 * (hi[j] - lo[j]) + 1e-300 else point):
        raise DivergenceError(f"inner integral diverges near x={point:.6g}", point)
    raise QuadratureError(
        f"inner integral over [{lo[j]:.6g}, {hi[j]:.6g}] missed its tolerance")


def _density_integral(f, d: Density, s: float, t: float, tol: float) -> QuadResult:
    from .quadrature import integrate_adaptive, integrate_semiinfinite

    def g(x):
        with np.errstate(all="ignore"):
            return np.asarray(f(x), dtype=float) * d(x)

    bps = [p for p in d.weight.breakpoints if s < p < t]
    if math.isfinite(t):
        return integrate_adaptive(g, s, t, singularities=bps, tol=tol)
    pieces = [s, *bps]
    total = QuadResult(0.0, 0.0, 1)
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        r = integrate_adaptive(g, lo, hi, tol=tol)
        total = QuadResult(total.value + r.value, total.error + r.error,
                           total.evaluations + r.evaluations)
    r = integrate_semiinfinite(g, pieces[-1], tol=tol)
    return QuadResult(total.value + r.value, total.error + r.error,
                      total.evaluations + r.evaluations)


def _clip_distribution(d: Distribution, a: float, b: float) -> Distribution:
    F = d.F
    return Distribution(lambda x: F(np.clip(x, a, b)), d.coef)


# --------------------------------------------------------------------------
# constructors


def lebesgue_with_density(w: WeightSpec, r: float = 1.0,
                          window: tuple[float, float] | None = None) -> MeasureSpec:
    """``dmu = w(x)**r dx`` on the support of ``w`` (or the given window)."""
    if not r > 0:
        raise ValueError("density power must be positive")
    if window is None:
        window = w.support
    return MeasureSpec(densities=(Density(w, r),), window=tuple(window),
                       kind="density", params={"power": r})


def atomic(atoms, window: tuple[float, float] = (0.0, math.inf),
           mass_at_infinity: float = 0.0) -> MeasureSpec:
    return MeasureSpec(atoms=tuple(atoms), window=window,
                       mass_at_infinity=mass_at_infinity, kind="atomic")


def _sample_points(a, b, count):
    if a > 0 and b / a > 20:
        return np.geomspace(a, b, count)
    return np.linspace(a, b, count)


def _float_bits(x):
    return np.asarray(x, dtype=np.float64).view(np.int64)


def _from_bits(i):
    return np.asarray(i, dtype=np.int64).view(np.float64)


def _locate_jumps(G, xs, total, rel=1e-9):
    """Find jumps of the nondecreasing sampled function ``G``.

    Candidate cells are bisected (on the float lattice, so the result is
    exact) down to adjacent doubles; what is left is a genuine jump.
    Returns ``[(right_point, jump)]`` where ``right_point`` is the first
    double carrying the upper value.
    """
    gs = G(xs)
    inc = np.diff(gs)
    cand = np.flatnonzero(inc > rel * max(total, 1e-300))
    if cand.size == 0:
        return []
    lo = _float_bits(xs[cand])
    hi = _float_bits(xs[cand + 1])
    glo, ghi = gs[cand], gs[cand + 1]
    for _ in range(70):
        active = hi - lo > 1
        if not active.any():
            break
        mid = lo + (hi - lo) // 2
        gm = G(_from_bits(mid))
        left_part = gm - glo
        right_part = ghi - gm
        go_left = active & (left_part >= right_part)
        go_right = active & ~go_left
        hi = np.where(go_left, mid, hi)
        ghi = np.where(go_left, gm, ghi)
        lo = np.where(go_right, mid, lo)
        glo = np.where(go_right, gm, glo)
    jumps = ghi - glo
    out = {}
    for x, j in zip(_from_bits(hi), jumps):
        if j > rel * max(total, 1e-300):
            out[float(x)] = max(out.get(float(x), 0.0), float(j))
    return sorted(out.items())


def _vectorised(fn):
    def g(x):
        x = np.asarray(x, dtype=float)
        try:
            y = np.asarray(fn(x), dtype=float)
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError):
            pass
        return np.vectorize(lambda t: float(fn(t)), otypes=[float])(x)
    return g


def from_monotone_increasing(phi: Callable, domain: tuple[float, float],
                             samples: int = 4097) -> MeasureSpec:
    """Measure with ``mu((a, t]) = phi(t) - phi(a)`` on ``domain = (a, b]``.

    ``phi`` is normalised to be right-continuous; jumps become atoms.
    """
    a, b = map(float, domain)
    if not (0 <= a < b < math.inf):
        raise ValueError("Stieltjes measures need a finite domain (a, b]")
    phi = _vectorised(phi)
    xs = _sample_points(max(a, 0.0), b, samples)
    if a == 0:
        xs = xs[1:] if xs[0] == 0 else xs
        xs = np.concatenate(([np.nextafter(0.0, 1.0)], xs))
    vals = phi(xs)
    total = float(vals[-1] - vals[0])
    dec = np.diff(vals) < -1e-12 * max(abs(total), 1.0)
    if dec.any():
        at = xs[int(np.flatnonzero(dec)[0])]
        raise ValueError(f"phi decreases near t={at:.6g}")
    jumps = _locate_jumps(phi, xs, abs(total))
    base = float(phi(np.array([a]))[0]) if a > 0 else float(phi(np.array([0.0]))[0])
    jx = np.array([x for x, _ in jumps])
    jm = np.array([m for _, m in jumps])

    def F(x):
        x = np.asarray(x, dtype=float)
        steps = (x[..., None] >= jx).astype(float) @ jm if jx.size else 0.0
        return phi(x) - steps

    atoms = tuple((x, m) for x, m in jumps if a < x <= b)
    # a jump at or before the first sample belongs to the left end
    if a == 0 and vals[0] - base > 1e-12 * max(abs(total), 1.0):
        atoms = ((float(xs[0]), float(vals[0] - base)),) + atoms
    return MeasureSpec(atoms=atoms, distributions=(Distribution(F),),
                       window=(a, b), kind="stieltjes-increasing")


def from_monotone_decreasing(psi: Callable, domain: tuple[float, float],
                             samples: int = 4097) -> MeasureSpec:
    """Measure with ``mu([t, inf]) = psi(t)`` for ``t`` in ``domain = (a, b]``.

    ``psi`` is normalised to be left-continuous; jumps become atoms and the
    mass left beyond ``b`` is kept as mass at infinity so tails round-trip.
    """
    a, b = map(float, domain)
    if not (0 <= a < b < math.inf):
        raise ValueError("Stieltjes measures need a finite domain (a, b]")
    psi = _vectorised(psi)
    xs = _sample_points(max(a, 0.0), b, samples)
    if xs[0] == 0:
        xs[0] = np.nextafter(0.0, 1.0)
    vals = psi(xs)
    total = float(vals[0] - vals[-1])
    inc = np.diff(vals) > 1e-12 * max(abs(total), 1.0)
    if inc.any():
        at = xs[int(np.flatnonzero(inc)[0])]
        raise ValueError(f"psi increases near t={at:.6g}")
    neg = lambda x: -psi(x)
    raw = _locate_jumps(neg, xs, abs(total))
    # for a left-continuous psi the atom sits at the last double with the
    # upper value, i.e. one step left of where -psi jumps
    jumps = [(float(np.nextafter(x, -np.inf)), m) for x, m in raw]
    jx = np.array([x for x, _ in jumps])
    jm = np.array([m for _, m in jumps])

    def Fc(x):
        # -psi minus the jumps strictly left of x is continuous
        x = np.asarray(x, dtype=float)
        passed = (x[..., None] > jx).astype(float) @ jm if jx.size else 0.0
        return -psi(x) - passed

    atoms = tuple((x, m) for x, m in jumps if a < x <= b)
    tail_b = float(psi(np.array([b]))[0])
    at_b = sum(m for x, m in atoms if x == b)
    return MeasureSpec(atoms=atoms, distributions=(Distribution(Fc),),
                       window=(a, b), mass_at_infinity=max(tail_b - at_b, 0.0),
                       kind="stieltjes-decreasing")
