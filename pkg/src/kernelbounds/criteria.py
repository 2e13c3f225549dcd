"""Boundedness constants ``B`` for every operator/kernel-class pairing.

Every constant has the shape

    B = ( int  Qf(z)^a  Pf(z)^c  dS(z) ) ** ((p - q) / (p q))

where ``Qf`` integrates a kernel raised to ``q`` and ``Pf`` a kernel raised
to ``p'``; one of them runs over the head ``[0, z]`` and the other over the
tail ``[z, inf]``.  The *first form* puts the differential on ``Pf`` with
exponents ``(p/(p-q), p(q-1)/(p-q))`` on ``(Qf, Pf)``; the *second form*
puts it on ``Qf`` with ``(q/(p-q), q(p-1)/(p-q))``.  Integration by parts
gives ``I_1 = (p'/q) I_2`` for continuous factors, so the second form is
reported both raw and rescaled by ``p'/q``.

The variants differ only in which factor is the head, which kernel
(companion or lower order) each factor carries, and which measure it
integrates against; :data:`VARIANTS` records exactly that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ExponentSet, WeightSpec, restrict
from .kernels import MINUS, PLUS, KernelCertificate
from .measures import MeasureSpec, lebesgue_with_density
from .quadrature import DEFAULT_RTOL, DivergenceError, QuadratureError

DEFAULT_WINDOW = (1e-4, 1e4)
TAIL, HEAD = "tail", "head"


@dataclass(frozen=True)
class FactorRole:
    side: str        # TAIL or HEAD
    kernel: str      # "companion" or "lower"
    measure: str     # "mu", "u" or "v"


@dataclass(frozen=True)
class Variant:
    name: str
    sign: str
    q_factor: FactorRole
    p_factor: FactorRole
    operator: str
    stated_orders: str = "n>=1"
    printed_range: str = "0..n"
    exact_order: int | None = None

    @property
    def uses_mu(self) -> bool:
        return "mu" in (self.q_factor.measure, self.p_factor.measure)

    def mu_exponent(self, exps: ExponentSet) -> float:
        """``B(lambda mu) = lambda**e B(mu)``."""
        if self.q_factor.measure == "mu":
            return 1.0 / exps.q
        if self.p_factor.measure == "mu":
            return 1.0 / exps.p_prime
        return 0.0


def _v(name, sign, q, p, op, **kw):
    return Variant(name, sign, FactorRole(*q), FactorRole(*p), op, **kw)


_C, _L = "companion", "lower"
VARIANTS: dict[str, Variant] = {v.name: v for v in (
    _v("2.1", PLUS, (TAIL, _C, "mu"), (HEAD, _L, "v"), "K+ : L_p -> L_q,mu", exact_order=1),
    _v("2.2", MINUS, (HEAD, _C, "v"), (TAIL, _L, "mu"), "K- : L_p,mu -> L_q", exact_order=1),
    _v("3.1", PLUS, (TAIL, _C, "mu"), (HEAD, _L, "v"), "K+ : L_p -> L_q,mu"),
    _v("3.2", MINUS, (HEAD, _C, "v"), (TAIL, _L, "mu"), "K- : L_p,mu -> L_q",
       stated_orders="n>1"),
    _v("3.3", MINUS, (TAIL, _L, "mu"), (HEAD, _C, "v"), "K+ : L_p -> L_q,mu"),
    _v("3.4", PLUS, (HEAD, _L, "v"), (TAIL, _C, "mu"), "K- : L_p,mu -> L_q",
       stated_orders="n>1", printed_range="1..n-1 (second form)"),
    _v("3.5", MINUS, (HEAD, _C, "mu"), (TAIL, _L, "u"), "dual-K- : L_p -> L_q,mu"),
    _v("3.6", PLUS, (TAIL, _C, "u"), (HEAD, _L, "mu"), "dual-K+ : L_p,mu -> L_q"),
    _v("3.7", PLUS, (HEAD, _L, "mu"), (TAIL, _C, "u"), "dual-K- : L_p -> L_q,mu"),
    _v("3.8", MINUS, (TAIL, _L, "u"), (HEAD, _C, "mu"), "dual-K+ : L_p,mu -> L_q",
       stated_orders="n>1", printed_range="1..n-1 (second form)"),
    _v("3.9", PLUS, (TAIL, _C, "u"), (HEAD, _L, "v"), "K+ : L_p -> L_q"),
    _v("3.10", MINUS, (TAIL, _L, "u"), (HEAD, _C, "v"), "K+ : L_p -> L_q",
       printed_range="0,2..n (second form)"),
    _v("3.11", PLUS, (HEAD, _L, "v"), (TAIL, _C, "u"), "K- : L_p -> L_q"),
    _v("3.12", MINUS, (HEAD, _C, "v"), (TAIL, _L, "u"), "K- : L_p -> L_q"),
)}


def get_variant(name) -> Variant:
    key = str(name).strip()
    if key not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}")
    return VARIANTS[key]


# --------------------------------------------------------------------------
# factors


@dataclass(frozen=True)
class Factor:
    """``z -> int g(x, z)^r dnu`` over the head ``[0, z]`` or tail ``[z, inf]``.

    ``kernel`` takes ``(larger, smaller)``; a tail factor evaluates it at
    ``(x, z)``, a head factor at ``(z, x)``.
    """

    side: str
    kernel: Callable
    power: float
    measure: MeasureSpec

    def __post_init__(self):
        if self.side not in (TAIL, HEAD):
            raise ValueError(f"factor side must be 'tail' or 'head', got {self.side!r}")

    def _g(self, z, x):
        k = self.kernel(x, z) if self.side == TAIL else self.kernel(z, x)
        return np.where(k > 0, k, 0.0) ** self.power

    def evaluate(self, z, tol: float = DEFAULT_RTOL):
        """Closed-endpoint values and error estimates at each ``z``."""
        z = np.asarray(z, dtype=float)
        return self.measure.integrate_family(self._g, z, self.side, tol=tol)

    def atom_at(self, z) -> np.ndarray:
        """Contribution of atoms sitting exactly at ``z`` (closed minus open)."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.size)
        lo, hi = self.measure.window
        for x, m in self.measure.atoms:
            if lo < x <= hi:
                hit = z == x
                if hit.any():
                    with np.errstate(all="ignore"):
                        out[hit] += m * self._g(z[hit], z[hit])
        return out

    def __call__(self, z, tol: float = DEFAULT_RTOL):
        return self.evaluate(np.atleast_1d(z), tol)[0]


@dataclass(frozen=True)
class BFunctionalSpec:
    """``(int O^a dW)^outer`` with ``W = S^(e+1)/(e+1)`` and ``S`` the source.

    ``tail`` is the nonincreasing factor, ``head`` the nondecreasing one.
    ``source`` names the factor carrying the differential; the other one is
    raised to its own exponent.
    """

    tail: Factor
    head: Factor
    tail_exp: float
    head_exp: float
    source: str
    outer_exp: float
    window: tuple[float, float]

    def __post_init__(self):
        if self.source not in (TAIL, HEAD):
            raise ValueError("source must be 'tail' or 'head'")
        if self.tail.side != TAIL or self.head.side != HEAD:
            raise ValueError("tail/head factors must integrate over their own side")
        if not (self.tail_exp >= 0 and self.head_exp >= 0 and self.outer_exp > 0):
            raise ValueError("exponents must be nonnegative")


@dataclass
class Integral:
    """Outer integral estimate on a node set."""

    value: float
    error: float
    converged: bool
    nodes: int


@dataclass
class FactorTable:
    """Factor values on a node set, with one-sided limits at atoms."""

    z: np.ndarray
    T: np.ndarray        # tail, closed at z (= left limit)
    T_open: np.ndarray   # tail over (z, inf] (= right limit)
    H: np.ndarray        # head, closed at z (= right limit)
    H_open: np.ndarray   # head over [0, z) (= left limit)
    T_err: np.ndarray
    H_err: np.ndarray

    @classmethod
    def build(cls, tail: Factor, head: Factor, z, tol):
        T, Te = tail.evaluate(z, tol)
        H, He = head.evaluate(z, tol)
        return cls(z, T, T - tail.atom_at(z), H, H - head.atom_at(z), Te, He)

    def merge(self, other: "FactorTable") -> "FactorTable":
        z = np.concatenate([self.z, other.z])
        order = np.argsort(z, kind="stable")
        return FactorTable(*(np.concatenate([getattr(self, f), getattr(other, f)])[order]
                             for f in ("z", "T", "T_open", "H", "H_open", "T_err", "H_err")))


def _powers(x, e):
    with np.errstate(all="ignore"):
        return np.where(x > 0, np.abs(x) ** e, 0.0 if e > 0 else 1.0)


def _parts(tab: FactorTable, spec: BFunctionalSpec):
    if spec.source == HEAD:
        S = (tab.H_open, tab.H, tab.H)
        O = (tab.T, tab.T, tab.T_open)
        a, e, sgn = spec.tail_exp, spec.head_exp, 1.0
    else:
        S = (tab.T, tab.T, tab.T_open)
        O = (tab.H_open, tab.H, tab.H)
        a, e, sgn = spec.head_exp, spec.tail_exp, -1.0
    W = lambda s: sgn * _powers(s, e + 1.0) / (e + 1.0)
    return S, O, a, W


def _jumps_and_sliver(S, O, a, W, spec, include_first, idx):
    """Atom terms at the nodes ``idx`` plus the sliver next to a zero start."""
    S_left, S_val, S_right = (s[idx] for s in S)
    O_val, O_right = O[1][idx], O[2][idx]
    jump = W(S_right) - W(S_left)
    if spec.source == TAIL:
        # nothing lies beyond the window: the tail drops to 0 after its end
        jump[-1] = W(np.zeros(1))[0] - W(S_left[-1:])[0]
    jump[0] = 0.0
    total = float(np.sum(_powers(O_val, a) * jump))
    if include_first and spec.source == HEAD:
        # the sliver (0, z_0]: W(0) = 0 and O is taken at z_0
        total += float(_powers(O_right[:1], a)[0] * W(S_right[:1])[0])
    return total


def _stieltjes_sum(tab: FactorTable, spec: BFunctionalSpec, include_first: bool):
    """Trapezoid sum of ``int O^a dW`` over ``(z_0, z_last]`` plus jump terms.

    Cells use right limits at their left node and left limits at their
    right node; atoms of the source contribute ``O(z)^a * jump(W)``.
    """
    S, O, a, W = _parts(tab, spec)
    Oa_r, Oa_l = _powers(O[2][:-1], a), _powers(O[0][1:], a)
    dW = W(S[0][1:]) - W(S[2][:-1])
    total = float(np.sum(0.5 * (Oa_r + Oa_l) * dW))
    return total + _jumps_and_sliver(S, O, a, W, spec, include_first,
                                     np.arange(tab.z.size))


def _midpoint_sum(tab: FactorTable, old: np.ndarray, spec: BFunctionalSpec,
                  include_first: bool):
    """Midpoint Stieltjes sum over the cells spanned by the ``old`` nodes.

    ``tab`` is one bisection finer; its extra nodes serve as midpoints.  A
    cell that was not split falls back to the trapezoid value.
    """
    S, O, a, W = _parts(tab, spec)
    idx = np.flatnonzero(old)
    lo, hi = idx[:-1], idx[1:]
    split = hi - lo == 2
    mid = np.where(split, lo + 1, lo)
    Om = np.where(split, _powers(O[1][mid], a),
                  0.5 * (_powers(O[2][lo], a) + _powers(O[0][hi], a)))
    dW = W(S[0][hi]) - W(S[2][lo])
    total = float(np.sum(Om * dW))
    return total + _jumps_and_sliver(S, O, a, W, spec, include_first, idx)


def _initial_nodes(window, breakpoints, cells):
    a, b = window
    start = a if a > 0 else b * 1e-12
    if b / start > 50:
        base = np.geomspace(start, b, cells + 1)
    else:
        base = np.linspace(start, b, cells + 1)
    base[0], base[-1] = start, b
    extra = [x for x in breakpoints if start < x < b]
    return np.unique(np.concatenate([base, extra])), a == 0


def _bisect(z):
    lo, hi = z[:-1], z[1:]
    geo = (lo > 0) & (hi / np.where(lo > 0, lo, 1.0) > 1.5)
    with np.errstate(all="ignore"):
        mid = np.where(geo, np.sqrt(lo * hi), 0.5 * (lo + hi))
    keep = (mid > lo) & (mid < hi)
    return mid[keep]


@dataclass
class FunctionalResult:
    form1: Integral
    form2: Integral
    inner_rel_error: float


def integrate_forms(tail: Factor, head: Factor, exps: ExponentSet,
                    window, p_side: str, breakpoints=(), tol: float = 1e-8,
                    cells: int = 64, max_levels: int = 10,
                    inner_tol: float | None = None) -> FunctionalResult:
    """Both outer integrals on shared, successively bisected node sets.

    ``p_side`` says which factor is the ``p'``-factor (the first-form source).
    Stops when the Richardson estimates of both forms change by less than
    ``tol`` relatively between two levels.
    """
    inner_tol = inner_tol if inner_tol is not None else min(1e-9, tol * 1e-2)
    q_side = TAIL if p_side == HEAD else HEAD
    exp1 = {q_side: exps.e_tail, p_side: exps.e_inner}
    exp2 = {p_side: exps.e_inner_dual, q_side: exps.e_tail_dual}
    spec1 = BFunctionalSpec(tail, head, exp1[TAIL], exp1[HEAD], p_side,
                            exps.e_outer, window)
    spec2 = BFunctionalSpec(tail, head, exp2[TAIL], exp2[HEAD], q_side,
                            exps.e_outer, window)
    z, from_zero = _initial_nodes(window, breakpoints, cells)
    tab = FactorTable.build(tail, head, z, inner_tol)
    hist = [[], []]
    rich = [[], []]
    done = False
    level = 0
    while True:
        new = _bisect(tab.z)
        finer = tab.merge(FactorTable.build(tail, head, new, inner_tol))
        old = np.isin(finer.z, tab.z)
        # first form: trapezoid on this level; second form: midpoint rule
        # with the next level's nodes as midpoints
        sums = (_stieltjes_sum(tab, spec1, from_zero),
                _midpoint_sum(finer, old, spec2, from_zero))
        for k, t in enumerate(sums):
            hist[k].append(t)
            if len(hist[k]) >= 2:
                rich[k].append(t + (t - hist[k][-2]) / 3.0)
        tab = finer
        if len(rich[0]) >= 2:
            done = all(abs(r[-1] - r[-2]) <= tol * abs(r[-1]) + 1e-300 for r in rich)
        if done or level >= max_levels:
            break
        level += 1
    rel_inner = 0.0
    for vals, errs in ((tab.T, tab.T_err), (tab.H, tab.H_err)):
        with np.errstate(all="ignore"):
            r = np.where(vals > 0, errs / vals, 0.0)
        rel_inner = max(rel_inner, float(np.nanmax(r)) if r.size else 0.0)
    out = []
    for k in range(2):
        best = rich[k][-1] if rich[k] else hist[k][-1]
        err = abs(rich[k][-1] - rich[k][-2]) if len(rich[k]) >= 2 else abs(best)
        out.append(Integral(best, err, done, tab.z.size))
    _check_growth(hist, done)
    return FunctionalResult(out[0], out[1], rel_inner)


def _check_growth(hist, done):
    if done:
        return
    for h in hist:
        if len(h) >= 3:
            d1, d2 = h[-2] - h[-3], h[-1] - h[-2]
            if d1 > 0 and d2 >= 0.9 * d1:
                raise DivergenceError("outer integral keeps growing under refinement")
    raise QuadratureError("outer Stieltjes integral did not reach its tolerance")


def eval_b_functional(spec: BFunctionalSpec, tol: float = 1e-8,
                      breakpoints=(), cells: int = 64, max_levels: int = 10):
    """``(value, error)`` of one B functional; divergence gives ``inf``.

    Sample monotonicity of both factors is checked on the coarse node set.
    """
    z, from_zero = _initial_nodes(spec.window, breakpoints, cells)
    try:
        tab = FactorTable.build(spec.tail, spec.head, z, min(1e-9, tol * 1e-2))
    except DivergenceError:
        return math.inf, math.inf
    _check_monotone(tab)
    hist, rich = [], []
    for level in range(max_levels + 1):
        t = _stieltjes_sum(tab, spec, from_zero)
        hist.append(t)
        if len(hist) >= 2:
            rich.append(t + (t - hist[-2]) / 3.0)
        if len(rich) >= 2 and abs(rich[-1] - rich[-2]) <= tol * abs(rich[-1]) + 1e-300:
            break
        try:
            tab = tab.merge(FactorTable.build(spec.tail, spec.head, _bisect(tab.z),
                                              min(1e-9, tol * 1e-2)))
        except DivergenceError:
            return math.inf, math.inf
    else:
        try:
            _check_growth([hist], False)
        except DivergenceError:
            return math.inf, math.inf
    I = rich[-1]
    err = abs(rich[-1] - rich[-2])
    value = max(I, 0.0) ** spec.outer_exp
    return value, _b_error(value, I, err, spec.outer_exp)


def _check_monotone(tab: FactorTable, rel: float = 1e-9):
    scale_T = max(float(np.max(tab.T)), 1e-300) if tab.T.size else 1.0
    scale_H = max(float(np.max(tab.H)), 1e-300) if tab.H.size else 1.0
    if np.any(np.diff(tab.T) > rel * scale_T + np.maximum(tab.T_err[1:], tab.T_err[:-1])):
        raise ValueError("tail factor is not nonincreasing on the sampled nodes")
    if np.any(np.diff(tab.H) < -rel * scale_H - np.maximum(tab.H_err[1:], tab.H_err[:-1])):
        raise ValueError("head factor is not nondecreasing on the sampled nodes")


def _b_error(value, I, err, outer):
    if I <= 0:
        return err ** outer if err > 0 else 0.0
    return value * outer * err / I


# --------------------------------------------------------------------------
# assembling components


@dataclass(frozen=True)
class Problem:
    """Inputs shared by all components of one criterion evaluation."""

    kernel: KernelCertificate
    exps: ExponentSet
    u: WeightSpec | None = None
    v: WeightSpec | None = None
    mu: MeasureSpec | None = None
    window: tuple[float, float] = DEFAULT_WINDOW

    def __post_init__(self):
        a, b = self.window
        if not (0 <= a < b < math.inf):
            raise ValueError(f"criteria need a finite window (a, b] with 0 <= a < b, got {self.window}")


def _kernel_for(kernel: KernelCertificate, role: str, i: int) -> Callable:
    if role == "companion":
        return kernel.companion(i)
    return kernel.lower_kernel(i)


def _measure_for(prob: Problem, which: str, power: float) -> MeasureSpec:
    a, b = prob.window
    if which == "mu":
        if prob.mu is None:
            raise ValueError("this variant needs a measure mu")
        return prob.mu.restricted(a, b)
    w = prob.u if which == "u" else prob.v
    if w is None:
        raise ValueError(f"this variant needs the weight {which}")
    return lebesgue_with_density(restrict(w, a, b), power, window=(a, b))


def build_factors(variant: Variant, prob: Problem, i: int):
    """``(tail, head, p_side)`` for component ``i``."""
    exps = prob.exps
    fq = Factor(variant.q_factor.side, _kernel_for(prob.kernel, variant.q_factor.kernel, i),
                exps.q, _measure_for(prob, variant.q_factor.measure, exps.q))
    fp = Factor(variant.p_factor.side, _kernel_for(prob.kernel, variant.p_factor.kernel, i),
                exps.p_prime, _measure_for(prob, variant.p_factor.measure, exps.p_prime))
    tail, head = (fq, fp) if fq.side == TAIL else (fp, fq)
    return tail, head, variant.p_factor.side


def _breakpoints(prob: Problem):
    pts = set()
    for w in (prob.u, prob.v):
        if w is not None:
            pts.update(w.breakpoints)
    if prob.mu is not None:
        pts.update(prob.mu.breakpoints)
    a, b = prob.window
    return tuple(sorted(x for x in pts if a < x < b))


def check_compatible(variant: Variant, kernel: KernelCertificate):
    if kernel.sign != variant.sign:
        cls = "O_n+" if variant.sign == PLUS else "O_n-"
        raise ValueError(f"variant {variant.name} needs a kernel of class {cls}")
    if variant.exact_order is not None and kernel.order != variant.exact_order:
        raise ValueError(f"variant {variant.name} needs an order-{variant.exact_order} kernel "
                         f"(got order {kernel.order}); lift order-0 kernels first")
    if kernel.order < 1:
        raise ValueError("criteria need kernels of order >= 1; lift order-0 kernels first")
    if not kernel.has_decomposition:
        raise ValueError(f"kernel {kernel.name} has no companion data; attach it first")


@dataclass
class Component:
    i: int
    form1: float
    form2: float
    form2_raw: float
    error: float
    form_used: int = 1
    flags: list = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.form1 if self.form_used == 1 else self.form2

    @property
    def form_gap(self) -> float:
        a, b = self.form1, self.form2
        if math.isinf(a) or math.isinf(b):
            return 0.0 if a == b else math.inf
        scale = max(abs(a), abs(b))
        return abs(a - b) / scale if scale > 0 else 0.0


def b_component(variant, i: int, prob: Problem, tol: float = 1e-8,
                cells: int = 64, max_levels: int = 10) -> Component:
    """``B_{n,i}`` in both forms for one variant and index."""
    var = get_variant(variant) if not isinstance(variant, Variant) else variant
    check_compatible(var, prob.kernel)
    n = prob.kernel.order
    if not 0 <= i <= n:
        raise ValueError(f"component index {i} outside 0..{n}")
    tail, head, p_side = build_factors(var, prob, i)
    exps = prob.exps
    flags = _index_flags(var, i, n)
    try:
        res = integrate_forms(tail, head, exps, prob.window, p_side,
                              _breakpoints(prob), tol, cells, max_levels)
    except DivergenceError:
        return Component(i, math.inf, math.inf, math.inf, math.inf, flags=flags + ["divergent"])
    o = exps.e_outer
    I1, I2 = res.form1.value, res.form2.value
    b1 = max(I1, 0.0) ** o
    b2_raw = max(I2, 0.0) ** o
    b2 = max(exps.form_ratio * I2, 0.0) ** o
    # inner errors propagate with the total exponent (a + c + 1) of the factors
    inner = res.inner_rel_error * (exps.e_tail + exps.e_inner + 1.0)
    err1 = _b_error(b1, I1, res.form1.error + abs(I1) * inner, o)
    err2 = _b_error(b2, exps.form_ratio * I2,
                    exps.form_ratio * (res.form2.error + abs(I2) * inner), o)
    return Component(i, b1, b2, b2_raw, max(err1, err2), flags=flags)


def _index_flags(var: Variant, i: int, n: int):
    flags = []
    if var.printed_range.startswith("1..n-1") and i in (0, n):
        flags.append("second form printed only for i=1..n-1")
    if var.printed_range.startswith("0,2..n") and i == 1:
        flags.append("second form printed for i=0,2..n")
    if var.stated_orders == "n>1" and n == 1:
        flags.append("stated for n>1; n=1 accepted")
    return flags


@dataclass
class BReport:
    variant: str
    p: float
    q: float
    window: tuple[float, float]
    order: int
    components: list[Component]
    stated_orders: str = "n>=1"
    printed_range: str = "0..n"
    eps_study: dict | None = None

    @property
    def values(self):
        return [c.value for c in self.components]

    @property
    def max_value(self) -> float:
        return max(self.values)

    @property
    def argmax(self) -> int:
        vals = self.values
        return int(vals.index(max(vals)))

    @property
    def cross_check_delta(self) -> float:
        gaps = [c.form_gap for c in self.components if math.isfinite(c.form1)]
        return max(gaps) if gaps else 0.0

    @property
    def divergent(self) -> bool:
        if self.eps_study and self.eps_study.get("growth"):
            return True
        return any(math.isinf(v) for v in self.values)

    @property
    def verdict(self) -> str:
        return "unbounded by criterion" if self.divergent else "bounded"

    def to_dict(self) -> dict:
        def num(x):
            return None if not math.isfinite(x) else float(x)

        return {
            "variant": self.variant, "p": self.p, "q": self.q,
            "window": list(self.window), "order": self.order,
            "components": [{"i": c.i, "form1": num(c.form1), "form2": num(c.form2),
                            "form2_raw": num(c.form2_raw), "err": num(c.error),
                            "form_gap": num(c.form_gap), "flags": c.flags}
                           for c in self.components],
            "max": num(self.max_value) if not self.divergent else None,
            "argmax": self.argmax,
            "cross_check_delta": num(self.cross_check_delta),
            "verdict": self.verdict,
            "stated_orders": self.stated_orders,
            "printed_range": self.printed_range,
            "eps_study": self.eps_study,
        }


def criterion(variant, kernel: KernelCertificate, exps: ExponentSet,
              u: WeightSpec | None = None, v: WeightSpec | None = None,
              mu: MeasureSpec | None = None, window=DEFAULT_WINDOW,
              tol: float = 1e-8, eps_study: bool = False) -> BReport:
    """All components ``i = 0..n`` in both forms, plus the verdict.

    With ``eps_study`` the maximum is recomputed with the lower window end
    divided by 10 and 100; increments that fail to shrink mark the criterion
    as divergent (growth under window refinement).
    """
    var = get_variant(variant) if not isinstance(variant, Variant) else variant
    prob = Problem(kernel, exps, u, v, mu, tuple(map(float, window)))
    comps = [b_component(var, i, prob, tol) for i in range(kernel.order + 1)]
    report = BReport(var.name, exps.p, exps.q, prob.window, kernel.order, comps,
                     var.stated_orders, var.printed_range)
    if eps_study and not report.divergent:
        report.eps_study = _eps_study(var, prob, report.max_value, tol)
    return report


def _eps_study(var, prob: Problem, base: float, tol: float) -> dict:
    a, b = prob.window
    if a <= 0:
        return {"eps": [0.0], "max": [base], "growth": False, "sensitivity": 0.0}
    eps = [a, a / 10, a / 100]
    values = [base]
    for e in eps[1:]:
        sub = Problem(prob.kernel, prob.exps, prob.u, prob.v, prob.mu, (e, b))
        comps = [b_component(var, i, sub, tol) for i in range(prob.kernel.order + 1)]
        values.append(max(c.value for c in comps))
    finite = all(math.isfinite(x) for x in values)
    growth = not finite
    sens = math.inf
    if finite:
        d1, d2 = values[1] - values[0], values[2] - values[1]
        scale = max(abs(values[2]), 1e-300)
        growth = d1 > 1e-6 * scale and d2 >= 0.9 * d1
        sens = abs(values[1] - values[0]) / scale
    return {"eps": eps, "max": [x if math.isfinite(x) else None for x in values],
            "growth": bool(growth), "sensitivity": sens if math.isfinite(sens) else None}
