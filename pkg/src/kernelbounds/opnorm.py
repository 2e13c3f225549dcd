"""Lower bounds on ``||K||_{p->q}`` from a discretized operator.

The operator is replaced by a nonnegative matrix on a grid (midpoint
product rule) and the weighted ratio ``||A f||_q / ||f||_p`` is pushed up
by a nonlinear power iteration.  Any value returned is achieved by a stored
witness, so it is a certified lower bound for the discrete norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import ExponentSet, Grid, WeightSpec
from .kernels import KernelCertificate

PLUS_SIDE, MINUS_SIDE = "plus", "minus"


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: np.ndarray
    row_weights: np.ndarray
    col_weights: np.ndarray
    grid: Grid | None = None
    side: str = PLUS_SIDE

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if A.ndim != 2:
            raise ValueError("operator matrix must be two-dimensional")
        if np.any(A < 0) or not np.all(np.isfinite(A)):
            raise ValueError("operator entries must be finite and nonnegative")
        r = np.asarray(self.row_weights, dtype=float)
        c = np.asarray(self.col_weights, dtype=float)
        if r.shape != (A.shape[0],) or c.shape != (A.shape[1],):
            raise ValueError("quadrature weights must match the matrix shape")
        if np.any(r <= 0) or np.any(c <= 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "row_weights", r)
        object.__setattr__(self, "col_weights", c)

    @classmethod
    def plain(cls, matrix) -> "DiscreteOperator":
        """Unit quadrature weights: the ordinary ``l_p -> l_q`` norm."""
        A = np.asarray(matrix, dtype=float)
        return cls(A, np.ones(A.shape[0]), np.ones(A.shape[1]))

    @property
    def shape(self):
        return self.matrix.shape

    def scaled_rows(self, factor: float) -> "DiscreteOperator":
        return DiscreteOperator(self.matrix * factor, self.row_weights,
                                self.col_weights, self.grid, self.side)


def discretize(kernel: KernelCertificate, u: WeightSpec, v: WeightSpec,
               grid: Grid, side: str = PLUS_SIDE) -> DiscreteOperator:
    """Midpoint product rule on the grid's cells.

    Plus side: ``A[j, k] = u(x_j) K(x_j, s_k) v(s_k) len_k`` for ``s_k <= x_j``.
    Minus side: ``A[j, k] = v(s_j) K(x_k, s_j) u(x_k) len_k`` for ``x_k >= s_j``.
    The diagonal cell uses the kernel at the cell centre pair ``(x_j, x_j)``.
    """
    pts = grid.points
    lens = grid.lengths
    big, small = np.meshgrid(pts, pts, indexing="ij")      # big[j,k]=x_j, small=s_k
    with np.errstate(all="ignore"):
        if side == PLUS_SIDE:
            K = kernel(big, small)
            A = u(pts)[:, None] * K * v(pts)[None, :] * lens[None, :]
            A = np.where(big >= small, A, 0.0)
        elif side == MINUS_SIDE:
            K = kernel(small, big)                           # K(x_k, s_j)
            A = v(pts)[:, None] * K * u(pts)[None, :] * lens[None, :]
            A = np.where(small >= big, A, 0.0)
        else:
            raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    if not np.all(np.isfinite(A)):
        raise ValueError("kernel or weights are not finite on the grid")
    return DiscreteOperator(np.where(A > 0, A, 0.0), lens.copy(), lens.copy(), grid, side)


def _norm(x, w, r):
    return float(np.sum(w * np.abs(x) ** r) ** (1.0 / r))


def ratio(op: DiscreteOperator, f: np.ndarray, exps: ExponentSet) -> float:
    fp = _norm(f, op.col_weights, exps.p)
    if fp == 0:
        raise ValueError("the witness must not vanish")
    return _norm(op.matrix @ f, op.row_weights, exps.q) / fp


def verify_witness(op: DiscreteOperator, f, exps: ExponentSet) -> float:
    """Recompute ``||A f||_q / ||f||_p`` from scratch."""
    f = np.asarray(f, dtype=float)
    if f.shape != (op.shape[1],):
        raise ValueError("witness length must match the operator's columns")
    if np.any(f < 0):
        raise ValueError("witnesses are nonnegative")
    return ratio(op, f, exps)


@dataclass
class NormEstimate:
    value: float
    witness: np.ndarray
    iterations: int
    converged: bool
    restarts: list = field(default_factory=list)
    seed: int = 0

    @property
    def spread(self) -> float:
        vals = [r for r in self.restarts if r > 0]
        return max(vals) / min(vals) if vals else 1.0

    def to_dict(self) -> dict:
        return {"value": self.value, "iterations": self.iterations,
                "converged": self.converged, "restarts": list(self.restarts),
                "spread": self.spread, "seed": self.seed}


def _ascent(op: DiscreteOperator, f, exps: ExponentSet, max_iters, tol):
    A, wr, wc = op.matrix, op.row_weights, op.col_weights
    p, q = exps.p, exps.q
    f = f / _norm(f, wc, p)
    best = ratio(op, f, exps)
    for it in range(1, max_iters + 1):
        g = A @ f
        pulled = (A.T @ (wr * g ** (q - 1.0))) / wc
        if not np.any(pulled > 0):
            return f, best, it, True
        f_new = pulled ** (1.0 / (p - 1.0))
        f_new /= _norm(f_new, wc, p)
        r = ratio(op, f_new, exps)
        if r >= best:
            gain = r - best
            f, best = f_new, r
            if gain <= tol * best:
                return f, best, it, True
        else:
            # the iteration should not decrease the ratio; stop on rounding noise
            return f, best, it, abs(r - best) <= 1e3 * tol * best
    return f, best, max_iters, False


def norm_lower_bound(op: DiscreteOperator, exps: ExponentSet, max_iters: int = 2000,
                     seed: int = 0, restarts: int = 8, tol: float = 1e-10) -> NormEstimate:
    """Best ratio over a flat start plus ``restarts - 1`` random starts.

    Every iterate stays entrywise nonnegative; ties keep the lowest
    restart index.
    """
    m, n = op.shape
    if not np.any(op.matrix > 0):
        return NormEstimate(0.0, np.ones(n), 0, True, [0.0] * max(restarts, 1), seed)
    rng = np.random.default_rng(seed)
    starts = [np.ones(n)] + [rng.random(n) + 1e-3 for _ in range(max(restarts, 1) - 1)]
    best = None
    values = []
    total_iters = 0
    all_conv = True
    for f0 in starts:
        f, val, it, conv = _ascent(op, f0, exps, max_iters, tol)
        values.append(val)
        total_iters += it
        all_conv &= conv
        if best is None or val > best[1]:
            best = (f, val)
    f, val = best
    # report the ratio the stored witness actually achieves
    val = verify_witness(op, f, exps)
    return NormEstimate(val, f, total_iters, all_conv, values, seed)


def brute_oracle_norm(op: DiscreteOperator, exps: ExponentSet, samples: int = 20000,
                      seed: int = 12345) -> float:
    """Random search on the nonnegative ``p``-sphere plus local polishing.

    Independent of the power iteration; meant for operators of size <= 4.
    """
    m, n = op.shape
    if max(m, n) > 4:
        raise ValueError("the brute-force oracle is for operators up to 4x4")
    if not np.any(op.matrix > 0):
        return 0.0
    rng = np.random.default_rng(seed)
    F = rng.random((samples, n)) ** 3     # favour faces of the orthant too
    F = np.vstack([F, np.eye(n), np.ones((1, n))])
    num = np.sum(op.row_weights * (F @ op.matrix.T) ** exps.q, axis=1) ** (1 / exps.q)
    den = np.sum(op.col_weights * F ** exps.p, axis=1) ** (1 / exps.p)
    vals = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    order = np.argsort(vals)[::-1][:10]

    def neg(y):
        f = np.abs(y)
        d = _norm(f, op.col_weights, exps.p)
        return 0.0 if d == 0 else -_norm(op.matrix @ f, op.row_weights, exps.q) / d

    best = float(vals[order[0]])
    for j in order:
        res = minimize(neg, F[j], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
        best = max(best, -float(res.fun))
    return best
