"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from kernelbounds import cli
from kernelbounds.config import RunConfig
from kernelbounds.core import Constant, ExponentSet, Power, Window, cell_grid
from kernelbounds.criteria import criterion
from kernelbounds.kernels import builtin, compose, constant, default_triples, estimate_min_h, lift
from kernelbounds.measures import lebesgue_with_density
from kernelbounds.opnorm import DiscreteOperator, brute_oracle_norm, discretize, norm_lower_bound
from kernelbounds.partition import LevelPartition, level_partition, verify_partition

from conftest import SWEEP_EXPONENTS, sweep_kernels

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
UNIT = (0.0, 1.0)
IND = Window(0.0, 1.0)


def _label(k):
    return k.name + (f"({k.params['alpha']:g})" if "alpha" in k.params else "")


@pytest.fixture(scope="module")
def sweep():
    """The 12-point sweep: criterion reports and wall time."""
    t0 = time.perf_counter()
    rows = []
    for k in sweep_kernels():
        for p, q in SWEEP_EXPONENTS:
            rep = criterion("3.9", k, ExponentSet(p, q), u=IND, v=IND, window=UNIT)
            rows.append((k, p, q, rep))
    return rows, time.perf_counter() - t0


def _norm(k, exps, count, u=IND, v=IND):
    op = discretize(k, u, v, cell_grid(1e-6, 1.0, count))
    return norm_lower_bound(op, exps).value


def test_criterion_1_hardy_closed_form(verdict):
    exact = (1.0 / 20.0) ** 0.25
    t0 = time.perf_counter()
    rep = criterion("3.9", lift(constant()), ExponentSet(2.0, 4.0 / 3.0), u=IND, v=IND,
                    window=UNIT)
    elapsed = time.perf_counter() - t0
    rel = abs(rep.max_value - exact) / exact
    verdict(1, "Hardy closed form", rel <= 1e-6 and elapsed < 1.0,
            f"max B={rep.max_value:.12f}, rel err {rel:.1e}, {elapsed:.2f}s")


def test_criterion_2_form_equivalence(sweep, verdict):
    rows, elapsed = sweep
    worst = max(c.form_gap for *_, rep in rows for c in rep.components)
    finite = all(math.isfinite(c.form1) for *_, rep in rows for c in rep.components)
    verdict(2, "form equivalence over the 12-point sweep",
            finite and worst <= 1e-4 and elapsed < 60.0,
            f"worst gap {worst:.1e}, {elapsed:.1f}s")


def test_criterion_3_norm_criterion_ratio(sweep, verdict):
    rows, _ = sweep
    ratios, changes = {}, []
    for k, p, q, rep in rows:
        exps = ExponentSet(p, q)
        r200 = _norm(k, exps, 200) / rep.max_value
        r400 = _norm(k, exps, 400) / rep.max_value
        ratios.setdefault((p, q), []).append(r200)
        changes.append(abs(r400 - r200) / r200)
    flat = [r for rs in ratios.values() for r in rs]
    spread = max(max(rs) / min(rs) for rs in ratios.values())
    ok = (all(math.isfinite(r) and 1e-2 <= r <= 1e2 for r in flat)
          and spread <= 50 and max(changes) < 0.2)
    verdict(3, "norm/criterion ratio bounded and stable",
            ok, f"ratios {min(flat):.3f}..{max(flat):.3f}, spread {spread:.2f}, "
                f"200->400 change {max(changes):.1%}")


def test_criterion_4_minimal_h(verdict):
    g = default_triples(30)
    h_sqrt = estimate_min_h(builtin("power_diff", alpha=0.5), g)
    h_log = estimate_min_h(builtin("log_ratio"), g)
    h_sq = estimate_min_h(builtin("power_diff", alpha=2.0), g)
    ok = (abs(h_sqrt / math.sqrt(2) - 1) <= 1e-2 and abs(h_log - 1) <= 1e-10
          and abs(h_sq - 1) <= 1e-10)
    verdict(4, "minimal-h recovery", ok,
            f"sqrt kernel {h_sqrt:.6f}, log {h_log - 1:.1e}, square {h_sq - 1:.1e} above 1")


def test_criterion_5_homogeneity(sweep, verdict):
    rows, _ = sweep
    worst_v = worst_mu = worst_norm = 0.0
    for k, p, q, rep in rows:
        exps = ExponentSet(p, q)
        base = np.array(rep.values)
        scaled = criterion("3.9", k, exps, u=IND, v=IND.scaled(2.0), window=UNIT).values
        worst_v = max(worst_v, float(np.max(np.abs(np.array(scaled) - 2 * base)
                                            / np.maximum(2 * base, 1e-300))))
        mu = lebesgue_with_density(IND, q, window=UNIT)
        b1 = np.array(criterion("3.1", k, exps, v=IND, mu=mu, window=UNIT).values)
        b2 = np.array(criterion("3.1", k, exps, v=IND, mu=mu.scaled(2.0), window=UNIT).values)
        worst_mu = max(worst_mu, float(np.max(np.abs(b2 - 2 ** (1 / q) * b1)
                                              / np.maximum(2 ** (1 / q) * b1, 1e-300))))
        n0 = _norm(k, exps, 200)
        for u, v in ((IND.scaled(2.0), IND), (IND, IND.scaled(2.0))):
            worst_norm = max(worst_norm, abs(_norm(k, exps, 200, u, v) / (2 * n0) - 1))
    ok = worst_v <= 1e-12 and worst_mu <= 1e-12 and worst_norm <= 1e-10
    verdict(5, "homogeneity in v, mu and the norm weights", ok,
            f"v {worst_v:.1e}, mu {worst_mu:.1e}, norm {worst_norm:.1e}")


def _fixtures():
    rng = np.random.default_rng(2024)
    out = {
        "identity 2x2": np.eye(2),
        "rank one 3x3": np.outer([1.0, 2.0, 3.0], [3.0, 1.0, 2.0]),
        "rank one 4x4": np.outer([0.5, 1.0, 0.0, 2.0], [1.0, 1.0, 3.0, 0.2]),
    }
    for n in (2, 3, 4):
        out[f"triangular ones {n}x{n}"] = np.tril(np.ones((n, n)))
        out[f"upper triangular ones {n}x{n}"] = np.triu(np.ones((n, n)))
    for j in range(3):
        out[f"random 4x4 #{j}"] = rng.random((4, 4))
    return out


def test_criterion_6_oracle_agreement(verdict):
    exps = ExponentSet(2.0, 4.0 / 3.0)
    worst, detail = 0.0, ""
    for name, A in _fixtures().items():
        op = DiscreteOperator.plain(A)
        est = norm_lower_bound(op, exps, restarts=8)
        oracle = brute_oracle_norm(op, exps)
        rel = abs(est.value - oracle) / oracle
        if rel >= worst:
            worst, detail = rel, name
    ident = norm_lower_bound(DiscreteOperator.plain(np.eye(2)), exps).value
    ok = worst <= 1e-4 and abs(ident - 2 ** 0.25) <= 1e-4
    verdict(6, "power iteration vs brute-force oracle", ok,
            f"worst rel diff {worst:.1e} on {detail}; identity {ident:.8f}")


def test_criterion_7_partition(verdict):
    F = lambda x: np.asarray(x, dtype=float)
    x = np.linspace(1.0, 16.0, 300)
    part = level_partition(x, F(x), 1.0, F_callable=F)
    powers = np.allclose(part.breakpoints, 2.0 ** part.levels, rtol=1e-10)
    rep = verify_partition(F, part, 1.0, samples=1000)
    moved = part.breakpoints.copy()
    moved[2] *= 1.05
    corrupted = LevelPartition(moved, part.levels, part.base, part.alpha_F, part.end)
    rejected = not verify_partition(F, corrupted, 1.0, samples=1000).ok
    verdict(7, "level partition of F(x)=x", powers and rep.ok and rejected,
            f"breakpoints {np.round(part.breakpoints, 9).tolist()}, "
            f"{rep.samples} samples, corrupted rejected={rejected}")


def test_criterion_8_duality_and_composition(verdict):
    worst = 0.0
    for k in sweep_kernels():
        for p, q in SWEEP_EXPONENTS:
            exps = ExponentSet(p, q)
            mu = lebesgue_with_density(IND, q, window=UNIT)
            a = criterion("3.1", k, exps, v=IND, mu=mu, window=UNIT)
            b = criterion("3.9", k, exps, u=IND, v=IND, window=UNIT)
            for ca, cb in zip(a.components, b.components):
                allowed = ca.error + cb.error + 1e-15 * max(ca.value, 1.0)
                worst = max(worst, abs(ca.value - cb.value) / allowed)
    kc = compose(constant(), Constant(1.0), constant())
    x = np.geomspace(1.0, 50.0, 25)
    X, S = np.meshgrid(x, x, indexing="ij")
    low = X >= S
    comp_err = float(np.max(np.abs(kc(X[low], S[low]) - (X[low] - S[low]))
                            / np.maximum(X[low] - S[low], 1.0)))
    ok = worst <= 1.0 and comp_err <= 1e-8 and kc.order == 1
    verdict(8, "measure/weight duality and closure under composition", ok,
            f"max |diff|/error budget {worst:.2f}, composition err {comp_err:.1e}, "
            f"order {kc.order}")


def test_criterion_9_divergence(tmp_path, capsys, verdict):
    code = cli.main(["criterion", "--config", str(CONFIGS / "divergent.toml")])
    capsys.readouterr()
    cut = tmp_path / "cut.toml"
    cut.write_text((CONFIGS / "divergent.toml").read_text()
                   .replace("window = [0.0, 1.0]", "window = [1e-4, 1.0]"))
    cfg = RunConfig.from_path(cut)
    assert cfg.window == (1e-4, 1.0)
    code_cut = cli.main(["criterion", "--config", str(cut)])
    out = capsys.readouterr().out
    growth = '"growth": true' in out
    ok = code == cli.EXIT_DIVERGENT and code_cut == cli.EXIT_DIVERGENT and growth
    verdict(9, "divergence detection for v(s)=1/s", ok,
            f"exit {code} on (0,1], exit {code_cut} on (1e-4,1] with growth={growth}")
