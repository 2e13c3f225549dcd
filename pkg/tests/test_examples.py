"""Small worked examples with closed-form answers, one per public operation."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from kernelbounds import cli
from kernelbounds.core import (Constant, ExponentSet, Grid, Power, Product, Window,
                               derive_exponents, eval_weight, make_grid)
from kernelbounds.criteria import Factor, criterion, VARIANTS
from kernelbounds.kernels import (builtin, check_companion_laws, compose, constant,
                                  estimate_min_h, eval_kernel, log_ratio, power_diff,
                                  verify_membership, with_decomposition)
from kernelbounds.measures import (atomic, from_monotone_decreasing, from_monotone_increasing,
                                   lebesgue_with_density)
from kernelbounds.opnorm import DiscreteOperator, discretize, norm_lower_bound, verify_witness
from kernelbounds.partition import accumulate_F
from kernelbounds.quadrature import (DivergenceError, QuadratureError, integrate_adaptive,
                                     integrate_semiinfinite, integrate_stieltjes)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class TestExponents:
    def test_two_four_thirds(self):
        e = derive_exponents(2.0, 4.0 / 3.0)
        assert (e.p_prime, e.e_tail, e.e_inner, e.e_inner_dual) == pytest.approx((2, 3, 1, 2))
        assert e.e_outer == pytest.approx(0.25)

    def test_two_three_halves(self):
        e = derive_exponents(2.0, 1.5)
        assert (e.p_prime, e.e_tail, e.e_inner, e.e_outer) == pytest.approx((2, 4, 2, 1 / 6))

    def test_wrong_regime(self):
        with pytest.raises(ValueError):
            derive_exponents(1.5, 2.0)


class TestWeightsAndGrids:
    def test_weights(self):
        assert eval_weight(Power(1.0, -0.5), 4.0) == pytest.approx(0.5)
        assert eval_weight(Window(0.0, 1.0), 2.0) == 0.0
        assert eval_weight(Product((Power(2.0, 1.0), Window(0.0, 1.0))), 0.5) == pytest.approx(1)

    def test_grids(self):
        np.testing.assert_allclose(make_grid(1, 8, 4, "geometric").points, [1, 2, 4, 8])
        np.testing.assert_allclose(make_grid(1, 3, 3, "uniform").points, [1, 2, 3])
        with pytest.raises(ValueError):
            make_grid(0.5, 0.5, 2, "uniform")


class TestKernels:
    def test_evaluation(self):
        assert eval_kernel(power_diff(1), 3.0, 1.0) == 2.0
        assert eval_kernel(log_ratio(), math.e, 1.0) == pytest.approx(1.0)
        assert eval_kernel(constant(), 7.0, 2.0) == 1.0

    def test_square_companions(self):
        k = power_diff(2)
        x, t = np.array([5.0]), np.array([2.0])
        assert k.companion(0)(x, t)[0] == pytest.approx(9.0)
        assert k.companion(1)(x, t)[0] == pytest.approx(6.0)
        assert k.companion(2)(x, t) == 1
        assert k.h == 1.0

    def test_sqrt_kernel_with_h_one_fails(self):
        bad = with_decomposition(power_diff(0.5), power_diff(0.5).companions,
                                 power_diff(0.5).lower, h=1.0)
        rep = verify_membership(bad)
        assert not rep.ok
        assert rep.worst_lower == pytest.approx(math.sqrt(2), rel=1e-2)

    def test_constant_order_zero_is_a_member(self):
        assert verify_membership(constant()).ok

    def test_cube_min_h(self):
        assert estimate_min_h(power_diff(3)) == pytest.approx(1.0, abs=1e-12)
        assert estimate_min_h(log_ratio()) == pytest.approx(1.0, abs=1e-12)

    def test_swapped_companion_fails_monotonicity(self):
        k = with_decomposition(log_ratio(), [lambda a, b: np.log(b / a)], log_ratio().lower)
        rep = check_companion_laws(k)
        assert not rep.ok and rep.monotonicity_failures

    def test_composition_examples(self):
        assert float(compose(constant(), Window(1.0, 2.0), constant())(3.0, 1e-300)) == \
            pytest.approx(1.0, rel=1e-10)
        k = compose(constant(), Constant(1.0), power_diff(1))
        assert k.order == 2
        assert float(k(4.0, 1.0)) == pytest.approx(4.5, rel=1e-10)


class TestMeasures:
    def test_atom_tail(self):
        mu = atomic([(1.0, 1.0)])
        assert (mu.tail(0.5), mu.tail(1.0), mu.tail(1.000001)) == (1.0, 1.0, 0.0)

    def test_density_tails(self):
        assert lebesgue_with_density(Constant(1.0), 1.0, window=(0.0, 2.0)).tail(0.5) == \
            pytest.approx(1.5)
        mu = lebesgue_with_density(Constant(1.0), 4.0 / 3.0, window=(0.0, 1.0))
        for x in (0.1, 0.5, 0.9):
            assert mu.tail(x) == pytest.approx(1 - x, rel=1e-10)
        assert lebesgue_with_density(Window(1.0, 2.0), 3.0).tail(1.5) == pytest.approx(0.5)

    def test_decreasing_generator(self):
        psi = lambda t: np.maximum(0.0, 1.0 - np.asarray(t))
        mu = from_monotone_decreasing(psi, (0.0, 2.0))
        assert mu.tail(0.25) == pytest.approx(0.75, rel=1e-8)
        assert mu.tail(0.5) == pytest.approx(0.5, rel=1e-8)
        step = from_monotone_decreasing(lambda t: (np.asarray(t) <= 2.0).astype(float),
                                        (0.0, 4.0))
        assert any(abs(x - 2.0) < 1e-9 for x, _ in step.atoms)
        exp = from_monotone_decreasing(lambda t: np.exp(-np.asarray(t)), (0.0, 10.0))
        assert exp.mass(0.0, 10.0) == pytest.approx(1 - math.exp(-10), rel=1e-8)

    def test_increasing_generator(self):
        assert from_monotone_increasing(lambda t: t, (0.0, 1.0)).mass(0.0, 1.0) == \
            pytest.approx(1.0, rel=1e-10)
        step = from_monotone_increasing(lambda t: (np.asarray(t) >= 0.5).astype(float),
                                        (0.0, 1.0))
        assert len(step.atoms) == 1
        assert step.atoms[0] == pytest.approx((0.5, 1.0))
        assert from_monotone_increasing(lambda t: np.asarray(t) ** 2, (0.0, 1.0)).mass(0, 1) == \
            pytest.approx(1.0, rel=1e-10)

    def test_integrals(self):
        two_atoms = atomic([(1.0, 2.0), (3.0, 5.0)])
        assert two_atoms.integrate(lambda x: np.ones_like(x), 1.0, 3.0, lo_closed=True).value == 7
        assert lebesgue_with_density(Power(1.0, 1.0), 2.0, window=(0.0, 1.0)).mass(0, 1) == \
            pytest.approx(1 / 3, rel=1e-10)
        with pytest.raises(QuadratureError):
            lebesgue_with_density(Constant(1.0), 1.0, window=(0.0, 1.0)).integrate(
                lambda x: 1.0 / x, 0.0, 1.0)


class TestQuadrature:
    def test_finite_ranges(self):
        assert integrate_adaptive(lambda x: x ** -0.5, 0, 1, tol=1e-12).value == \
            pytest.approx(2.0, abs=1e-10)
        assert integrate_adaptive(lambda x: (1 - x) ** 3 * x, 0, 1).value == \
            pytest.approx(1 / 20, abs=1e-12)
        with pytest.raises(DivergenceError):
            integrate_adaptive(lambda x: 1.0 / x, 0, 1)

    def test_infinite_ranges(self):
        assert integrate_semiinfinite(lambda x: x ** -2.0, 1.0, tol=1e-12).value == \
            pytest.approx(1.0, abs=1e-10)
        with pytest.raises(DivergenceError):
            integrate_semiinfinite(lambda x: np.ones_like(x), 0.0)

    def test_stieltjes(self):
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        assert integrate_stieltjes(one, lambda t: np.asarray(t) ** 2, (0.0, 1.0)).value == \
            pytest.approx(1.0, rel=1e-8)
        assert integrate_stieltjes(lambda t: t, atomic([(0.5, 3.0)]), (0.0, 1.0)).value == \
            pytest.approx(1.5)
        dec = integrate_stieltjes(one, lambda t: 1.0 - np.asarray(t), (0.0, 1.0),
                                  increasing=False)
        assert dec.value == pytest.approx(1.0, rel=1e-8)


class TestCriteria:
    def test_inner_factor_closed_form(self):
        q = 4.0 / 3.0
        mu = lebesgue_with_density(Constant(1.0), q, window=(0.0, 1.0))
        f = Factor("tail", power_diff(1), q, mu)
        z = np.array([0.1, 0.5, 0.8])
        np.testing.assert_allclose(f(z), (1 - z) ** (q + 1) / (q + 1), rtol=1e-9)

    @pytest.mark.parametrize("name", ["3.1", "3.9", "3.12", "2.2"])
    def test_zero_weight_gives_zero(self, name):
        var = VARIANTS[name]
        exps = ExponentSet(2.0, 1.5)
        k = builtin("power_diff", sign=var.sign, alpha=1.0)
        w = Window(0.0, 1.0)
        mu = lebesgue_with_density(w, exps.q, window=(0.0, 1.0))
        rep = criterion(var, k, exps, u=w, v=Constant(0.0), mu=mu, window=(0.0, 1.0))
        assert all(v == 0.0 for v in rep.values)

    def test_log_ratio_forms_agree(self):
        w = Window(0.0, 1.0)
        rep = criterion("3.9", log_ratio(), ExponentSet(2.0, 4.0 / 3.0), u=w, v=w,
                        window=(1e-4, 1e4))
        assert rep.cross_check_delta <= 1e-4


class TestOperators:
    def test_two_point_hardy_matrix(self):
        g = Grid.from_edges([0.5, 1.5, 2.5], "uniform")
        op = discretize(builtin("constant"), Constant(1.0), Constant(1.0), g)
        np.testing.assert_allclose(op.matrix, [[1, 0], [1, 1]])
        minus = discretize(builtin("constant"), Constant(1.0), Constant(1.0), g, "minus")
        np.testing.assert_allclose(minus.matrix, [[1, 1], [0, 1]])
        lin = discretize(power_diff(1), Constant(1.0), Constant(1.0), g)
        assert lin.matrix[1, 0] == pytest.approx(1.0)

    def test_norm_examples(self):
        exps = ExponentSet(2.0, 4.0 / 3.0)
        assert norm_lower_bound(DiscreteOperator.plain([[1.0]]), exps).value == \
            pytest.approx(1.0)
        op = DiscreteOperator.plain([[1.0, 0.0], [1.0, 1.0]])
        e0 = np.array([1.0, 0.0])
        assert verify_witness(op, e0, exps) == pytest.approx(2 ** (1 / exps.q))
        assert verify_witness(op, 2 * e0, exps) == pytest.approx(verify_witness(op, e0, exps))

    def test_zero_f_gives_zero_F(self):
        F = accumulate_F(constant(), Constant(1.0), Constant(0.0), make_grid(1, 4, 5))
        assert np.all(F == 0.0)


class TestCommands:
    def test_hardy_norm_is_close_to_the_criterion(self, capsys):
        assert cli.main(["norm", "--config", str(CONFIGS / "hardy.toml")]) == 0
        value = json.loads(capsys.readouterr().out)["norm"]["value"]
        b = (1 / 20) ** 0.25
        assert 0.5 * b <= value <= 1.5 * b

    def test_zero_weight_norm(self, tmp_path, capsys):
        text = (CONFIGS / "hardy.toml").read_text().replace(
            '[v]\nkind = "window"\na = 0.0\nb = 1.0', '[v]\nkind = "constant"\nvalue = 0.0')
        p = tmp_path / "zero.toml"
        p.write_text(text)
        assert cli.main(["norm", "--config", str(p)]) == 0
        assert json.loads(capsys.readouterr().out)["norm"]["value"] == 0.0

    def test_degenerate_and_divergent_sweeps(self, tmp_path):
        text = (CONFIGS / "divergent.toml").read_text()
        p = tmp_path / "one.toml"
        p.write_text(text)
        rows, code = cli.cmd_sweep(cli.RunConfig.from_path(p))
        assert code == 0 and len(rows) == 1
        assert rows[0]["verdict"] == "unbounded by criterion"
        assert rows[0].get("ratio") is None

    def test_small_alpha_sweep(self, tmp_path):
        p = tmp_path / "alpha.toml"
        p.write_text((CONFIGS / "hardy.toml").read_text().replace(
            '[kernel]\nname = "constant"\nlift = true', '[kernel]\nname = "power_diff"\nalpha = 1.0')
            + '\n[sweep]\nalpha = [0.5, 1.0]\nexponents = [[2.0, "4/3"], [2.0, "3/2"]]\n')
        cfg = cli.RunConfig.from_path(p)
        cfg.raw["grid"] = {"count": 60, "xmin": 1e-6}
        rows, _ = cli.cmd_sweep(cfg)
        assert len(rows) == 4
        assert all(math.isfinite(r["ratio"]) for r in rows)
