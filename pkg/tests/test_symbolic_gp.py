import numpy as np
import pytest

from dediscover.errors import ConfigError, UndefinedFitnessError
from dediscover.symbolic import (ExpressionTree, GpConfig, eval_tree, evolve,
                                 fit_linear_coefficients, fitness_mse, fitness_pairwise_log,
                                 linear_refit, split_additive)
from dediscover.symbolic.tree import const, op, var

X1 = ("x",)


def tree(*nodes, names=X1):
    return ExpressionTree(tuple(nodes), names)


class TestMse:
    def test_examples(self):
        X = np.array([[0.0], [1.0], [2.0]])
        assert fitness_mse(tree(var(0)), X, [0.0, 1.0, 2.0]) == 0.0
        assert fitness_mse(tree(const(0.0)), X, [1.0, 1.0, 1.0]) == 1.0
        assert fitness_mse(tree(var(0)), X, [1.0, 2.0, 3.0]) == 1.0

    def test_non_finite_is_inf(self):
        assert fitness_mse(tree(var(0)), [[1.0]], [np.nan]) == np.inf


class TestPairwise:
    XY = ("x", "y")

    def test_perfect_invariant(self):
        # circle x^2 + y^2 with rotation dx/dt = -y, dy/dt = x
        th = np.linspace(0.1, 6.0, 40)
        X = np.column_stack([np.cos(th), np.sin(th)])
        derivs = np.column_stack([-X[:, 1], X[:, 0]])
        f = tree(op("+"), op("*"), var(0), var(0), op("*"), var(1), var(1), names=self.XY)
        score, skipped = fitness_pairwise_log(f, X, derivs, return_skipped=True)
        assert score == pytest.approx(0.0, abs=1e-12)
        assert skipped == 0

    def test_constant_error_gives_minus_one(self):
        # f = x: symbolic ratio is 0, numeric ratio is e - 1 everywhere
        X = np.random.default_rng(0).uniform(1, 2, (20, 2))
        derivs = np.column_stack([np.full(20, np.e - 1), np.ones(20)])
        score = fitness_pairwise_log(tree(var(0), names=self.XY), X, derivs)
        assert score == pytest.approx(-1.0, rel=1e-12)

    def test_skips_and_undefined(self):
        X = np.ones((5, 2))
        derivs = np.column_stack([np.ones(5), [0, 1, 1, 0, 1.0]])
        _, skipped = fitness_pairwise_log(tree(var(0), names=self.XY), X, derivs,
                                          return_skipped=True)
        assert skipped == 2
        with pytest.raises(UndefinedFitnessError):
            # f = y has df/dx = 0 at every point
            fitness_pairwise_log(tree(var(1), names=self.XY), X, derivs)


class TestLinearFit:
    def test_logistic_coefficients(self):
        u = np.linspace(0.05, 0.95, 60)
        target = 1.5 * u - 1.5 * u**2
        candidate = tree(op("+"), var(0), op("*"), var(0), var(0))
        fitted = linear_refit(candidate, u[:, None], target)
        terms = split_additive(candidate)
        coef = fit_linear_coefficients(terms, u[:, None], target)
        assert [t.infix() for t in terms] == ["x", "(x * x)"]
        np.testing.assert_allclose(coef, [1.5, -1.5], atol=1e-3)
        assert fitness_mse(fitted, u[:, None], target) < 1e-20

    def test_single_term_coefficient_one(self):
        x = np.linspace(-1, 1, 30)[:, None]
        coef = fit_linear_coefficients(tree(op("sin"), var(0)), x, np.sin(x[:, 0]))
        assert coef == pytest.approx([1.0])

    def test_duplicate_terms_minimum_norm(self):
        x = np.linspace(-1, 1, 30)[:, None]
        t = tree(var(0))
        coef = fit_linear_coefficients([t, t], x, 2 * x[:, 0])
        assert np.all(np.isfinite(coef))
        np.testing.assert_allclose(coef, [1.0, 1.0])

    def test_sparsity_drops_small_weights(self):
        x = np.linspace(-1, 1, 50)
        terms = [tree(var(0)), tree(op("*"), var(0), var(0))]
        target = 2 * x + 1e-4 * x**2
        coef = fit_linear_coefficients(terms, x[:, None], target, sparsity=1e-3)
        assert coef[1] == 0.0
        assert coef[0] == pytest.approx(np.linalg.lstsq(x[:, None], target, rcond=None)[0][0])

    def test_split_distributes_and_drops_scales(self):
        t = tree(op("*"), const(2.0), op("+"), var(0), op("*"), var(0), var(0))
        assert [s.infix() for s in split_additive(t)] == ["x", "(x * x)"]

    def test_refit_preserves_values_of_exact_model(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (25, 1))
        t = tree(op("-"), op("cos"), var(0), op("*"), const(0.5), var(0))
        y = eval_tree(t, x)
        np.testing.assert_allclose(eval_tree(linear_refit(t, x, y), x), y, atol=1e-12)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(function_set=("pow",)), dict(p_mutation=0.5),
                                    dict(population_size=5), dict(max_generations=-1),
                                    dict(fitness="mae"), dict(patience=0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            GpConfig(**kw)

    def test_round_trip(self):
        cfg = GpConfig(population_size=50, seed=3)
        assert GpConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(ConfigError):
            GpConfig.from_dict({"generations": 3})


def small_cfg(**kw):
    base = dict(population_size=60, max_generations=20, seed=0)
    base.update(kw)
    return GpConfig(**base)


class TestEvolve:
    x = np.linspace(-1.5, 1.5, 40)

    def test_zero_generations_returns_initial_best(self):
        cfg = small_cfg(max_generations=0, hybrid=False)
        res = evolve(self.x, self.x**2, cfg, ("x",))
        assert res.generations == 0 and len(res.trace) == 1
        assert res.best_loss == pytest.approx(fitness_mse(res.best, self.x[:, None], self.x**2))

    def test_deterministic(self):
        cfg = small_cfg()
        a = evolve(self.x, np.sin(self.x), cfg, ("x",))
        b = evolve(self.x, np.sin(self.x), cfg, ("x",))
        assert a.best == b.best and a.trace == b.trace

    def test_trace_is_monotone(self):
        res = evolve(self.x, self.x**3 - self.x, small_cfg(hybrid=False, seed=4), ("x",))
        assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))

    def test_identical_optimal_population_stops_after_patience(self):
        target = 2 * self.x
        best = tree(op("*"), const(2.0), var(0))
        cfg = small_cfg(max_generations=100, patience=4, hybrid=False, p_crossover=0.0,
                        p_mutation=0.0, p_reproduction=1.0, snip_every=0)
        res = evolve(self.x, target, cfg, ("x",), initial_population=[best] * cfg.population_size)
        assert res.generations == 4
        assert res.best == best and res.best_loss == 0.0

    def test_recovers_cubic(self):
        target = -0.1 * self.x**3
        res = evolve(self.x, target, small_cfg(population_size=100, function_set=("+", "-", "*")),
                     ("x",))
        assert res.best_loss < 1e-20
        np.testing.assert_allclose(eval_tree(res.best, self.x[:, None]), target, atol=1e-10)

    def test_pairwise_fitness_runs(self):
        th = np.linspace(0.1, 6.0, 60)
        X = np.column_stack([np.cos(th), np.sin(th)])
        derivs = np.column_stack([-X[:, 1], X[:, 0]])
        res = evolve(X, derivs, small_cfg(fitness="pairwise_log", function_set=("+", "*")),
                     ("x", "y"))
        assert res.best_fitness <= 0
        assert np.isfinite(res.best_loss)
