import csv
import math

import numpy as np
import pytest

from maxqtc.experiments import (ExperimentSpec, ResultRow, cp_inner, cp_norm, derive_seed,
                                gen_synthetic, generalization_error, heldout_error, run_cell,
                                run_experiment, sample_complexity_report, sample_observations,
                                summarize, verify_error_bound)
from maxqtc.tensor_core import FactorSet, evaluate, evaluate_at

FAST_SOLVER = {"outer_iters": 15, "inner_iters": 20}


def dense_rms(f):
    return float(np.sqrt(np.mean(evaluate(f).values ** 2)))


class TestSynthetic:
    @pytest.mark.parametrize("dims,r", [((6, 6, 6), 3), ((4, 7, 5, 3), 2), ((10, 10), 1)])
    def test_unit_rms(self, dims, r):
        assert 0.999 <= dense_rms(gen_synthetic(dims, r=r, seed=4)) <= 1.001
        assert dense_rms(gen_synthetic(dims, r=r, seed=4)) == pytest.approx(1.0, rel=1e-12)

    def test_rank_one_matrix(self):
        T = evaluate(gen_synthetic(2, t=2, r=1, seed=0)).values
        assert np.linalg.matrix_rank(T) == 1

    def test_deterministic(self):
        a, b = gen_synthetic(5, t=3, seed=9), gen_synthetic(5, t=3, seed=9)
        for U, V in zip(a, b):
            np.testing.assert_array_equal(U, V)

    def test_integer_dims_need_t(self):
        with pytest.raises(ValueError):
            gen_synthetic(5)


class TestObservations:
    def test_noiseless_exact(self):
        f = gen_synthetic(5, t=3, seed=1)
        edges = np.array([[0, 1, 2], [4, 4, 4]])
        obs = sample_observations(f, edges)
        np.testing.assert_array_equal(obs.values, evaluate_at(f, edges))
        np.testing.assert_allclose(obs.values, evaluate(f).values[tuple(edges.T)], rtol=1e-13)

    def test_noise_budget(self):
        f = gen_synthetic(6, t=3, seed=1)
        edges = np.argwhere(np.ones((6, 6, 6), bool))
        for seed in range(20):
            obs = sample_observations(f, edges, noise_level=0.05, seed=seed)
            noise = obs.values - evaluate(f).values[tuple(edges.T)]
            assert math.sqrt(np.mean(noise**2)) <= 0.05 + 1e-12

    def test_dense_truth(self):
        T = np.arange(24.0).reshape(2, 3, 4)
        obs = sample_observations(T, np.array([[1, 2, 3]]))
        assert obs.values[0] == 23.0


class TestErrors:
    def test_cp_inner_matches_dense(self, rng):
        f = FactorSet(tuple(rng.standard_normal((n, 3)) for n in (4, 5, 3)))
        g = FactorSet(tuple(rng.standard_normal((n, 2)) for n in (4, 5, 3)))
        assert cp_inner(f, g) == pytest.approx(np.sum(evaluate(f).values * evaluate(g).values))
        assert cp_norm(f) == pytest.approx(np.linalg.norm(evaluate(f).values))

    def test_generalization_error_dense(self, rng):
        f = gen_synthetic((4, 5, 3), r=2, seed=1)
        g = FactorSet(tuple(U + 0.1 * rng.standard_normal(U.shape) for U in f))
        X, T = evaluate(g).values, evaluate(f).values
        assert generalization_error(g, f) == pytest.approx(
            np.linalg.norm(X - T) / np.linalg.norm(T), rel=1e-10)
        assert generalization_error(f, f) == pytest.approx(0.0, abs=1e-7)

    def test_heldout_estimate(self, rng):
        f = gen_synthetic((30, 30, 30), r=2, seed=1)
        g = FactorSet(tuple(U + 0.2 * rng.standard_normal(U.shape) for U in f))
        est, se = heldout_error(g, f, samples=200000, seed=3)
        assert abs(est - generalization_error(g, f)) < 5 * se + 1e-3


class TestBoundCheck:
    def test_exact_recovery(self):
        row = ResultRow(n="10", t=3, d="3", r_fit=4, seed=0, mse=0.0, thm_rhs=0.1)
        assert verify_error_bound(row)

    def test_violation_and_noise_slack(self):
        row = ResultRow(n="10", t=3, d="3", r_fit=4, seed=0, mse=0.2, thm_rhs=0.1)
        assert not verify_error_bound(row)
        row.noise_level, row.delta_rms = 0.3, 0.3
        assert verify_error_bound(row)

    def test_failed_row(self):
        assert not verify_error_bound(ResultRow(n="1", t=2, d="1", r_fit=1, seed=0, error="x"))


class TestGrid:
    def test_cells_order(self):
        spec = ExperimentSpec(d=[3, 5], r_fit=[2, 4], seeds=[0, 1])
        cells = list(spec.cells())
        assert len(cells) == 8
        assert [c[1:] for c in cells[:3]] == [(3, 2, 0), (3, 2, 1), (3, 4, 0)]

    def test_spec_json(self):
        spec = ExperimentSpec.from_json('{"n": 20, "d": 5, "solver": {"outer_iters": 3}}')
        assert spec.d == [5] and spec.solver == {"outer_iters": 3}
        with pytest.raises(ValueError):
            ExperimentSpec.from_json('{"m": 20}')
        with pytest.raises(ValueError):
            ExperimentSpec(solver={"bogus": 1})

    def test_seed_derivation(self):
        assert derive_seed(0, "graph", 40, 11) == derive_seed(0, "graph", 40, 11)
        assert derive_seed(0, "graph", 40, 11) != derive_seed(0, "truth", 40, 11)

    def test_run_cell_regular(self):
        spec = ExperimentSpec(n=12, t=3, d=[5], r_fit=[4], solver=FAST_SOLVER)
        row = run_cell(spec, 5, 4, 0)
        assert row.error == ""
        assert row.num_edges == 12 * 25
        assert row.gen_error >= 0 and row.iters > 0
        assert verify_error_bound(row)

    def test_run_cell_chain(self):
        spec = ExperimentSpec(t=3, r_fit=[3], solver=FAST_SOLVER,
                              chain={"dims": [12, 8, 12], "degrees": [[4, 6], [6, 4]]})
        row = run_cell(spec, None, 3, 0)
        assert row.error == ""
        assert row.num_edges == 12 * 4 * 6
        assert not row.regular and verify_error_bound(row)

    def test_failure_recorded(self):
        spec = ExperimentSpec(n=7, t=3, d=[3], r_fit=[2], solver=FAST_SOLVER)
        row = run_cell(spec, 3, 2, 0)
        assert "ValueError" in row.error

    def test_easy_cell(self):
        # a chain of complete bipartite links observes every entry
        spec = ExperimentSpec(t=3, r_truth=1, r_fit=[2], delta_coeff=0.0,
                              chain={"dims": [4, 4, 4], "degrees": [[4, 4], [4, 4]]},
                              solver={"kappa": 1e5, "frob_reg": 0.0, "outer_iters": 300,
                                      "outer_tol": 1e-13, "inner_tol": 1e-12})
        row = run_cell(spec, None, 2, 0)
        assert row.num_edges == 64
        assert row.gen_error < 1e-3

    def test_deterministic_output(self, tmp_path):
        outs = []
        for k in range(2):
            spec = ExperimentSpec(n=10, t=3, d=[3], r_fit=[2], seeds=[0, 1], solver=FAST_SOLVER,
                                  output=str(tmp_path / f"run{k}.csv"))
            run_experiment(spec)
            with open(spec.output) as fh:
                rows = list(csv.DictReader(fh))
            for r in rows:
                r.pop("seconds")
            outs.append(rows)
        assert outs[0] == outs[1]
        assert (tmp_path / "run0.csv.summary.csv").exists()

    def test_summarize(self):
        rows = [ResultRow(n="1", t=2, d="3", r_fit=2, seed=s, gen_error=e)
                for s, e in enumerate([0.1, 0.3])]
        rows.append(ResultRow(n="1", t=2, d="3", r_fit=2, seed=9, error="boom"))
        (s,) = summarize(rows)
        assert s["runs"] == 2 and s["failed"] == 1
        assert s["mean_gen_error"] == pytest.approx(0.2)
        assert s["se_gen_error"] == pytest.approx(0.1)


class TestSampleComplexity:
    def test_matrix_case(self):
        rep = sample_complexity_report(2, 4, 0.5)
        assert rep["factor"] == pytest.approx(16 / 0.25)
        assert rep["r_exponent"] == 2 and rep["eps_exponent"] == -2

    def test_exponents(self):
        assert sample_complexity_report(3, 2, 0.1)["r_exponent"] == 20
        assert sample_complexity_report(3, 1, 0.1)["factor"] == pytest.approx(0.1 ** -4)
