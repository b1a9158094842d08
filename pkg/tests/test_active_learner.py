import itertools

import numpy as np
import pytest

from hvac_surrogate import gp_core
from hvac_surrogate import thermal_sim as ts
from hvac_surrogate.active_learner import (
    InputGrid, LearnerConfig, SurrogateTable, acquire_next, build_surrogate, compare_init_strategies,
    corner_design, random_design, spread_design,
)
from hvac_surrogate.errors import InputError, ParseError, SimulationError

from helpers import SingleRoomSimulator, resistor_grid_2d, single_room_grid


def smooth(p):
    return float(np.sin(p[0]) + 0.5 * p[-1] ** 2)


class TestInputGrid:
    def test_lexicographic_points(self):
        g = InputGrid(([0.0, 1.0], [5.0, 6.0, 7.0]))
        assert [tuple(p) for p in g.points] == list(itertools.product([0.0, 1.0], [5.0, 6.0, 7.0]))
        assert g.size == 6 and g.shape == (2, 3) and g.dim == 2

    def test_index_roundtrip(self):
        g = InputGrid((np.arange(4.0), np.arange(3.0), [0.5, 1.5]))
        np.testing.assert_array_equal(g.index_of(g.points), np.arange(g.size))

    def test_off_grid(self):
        g = InputGrid(([0.0, 1.0], [0.0, 1.0]))
        with pytest.raises(InputError):
            g.index_of([[0.5, 0.0]])

    @pytest.mark.parametrize("values", [([1.0, 1.0], [0.0, 1.0]), ([1.0, 0.0], [0.0, 1.0]), ([0.0, 1.0],),
                                        ([0.0, 1.0, 2.0],)])
    def test_invalid(self, values):
        with pytest.raises(InputError):
            InputGrid(values)


class TestDesigns:
    def test_single_room_corners(self):
        pts = corner_design(single_room_grid())
        assert [tuple(p) for p in pts] == [(0.0, 0.0), (0.0, 15.0), (3.0, 0.0), (3.0, 15.0)]

    def test_seven_dims(self):
        g = InputGrid(tuple([-1.0, 0.0, 1.0, 2.0] for _ in range(6)) + (np.arange(5.0, 16.0),))
        pts = corner_design(g)
        assert pts.shape == (128, 7)
        assert len({tuple(p) for p in pts}) == 128

    def test_one_dim(self):
        pts = corner_design(InputGrid((np.linspace(10, 10000, 1000),)))
        assert pts.ravel().tolist() == [10.0, 10000.0]

    def test_random_full_and_deterministic(self):
        g = InputGrid(([0.0, 1.0], [0.0, 1.0, 2.0]))
        full = random_design(g, g.size, seed=3)
        assert sorted(map(tuple, full)) == sorted(map(tuple, g.points))
        np.testing.assert_array_equal(random_design(g, 4, 11), random_design(g, 4, 11))

    def test_random_ten_on_50x50(self):
        pts = random_design(resistor_grid_2d(), 10, seed=0)
        assert len({tuple(p) for p in pts}) == 10

    def test_random_too_many(self):
        with pytest.raises(InputError):
            random_design(InputGrid(([0.0, 1.0], [0.0, 1.0])), 5, 0)

    def test_spread_includes_ends(self):
        g = InputGrid((np.linspace(10, 10000, 1000),))
        pts = spread_design(g, 4).ravel()
        assert pts[0] == 10.0 and pts[-1] == 10000.0 and len(pts) == 4


class TestAcquireNext:
    def _model(self, grid, pts):
        y = [smooth(p) for p in pts]
        return gp_core.fit(pts, y, 1.0, x_stats=gp_core.Standardizer.fit(grid.points))

    def test_single_unsampled(self):
        g = InputGrid((np.arange(5.0),))
        sampled = g.points[[0, 1, 2, 4]]
        assert acquire_next(self._model(g, sampled), g, sampled)[0] == 3.0

    def test_left_half_goes_right(self):
        g = InputGrid((np.linspace(0, 10, 41),))
        left = g.points[:20]
        assert acquire_next(self._model(g, left), g, left)[0] > 5.0

    def test_center_after_corners(self):
        g = single_room_grid()
        corners = corner_design(g)
        assert tuple(acquire_next(self._model(g, corners), g, corners)) == (1.5, 7.5)

    def test_exhausted(self):
        g = InputGrid(([0.0, 1.0], [0.0, 1.0]))
        assert acquire_next(self._model(g, g.points), g, g.points) is None


class TestLearnerConfig:
    @pytest.mark.parametrize("kwargs", [
        {"std_threshold": 0.0}, {"init_strategy": "sobol"}, {"init_strategy": "random"},
        {"max_iterations": -1}, {"lengthscale": -1.0}, {"lengthscale": "auto"}])
    def test_invalid(self, kwargs):
        with pytest.raises(InputError):
            LearnerConfig(**kwargs)


class TestBuildSurrogate:
    grid = InputGrid((np.linspace(0, 3, 16), np.linspace(-1, 1, 9)))

    def test_loose_threshold_no_iterations(self):
        t = build_surrogate(self.grid, LearnerConfig(std_threshold=1.0), smooth)
        assert t.iteration_count == 0 and t.simulation_count == 4 and t.converged

    def test_accounting_and_no_resampling(self):
        calls = []

        def sim(p):
            calls.append(tuple(p))
            return smooth(p)

        t = build_surrogate(self.grid, LearnerConfig(std_threshold=0.05), sim)
        assert len(calls) == len(set(calls)) == t.simulation_count
        assert t.simulation_count == 4 + t.iteration_count
        assert t.final_max_std <= 0.05 and t.converged
        assert len(t.predicted) == self.grid.size
        assert len(t.std_history) == t.iteration_count + 1

    def test_incremental_matches_refit(self):
        t = build_surrogate(self.grid, LearnerConfig(std_threshold=0.02), smooth)
        ref = gp_core.fit(t.train_inputs, t.train_outputs, 1.0, x_stats=gp_core.Standardizer.fit(self.grid.points))
        pred = ref.predict(self.grid.points)
        np.testing.assert_allclose(t.predicted, pred.mean, rtol=1e-7, atol=1e-9)
        assert t.final_max_std == pytest.approx(pred.std.max(), abs=1e-9)

    def test_iteration_cap(self):
        t = build_surrogate(self.grid, LearnerConfig(std_threshold=1e-6, max_iterations=3), smooth)
        assert t.iteration_count == 3 and not t.converged
        assert t.final_max_std > 1e-6

    def test_grid_exhaustion_terminates(self):
        g = InputGrid((np.linspace(0, 1, 5), np.linspace(0, 1, 4)))
        t = build_surrogate(g, LearnerConfig(std_threshold=1e-12, lengthscale=0.3), smooth)
        assert t.simulation_count <= g.size
        assert t.final_max_std < 1e-3

    def test_simulator_failure_partial(self):
        state = {"n": 0}

        def flaky(p):
            state["n"] += 1
            if state["n"] > 6:
                raise RuntimeError("solver crashed")
            return smooth(p)

        with pytest.raises(SimulationError) as info:
            build_surrogate(self.grid, LearnerConfig(std_threshold=0.01), flaky)
        assert len(info.value.partial["outputs"]) == 6

    def test_nan_output_is_failure(self):
        with pytest.raises(SimulationError):
            build_surrogate(self.grid, LearnerConfig(), lambda p: float("nan"))

    def test_threshold_monotone(self):
        counts = [build_surrogate(self.grid, LearnerConfig(std_threshold=t), smooth).simulation_count
                  for t in (0.005, 0.01, 0.02, 0.05, 0.2)]
        assert counts == sorted(counts, reverse=True)

    def test_ml_policy(self):
        t = build_surrogate(self.grid, LearnerConfig(std_threshold=0.05, lengthscale="ml"), smooth)
        assert t.converged and t.lengthscale in gp_core.ML_LENGTHSCALES

    def test_random_init(self):
        cfg = LearnerConfig(std_threshold=0.05, init_strategy="random", init_size=6, seed=2)
        a = build_surrogate(self.grid, cfg, smooth)
        b = build_surrogate(self.grid, cfg, smooth)
        np.testing.assert_array_equal(a.train_inputs, b.train_inputs)
        assert a.simulation_count == 6 + a.iteration_count

    def test_batch_initial_design(self):
        seen = []
        t = build_surrogate(self.grid, LearnerConfig(std_threshold=0.05), smooth,
                            simulate_many=lambda pts: seen.append(len(pts)) or [smooth(p) for p in pts])
        assert seen == [4]
        assert t.train_outputs[0] == smooth(t.train_inputs[0])


class TestResistorPoc:
    def test_one_dimensional(self):
        params = ts.ResistorParams()
        grid = InputGrid((np.linspace(10, 10000, 1000),))
        cfg = LearnerConfig(init_strategy="spread", init_size=4, lengthscale=0.7)
        t = build_surrogate(grid, cfg, lambda p: ts.resistor_equilibrium(params, p[0], 293.15).current)
        truth = np.array([ts.resistor_equilibrium(params, v, 293.15).current for v in grid.values[0]])
        assert t.converged and t.simulation_count < 100
        assert np.max(np.abs(t.predicted - truth) / np.abs(truth)) <= 0.02


class TestCompareInit:
    def test_corner_arm_deterministic(self):
        g = InputGrid((np.linspace(0, 3, 7), np.linspace(0, 15, 16)))
        a = compare_init_strategies(g, LearnerConfig(std_threshold=0.05), smooth, [0, 1])
        b = compare_init_strategies(g, LearnerConfig(std_threshold=0.05), smooth, [0, 1])
        assert a.corner_iterations == b.corner_iterations
        assert a.random_iterations == b.random_iterations
        assert len(a.random) == 2

    def test_needs_seed(self):
        with pytest.raises(InputError):
            compare_init_strategies(self_grid(), LearnerConfig(), smooth, [])


def self_grid():
    return InputGrid((np.linspace(0, 1, 3), np.linspace(0, 1, 3)))


class TestTableFile:
    def test_roundtrip_lossless(self, tmp_path):
        g = InputGrid((np.linspace(0, 1, 7), np.linspace(-2, 2, 5)), ("a", "b"))
        t = build_surrogate(g, LearnerConfig(std_threshold=0.03), smooth)
        path = tmp_path / "t.table"
        t.save(path)
        u = SurrogateTable.load(path)
        np.testing.assert_array_equal(u.predicted, t.predicted)
        np.testing.assert_array_equal(u.train_inputs, t.train_inputs)
        np.testing.assert_array_equal(u.train_outputs, t.train_outputs)
        assert (u.iteration_count, u.simulation_count, u.converged, u.final_max_std, u.config) == \
            (t.iteration_count, t.simulation_count, t.converged, t.final_max_std, t.config)
        assert u.grid.names == ("a", "b")
        lines = path.read_text().splitlines()
        assert lines[2] == "grid_index,a,b,predicted_output"
        assert len(lines) == 3 + g.size

    def test_bad_version(self, tmp_path):
        path = tmp_path / "t.table"
        path.write_text("# hvac-surrogate-table v9\n# {}\nx\n")
        with pytest.raises(ParseError):
            SurrogateTable.load(path)

    def test_not_a_table(self, tmp_path):
        path = tmp_path / "t.table"
        path.write_text("hello\n")
        with pytest.raises(ParseError):
            SurrogateTable.load(path)


def test_single_room_simulator_shape():
    sim = SingleRoomSimulator()
    # warm outside, cold setpoint: no heating at all
    assert sim(np.array([0.0, 15.0])) == 0.0
    assert sim(np.array([3.0, 0.0])) > 0.0
