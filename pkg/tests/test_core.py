import numpy as np
import pytest

from cbai import (AlgorithmView, Allocation, CbaiInstance, InstanceError, constraint_margins,
                  min_margin, superlevel_arms, true_optimum, validate_instance)
from cbai.instances import gen_irrelevant_dimensions, gen_line_1d, gen_unit_sphere

from conftest import random_instance


class TestValidateInstance:
    def test_irrelevant_dimensions_accepted(self, irr3):
        inst = validate_instance(irr3.to_dict())
        assert inst.n_arms == 4
        assert inst.dim == 3
        assert inst == irr3

    def test_no_feasible_arm(self):
        with pytest.raises(InstanceError, match="no feasible arm"):
            validate_instance({"arms": [[1.0]], "reward": [1.0], "constraint": [2.0], "threshold": 1.0})

    def test_mixed_dimensions(self):
        with pytest.raises(InstanceError, match="dimension mismatch"):
            validate_instance({"arms": [[1.0], [1.0, 0.0]], "reward": [1.0], "constraint": [0.0],
                               "threshold": 1.0})

    def test_empty_arm_set(self):
        with pytest.raises(InstanceError, match="empty"):
            CbaiInstance(np.zeros((0, 2)), [1, 0], [0, 1], 0.0)

    @pytest.mark.parametrize("field", ["arms", "reward", "constraint"])
    def test_non_finite(self, field):
        raw = {"arms": [[1.0, 0.0], [0.0, 1.0]], "reward": [1.0, 0.0], "constraint": [0.0, 1.0],
               "threshold": 0.5}
        if field == "arms":
            raw["arms"][0][0] = float("nan")
        else:
            raw[field][0] = float("inf")
        with pytest.raises(InstanceError):
            validate_instance(raw)

    def test_negative_sigma(self):
        with pytest.raises(InstanceError):
            CbaiInstance([[1.0]], [1.0], [0.0], 1.0, noise_sigma=-0.1)

    def test_missing_key(self):
        with pytest.raises(InstanceError, match="constraint"):
            validate_instance({"arms": [[1.0]], "reward": [1.0], "threshold": 1.0})

    def test_declared_dimension_checked(self):
        raw = gen_line_1d().to_dict()
        raw["dimension"] = 2
        with pytest.raises(InstanceError):
            validate_instance(raw)

    def test_arrays_are_read_only(self, irr3):
        with pytest.raises(ValueError):
            irr3.arms[0, 0] = 5.0


class TestTrueOptimum:
    def test_irrelevant_dimensions(self, irr3):
        opt = true_optimum(irr3)
        np.testing.assert_allclose(irr3.arms[opt], [0, 0, 0.9])
        assert opt == 2

    def test_line(self, line):
        assert line.arms[true_optimum(line), 0] == pytest.approx(0.2)

    def test_single_feasible_arm(self):
        inst = CbaiInstance([[1.0], [2.0], [3.0]], [1.0], [1.0], 1.5)
        assert true_optimum(inst) == 0

    def test_ties_lowest_index(self):
        inst = CbaiInstance([[1.0, 0.0], [1.0, 1.0], [1.0, -1.0]], [1.0, 0.0], [0.0, 1.0], 5.0)
        assert true_optimum(inst) == 0

    def test_exhaustive_property(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            inst = random_instance(rng)
            opt = true_optimum(inst)
            vals = inst.constraint_values()
            rew = inst.rewards()
            assert vals[opt] <= inst.threshold
            assert not np.any((vals <= inst.threshold) & (rew > rew[opt]))


class TestSuperlevel:
    def test_irrelevant_dimensions(self, irr3):
        assert set(superlevel_arms(irr3, 2).tolist()) == {2, 3}

    def test_global_maximizer(self, irr3):
        assert superlevel_arms(irr3, 3).tolist() == [3]

    def test_all_equal_rewards(self):
        inst = CbaiInstance(np.eye(3), [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 0.5)
        assert superlevel_arms(inst, 1).tolist() == [0, 1, 2]

    def test_out_of_range(self, irr3):
        with pytest.raises(IndexError):
            superlevel_arms(irr3, 4)

    def test_monotone_in_pivot(self):
        inst = gen_unit_sphere(5, 12, 3)
        rew = inst.rewards()
        order = np.argsort(rew)
        prev = None
        for p in order[::-1]:
            cur = set(superlevel_arms(inst, p).tolist())
            assert p in cur
            if prev is not None:
                assert prev <= cur
            prev = cur


class TestViewAndAllocation:
    def test_view_round_trip(self):
        inst = gen_unit_sphere(4, 7, 0)
        view = inst.view()
        assert isinstance(view, AlgorithmView)
        assert not hasattr(view, "constraint")
        np.testing.assert_array_equal(view.arms, inst.arms)
        np.testing.assert_array_equal(view.reward, inst.reward)
        assert view.threshold == inst.threshold
        assert view.noise_sigma == inst.noise_sigma

    def test_binary_effective_sigma(self):
        inst = CbaiInstance([[0.5]], [1.0], [1.0], 0.6, feedback="binary")
        assert inst.view().effective_sigma == 1.0

    def test_allocation_design_matrix(self):
        rng = np.random.default_rng(0)
        arms = rng.standard_normal((5, 3))
        w = rng.dirichlet(np.ones(5))
        alloc = Allocation.from_weights(w, arms)
        expect = sum(w[i] * np.outer(arms[i], arms[i]) for i in range(5))
        np.testing.assert_allclose(alloc.design_matrix, expect, atol=1e-9)
        assert alloc.support.tolist() == [0, 1, 2, 3, 4]

    def test_allocation_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            Allocation.from_weights([0.5, 0.6], np.eye(2))
        with pytest.raises(ValueError):
            Allocation.from_weights([1.5, -0.5], np.eye(2))


class TestMargins:
    def test_irrelevant_dimensions_min_margin(self):
        for d, eps in [(2, 0.5), (5, 0.05), (10, 0.2)]:
            assert min_margin(gen_irrelevant_dimensions(d, eps)) == pytest.approx(eps)

    def test_margins_line(self, line):
        np.testing.assert_allclose(constraint_margins(line), np.abs(np.arange(1, 11) / 10 - 0.25))
