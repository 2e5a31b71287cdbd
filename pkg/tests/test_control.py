import os
import sys
import unittest
from unittest import mock

import numpy as np

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from control import (
    STATUS_CONVERGED,
    ControlProblem,
    MinimizeOptions,
    TrackingTarget,
    control_cost,
    control_cost_gradient,
    evaluate,
    fd_gradient,
    minimize,
    objective,
    solution_map,
    tracking_term,
)
from solver import SolverConfig, project_initial, solve_ivp
from spectral import build_galerkin_system, eigenbasis
from utils.exceptions import InputError, NumericalError, StepError
from utils.logger_config import get_logger
from wdomain import ScalarField, VelocityField, WeightRecipe, build_weight, gradient, leray_project_g

# 配置日志
logger = get_logger('control_test')


class ControlFixture(unittest.TestCase):
    """n=16、m=4、8 个控制单元的小问题"""

    @classmethod
    def setUpClass(cls):
        cls.grid = build_weight(WeightRecipe.sine(0.1), 16)
        cls.basis = eigenbasis(cls.grid, 4)
        cls.system = build_galerkin_system(cls.basis, 0.05)
        cls.cfg = SolverConfig(alpha=0.5, nu=0.05, dt=1.0 / 32, n_steps=8)
        x, y = cls.grid.coordinates()
        field = VelocityField(
            0.5 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
            -0.5 * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y),
        )
        cls.xi0 = project_initial(leray_project_g(field, cls.grid), cls.basis)
        cls.eta_base = np.zeros((cls.cfg.n_steps + 1, 4))

    def problem(self, target=None, system=None, actuators=None, kappa=1e-6, box=2.0, cost_exponent=None):
        system = system or self.system
        if target is None:
            target = TrackingTarget.zero(self.cfg.time, 4)
        return ControlProblem(
            basis=self.basis,
            system=system,
            cfg=self.cfg,
            xi0=self.xi0,
            eta_base=self.eta_base,
            actuators=actuators or (self.basis.mode(0),),
            z_target=target,
            kappa=kappa,
            box_lo=-box,
            box_hi=box,
            cost_exponent=cost_exponent,
        )

    def recovery_problem(self, w_star_value=0.5, **kwargs):
        prob = self.problem(**kwargs)
        w_star = np.full(prob.control_shape, w_star_value)
        target = TrackingTarget.from_trajectory(solution_map(w_star, prob))
        return self.problem(target=target, **kwargs), w_star


class ControlProblemTest(ControlFixture):
    """问题数据与状态映射"""

    def test_default_cost_exponent(self):
        prob = self.problem()
        self.assertAlmostEqual(prob.cost_exponent, 2.0 / self.cfg.alpha1)
        self.assertEqual(prob.control_shape, (8, 1))

    def test_zero_control_matches_plain_solve(self):
        prob = self.problem()
        traj = solution_map(prob.zeros(), prob)
        plain = solve_ivp(self.system, self.cfg, self.xi0, self.eta_base)
        np.testing.assert_array_equal(traj.xi, plain.xi)

    def test_forcing_is_piecewise_constant(self):
        prob = self.problem()
        w = np.arange(1.0, 9.0)[:, None] * 0.1
        eta = prob.forcing_eta(w)
        coeffs = prob.actuator_coeffs[0]
        np.testing.assert_allclose(eta[0], 0.1 * coeffs)
        np.testing.assert_allclose(eta[1], 0.1 * coeffs)
        np.testing.assert_allclose(eta[8], 0.8 * coeffs)

    def test_exact_target_has_zero_objective(self):
        plain = solve_ivp(self.system, self.cfg, self.xi0, self.eta_base)
        prob = self.problem(target=TrackingTarget.from_trajectory(plain))
        J, _ = evaluate(prob.zeros(), prob)
        self.assertEqual(J, 0.0)

    def test_target_from_fields(self):
        target = TrackingTarget.from_fields(lambda t: self.basis.mode(1) * (1.0 + t), self.basis, self.cfg.time)
        np.testing.assert_allclose(target.zeta[:, 1], 1.0 + self.cfg.time.times, atol=1e-10)
        self.assertLess(target.perp.max(), 1e-10)
        x, _ = self.grid.coordinates()
        grad = gradient(ScalarField(np.sin(2 * np.pi * x)), self.grid)
        fields = [grad] * (self.cfg.n_steps + 1)
        hidden = TrackingTarget.from_fields(fields, self.basis, self.cfg.time)
        self.assertLess(np.max(np.abs(hidden.zeta)), 1e-8)
        self.assertGreater(hidden.perp.min(), 1.0)
        with self.assertRaises(InputError):
            TrackingTarget.from_fields(fields[:3], self.basis, self.cfg.time)

    def test_tracking_includes_orthogonal_part(self):
        plain = solve_ivp(self.system, self.cfg, self.xi0, self.eta_base)
        perp = np.full(self.cfg.n_steps + 1, 2.0)
        prob = self.problem(target=TrackingTarget(plain.xi, perp))
        self.assertAlmostEqual(tracking_term(plain, prob), 0.5 * 2.0 * self.cfg.time.T, places=12)

    def test_control_cost_and_gradient(self):
        prob = self.problem(kappa=0.3, cost_exponent=3.0)
        rng = np.random.default_rng(9)
        w = rng.uniform(-1.0, 1.0, prob.control_shape)
        expected = self.cfg.dt * 0.3 * np.sum(np.abs(w[:, 0]) ** 3)
        self.assertAlmostEqual(control_cost(w, prob), expected, places=12)
        eps = 1e-6
        fd = np.empty_like(w)
        for i in range(w.shape[0]):
            bump = np.zeros_like(w)
            bump[i, 0] = eps
            fd[i, 0] = (control_cost(w + bump, prob) - control_cost(w - bump, prob)) / (2 * eps)
        np.testing.assert_allclose(control_cost_gradient(w, prob), fd, atol=1e-8)
        self.assertFalse(np.any(control_cost_gradient(prob.zeros(), prob)))

    def test_invalid_controls(self):
        prob = self.problem()
        for w in (np.zeros((8, 2)), np.full((8, 1), np.nan), np.full((8, 1), 3.0)):
            with self.assertRaises(InputError):
                prob.check_control(w)
        with self.assertRaises(InputError) as ctx:
            solution_map(np.vstack([np.zeros((5, 1)), [[-2.5]], np.zeros((2, 1))]), prob)
        self.assertEqual(ctx.exception.context['cell'], 5)

    def test_invalid_problems(self):
        x, _ = self.grid.coordinates()
        compressive = VelocityField(np.sin(2 * np.pi * x), np.zeros((16, 16)))
        with self.assertRaises(InputError):
            self.problem(actuators=(compressive,))
        with self.assertRaises(InputError):
            self.problem(kappa=0.0)
        with self.assertRaises(InputError):
            self.problem(cost_exponent=1.5)
        with self.assertRaises(InputError):
            ControlProblem(
                basis=self.basis, system=self.system, cfg=self.cfg, xi0=self.xi0, eta_base=self.eta_base,
                actuators=(self.basis.mode(0),), z_target=TrackingTarget.zero(self.cfg.time, 4),
                kappa=1.0, box_lo=1.0, box_hi=-1.0,
            )

    def test_superposition_for_linear_state(self):
        prob = self.problem(system=self.system.linearized(), actuators=(self.basis.mode(0), self.basis.mode(2)))
        rng = np.random.default_rng(3)
        w1 = rng.uniform(-0.5, 0.5, prob.control_shape)
        w2 = rng.uniform(-0.5, 0.5, prob.control_shape)
        base = solution_map(prob.zeros(), prob).xi
        combined = solution_map(w1 + w2, prob).xi - base
        separate = (solution_map(w1, prob).xi - base) + (solution_map(w2, prob).xi - base)
        self.assertLess(np.max(np.abs(combined - separate)), 1e-12)

    def test_solution_map_is_continuous_in_forcing(self):
        prob = self.problem()
        rng = np.random.default_rng(12)
        w = rng.uniform(-0.5, 0.5, prob.control_shape)
        perturbation = rng.uniform(-1.0, 1.0, prob.control_shape)
        reference = solution_map(w, prob).xi[-1]
        gaps = []
        for n in (1, 2, 4, 8):
            state = solution_map(w + perturbation / n, prob).xi[-1]
            gaps.append(float(np.linalg.norm(state - reference)))
        logger.info(f"末端状态差 {gaps}")
        self.assertTrue(all(a > b for a, b in zip(gaps, gaps[1:])))


class GradientTest(ControlFixture):
    """有限差分梯度"""

    def quadratic_gradient(self, w, prob):
        """线性状态方程下 J 的解析梯度

        ξ(w) = ξ(0) + Σ_j S_j w_j，S_j 由单位控制的解减去零控制的解得到（精确的仿射关系）；
        ∇J = Σ_n c_n dt S_nᵀ(ξ_n − ζ_n) + dt·2κ·w，c_n 为梯形权重。
        """
        base = solution_map(prob.zeros(), prob).xi
        sensitivities = []
        for cell in range(prob.control_shape[0]):
            for comp in range(prob.d_c):
                unit = prob.zeros()
                unit[cell, comp] = 1.0
                sensitivities.append(solution_map(unit, prob).xi - base)
        state = solution_map(w, prob).xi
        weights = np.full(state.shape[0], prob.cfg.dt)
        weights[[0, -1]] *= 0.5
        residual = (state - prob.z_target.zeta) * weights[:, None]
        tracking = np.array([float(np.sum(s * residual)) for s in sensitivities]).reshape(prob.control_shape)
        return tracking + prob.cfg.dt * 2.0 * prob.kappa * w

    def test_quadratic_objective_gradient_matches_closed_form(self):
        prob, _ = self.recovery_problem(system=self.system.linearized(), cost_exponent=2.0, kappa=0.1)
        w = np.linspace(-0.5, 0.5, 8)[:, None]
        expected = self.quadratic_gradient(w, prob)
        self.assertGreater(float(np.linalg.norm(expected)), 1e-3)
        for eps in (1e-3, 1e-6):
            np.testing.assert_allclose(fd_gradient(w, prob, eps), expected, rtol=1e-6, atol=1e-9)
        # 两个执行器
        prob2, _ = self.recovery_problem(system=self.system.linearized(), cost_exponent=2.0, kappa=0.1,
                                         actuators=(self.basis.mode(0), self.basis.mode(2)))
        w2 = np.column_stack([np.linspace(-0.5, 0.5, 8), np.linspace(0.3, -0.2, 8)])
        np.testing.assert_allclose(fd_gradient(w2, prob2, 1e-5), self.quadratic_gradient(w2, prob2),
                                   rtol=1e-6, atol=1e-9)

    def test_gradient_vanishes_at_recovery_minimum(self):
        prob, w_star = self.recovery_problem()
        grad = fd_gradient(w_star, prob, 1e-6)
        self.assertLessEqual(float(np.linalg.norm(grad)), 1e-4)

    def test_threads_do_not_change_result(self):
        prob, _ = self.recovery_problem()
        w = np.linspace(-1.0, 1.0, 8)[:, None]
        np.testing.assert_array_equal(fd_gradient(w, prob, 1e-6, threads=4), fd_gradient(w, prob, 1e-6))

    def test_stencil_is_clipped_at_box(self):
        prob, _ = self.recovery_problem()
        w = np.full(prob.control_shape, 2.0)
        grad = fd_gradient(w, prob, 1e-3)
        self.assertTrue(np.all(np.isfinite(grad)))

    def test_probe_failure_reports_index(self):
        prob = self.problem()
        failure = StepError("Picard 迭代在 50 次内未收敛", step_index=3, residual=1.0)
        with mock.patch('control.optimizer.evaluate', side_effect=failure):
            with self.assertRaises(NumericalError) as ctx:
                fd_gradient(prob.zeros(), prob, 1e-6)
        self.assertEqual(ctx.exception.context['probe_index'], 0)
        self.assertEqual(ctx.exception.context['cell'], 0)


class MinimizeTest(ControlFixture):
    """投影梯度下降"""

    def assert_armijo_log(self, log, opts):
        for before, after in zip(log, log[1:]):
            self.assertLessEqual(after.J, before.J)
            move = float(np.sum((after.w - before.w) ** 2))
            self.assertLessEqual(after.J, before.J - opts.armijo_c / after.step * move + 1e-15)

    def test_recovers_known_control(self):
        prob, w_star = self.recovery_problem()
        opts = MinimizeOptions(max_iters=200, tol=1e-7)
        log = minimize(prob, prob.zeros(), opts)
        final = log[-1]
        logger.info(f"恢复问题: 迭代 {final.iteration} 次, J {log[0].J:.3e} -> {final.J:.3e}, 状态 {final.status}")
        self.assertLessEqual(final.J, 1e-4 * log[0].J)
        start_error = tracking_term(solution_map(prob.zeros(), prob), prob)
        final_error = tracking_term(solution_map(final.w, prob), prob)
        self.assertLessEqual(np.sqrt(final_error), 0.1 * np.sqrt(start_error))
        self.assertLess(final.state_residual, 1e-7)
        self.assert_armijo_log(log, opts)

    def test_unforced_target_is_immediately_stationary(self):
        plain = solve_ivp(self.system, self.cfg, self.xi0, self.eta_base)
        prob = self.problem(target=TrackingTarget.from_trajectory(plain))
        log = minimize(prob, prob.zeros(), MinimizeOptions(max_iters=10))
        self.assertEqual(len(log), 1)
        self.assertEqual(log[0].status, STATUS_CONVERGED)
        self.assertEqual(log[0].J, 0.0)

    def test_objective_nonincreasing_over_seeds(self):
        opts = MinimizeOptions(max_iters=4, tol=1e-10)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            prob = self.problem()
            w_target = rng.uniform(-1.0, 1.0, prob.control_shape)
            prob = self.problem(target=TrackingTarget.from_trajectory(solution_map(w_target, prob)), kappa=1e-3)
            w_init = rng.uniform(-2.0, 2.0, prob.control_shape)
            log = minimize(prob, w_init, opts)
            self.assert_armijo_log(log, opts)
            for item in log:
                self.assertTrue(np.all(np.abs(item.w) <= 2.0))

    def test_max_iters_status(self):
        prob, _ = self.recovery_problem()
        log = minimize(prob, prob.zeros(), MinimizeOptions(max_iters=1, tol=1e-12))
        self.assertEqual(log[-1].status, 'max_iters')
        self.assertEqual(log[-1].iteration, 1)

    def test_objective_helper(self):
        prob, w_star = self.recovery_problem()
        traj = solution_map(w_star, prob)
        self.assertAlmostEqual(objective(traj, w_star, prob), control_cost(w_star, prob), places=15)


if __name__ == '__main__':
    unittest.main()
