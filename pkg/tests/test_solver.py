import os
import sys
import unittest

import numpy as np
from pydantic import ValidationError
from scipy.special import gamma

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from cli.verify_suite import galerkin_refinement_gaps
from fracops import SampledFunction, TimeGrid, mittag_leffler
from solver import (
    CERTIFICATE_KINDS,
    SolverConfig,
    Trajectory,
    energy_certificate,
    forcing_coeffs,
    implicit_euler_reference,
    project_initial,
    reconstruct,
    solve_ivp,
    stability_gap,
    step,
)
from spectral import GalerkinSystem, build_galerkin_system, eigenbasis, ladyzhenskaya_ratio
from utils.exceptions import HypothesisError, InputError, StepError
from utils.logger_config import get_logger
from wdomain import ScalarField, VelocityField, WeightRecipe, build_weight, gradient, leray_project_g, weighted_inner
from wdomain.stencils import centered_diff

# 配置日志
logger = get_logger('solver_test')


def _scalar_system(lambdas, nu=1.0):
    lambdas = np.asarray(lambdas, dtype=float)
    m = lambdas.size
    return GalerkinSystem(lambdas, np.zeros((m, m)), np.zeros((m, m, m)), nu=nu)


def _taylor_green(grid, amplitude=0.5):
    x, y = grid.coordinates()
    field = VelocityField(
        amplitude * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
        -amplitude * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y),
    )
    return leray_project_g(field, grid)


class SmokeFixture(unittest.TestCase):
    """n=16、ε=0.1、m=8 的共享系统"""

    @classmethod
    def setUpClass(cls):
        cls.grid = build_weight(WeightRecipe.sine(0.1), 16)
        cls.basis = eigenbasis(cls.grid, 8)
        cls.system = build_galerkin_system(cls.basis, 0.05)
        cls.xi0 = project_initial(_taylor_green(cls.grid), cls.basis)

    def config(self, alpha=0.5, **kwargs):
        return SolverConfig.from_horizon(alpha=alpha, nu=0.05, T=0.5, dt=1.0 / 256, **kwargs)

    def zero_eta(self, cfg):
        return np.zeros((cfg.n_steps + 1, self.system.m))


class SolverConfigTest(unittest.TestCase):
    """求解参数"""

    def test_alpha1_default_and_b(self):
        cfg = SolverConfig(alpha=0.6, nu=1.0, dt=0.01, n_steps=10)
        self.assertAlmostEqual(cfg.alpha1, 0.3)
        self.assertAlmostEqual(cfg.b, 0.3 / 0.7)

    def test_alpha1_range(self):
        for alpha1 in (0.0, 0.6, 0.9):
            with self.assertRaises(ValidationError):
                SolverConfig(alpha=0.6, alpha1=alpha1, nu=1.0, dt=0.01, n_steps=10)

    def test_from_horizon(self):
        cfg = SolverConfig.from_horizon(alpha=0.5, nu=0.05, T=0.5, dt=1.0 / 256)
        self.assertEqual(cfg.n_steps, 128)
        self.assertAlmostEqual(cfg.time.T, 0.5, places=14)
        with self.assertRaises(ValidationError):
            SolverConfig(alpha=0.5, nu=0.0, dt=0.01, n_steps=10)


class ProjectionTest(SmokeFixture):
    """初值投影、强迫系数与重构"""

    def test_project_mode_and_zero(self):
        np.testing.assert_allclose(project_initial(self.basis.mode(0), self.basis), np.eye(8)[0], atol=1e-10)
        self.assertFalse(np.any(project_initial(VelocityField.zeros(16), self.basis)))

    def test_projection_complete_on_full_basis(self):
        grid = build_weight(WeightRecipe.sine(0.1), 8)
        full = eigenbasis(grid, 66)
        rng = np.random.default_rng(4)
        psi = rng.standard_normal((8, 8))
        u0 = VelocityField(-centered_diff(psi, 1, grid.h) / grid.g, centered_diff(psi, 0, grid.h) / grid.g)
        restored = full.synthesize(project_initial(u0, full))
        error = restored - u0
        self.assertLess(np.sqrt(weighted_inner(error, error, grid)), 1e-8)

    def test_forcing_coefficients(self):
        time = TimeGrid(0.1, 5)
        self.assertFalse(np.any(forcing_coeffs(VelocityField.zeros(16), self.basis, time)))
        eta = forcing_coeffs(self.basis.mode(1), self.basis, time)
        np.testing.assert_allclose(eta, np.tile(np.eye(8)[1], (6, 1)), atol=1e-10)

    def test_gradient_forcing_is_invisible(self):
        x, y = self.grid.coordinates()
        grad = gradient(ScalarField(np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)), self.grid)
        eta = forcing_coeffs(lambda t: grad * (1.0 + t), self.basis, TimeGrid(0.1, 4))
        self.assertLess(np.max(np.abs(eta)), 1e-8)

    def test_forcing_failure_carries_step_index(self):
        def broken(t):
            if t > 0.25:
                raise RuntimeError("boom")
            return VelocityField.zeros(16)

        with self.assertRaises(InputError) as ctx:
            forcing_coeffs(broken, self.basis, TimeGrid(0.1, 5))
        self.assertEqual(ctx.exception.context['step_index'], 3)

    def test_reconstruct(self):
        cfg = SolverConfig(alpha=0.5, nu=0.05, dt=0.01, n_steps=2)
        xi = np.zeros((3, 8))
        xi[1, 4] = 1.0
        traj = Trajectory(time=cfg.time, xi=xi, eta=np.zeros((3, 8)), lambdas=self.basis.lambdas)
        field = reconstruct(traj, self.basis, 1)
        np.testing.assert_allclose(field.components, self.basis.modes[4], atol=1e-14)
        with self.assertRaises(InputError):
            reconstruct(traj, self.basis, 3)


class ScalarOracleTest(unittest.TestCase):
    """线性对角系统与 Mittag-Leffler 解析解"""

    def test_mittag_leffler_decay(self):
        cfg = SolverConfig(alpha=0.5, nu=1.0, dt=1.0 / 512, n_steps=512)
        traj = solve_ivp(_scalar_system([1.0]), cfg, np.ones(1), np.zeros((513, 1)))
        self.assertLess(abs(traj.xi[-1, 0] - 0.427584), 5e-3)

    def test_every_mode_matches_oracle(self):
        lambdas = np.array([1.0, 2.5, 4.0])
        cfg = SolverConfig(alpha=0.7, nu=1.0, dt=1.0 / 512, n_steps=512)
        traj = solve_ivp(_scalar_system(lambdas), cfg, np.ones(3), np.zeros((513, 3)))
        # 初始层内 L1 误差较大，从 t=0.1 开始比较
        start = 52
        for k, lam in enumerate(lambdas):
            exact = np.array([mittag_leffler(cfg.order, -lam * t ** 0.7) for t in traj.times[start:]])
            self.assertLess(np.max(np.abs(traj.xi[start:, k] - exact)), 5e-3)

    def test_temporal_order_on_manufactured_solution(self):
        """ξ = t² 的最大误差，拟合阶与 2−α 相差不超过 0.25"""
        steps = np.array([32, 64, 128, 256, 512])
        for alpha in (0.3, 0.5, 0.8):
            errors = []
            for n_steps in steps:
                cfg = SolverConfig(alpha=alpha, nu=1.0, dt=1.0 / n_steps, n_steps=int(n_steps))
                t = cfg.time.times
                eta = (gamma(3.0) / gamma(3.0 - alpha) * t ** (2.0 - alpha) + t ** 2)[:, None]
                traj = solve_ivp(_scalar_system([1.0]), cfg, np.zeros(1), eta)
                errors.append(np.max(np.abs(traj.xi[:, 0] - t ** 2)))
            rate = -np.polyfit(np.log2(steps), np.log2(errors), 1)[0]
            logger.info(f"alpha={alpha} 制造解收敛阶 {rate:.4f}")
            self.assertLess(abs(rate - (2.0 - alpha)), 0.25)

    def test_full_window_error_is_an_initial_layer(self):
        """[0,1] 上的最大误差出现在第一步附近，t≥0.1 后满足 5e-3"""
        cfg = SolverConfig(alpha=0.5, nu=1.0, dt=1.0 / 512, n_steps=512)
        traj = solve_ivp(_scalar_system([1.0]), cfg, np.ones(1), np.zeros((513, 1)))
        exact = np.array([mittag_leffler(cfg.order, -t ** 0.5) for t in traj.times])
        errors = np.abs(traj.xi[:, 0] - exact)
        self.assertLess(errors.max(), 2e-2)
        self.assertLess(int(np.argmax(errors)), 8)
        self.assertLess(errors[52:].max(), 5e-3)
        # 误差随步长减半而减小
        coarse = SolverConfig(alpha=0.5, nu=1.0, dt=1.0 / 256, n_steps=256)
        coarse_traj = solve_ivp(_scalar_system([1.0]), coarse, np.ones(1), np.zeros((257, 1)))
        coarse_exact = np.array([mittag_leffler(coarse.order, -t ** 0.5) for t in coarse_traj.times])
        self.assertLess(errors.max(), np.max(np.abs(coarse_traj.xi[:, 0] - coarse_exact)))

    def test_zero_fixed_point(self):
        cfg = SolverConfig(alpha=0.4, nu=1.0, dt=0.01, n_steps=20)
        traj = solve_ivp(_scalar_system([1.0, 3.0]), cfg, np.zeros(2), np.zeros((21, 2)))
        self.assertFalse(np.any(traj.xi))

    def test_sampled_forcing_grid_must_match(self):
        cfg = SolverConfig(alpha=0.4, nu=1.0, dt=0.01, n_steps=20)
        eta = SampledFunction(TimeGrid(0.02, 20), np.zeros((21, 1)))
        with self.assertRaises(InputError):
            solve_ivp(_scalar_system([1.0]), cfg, np.zeros(1), eta)


class NonlinearSolveTest(SmokeFixture):
    """带对流项的推进"""

    def test_classical_limit_matches_implicit_euler(self):
        cfg = self.config(alpha=1.0, picard_tol=1e-13)
        eta = self.zero_eta(cfg)
        traj = solve_ivp(self.system, cfg, self.xi0, eta)
        reference = implicit_euler_reference(self.system, cfg.time, self.xi0, eta)
        self.assertLess(np.max(np.abs(traj.xi - reference)), 1e-10)

    def test_alpha_near_one_is_close_to_classical(self):
        cfg = self.config(alpha=0.999)
        eta = self.zero_eta(cfg)
        traj = solve_ivp(self.system, cfg, self.xi0, eta)
        reference = implicit_euler_reference(self.system, cfg.time, self.xi0, eta)
        self.assertLess(np.max(np.abs(traj.xi - reference)), 1e-2)

    def test_invariants_along_trajectory(self):
        cfg = self.config()
        traj = solve_ivp(self.system, cfg, self.xi0, self.zero_eta(cfg))
        bound = self.grid.grad_g_sup / (self.grid.m0 * np.sqrt(self.basis.lambda1))
        for xi in traj.xi[1:]:
            norm = np.linalg.norm(xi)
            self.assertLessEqual(abs(float(xi @ self.system.nonlinear(xi))), 1e-12 * norm ** 3)
            enstrophy = float(self.system.energy_norm_sq(xi))
            self.assertLessEqual(abs(float(xi @ self.system.Cmat @ xi)), bound * enstrophy * (1 + 1e-6))
        self.assertTrue(np.all(traj.picard_iters[1:] >= 1))
        self.assertLess(traj.residual.max(), 1e-7)

    def test_deterministic(self):
        cfg = self.config()
        first = solve_ivp(self.system, cfg, self.xi0, self.zero_eta(cfg))
        second = solve_ivp(self.system, cfg, self.xi0, self.zero_eta(cfg))
        np.testing.assert_array_equal(first.xi, second.xi)
        self.assertEqual(first.input_hash, second.input_hash)

    def test_single_step_agrees_with_solve(self):
        cfg = self.config()
        traj = solve_ivp(self.system, cfg, self.xi0, self.zero_eta(cfg))
        xi1, diagnostics = step(self.system, cfg, self.xi0[None, :], np.zeros(8))
        np.testing.assert_array_equal(xi1, traj.xi[1])
        self.assertEqual(diagnostics.iterations, traj.picard_iters[1])

    def test_picard_failure_reports_step(self):
        cfg = self.config(picard_max=1)
        with self.assertRaises(StepError) as ctx:
            solve_ivp(self.system, cfg, self.xi0, self.zero_eta(cfg))
        self.assertEqual(ctx.exception.context['step_index'], 1)
        self.assertIn('residual', ctx.exception.context)

    def test_shape_errors(self):
        cfg = self.config()
        with self.assertRaises(InputError):
            solve_ivp(self.system, cfg, np.zeros(3), self.zero_eta(cfg))
        with self.assertRaises(InputError):
            solve_ivp(self.system, cfg, self.xi0, np.zeros((5, 8)))

    def test_frames(self):
        cfg = self.config()
        traj = solve_ivp(self.system, cfg, self.xi0, self.zero_eta(cfg))
        frame = traj.to_trajectory_frame()
        self.assertEqual(list(frame.columns), ['t', 'k', 'xi'])
        self.assertEqual(len(frame), (cfg.n_steps + 1) * 8)
        self.assertEqual(frame['k'].iloc[:8].tolist(), list(range(1, 9)))
        diagnostics = traj.to_diagnostics_frame()
        self.assertEqual(list(diagnostics.columns), ['t', 'picard_iters', 'residual', 'energy', 'enstrophy'])


class CertificateTest(SmokeFixture):
    """能量证书与稳定性界"""

    def test_smoke_trajectory_passes(self):
        cfg = self.config()
        traj = solve_ivp(self.system, cfg, self.xi0, self.zero_eta(cfg))
        certificate = energy_certificate(traj, self.grid, self.basis.lambda1, cfg)
        for kind in CERTIFICATE_KINDS:
            logger.info(f"{kind} 最小余量 {certificate.margins(kind).min():.6g}")
        self.assertTrue(certificate.passed)
        self.assertLess(certificate.nu_prime, cfg.nu)
        self.assertEqual(certificate.trajectory_hash, traj.input_hash)

    def test_zero_trajectory_margins(self):
        cfg = self.config()
        traj = Trajectory(time=cfg.time, xi=np.zeros((cfg.n_steps + 1, 8)),
                          eta=np.zeros((cfg.n_steps + 1, 8)), lambdas=self.basis.lambdas)
        certificate = energy_certificate(traj, self.grid, self.basis.lambda1, cfg)
        for kind in CERTIFICATE_KINDS:
            np.testing.assert_array_equal(certificate.margins(kind), certificate.rhs(kind))
        b = cfg.b
        expected = cfg.certificate_slack * 0.5 ** (1 + b) / ((1 + b) * certificate.nu_prime)
        np.testing.assert_allclose(certificate.rhs('sup'), expected, rtol=1e-12)

    def test_growing_trajectory_fails(self):
        cfg = self.config()
        times = cfg.time.times
        xi = np.zeros((cfg.n_steps + 1, 8))
        xi[:, 0] = 1.0 + 50.0 * times
        traj = Trajectory(time=cfg.time, xi=xi, eta=np.zeros_like(xi), lambdas=self.basis.lambdas)
        certificate = energy_certificate(traj, self.grid, self.basis.lambda1, cfg)
        self.assertFalse(certificate.passed)
        first = certificate.first_failure('sup')
        self.assertGreater(first, 0)
        self.assertTrue(np.all(certificate.passes('sup')[:first]))
        self.assertFalse(certificate.passes('sup')[first])
        frame = certificate.to_frame('sup')
        self.assertEqual(list(frame.columns), ['t', 'bound_lhs', 'bound_rhs', 'margin', 'pass'])

    def test_refuses_when_weight_hypothesis_fails(self):
        cfg = self.config()
        traj = solve_ivp(self.system.linearized(), cfg, self.xi0, self.zero_eta(cfg))
        with self.assertRaises(HypothesisError):
            energy_certificate(traj, self.grid, 1.0, cfg)

    def test_time_grid_mismatch(self):
        cfg = self.config()
        traj = solve_ivp(self.system, cfg, self.xi0, self.zero_eta(cfg))
        other = SolverConfig(alpha=0.5, nu=0.05, dt=1.0 / 128, n_steps=64)
        with self.assertRaises(InputError):
            energy_certificate(traj, self.grid, self.basis.lambda1, other)

    def test_stability_gap(self):
        cfg = self.config()
        eta = self.zero_eta(cfg)
        reference = solve_ivp(self.system, cfg, self.xi0, eta)
        same = stability_gap(reference, solve_ivp(self.system, cfg, self.xi0, eta),
                             self.grid, self.basis.lambda1, cfg, c_hat=1.0)
        self.assertFalse(np.any(same.gap))
        self.assertTrue(same.passed)

        c_hat = ladyzhenskaya_ratio(self.system, samples=200).classical
        perturbed = solve_ivp(self.system, cfg, self.xi0 + 1e-6 * np.eye(8)[0], eta)
        report = stability_gap(perturbed, reference, self.grid, self.basis.lambda1, cfg, c_hat=c_hat)
        self.assertTrue(report.passed)
        self.assertGreaterEqual(report.apriori_factor, 1.0)
        self.assertAlmostEqual(report.c2, c_hat ** 2 / cfg.nu)
        self.assertEqual(list(report.to_frame().columns), ['t', 'gap', 'bound', 'margin', 'pass'])

    def test_stability_input_checks(self):
        cfg = self.config()
        eta = self.zero_eta(cfg)
        traj = solve_ivp(self.system, cfg, self.xi0, eta)
        forced = solve_ivp(self.system, cfg, self.xi0, eta + 0.01)
        other_system = solve_ivp(self.system.with_nu(0.1), cfg, self.xi0, eta)
        for first, second, c_hat in ((traj, forced, 1.0), (traj, other_system, 1.0), (traj, traj, -1.0)):
            with self.assertRaises(InputError):
                stability_gap(first, second, self.grid, self.basis.lambda1, cfg, c_hat=c_hat)


def _pseudo_spectral_run(u1, u2, nu, dt, n_steps):
    """周期 NSE 的伪谱推进：粘性项隐式 Euler，对流项显式并按 2/3 规则去混叠"""
    n = u1.shape[0]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    kx, ky = np.meshgrid(k, k, indexing='ij')
    k2 = kx ** 2 + ky ** 2
    k2_safe = np.where(k2 == 0.0, 1.0, k2)
    cutoff = (2.0 / 3.0) * np.max(np.abs(k))
    dealias = (np.abs(kx) < cutoff) & (np.abs(ky) < cutoff)

    def project(a_hat, b_hat):
        dot = (kx * a_hat + ky * b_hat) / k2_safe
        return a_hat - kx * dot, b_hat - ky * dot

    def physical(f_hat):
        return np.real(np.fft.ifft2(f_hat))

    a_hat, b_hat = project(np.fft.fft2(u1), np.fft.fft2(u2))
    for _ in range(n_steps):
        a, b = physical(a_hat), physical(b_hat)
        n1 = a * physical(1j * kx * a_hat) + b * physical(1j * ky * a_hat)
        n2 = a * physical(1j * kx * b_hat) + b * physical(1j * ky * b_hat)
        n1_hat, n2_hat = project(np.fft.fft2(n1) * dealias, np.fft.fft2(n2) * dealias)
        a_hat = (a_hat - dt * n1_hat) / (1.0 + dt * nu * k2)
        b_hat = (b_hat - dt * n2_hat) / (1.0 + dt * nu * k2)
    return physical(a_hat), physical(b_hat)


class ClassicalLimitTest(unittest.TestCase):
    """g≡1、α=1：与经典 NSE 比较"""

    @classmethod
    def setUpClass(cls):
        cls.grid = build_weight(WeightRecipe.constant(1.0), 32)
        # 前 8 个模式是 |k|²≤2 的全部无散 Fourier 模式
        cls.basis = eigenbasis(cls.grid, 8)

    def test_matches_pseudo_spectral_reference(self):
        nu, amplitude = 0.01, 0.25
        cfg = SolverConfig(alpha=1.0, nu=nu, dt=1e-3, n_steps=100)
        system = build_galerkin_system(self.basis, nu)
        u0 = _taylor_green(self.grid, amplitude)
        traj = solve_ivp(system, cfg, project_initial(u0, self.basis), np.zeros((101, 8)))
        galerkin = reconstruct(traj, self.basis, cfg.n_steps)

        x, y = self.grid.coordinates()
        r1, r2 = _pseudo_spectral_run(
            amplitude * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
            -amplitude * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y),
            nu, cfg.dt, cfg.n_steps,
        )
        diff = VelocityField(galerkin.u1 - r1, galerkin.u2 - r2)
        error = np.sqrt(weighted_inner(diff, diff, self.grid))
        logger.info(f"T=0.1 处与伪谱参照的差 {error:.3e}")
        self.assertLess(error, 1e-4)

    def test_linear_gap_decays_exponentially(self):
        nu = 0.05
        cfg = SolverConfig.from_horizon(alpha=1.0, nu=nu, T=0.5, dt=1.0 / 1024)
        system = build_galerkin_system(self.basis, nu).linearized()
        eta = np.zeros((cfg.n_steps + 1, 8))
        xi0 = project_initial(_taylor_green(self.grid), self.basis)
        w0 = 1e-6 * np.eye(8)[0]
        report = stability_gap(
            solve_ivp(system, cfg, xi0 + w0, eta), solve_ivp(system, cfg, xi0, eta),
            self.grid, self.basis.lambda1, cfg, c_hat=0.0,
        )
        expected = np.exp(-nu * self.basis.lambda1 * cfg.time.times) * 1e-6
        gap = np.sqrt(report.gap)
        self.assertLess(np.max(np.abs(gap - expected)), 1e-6)
        self.assertLess(np.max(np.abs(gap / expected - 1.0)), 1e-2)
        self.assertTrue(report.passed)


class GalerkinRefinementTest(unittest.TestCase):
    """截断模式数加倍时末端速度场的差"""

    def test_gaps_do_not_grow(self):
        gaps = galerkin_refinement_gaps(n=16)
        logger.info(f"m=4,8,16 的截断差 {gaps}")
        self.assertTrue(np.all(np.diff(gaps) <= 0.0))


if __name__ == '__main__':
    unittest.main()
