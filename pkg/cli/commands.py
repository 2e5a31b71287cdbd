"""gnse 子命令的实现

退出码：0 成功，1 错误，2 H(g) 不成立，3 能量证书未通过。
"""
import os
import time
from typing import Callable

from cli.config import RunConfig
from cli.recipes import build_control_problem, build_grid, build_setup
from cli.writers import (
    control_frame,
    control_log_frame,
    print_report,
    write_csv,
    write_hg_check,
    write_manifest,
)
from control.optimizer import STATUS_MAX_ITERS, MinimizeOptions, minimize
from control.problem import tracking_term
from solver.certificates import CERTIFICATE_KINDS, energy_certificate
from solver.integrator import solve_ivp
from spectral.eigenbasis import eigenbasis
from spectral.export import export_basis
from utils.exceptions import GnseError, HypothesisError
from utils.logger_config import get_logger, log_error, log_with_context
from wdomain.operators import check_Hg

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_HYPOTHESIS = 2
EXIT_CERTIFICATE = 3

CERTIFICATE_FILES = {
    'sup': 'certificate.csv',
    'integral': 'certificate_integral.csv',
    'l2': 'certificate_l2.csv',
}


def _prepare_output(run: RunConfig) -> str:
    directory = run.output_directory()
    os.makedirs(directory, exist_ok=True)
    if not os.access(directory, os.W_OK):
        raise OSError(f"输出目录不可写: {directory}")
    return directory


def run_guarded(command: Callable[[RunConfig], int], run: RunConfig) -> int:
    """把异常映射为退出码"""
    try:
        return command(run)
    except HypothesisError as e:
        print(f"❌ {e}")
        return EXIT_HYPOTHESIS
    except (GnseError, OSError) as e:
        print(f"❌ {e}")
        return EXIT_ERROR


@log_error
def cmd_eig(run: RunConfig) -> int:
    """计算特征基，写出 spectrum.csv、mode_XXX.csv 与 hg_check.txt"""
    started = time.perf_counter()
    directory = _prepare_output(run)
    grid = build_grid(run.grid)
    basis = eigenbasis(grid, run.solver.m)
    export_basis(basis, directory)
    verdict = check_Hg(grid, basis.lambda1)
    write_hg_check(directory, verdict)
    cfg = run.solver_config()
    write_manifest(directory, run, {
        'alpha1': cfg.alpha1,
        'b': cfg.b,
        'nu_prime': cfg.nu * verdict.nu_prime_factor if verdict.holds else None,
        'wall_seconds': time.perf_counter() - started,
    })
    print_report("g-Stokes 特征基", {
        '模式数': basis.m,
        'λ1': f"{basis.lambda1:.10g}",
        'H(g)': 'holds' if verdict.holds else 'fails',
        '输出目录': directory,
    })
    return EXIT_OK if verdict.holds else EXIT_HYPOTHESIS


@log_error
def cmd_solve(run: RunConfig) -> int:
    """前向求解并核验能量证书"""
    started = time.perf_counter()
    directory = _prepare_output(run)
    setup = build_setup(run)
    traj = solve_ivp(setup.system, setup.cfg, setup.xi0, setup.eta)
    write_csv(traj.to_trajectory_frame(), directory, 'trajectory.csv')
    write_csv(traj.to_diagnostics_frame(), directory, 'diagnostics.csv')

    verdict = check_Hg(setup.grid, setup.basis.lambda1)
    write_hg_check(directory, verdict)
    extras = {'alpha1': setup.cfg.alpha1, 'b': setup.cfg.b, 'nu_prime': None}
    if not verdict.holds:
        extras['wall_seconds'] = time.perf_counter() - started
        write_manifest(directory, run, extras)
        print("❌ H(g) 不成立，拒绝给出能量证书")
        return EXIT_HYPOTHESIS

    certificate = energy_certificate(traj, setup.grid, setup.basis.lambda1, setup.cfg)
    for kind in CERTIFICATE_KINDS:
        write_csv(certificate.to_frame(kind), directory, CERTIFICATE_FILES[kind])
    extras['nu_prime'] = certificate.nu_prime
    extras['wall_seconds'] = time.perf_counter() - started
    write_manifest(directory, run, extras)

    print_report("前向求解", {
        '时间步数': setup.cfg.n_steps,
        '最大 Picard 迭代': int(traj.picard_iters.max()),
        'ν′': f"{certificate.nu_prime:.6g}",
        '能量证书': '通过' if certificate.passed else '未通过',
    })
    if not certificate.passed:
        failures = {kind: certificate.first_failure(kind) for kind in CERTIFICATE_KINDS}
        log_with_context(logger, 'warning', "能量证书未通过", **failures)
        return EXIT_CERTIFICATE
    return EXIT_OK


@log_error
def cmd_control(run: RunConfig) -> int:
    """求解最优控制问题，写出 control_log.csv、w_opt.csv 与最终状态轨迹"""
    started = time.perf_counter()
    directory = _prepare_output(run)
    setup = build_setup(run)
    prob = build_control_problem(setup)
    section = run.control
    opts = MinimizeOptions(
        max_iters=section.max_iters, tol=section.tol, armijo_c=section.armijo_c,
        armijo_beta=section.armijo_beta, min_step=section.min_step, fd_eps=section.fd_eps,
        threads=run.solver.threads,
    )
    log = minimize(prob, prob.zeros(), opts)
    final = log[-1]
    traj = solve_ivp(setup.system, setup.cfg, setup.xi0, prob.forcing_eta(final.w))
    write_csv(control_log_frame(log), directory, 'control_log.csv')
    write_csv(control_frame(final.w, setup.time), directory, 'w_opt.csv')
    write_csv(traj.to_trajectory_frame(), directory, 'trajectory.csv')
    write_manifest(directory, run, {
        'alpha1': setup.cfg.alpha1,
        'b': setup.cfg.b,
        'nu_prime': None,
        'status': final.status,
        'wall_seconds': time.perf_counter() - started,
    })
    if final.status == STATUS_MAX_ITERS:
        log_with_context(
            logger, 'warning', "达到最大迭代次数仍未满足停止条件",
            max_iters=section.max_iters, J=f"{final.J:.6e}", grad_norm=f"{final.grad_norm:.3e}", tol=section.tol,
        )
        print(f"⚠️ 达到最大迭代次数 {section.max_iters}，投影梯度范数 {final.grad_norm:.3e} 仍大于 tol={section.tol:g}")
    print_report("最优控制", {
        '迭代次数': final.iteration,
        'J 初值': f"{log[0].J:.6e}",
        'J 终值': f"{final.J:.6e}",
        '跟踪误差': f"{tracking_term(traj, prob):.6e}",
        '终止原因': final.status,
    })
    return EXIT_OK
