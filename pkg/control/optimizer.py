"""有限差分梯度与带 Armijo 回溯的投影梯度下降"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from control.problem import ControlProblem, evaluate
from utils.exceptions import GnseError, NumericalError, StepError
from utils.logger_config import get_logger, log_error, log_with_context

logger = get_logger(__name__)

STATUS_RUNNING = 'running'
STATUS_CONVERGED = 'converged'
STATUS_STATIONARY = 'stationary'
STATUS_MAX_ITERS = 'max_iters'


class MinimizeOptions(BaseModel):
    """投影梯度下降的参数"""

    model_config = ConfigDict(frozen=True)

    max_iters: int = Field(default=50, ge=0)
    tol: float = Field(default=1e-6, gt=0.0)
    armijo_c: float = Field(default=1e-4, gt=0.0, lt=1.0)
    armijo_beta: float = Field(default=0.5, gt=0.0, lt=1.0)
    min_step: float = Field(default=1e-12, gt=0.0)
    fd_eps: float = Field(default=1e-6, gt=0.0)
    threads: int = Field(default=1, ge=1)


@dataclass(frozen=True, eq=False)
class ControlIterate:
    """极小化序列中的一个被接受的迭代点"""

    iteration: int
    w: np.ndarray
    J: float
    grad_norm: float
    step: float
    state_residual: float
    status: str = STATUS_RUNNING


def _probe(w: np.ndarray, prob: ControlProblem, index: int, value: float) -> float:
    cell, comp = divmod(index, prob.d_c)
    trial = w.copy()
    trial[cell, comp] = value
    try:
        J, _ = evaluate(trial, prob)
    except GnseError as e:
        raise NumericalError(
            f"有限差分探针 {index} 求解失败: {e.message}",
            residual=getattr(e, 'residual', None), probe_index=index, cell=cell, comp=comp,
        ) from e
    return J


def fd_gradient(w: np.ndarray, prob: ControlProblem, eps: float, threads: int = 1) -> np.ndarray:
    """J 关于每个时间单元、每个控制分量的中心差分梯度

    靠近盒子边界时模板被截断到盒内，差商按实际间距计算。
    探针可在线程池中并行，结果写入互不重叠的位置，与调度顺序无关。

    Args:
        w: 当前控制，形状 (n_steps, d_c)
        prob: 控制问题
        eps: 差分步长
        threads: 探针线程数

    Returns:
        与 w 同形状的梯度
    """
    if not eps > 0:
        raise NumericalError(f"差分步长必须为正: {eps}")
    w = prob.check_control(w)
    flat = w.ravel()
    lo = np.broadcast_to(prob.box_lo, w.shape).ravel()
    hi = np.broadcast_to(prob.box_hi, w.shape).ravel()
    plus = np.minimum(flat + eps, hi)
    minus = np.maximum(flat - eps, lo)

    def run(index: int) -> float:
        width = plus[index] - minus[index]
        if width <= 0.0:
            return 0.0
        J_plus = _probe(w, prob, index, plus[index])
        J_minus = _probe(w, prob, index, minus[index])
        return (J_plus - J_minus) / width

    grad = np.empty(flat.size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for index, value in enumerate(pool.map(run, range(flat.size))):
                grad[index] = value
    else:
        for index in range(flat.size):
            grad[index] = run(index)
    return grad.reshape(w.shape)


def projected_gradient(w: np.ndarray, grad: np.ndarray, prob: ControlProblem) -> np.ndarray:
    """w − P(w − ∇J)，在盒子内部即为梯度本身"""
    return w - prob.project(w - grad)


@log_error
def minimize(prob: ControlProblem, w_init: np.ndarray, opts: Optional[MinimizeOptions] = None) -> List[ControlIterate]:
    """投影梯度下降，返回被接受迭代点的完整记录

    步长从 Barzilai-Borwein 估计开始回溯，接受条件为
    J(w⁺) ≤ J(w) − (c/σ)‖w⁺ − w‖²。找不到下降步时把当前点标记为 stationary 返回。

    Args:
        prob: 控制问题
        w_init: 容许集内的初始控制
        opts: 优化参数

    Returns:
        ControlIterate 列表，最后一项的 status 说明终止原因
    """
    opts = opts or MinimizeOptions()
    w = prob.check_control(np.array(w_init, dtype=float))
    J, traj = evaluate(w, prob)
    log: List[ControlIterate] = []
    step_taken = 0.0
    previous = None

    for iteration in range(opts.max_iters + 1):
        grad = fd_gradient(w, prob, opts.fd_eps, threads=opts.threads)
        grad_norm = float(np.linalg.norm(projected_gradient(w, grad, prob)))
        iterate = ControlIterate(
            iteration=iteration, w=w.copy(), J=J, grad_norm=grad_norm, step=step_taken,
            state_residual=float(np.max(traj.residual)),
        )
        log_with_context(logger, 'info', "接受迭代点", iteration=iteration, J=f"{J:.6e}", grad_norm=f"{grad_norm:.3e}")
        if grad_norm <= opts.tol:
            log.append(replace(iterate, status=STATUS_CONVERGED))
            break
        if iteration == opts.max_iters:
            log.append(replace(iterate, status=STATUS_MAX_ITERS))
            break

        sigma = _initial_step(w, grad, previous)
        accepted = None
        while sigma >= opts.min_step:
            candidate = prob.project(w - sigma * grad)
            move = candidate - w
            if not np.any(move):
                break
            try:
                J_new, traj_new = evaluate(candidate, prob)
            except StepError as e:
                # 步长过大时 Picard 可能不收敛，按回溯处理
                log_with_context(logger, 'debug', "试探点求解失败", sigma=f"{sigma:.3e}", step_index=e.step_index)
                sigma *= opts.armijo_beta
                continue
            if J_new <= J - opts.armijo_c / sigma * float(np.sum(move ** 2)):
                accepted = (candidate, J_new, traj_new)
                break
            sigma *= opts.armijo_beta
        if accepted is None:
            log_with_context(logger, 'warning', "找不到满足 Armijo 条件的步长", iteration=iteration)
            log.append(replace(iterate, status=STATUS_STATIONARY))
            break

        log.append(iterate)
        previous = (w, grad)
        w, J, traj = accepted
        step_taken = sigma

    return log


def _initial_step(w: np.ndarray, grad: np.ndarray, previous) -> float:
    """Barzilai-Borwein 步长 sᵀs/sᵀy，不可用时取 1/‖∇J‖"""
    if previous is not None:
        w_old, grad_old = previous
        s = (w - w_old).ravel()
        y = (grad - grad_old).ravel()
        curvature = float(s @ y)
        if curvature > 0:
            return float(s @ s) / curvature
    return 1.0 / max(float(np.linalg.norm(grad)), 1e-300)
