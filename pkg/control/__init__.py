# control包初始化文件：最优控制问题与投影梯度下降
from .problem import (
    ControlProblem,
    TrackingTarget,
    control_cost,
    control_cost_gradient,
    evaluate,
    objective,
    solution_map,
    tracking_term,
)
from .optimizer import (
    STATUS_CONVERGED,
    STATUS_MAX_ITERS,
    STATUS_STATIONARY,
    ControlIterate,
    MinimizeOptions,
    fd_gradient,
    minimize,
    projected_gradient,
)

__all__ = [
    'STATUS_CONVERGED',
    'STATUS_MAX_ITERS',
    'STATUS_STATIONARY',
    'ControlIterate',
    'ControlProblem',
    'MinimizeOptions',
    'TrackingTarget',
    'control_cost',
    'control_cost_gradient',
    'evaluate',
    'fd_gradient',
    'minimize',
    'objective',
    'projected_gradient',
    'solution_map',
    'tracking_term',
]
