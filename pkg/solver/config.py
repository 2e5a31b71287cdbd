"""时间推进与能量证书的参数"""
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

from fracops.grid import FractionalOrder, TimeGrid


class SolverConfig(BaseModel):
    """L1/Picard 推进参数

    alpha1 是估计中 Young 分裂所用的指数，缺省取 alpha/2。
    """

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0.0, le=1.0)
    alpha1: Optional[float] = Field(default=None, validate_default=True)
    nu: float = Field(gt=0.0)
    dt: float = Field(gt=0.0)
    n_steps: int = Field(ge=1)
    picard_tol: float = Field(default=1e-10, gt=0.0)
    picard_max: int = Field(default=50, ge=1)
    certificate_slack: float = Field(default=1.10, ge=1.0)

    @field_validator('alpha1')
    @classmethod
    def _check_alpha1(cls, value: Optional[float], info: ValidationInfo) -> Optional[float]:
        alpha = info.data.get('alpha')
        if alpha is None:
            return value
        if value is None:
            return alpha / 2.0
        if not 0.0 < value < alpha:
            raise ValueError(f"alpha1 必须满足 0 < alpha1 < alpha={alpha}")
        return value

    @classmethod
    def from_horizon(cls, alpha: float, nu: float, T: float, dt: float, **kwargs) -> 'SolverConfig':
        grid = TimeGrid.from_horizon(T, dt)
        return cls(alpha=alpha, nu=nu, dt=grid.dt, n_steps=grid.n_steps, **kwargs)

    @property
    def order(self) -> FractionalOrder:
        return FractionalOrder(self.alpha)

    @property
    def time(self) -> TimeGrid:
        return TimeGrid(self.dt, self.n_steps)

    @property
    def b(self) -> float:
        """b = (α−α₁)/(1−α₁)"""
        return (self.alpha - self.alpha1) / (1.0 - self.alpha1)
