# solver包初始化文件：L1/Picard 时间推进、参照积分器与能量证书
from .config import SolverConfig
from .trajectory import Trajectory
from .integrator import (
    L1Stepper,
    StepDiagnostics,
    forcing_coeffs,
    project_initial,
    reconstruct,
    solve_ivp,
    step,
)
from .reference import implicit_euler_reference
from .certificates import (
    CERTIFICATE_KINDS,
    EnergyCertificate,
    StabilityReport,
    energy_certificate,
    stability_gap,
)

__all__ = [
    'CERTIFICATE_KINDS',
    'EnergyCertificate',
    'L1Stepper',
    'SolverConfig',
    'StabilityReport',
    'StepDiagnostics',
    'Trajectory',
    'energy_certificate',
    'forcing_coeffs',
    'implicit_euler_reference',
    'project_initial',
    'reconstruct',
    'solve_ivp',
    'stability_gap',
    'step',
]
