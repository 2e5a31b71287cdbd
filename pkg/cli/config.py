"""运行配置：INI 文件解析与逐节校验

每一节对应一个 pydantic 模型，未知键一律拒绝；出错时抛出 ConfigError，
指明 `section.key` 及其所在行号。
"""
import configparser
import os
import re
from fractions import Fraction
from typing import Dict, List, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from solver.config import SolverConfig
from utils.exceptions import ConfigError, GnseError

load_dotenv()


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class GridSection(_Section):
    n: int = 32
    weight: Literal['constant', 'sine', 'tabulated'] = 'sine'
    c: float = Field(default=1.0, gt=0.0)
    epsilon: float = 0.1
    table: Optional[str] = None

    @field_validator('n')
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 8 or value > 128 or value & (value - 1):
            raise ValueError("n 必须是 8 到 128 之间的 2 的幂")
        return value

    @model_validator(mode='after')
    def _table_required(self) -> 'GridSection':
        if self.weight == 'tabulated' and not self.table:
            raise ValueError("weight=tabulated 时必须给出 table")
        return self


class FracSection(_Section):
    alpha: float = Field(default=0.5, gt=0.0, le=1.0)
    alpha1: Optional[float] = Field(default=None, validate_default=True)

    @field_validator('alpha1')
    @classmethod
    def _alpha1_below_alpha(cls, value, info):
        alpha = info.data.get('alpha')
        if alpha is None:
            return value
        if value is None:
            return alpha / 2.0
        if not 0.0 < value < alpha:
            raise ValueError(f"alpha1 必须满足 0 < alpha1 < alpha={alpha}")
        return value


def _parse_fraction(value):
    """接受 `1/256` 形式的分数"""
    if isinstance(value, str) and '/' in value:
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"无法解析分数: {value}") from e
    return value


class SolverSection(_Section):
    nu: float = Field(default=0.05, gt=0.0)
    dt: float = Field(default=1.0 / 256.0, gt=0.0)
    T: float = Field(default=0.5, gt=0.0)
    m: int = Field(default=8, ge=1, le=64)
    picard_tol: float = Field(default=1e-10, gt=0.0)
    picard_max: int = Field(default=50, ge=1)
    slack: float = Field(default=1.10, ge=1.0)
    threads: int = Field(default=1, ge=1)

    @field_validator('dt', 'T', mode='before')
    @classmethod
    def _fractions(cls, value):
        return _parse_fraction(value)

    @model_validator(mode='after')
    def _whole_steps(self) -> 'SolverSection':
        steps = round(self.T / self.dt)
        if steps < 1 or abs(steps * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} 不是 dt={self.dt} 的整数倍")
        return self


class ForcingSection(_Section):
    recipe: Literal['zero', 'mode', 'oscillating_mode', 'taylor_green', 'gradient', 'pulse'] = 'zero'
    amplitude: float = 0.0
    mode: int = Field(default=1, ge=1)
    omega: float = 0.0
    duration: float = Field(default=0.0, ge=0.0)


class InitialSection(_Section):
    recipe: Literal['zero', 'mode', 'taylor_green', 'random'] = 'taylor_green'
    amplitude: float = 1.0
    mode: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)


class ControlSection(_Section):
    d_c: int = Field(default=1, ge=1, le=4)
    actuator_modes: List[int] = Field(default_factory=lambda: [1])
    kappa: float = Field(default=1e-6, gt=0.0)
    box_lo: float = -5.0
    box_hi: float = 5.0
    max_iters: int = Field(default=50, ge=0)
    tol: float = Field(default=1e-6, gt=0.0)
    armijo_c: float = Field(default=1e-4, gt=0.0, lt=1.0)
    armijo_beta: float = Field(default=0.5, gt=0.0, lt=1.0)
    min_step: float = Field(default=1e-12, gt=0.0)
    fd_eps: float = Field(default=1e-6, gt=0.0)
    target: Literal['forward', 'unforced'] = 'forward'
    target_amplitude: float = 1.0

    @field_validator('actuator_modes', mode='before')
    @classmethod
    def _split_modes(cls, value):
        if isinstance(value, str):
            return [int(item) for item in re.split(r'[,\s]+', value.strip()) if item]
        return value

    @field_validator('actuator_modes')
    @classmethod
    def _positive_modes(cls, value: List[int]) -> List[int]:
        if not value or any(k < 1 for k in value):
            raise ValueError("执行器模式编号必须为正整数")
        return value


class OutputSection(_Section):
    directory: str = 'out'


SECTION_MODELS = {
    'grid': GridSection,
    'frac': FracSection,
    'solver': SolverSection,
    'forcing': ForcingSection,
    'initial': InitialSection,
    'control': ControlSection,
    'output': OutputSection,
}


class RunConfig(BaseModel):
    """一次运行的完整配置"""

    model_config = ConfigDict(frozen=True)

    grid: GridSection = Field(default_factory=GridSection)
    frac: FracSection = Field(default_factory=FracSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    forcing: ForcingSection = Field(default_factory=ForcingSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    control: ControlSection = Field(default_factory=ControlSection)
    output: OutputSection = Field(default_factory=OutputSection)
    source: Optional[str] = None

    def solver_config(self) -> SolverConfig:
        return SolverConfig.from_horizon(
            alpha=self.frac.alpha,
            nu=self.solver.nu,
            T=self.solver.T,
            dt=self.solver.dt,
            alpha1=self.frac.alpha1,
            picard_tol=self.solver.picard_tol,
            picard_max=self.solver.picard_max,
            certificate_slack=self.solver.slack,
        )

    def output_directory(self) -> str:
        """GNSE_OUT 优先于 [output] directory"""
        return os.getenv('GNSE_OUT') or self.output.directory

    def flat(self) -> Dict[str, object]:
        """`section.key` -> 值 的扁平字典，用于 manifest"""
        values = {}
        for section in SECTION_MODELS:
            for key, value in getattr(self, section).model_dump().items():
                values[f'{section}.{key}'] = value
        return values


def _line_map(text: str) -> Dict[Tuple[str, str], int]:
    """记录每个 (section, key) 首次出现的行号"""
    lines: Dict[Tuple[str, str], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in '#;':
            continue
        header = re.match(r'^\[([^\]]+)\]$', stripped)
        if header:
            section = header.group(1).strip()
            lines.setdefault((section, ''), lineno)
            continue
        if section is not None and not raw[:1].isspace():
            key = re.split(r'[=:]', stripped, maxsplit=1)[0].strip()
            lines.setdefault((section, key), lineno)
    return lines


def _cross_checks(run: RunConfig, lines: Dict[Tuple[str, str], int]) -> None:
    def fail(section: str, key: str, message: str):
        raise ConfigError(message, key=f'{section}.{key}', line=lines.get((section, key)))

    if run.forcing.mode > run.solver.m:
        fail('forcing', 'mode', f"forcing.mode={run.forcing.mode} 超出模式数 m={run.solver.m}")
    if run.initial.mode > run.solver.m:
        fail('initial', 'mode', f"initial.mode={run.initial.mode} 超出模式数 m={run.solver.m}")
    if len(run.control.actuator_modes) != run.control.d_c:
        fail('control', 'actuator_modes', "执行器模式个数必须等于 d_c")
    if max(run.control.actuator_modes) > run.solver.m:
        fail('control', 'actuator_modes', f"执行器模式编号超出模式数 m={run.solver.m}")


def parse_config(path: str) -> RunConfig:
    """解析并校验 INI 配置文件

    Args:
        path: 配置文件路径

    Returns:
        RunConfig

    Raises:
        ConfigError: 文件不可读、重复键、未知节或键、取值越界
    """
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigError(f"无法读取配置文件 {path}: {e}") from e

    lines = _line_map(text)
    parser = configparser.ConfigParser(strict=True, interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"重复的配置键 {e.section}.{e.option}", key=f'{e.section}.{e.option}', line=e.lineno) from e
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"重复的配置节 [{e.section}]", key=e.section, line=e.lineno) from e
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("配置文件缺少节标题", line=e.lineno) from e
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigError(f"配置文件格式错误: {e}", line=line) from e

    sections = {}
    for section in parser.sections():
        model = SECTION_MODELS.get(section)
        if model is None:
            raise ConfigError(f"未知的配置节 [{section}]", key=section, line=lines.get((section, '')))
        try:
            sections[section] = model(**dict(parser[section]))
        except ValidationError as e:
            error = e.errors()[0]
            key = str(error['loc'][0]) if error['loc'] else ''
            line = lines.get((section, key), lines.get((section, '')))
            name = f'{section}.{key}' if key else section
            raise ConfigError(f"配置项 {name} 无效: {error['msg']}", key=name, line=line) from e

    run = RunConfig(source=os.path.abspath(path), **sections)
    _cross_checks(run, lines)
    try:
        run.solver_config()
    except (GnseError, ValidationError) as e:
        raise ConfigError(f"求解参数无效: {e}", key='solver') from e
    return run


def defaults_help() -> str:
    """列出所有配置键及其缺省值，用于 --help"""
    rows = []
    for section, model in SECTION_MODELS.items():
        defaults = model().model_dump()
        body = ', '.join(f'{key}={value}' for key, value in defaults.items())
        rows.append(f'  [{section}] {body}')
    return '配置键与缺省值:\n' + '\n'.join(rows)
