"""Run configuration: flat ``key=value`` files overridden by command-line flags."""
import argparse
import configparser
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..fespace import FEFamily
from ..multigrid import MultigridConfig
from ..partition import Strategy
from ..solvers import SmootherConfig, SmootherKind

__all__ = ["RunConfig", "read_config_file", "add_config_arguments", "resolve_config"]


@dataclass(frozen=True)
class RunConfig:
    """All knobs of a run. Every field is a valid config-file key and CLI flag."""

    dimension: int = 3
    n_coarse: int = 2
    ranks: int = 1
    levels: int = 3
    pre_smooth: int = 3
    post_smooth: int = 3
    local_sweeps: int = 1
    smoother: str = "gauss_seidel"
    damping: float = 0.8
    dt: float = 0.01
    end_time: float = 5.0
    steps: int = 0  # > 0 overrides end_time / dt
    outer_tol: float = 1e-9
    outer_max_cycles: int = 50
    coarse_tol: float = 1e-10
    coarse_max_iter: int = 10_000
    partition: str = "bisection"
    family: str = "q1"
    dirichlet: bool = True
    timeout: float = 600.0

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if self.n_coarse < 1 or self.ranks < 1 or self.levels < 1:
            raise ValueError("n_coarse, ranks and levels must be >= 1")
        if self.dt <= 0 or self.end_time < 0:
            raise ValueError("dt must be positive and end_time non-negative")
        SmootherKind.parse(self.smoother)
        Strategy.parse(self.partition)
        FEFamily.parse(self.family)

    @property
    def n_steps(self):
        return self.steps if self.steps > 0 else int(round(self.end_time / self.dt))

    def smoother_config(self):
        return SmootherConfig(SmootherKind.parse(self.smoother), self.pre_smooth,
                              self.post_smooth, self.local_sweeps, self.damping)

    def multigrid_config(self):
        return MultigridConfig(n_levels=self.levels, smoother=self.smoother_config(),
                               coarse_tol=self.coarse_tol, coarse_max_iter=self.coarse_max_iter,
                               outer_tol=self.outer_tol, outer_max_cycles=self.outer_max_cycles)

    def replace(self, **changes):
        return RunConfig(**{**asdict(self), **changes})


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key, value):
    kind = _TYPES[key]
    if kind in (bool, "bool"):
        if isinstance(value, bool):
            return value
        v = str(value).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: not a boolean: {value!r}")
    conv = {"int": int, "float": float, "str": str}.get(kind, kind)
    return conv(value)


def read_config_file(path):
    """Parse a flat ``key=value`` file (``#`` comments allowed) into a dict."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string("[run]\n" + text)
    values = {}
    for key, value in parser["run"].items():
        if key not in _TYPES:
            raise ValueError(f"{path}: unknown key {key!r}")
        values[key] = _convert(key, value)
    return values


def add_config_arguments(parser):
    parser.add_argument("--config", type=Path, help="key=value configuration file")
    for f in fields(RunConfig):
        flags = dict.fromkeys(["--" + f.name.replace("_", "-"), "--" + f.name])
        parser.add_argument(*flags, dest=f.name, default=None, metavar=f.name.upper(),
                            type=lambda v, k=f.name: _convert(k, v),
                            help=f"(default {f.default})")
    return parser


def resolve_config(args):
    """Defaults, then the config file, then explicit command-line flags."""
    values = {}
    if getattr(args, "config", None) is not None:
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig(**values)


def parse_config(argv=None):
    parser = add_config_arguments(argparse.ArgumentParser())
    return resolve_config(parser.parse_args(argv))
