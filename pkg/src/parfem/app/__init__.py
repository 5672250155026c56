"""Drivers behind the ``parfem`` command line."""
from .bench import run_bench
from .classify import run_classify
from .config import RunConfig
from .export import export_matrixmarket, run_export
from .heat import ModelProblem, RunMetrics, run_heat

__all__ = ["RunConfig", "ModelProblem", "RunMetrics", "run_heat", "run_classify", "run_bench",
           "export_matrixmarket", "run_export"]
