"""Behavioral simulator of a hybrid analog-CIM / digital token-pruning attention accelerator."""
from cimprune.kernels import BACKEND
from cimprune.sim import SimResult, simulate
from cimprune.workload_io import SimConfig, Workload, generate_workload, load_config, load_workload

__all__ = [
    "BACKEND",
    "SimConfig",
    "SimResult",
    "Workload",
    "generate_workload",
    "load_config",
    "load_workload",
    "simulate",
]
__version__ = "0.1.0"
