"""Native simulation of annotated C-subset workloads on a virtual multi-core target."""
from .pipeline import Workload, bundled, prepare, prepare_file
from .target import TargetConfig

__all__ = ["TargetConfig", "Workload", "bundled", "prepare", "prepare_file"]
