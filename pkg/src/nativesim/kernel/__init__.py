from .engine import (BlockExecutionCounters, DeadlockError, SimulationResult, Simulation,
                     WorkloadError, block_time, run)

__all__ = ["BlockExecutionCounters", "DeadlockError", "Simulation", "SimulationResult",
           "WorkloadError", "block_time", "run"]
