"""Glue between the frontend stages and the kernel."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .frontend import ast as A
from .frontend.cfg import LoweredProgram, build_cfg
from .frontend.characterize import (DEFAULT_COST_TABLE, BasicBlockRecord, CostTable,
                                    characterize, load_block_db)
from .frontend.parser import parse
from .kernel.codegen import CompiledProgram, compile_program
from .kernel.engine import SimulationResult, run
from .target import TargetConfig

BUNDLED = ("nqueens", "jpeg_pipeline")


@dataclass
class Workload:
    """A parsed, lowered, characterized and compiled workload, ready to run."""

    name: str
    program: A.WorkloadProgram
    lowered: LoweredProgram
    records: list[BasicBlockRecord]
    compiled: CompiledProgram

    def run(self, config: TargetConfig, sink=None) -> SimulationResult:
        return run(self.lowered, self.records, config, sink, self.compiled)


def prepare(source: str, name: str = "workload", costs: CostTable = DEFAULT_COST_TABLE,
            block_db=None) -> Workload:
    program = parse(source)
    lowered = build_cfg(program)
    records = characterize(lowered, costs)
    if block_db is not None:
        records = load_block_db(block_db, records)
    return Workload(name, program, lowered, records, compile_program(lowered))


def prepare_file(path, costs: CostTable = DEFAULT_COST_TABLE, block_db=None) -> Workload:
    path = Path(path)
    source = path.read_text(encoding="utf-8")
    return prepare(source, path.stem, costs, block_db)


def bundled_source(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"no bundled workload {name!r}")
    return resources.files("nativesim.workloads").joinpath(f"{name}.nsc").read_text(encoding="utf-8")


def bundled(name: str, costs: CostTable = DEFAULT_COST_TABLE) -> Workload:
    return prepare(bundled_source(name), name, costs)
