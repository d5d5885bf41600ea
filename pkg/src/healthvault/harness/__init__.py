"""Benchmark, attack, and recovery-drill orchestration."""

from .procs import AttackScenario, AttackTarget, Cluster, ServiceProcess
from .bench import CostRow, run_benchmark
from .drill import (
    DrillResult,
    EXPECTED_RECOVERABILITY,
    RESILIENCE_VERDICTS,
    run_recovery_drill,
)
from .report import (
    emit_report,
    merge_drills,
    table2_static_matrix,
    verdict_mismatches,
)

__all__ = [
    "AttackScenario",
    "AttackTarget",
    "Cluster",
    "CostRow",
    "DrillResult",
    "EXPECTED_RECOVERABILITY",
    "RESILIENCE_VERDICTS",
    "ServiceProcess",
    "emit_report",
    "merge_drills",
    "run_benchmark",
    "run_recovery_drill",
    "table2_static_matrix",
    "verdict_mismatches",
]
