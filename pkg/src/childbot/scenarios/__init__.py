"""Scripted use-case scenarios driven by simulated children."""
from .farm import (
    CLASSES,
    Animal,
    Exhausted,
    FarmGameState,
    InventoryError,
    NoConsistentAnimal,
    chart_functions,
    farm_guess,
    farm_next_characteristic,
    load_animals,
    play_round,
    sentence,
)
from .harness import (
    SCENARIOS,
    USE_CASES,
    RunReport,
    ScenarioDeadlock,
    ScenarioScript,
    check_conformance,
    check_retry_bounds,
    load_agent,
    load_scenario_chart,
    module_of,
    read_trace,
    retry_runs,
    run_all,
    run_scenario,
    simulate,
    summarize,
    trace_bytes,
)
from .sim import AgentSpec, Scheduler

__all__ = [
    "CLASSES", "Animal", "Exhausted", "FarmGameState", "InventoryError", "NoConsistentAnimal",
    "chart_functions", "farm_guess", "farm_next_characteristic", "load_animals", "play_round",
    "sentence", "SCENARIOS", "USE_CASES", "RunReport", "ScenarioDeadlock", "ScenarioScript",
    "check_conformance", "check_retry_bounds", "load_agent", "load_scenario_chart", "module_of",
    "read_trace", "retry_runs", "run_all", "run_scenario", "simulate", "summarize", "trace_bytes",
    "AgentSpec", "Scheduler",
]
