from .scripted import DemonstratorParams, IntervenorConfig, ReachScript, ScriptedIntervenor, insert_action
from .demos import (
    BASELINE_WINDOW,
    InsertDemoData,
    InsertDemoEpisode,
    build_demo_buffer,
    generate_insert_demos,
    generate_reach_demos,
    insert_demos_as_reach_set,
    run_insert_demo_episode,
)
from .training import (
    METHODS,
    ExperimentConfig,
    OnlineTrainer,
    RunArtifacts,
    make_sim_config,
    prepare_reach_policy,
    run_training,
)
from .evaluate import EVAL_SEED_BASE, EvalRow, eval_from_run_dir, run_eval
from .report import (
    MetricsReport,
    ReportError,
    export_report,
    first_zero_intervention_success,
    intervention_windows,
    write_report,
    write_series_csv,
)

__all__ = [
    "BASELINE_WINDOW",
    "DemonstratorParams",
    "EVAL_SEED_BASE",
    "EvalRow",
    "ExperimentConfig",
    "InsertDemoData",
    "InsertDemoEpisode",
    "IntervenorConfig",
    "METHODS",
    "MetricsReport",
    "OnlineTrainer",
    "ReachScript",
    "ReportError",
    "RunArtifacts",
    "ScriptedIntervenor",
    "build_demo_buffer",
    "eval_from_run_dir",
    "export_report",
    "first_zero_intervention_success",
    "generate_insert_demos",
    "generate_reach_demos",
    "insert_action",
    "insert_demos_as_reach_set",
    "intervention_windows",
    "make_sim_config",
    "prepare_reach_policy",
    "run_eval",
    "run_insert_demo_episode",
    "run_training",
    "write_report",
    "write_series_csv",
]
