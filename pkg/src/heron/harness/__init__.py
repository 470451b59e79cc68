from .config import (ConfigError, ExperimentConfig, ShiftSpec, config_from_dict, config_to_dict,
                     dump_config, load_config, parse_config, save_config)
from .experiment import (EvalResult, evaluate, output_root, random_policy, read_metrics,
                         return_ratio, run_experiment, run_seed)
from .persist import load_policy, save_policy
from .studies import (ablate_alpha, ablate_delta, export_plots, first_vs_last_study,
                      flexibility_study, robustness_study)

__all__ = [
    "ConfigError", "ExperimentConfig", "ShiftSpec", "config_from_dict", "config_to_dict",
    "dump_config", "load_config", "parse_config", "save_config", "EvalResult", "evaluate",
    "output_root", "random_policy", "read_metrics", "return_ratio", "run_experiment", "run_seed",
    "load_policy", "save_policy", "ablate_alpha", "ablate_delta", "export_plots",
    "first_vs_last_study", "flexibility_study", "robustness_study",
]
