from ces.pipeline.config import (ConfigError, load_config, load_preset,
                                 validate_config)
from ces.pipeline.manifest import RunManifest, config_hash
from ces.pipeline.problems import ProblemBundle, build_problem
from ces.pipeline.runner import (cmd_calibrate, cmd_darcy_uq, cmd_emulate,
                                 cmd_run, cmd_sample)

__all__ = [
    "ConfigError",
    "load_config",
    "load_preset",
    "validate_config",
    "RunManifest",
    "config_hash",
    "ProblemBundle",
    "build_problem",
    "cmd_calibrate",
    "cmd_emulate",
    "cmd_sample",
    "cmd_run",
    "cmd_darcy_uq",
]
