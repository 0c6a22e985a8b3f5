from ragrec.runner.config import (ConfigError, ExperimentConfig,
                                  experiment_hash, load_config)
from ragrec.runner.controller import Controller, RunSummary, prepare
from ragrec.runner.observer import Observer
from ragrec.runner.report import report
