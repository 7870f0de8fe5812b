from .config import ENV_PREFIX, ExperimentConfig, load_config

__all__ = ["ENV_PREFIX", "ExperimentConfig", "load_config"]
