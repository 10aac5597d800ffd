import logging
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from importlib import metadata
from pathlib import Path

from rich.logging import RichHandler

from noncanonical_hmc.config_models import ProtocolConfig, TaskProtocol

PROTOCOL_CONFIG_PATH = Path(__file__).parent / "experiments" / "protocol_config.toml"
PYPROJECT_PATH = Path(__file__).parents[2] / "pyproject.toml"
DEFAULT_OUTPUT_ROOT = Path("runs")


def load_protocol_config(config_path: Path = PROTOCOL_CONFIG_PATH) -> ProtocolConfig:
    """Load the experiment protocol defaults from a TOML file.

    Parameters
    ----------
    config_path : Path, optional
        The path to the protocol file, by default PROTOCOL_CONFIG_PATH

    Returns
    -------
    ProtocolConfig
        Protocol defaults per task. Use the instance like:
        returned = load_protocol_config()
        returned.task[Task.LOGISTIC].n_steps
    """
    with open(config_path, "rb") as f:
        data = tomllib.load(f)
    return ProtocolConfig(**data)


def get_task_protocol(task, config_path: Path = PROTOCOL_CONFIG_PATH) -> TaskProtocol:
    protocol = load_protocol_config(config_path)
    if task not in protocol.task:
        raise KeyError(f"No protocol defined for task '{task.value}'")
    return protocol.task[task]


def get_current_version() -> str:
    """Get the current version of the project.

    The version is read from pyproject.toml when running from a checkout and from
    the installed package metadata otherwise.

    Returns
    -------
    str
        The version of the project.
    """
    if PYPROJECT_PATH.exists():
        with open(PYPROJECT_PATH, "rb") as f:
            config = tomllib.load(f)
        return config["project"]["version"]
    return metadata.version("noncanonical_hmc")


def get_output_root() -> Path:
    return Path(os.getenv("NCHMC_OUTPUT_ROOT", str(DEFAULT_OUTPUT_ROOT)))


def setup_root_logger(level: int | str = logging.INFO) -> None:
    """Setup the root logger for the project.
    This function sets up the root logger with a specific format and level.
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    # Some packages have already initialized the root logger, so we need to remove
    # their handlers first.
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # Batch schedulers capture stdout to plain files, where rich markup is noise
    if os.getenv("NCHMC_PLAIN_LOGS") is not None:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(
            logging.Formatter("%(levelname)s: [%(name)s] - %(message)s")
        )
    else:
        console_handler = RichHandler()
        console_handler.setFormatter(
            logging.Formatter(
                "%(message)s",
                datefmt="[%X]",
            )
        )
    root_logger.addHandler(console_handler)
