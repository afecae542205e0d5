"""
Run configuration files.

A configuration is an INI file whose [experiment] section holds the top-level
fields and whose other sections map onto the nested settings models; JSON
documents with the same structure are accepted as well.
"""
import configparser
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.nnlift.errors import ConfigurationError
from src.nnlift.models import ExperimentConfig

logger = logging.getLogger(__name__)

TOP_SECTION = "experiment"


def _plain(config: ExperimentConfig) -> Dict[str, Any]:
    return json.loads(config.json())


def parse_ini(text: str) -> Dict[str, Any]:
    """Turn INI text into the nested dictionary the config model expects."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(text)
    data: Dict[str, Any] = {}
    for section in parser.sections():
        values = dict(parser.items(section))
        if section == TOP_SECTION:
            data.update(values)
        else:
            data[section] = values
    return data


def read_config_data(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a configuration file into a dictionary.

    Raises:
        ConfigurationError: If the file cannot be read or parsed
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}") from e
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return parse_ini(text)
    except (json.JSONDecodeError, configparser.Error) as e:
        raise ConfigurationError(f"Cannot parse config {path}: {e}") from e


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load and validate a run configuration.

    Args:
        path: INI or JSON file
        overrides: Top-level fields replacing the file's values (e.g. mode, seed)

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigurationError: If the file cannot be read or parsed
        ValidationError: If a field is missing, unknown or out of range
    """
    data = read_config_data(path)
    data.update(overrides or {})
    config = ExperimentConfig(**data)
    logger.info(f"Loaded {config.mode.value} configuration '{config.label}' from {path}")
    return config


def to_json(config: ExperimentConfig) -> str:
    return json.dumps(_plain(config), indent=2, sort_keys=True)


def _ini_value(value: Any) -> str:
    if isinstance(value, list):
        return ", ".join(repr(item) if isinstance(item, float) else str(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def to_ini(config: ExperimentConfig) -> str:
    """Serialize a configuration to INI text that load_config reads back unchanged."""
    parser = configparser.ConfigParser(interpolation=None)
    top = {}
    sections = {}
    for key, value in _plain(config).items():
        if isinstance(value, dict):
            sections[key] = {k: _ini_value(v) for k, v in value.items() if v is not None}
        elif value is not None:
            top[key] = _ini_value(value)
    parser[TOP_SECTION] = top
    for name, values in sections.items():
        parser[name] = values
    lines = []
    for name in parser.sections():
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {value}" for key, value in parser.items(name))
        lines.append("")
    return "\n".join(lines)
