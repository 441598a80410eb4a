"""
Configuration module for the Kou PIDCP engine
Handles environment variables (.env) and TOML run files, producing a RunConfig
"""

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from models.kou_model import PARAM_KEYS, KouParams
from models.run_models import RunConfig, Variant

logger = logging.getLogger(__name__)

DEFAULT_LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

RUN_KEYS = (
    "m", "smax_multiple", "variant", "N", "N_list", "roi_low", "roi_high",
    "output_dir", "cache_dir", "reference_N", "reference_variant", "ladder",
    "time_grid", "start",
)
SECTIONS = ("model", "grid", "run")


@dataclass(frozen=True)
class EnvSettings:
    """Process-level settings read from the environment"""
    log_level: str = "INFO"
    log_format: str = DEFAULT_LOG_FORMAT
    config_path: Optional[Path] = None
    output_dir: Path = Path("output")
    cache_dir: Path = Path(".cache/reference")
    run_slow: bool = False


def load_environment() -> EnvSettings:
    """Load .env (if present) and read the engine's environment keys"""
    load_dotenv()
    config_path = os.environ.get('KOU2D_CONFIG')
    return EnvSettings(
        log_level=os.environ.get('LOG_LEVEL', 'INFO').upper(),
        log_format=os.environ.get('LOG_FORMAT', DEFAULT_LOG_FORMAT),
        config_path=Path(config_path) if config_path else None,
        output_dir=Path(os.environ.get('KOU2D_OUTPUT_DIR', 'output')),
        cache_dir=Path(os.environ.get('KOU2D_CACHE_DIR', '.cache/reference')),
        run_slow=os.environ.get('KOU2D_RUN_SLOW', 'false').lower() == 'true',
    )


def flatten_sections(data: Dict[str, Any]) -> Dict[str, Any]:
    """Merge one level of [model]/[grid]/[run] tables into a flat mapping"""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in SECTIONS:
                raise ValueError(f"Unknown config section [{key}] (expected one of {SECTIONS})")
            for inner_key, inner_value in value.items():
                if isinstance(inner_value, dict):
                    raise ValueError(f"Nested table [{key}.{inner_key}] is not supported")
                if inner_key in flat:
                    raise ValueError(f"Duplicate config key: {inner_key}")
                flat[inner_key] = inner_value
        else:
            if key in flat:
                raise ValueError(f"Duplicate config key: {key}")
            flat[key] = value
    return flat


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Parse a TOML run file into flat key/value pairs"""
    path = Path(path)
    logger.debug(f"Reading config file {path}")
    with path.open('rb') as fh:
        data = tomllib.load(fh)
    flat = flatten_sections(data)
    unknown = set(flat) - set(PARAM_KEYS) - set(RUN_KEYS)
    if unknown:
        raise ValueError(f"Unknown config keys in {path}: {sorted(unknown)}")
    return flat


def _coerce_run_values(values: Dict[str, Any]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for key, value in values.items():
        if key in ("variant", "reference_variant"):
            out[key] = Variant.parse(value)
        elif key in ("m", "N", "reference_N"):
            if int(value) != value:
                raise ValueError(f"{key} must be an integer, got {value}")
            out[key] = int(value)
        elif key == "N_list":
            out[key] = tuple(int(n) for n in value)
        elif key == "ladder":
            pairs = tuple(tuple(int(x) for x in pair) for pair in value)
            if any(len(pair) != 2 for pair in pairs):
                raise ValueError(f"ladder entries must be [m, N] pairs, got {value}")
            out[key] = pairs
        elif key in ("output_dir", "cache_dir"):
            out[key] = Path(value)
        elif key in ("smax_multiple", "roi_low", "roi_high"):
            out[key] = float(value)
        else:
            out[key] = value
    return out


def build_run_config(values: Dict[str, Any], env: Optional[EnvSettings] = None,
                     **overrides) -> RunConfig:
    """Combine built-in defaults < environment < file values < overrides"""
    env = env or EnvSettings()
    unknown = set(values) - set(PARAM_KEYS) - set(RUN_KEYS)
    if unknown:
        raise ValueError(f"Unknown config keys: {sorted(unknown)}")

    params = KouParams.from_dict({k: v for k, v in values.items() if k in PARAM_KEYS})
    run_values = {'output_dir': env.output_dir, 'cache_dir': env.cache_dir}
    run_values.update(_coerce_run_values({k: v for k, v in values.items() if k in RUN_KEYS}))
    run_values.update(_coerce_run_values({k: v for k, v in overrides.items() if v is not None}))
    return RunConfig(params=params, **run_values)


def load_run_config(path: Optional[Union[str, Path]] = None, env: Optional[EnvSettings] = None,
                    **overrides) -> RunConfig:
    """Load the run configuration from the file at `path` (or KOU2D_CONFIG) plus overrides"""
    env = env or load_environment()
    path = path or env.config_path
    values = read_config_file(path) if path else {}
    config = build_run_config(values, env, **overrides)
    logger.debug(f"Run config: m={config.m} N={config.N} variant={config.variant.label}")
    return config
