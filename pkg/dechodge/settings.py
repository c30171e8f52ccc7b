"""
Configuration loading for dechodge.

Precedence (lowest to highest): SolverConfig defaults, the key=value config
file, DECHODGE_<KEY> environment variables (a project-root .env is loaded
first), explicit overrides from the CLI.  Fluid keys (nu, kappa, beta, ...)
from the same sources overlay the constants of the chosen exact solution.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from .errors import ConfigError
from .models import FluidParams, SolverConfig

BASE_DIR = Path(__file__).resolve().parent.parent
ENV_PREFIX = "DECHODGE_"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

SOLVER_KEYS = frozenset(SolverConfig.model_fields)
FLUID_KEYS = frozenset(FluidParams.model_fields)

logger = logging.getLogger("settings")


def configure_logging(verbose: bool = False) -> None:
  load_dotenv(BASE_DIR / ".env")
  level_name = "DEBUG" if verbose else os.getenv(ENV_PREFIX + "LOG_LEVEL", "INFO").upper()
  level = getattr(logging, level_name, logging.INFO)
  logging.basicConfig(level=level, format=LOG_FORMAT)


def read_config_file(path: str | Path) -> Dict[str, str]:
  """Parse a flat key=value file; unknown keys are rejected."""
  path = Path(path)
  if not path.is_file():
    raise ConfigError(f"config file not found: {path}")
  raw = dotenv_values(path)
  values: Dict[str, str] = {}
  for key, value in raw.items():
    name = key.strip().lower()
    if name not in SOLVER_KEYS and name not in FLUID_KEYS:
      raise ConfigError(f"unknown config key '{key}' in {path}")
    if value is None or value == "":
      raise ConfigError(f"config key '{key}' in {path} has no value")
    values[name] = value
  return values


def _env_values(keys: frozenset) -> Dict[str, str]:
  load_dotenv(BASE_DIR / ".env")
  out: Dict[str, str] = {}
  for name in keys:
    value = os.getenv(ENV_PREFIX + name.upper())
    if value:
      out[name] = value
  return out


def _merge(keys: frozenset, path: Optional[str | Path], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
  merged: Dict[str, Any] = {}
  if path is not None:
    merged.update({k: v for k, v in read_config_file(path).items() if k in keys})
  merged.update(_env_values(keys))
  if overrides:
    merged.update({k: v for k, v in overrides.items() if k in keys and v is not None})
  return merged


def _build(model, merged: Dict[str, Any]):
  try:
    return model(**merged)
  except ValidationError as exc:
    first = exc.errors()[0]
    key = ".".join(str(p) for p in first.get("loc", ())) or "?"
    raise ConfigError(f"invalid value for '{key}': {first.get('msg')}") from exc


def load_config(path: Optional[str | Path] = None, overrides: Optional[Dict[str, Any]] = None) -> SolverConfig:
  config = _build(SolverConfig, _merge(SOLVER_KEYS, path, overrides))
  logger.debug("solver config: %s", config.model_dump())
  return config


def load_fluid_overrides(
  path: Optional[str | Path] = None,
  overrides: Optional[Dict[str, Any]] = None,
) -> Dict[str, float]:
  """Fluid constants set in the file, the environment or by the caller.

  Only keys given explicitly come back; each problem keeps its own defaults
  for the rest.  Values are validated against FluidParams.
  """
  merged = _merge(FLUID_KEYS, path, overrides)
  fluid = _build(FluidParams, merged)
  values = {key: getattr(fluid, key) for key in merged}
  if values:
    logger.debug("fluid overrides: %s", values)
  return values
