"""Command-line front end: configuration parsing and study dispatch."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import ValidationError

from evmlink.link.exceptions import ConfigError, LinkSimError
from evmlink.main import configure_logging
from evmlink.schemas import RunConfig, Study
from evmlink.services.studies import run_study
from evmlink.settings import settings


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STUDY_ERROR = 1
EXIT_CONFIG_ERROR = 2

# Fields with a dedicated typed flag
_COMMON_FIELDS = {"study", "seed", "workers"}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _yaml_value(text: str) -> Any:
    """Parse one flag value as YAML so lists, numbers and booleans keep their type."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        content = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e.strerror}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed config file {path}: {e}")
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ConfigError(f"Config file {path} must hold a mapping of keys to values")
    return content


def parse_config(
    study: Union[str, Study],
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
    defaults: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Resolve the run configuration from a YAML/JSON file and flag overrides.

    Precedence is defaults, then file values, then flags; unset flags are
    ignored. Every value is validated before any computation starts.

    Raises:
        ConfigError: naming the first offending key
    """
    values: Dict[str, Any] = dict(defaults or {})
    if config_path:
        values.update(load_config_file(config_path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    values["study"] = Study(study).value if isinstance(study, Study) else study

    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        # cross-field failures carry their key on the raised error
        key = getattr(error.get("ctx", {}).get("error"), "key", None)
        if key is None and error["loc"]:
            key = str(error["loc"][0])
        raise ConfigError(
            f"Invalid configuration for '{key}': {error['msg']}",
            key=key,
            details={"errors": len(e.errors())}
        )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=settings.CONFIG_FILE, help="YAML or JSON config file")
    common.add_argument("--seed", type=int, default=None, help="Master seed")
    common.add_argument("--out", default=None, help="Output directory (default: $EVMLINK_OUTPUT_DIR)")
    common.add_argument("--workers", type=int, default=None, help="Parallel work units")
    common.add_argument("--log-level", default=None, help="Logging level")

    overrides = common.add_argument_group("overrides")
    for name, field in RunConfig.model_fields.items():
        if name in _COMMON_FIELDS:
            continue
        overrides.add_argument(
            _flag(name), dest=name, type=_yaml_value, default=None,
            help=field.description or name.replace("_", " "),
        )

    parser = argparse.ArgumentParser(
        prog="evmlink",
        description="EVM-based SINR prediction link simulator",
    )
    subparsers = parser.add_subparsers(dest="study", required=True)
    for study in Study:
        subparsers.add_parser(study.value, parents=[common], help=f"run the {study.value} study")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    overrides = {
        name: getattr(args, name, None)
        for name in RunConfig.model_fields
        if name != "study"
    }
    defaults = {"seed": settings.DEFAULT_SEED, "workers": settings.MAX_WORKERS}

    try:
        config = parse_config(args.study, args.config, overrides, defaults)
    except ConfigError as e:
        logger.error(e.message)
        print(f"config error: {e.message}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    out_dir = Path(args.out or settings.OUTPUT_DIR)
    try:
        summary = run_study(config, out_dir)
    except LinkSimError as e:
        print(f"{type(e).__name__}: {e.message}", file=sys.stderr)
        return EXIT_STUDY_ERROR
    print(f"{summary.study}: wrote {len(summary.files)} files to {out_dir}")
    return EXIT_OK
