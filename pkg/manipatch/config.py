from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .errors import ProblemSchemaError
from .utils import merge

FILENAME = "manipatch.yml"


def _get_config(path: Union[Path, str]) -> Dict[str, Any]:
    path = Path(path)
    if path.is_dir():
        path = path / FILENAME
    with open(path) as f:
        config = yaml.safe_load(f)
    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ProblemSchemaError(
            f"{path}: a manipatch configuration is a mapping of sections "
            f"(solver, defect, proof, optimizer, ...), got {type(config).__name__}",
            str(path),
        )
    return config


def get_config(path: Optional[Union[Path, str]] = None) -> Dict[str, Any]:
    default_config = _get_config(Path(__file__).parent / "data")
    if path is None:
        path = Path() / FILENAME
        if not path.is_file():
            return default_config
    config = _get_config(path)
    unknown = sorted(set(config) - set(default_config))
    if unknown:
        raise ProblemSchemaError(
            f"{path}: unknown configuration section {unknown[0]!r} "
            f"(sections: {', '.join(default_config)})",
            unknown[0],
        )
    return merge(default_config, config)
