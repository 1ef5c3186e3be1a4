import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from deepmerge import always_merger

OUTPUT_DIR_ENV = "MANIPATCH_OUTPUT_DIR"


def merge(a: Dict[Any, Any], b: Dict[Any, Any]) -> Dict[Any, Any]:
    c = {}
    always_merger.merge(c, a)
    always_merger.merge(c, b)
    return c


def parse_floats(text: Optional[Union[str, Sequence[float]]]) -> Optional[List[float]]:
    """Parse ``"1.7,0.68"`` (or an already split sequence) into floats."""
    if text is None:
        return None
    if isinstance(text, str):
        parts = [part for part in text.replace(" ", "").split(",") if part]
        return [float(part) for part in parts]
    return [float(value) for value in text]


def resolve_output_dir(config: Dict[str, Any], override: Optional[Path] = None) -> Path:
    """CLI flag, then environment variable, then configuration file."""
    if override is not None:
        return Path(override)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(config["output"]["directory"])
