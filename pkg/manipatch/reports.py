"""Files written by the command line: coefficients, JSON reports and CSV tables.

Every float is written with 17 significant digits so that identical runs give
identical files.
"""
import json
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ProblemSchemaError
from .parameterization import Parameterization
from .series import Scaling, VectorSeq, enumerate_multiindices

COEFFICIENTS_SCHEMA = 1
FLOAT_FORMAT = "%.17g"


def _plain(value: Any) -> Any:
    """numpy scalars and arrays as JSON types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
    return path


def write_table(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_coefficients(par: Parameterization, path: Union[str, Path]) -> Path:
    """One ``[alpha, re, im]`` entry per multi-index, ``re`` and ``im`` of length n."""
    a = par.coeffs
    entries = [
        [list(map(int, alpha)), a.values[:, k].real.tolist(), a.values[:, k].imag.tolist()]
        for k, alpha in enumerate(a.ordering.indices)
    ]
    return write_json(
        {
            "schema": COEFFICIENTS_SCHEMA,
            "problem": par.problem.name,
            "n": a.n,
            "n_s": a.n_s,
            "N": a.max_order,
            "gamma": list(par.gamma.gamma),
            "pairing": [list(p) for p in par.gamma.pairing],
            "coefficients": entries,
        },
        path,
    )


def read_coefficients(path: Union[str, Path]) -> Tuple[VectorSeq, Scaling, Dict[str, Any]]:
    """Coefficients, their scaling and the remaining header fields."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ProblemSchemaError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}", f"line {e.lineno}"
        ) from e
    for key in ("schema", "n", "n_s", "N", "gamma", "coefficients"):
        if key not in data:
            raise ProblemSchemaError(f"{path}: missing field {key!r}", key)
    if data["schema"] != COEFFICIENTS_SCHEMA:
        raise ProblemSchemaError(f"{path}: unsupported schema {data['schema']}", "schema")

    ordering = enumerate_multiindices(data["n_s"], data["N"])
    values = np.zeros((data["n"], ordering.count), dtype=np.complex128)
    for index, entry in enumerate(data["coefficients"]):
        try:
            alpha, re, im = entry
            values[:, ordering.position(alpha)] = np.asarray(re) + 1j * np.asarray(im)
        except (KeyError, ValueError, TypeError) as e:
            raise ProblemSchemaError(
                f"{path}: bad coefficient entry {index}: {e}", f"coefficients -> {index}"
            ) from e
    pairing = tuple(tuple(p) for p in data.get("pairing", ()))
    header = {k: v for k, v in data.items() if k != "coefficients"}
    return VectorSeq(ordering, values), Scaling(tuple(data["gamma"]), pairing), header


def residual_summary(par: Parameterization) -> Dict[str, Any]:
    """Defect, per-component residual norms and the largest residual per order."""
    F = par.residual_values
    orders = F.ordering.orders
    by_order = [
        float(np.abs(F.values[:, orders == k]).max(initial=0.0))
        for k in range(F.max_order)
    ]
    return {
        "problem": par.problem.name,
        "N": par.N,
        "gamma": list(par.gamma.gamma),
        "defect": F.norm(),
        "component_norms": F.component_norms().tolist(),
        "max_residual_by_order": by_order,
        "coefficient_norm": par.coeffs.norm(),
        "symmetry_residue": par.symmetry_residue(),
    }
