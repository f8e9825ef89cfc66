"""JSON wire formats: problem instances and operator matrix files.

A problem instance carries the subsystem dimensions, the target state
(either a named factory or an explicit amplitude list), the neighborhoods,
and optional tolerance / gains-policy overrides. Complex numbers are always
[re, im] pairs; subsystem indices are 0-based.

Example instance::

    {
      "dims": [2, 2, 2, 2],
      "state": "psi_t",
      "neighborhoods": [[0, 1, 2], [1, 2, 3]],
      "tolerance": 1e-10,
      "gains_policy": "uniform"
    }

``state`` may be a name ("ghz", "w", "psi_t"), an object such as
{"name": "graph", "edges": [[0, 1], [1, 2]]}, or a list of [re, im]
amplitude pairs of length prod(dims).

Operator matrix files are {"meta": {...}, "matrix": [[[re, im], ...], ...]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .tensor import (
    DimensionMismatchError,
    LocalityPattern,
    Neighborhood,
    PureState,
    TensorSpace,
    make_dicke_4_2,
    make_ghz,
    make_graph_state,
    make_w,
)

__all__ = [
    "InstanceFormatError",
    "ProblemInstance",
    "parse_instance",
    "load_instance",
    "pairs_to_array",
    "array_to_pairs",
    "write_operator_file",
    "read_operator_file",
]


class InstanceFormatError(ValueError):
    """The instance or matrix file is structurally malformed."""


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Parsed problem data ready for the analysis pipeline."""

    space: TensorSpace
    state: PureState
    pattern: LocalityPattern
    tolerance: float | None
    gains_policy: str
    gain_scale: float | None
    state_label: str


def pairs_to_array(pairs: Any, what: str = "value") -> np.ndarray:
    """Convert nested [re, im] pairs to a complex array (1-D or 2-D)."""
    try:
        arr = np.asarray(pairs, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"{what}: expected [re, im] pairs: {exc}") from exc
    if arr.ndim < 2 or arr.shape[-1] != 2:
        raise InstanceFormatError(
            f"{what}: expected [re, im] pairs, got shape {arr.shape}"
        )
    return arr[..., 0] + 1j * arr[..., 1]


def array_to_pairs(arr: np.ndarray) -> list:
    """Inverse of :func:`pairs_to_array`."""
    arr = np.asarray(arr, dtype=complex)
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def _require(data: dict, key: str):
    if key not in data:
        raise InstanceFormatError(f"instance is missing the required key {key!r}")
    return data[key]


def _build_state(space: TensorSpace, descriptor: Any) -> tuple[PureState, str]:
    dims = space.dims
    n = space.n_subsystems

    def require_qubits(name: str):
        if any(d != 2 for d in dims):
            raise DimensionMismatchError(
                f"state {name!r} needs all subsystem dimensions equal to 2, "
                f"got {list(dims)}"
            )

    if isinstance(descriptor, str):
        name, extra = descriptor, {}
    elif isinstance(descriptor, dict):
        if "amplitudes" in descriptor:
            return _explicit_state(space, descriptor["amplitudes"]), "amplitudes"
        name = descriptor.get("name")
        if not isinstance(name, str):
            raise InstanceFormatError("state object needs a string 'name' field")
        extra = descriptor
    elif isinstance(descriptor, list):
        return _explicit_state(space, descriptor), "amplitudes"
    else:
        raise InstanceFormatError(f"unsupported state descriptor {descriptor!r}")

    if name == "ghz":
        require_qubits(name)
        return make_ghz(n), name
    if name == "w":
        require_qubits(name)
        return make_w(n), name
    if name == "psi_t":
        if dims != (2, 2, 2, 2):
            raise DimensionMismatchError(
                f"state 'psi_t' is a 4-qubit state; dims are {list(dims)}"
            )
        return make_dicke_4_2(), name
    if name == "graph":
        require_qubits(name)
        edges = extra.get("edges")
        if edges is None:
            raise InstanceFormatError("graph state needs an 'edges' list")
        try:
            edge_pairs = [(int(u), int(v)) for u, v in edges]
        except (TypeError, ValueError) as exc:
            raise InstanceFormatError(f"malformed edge list: {exc}") from exc
        try:
            return make_graph_state(n, edge_pairs), name
        except ValueError as exc:
            raise InstanceFormatError(str(exc)) from exc
    raise InstanceFormatError(
        f"unknown state name {name!r} (use ghz, w, graph, psi_t, or amplitudes)"
    )


def _explicit_state(space: TensorSpace, amplitudes: Any) -> PureState:
    amps = pairs_to_array(amplitudes, "state amplitudes")
    if amps.ndim != 1:
        raise InstanceFormatError("state amplitudes must be a flat list of pairs")
    if amps.size != space.dim:
        raise DimensionMismatchError(
            f"amplitude list has length {amps.size}, but prod(dims) is {space.dim}"
        )
    try:
        return PureState(space, amps)
    except DimensionMismatchError:
        raise
    except ValueError as exc:
        raise InstanceFormatError(f"invalid state amplitudes: {exc}") from exc


def parse_instance(data: Any) -> ProblemInstance:
    """Validate raw JSON data and construct the typed problem instance.

    Structural problems raise :class:`InstanceFormatError`; size and index
    inconsistencies raise :class:`DimensionMismatchError` so callers can
    distinguish the two failure classes.
    """
    if not isinstance(data, dict):
        raise InstanceFormatError("instance must be a JSON object")
    raw_dims = _require(data, "dims")
    try:
        dims = tuple(int(d) for d in raw_dims)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"malformed dims: {exc}") from exc
    try:
        space = TensorSpace(dims)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc

    state, label = _build_state(space, _require(data, "state"))

    raw_hoods = _require(data, "neighborhoods")
    if not isinstance(raw_hoods, list) or not raw_hoods:
        raise InstanceFormatError("neighborhoods must be a non-empty list of lists")
    hoods = []
    for entry in raw_hoods:
        try:
            hoods.append(Neighborhood(tuple(int(a) for a in entry)))
        except (TypeError, ValueError) as exc:
            raise InstanceFormatError(f"malformed neighborhood {entry!r}: {exc}") from exc
    pattern = LocalityPattern(space, tuple(hoods))

    tolerance = data.get("tolerance")
    if tolerance is not None:
        try:
            tolerance = float(tolerance)
        except (TypeError, ValueError) as exc:
            raise InstanceFormatError(f"malformed tolerance: {exc}") from exc
        if not (0.0 < tolerance < 1.0):
            raise InstanceFormatError("tolerance must lie strictly between 0 and 1")

    gains_policy = data.get("gains_policy", "uniform")
    if gains_policy not in ("uniform", "graded"):
        raise InstanceFormatError(
            f"unknown gains_policy {gains_policy!r} (use 'uniform' or 'graded')"
        )
    gain_scale = data.get("gain_scale")
    if gain_scale is not None:
        try:
            gain_scale = float(gain_scale)
        except (TypeError, ValueError) as exc:
            raise InstanceFormatError(f"malformed gain_scale: {exc}") from exc
        if gain_scale <= 0.0:
            raise InstanceFormatError("gain_scale must be strictly positive")
    return ProblemInstance(
        space, state, pattern, tolerance, gains_policy, gain_scale, label
    )


def load_instance(path: str | Path) -> ProblemInstance:
    """Read and parse an instance file; JSON errors keep their location info."""
    text = Path(path).read_text()
    data = json.loads(text)
    return parse_instance(data)


def write_operator_file(path: str | Path, matrix: np.ndarray, meta: dict) -> None:
    payload = {"meta": meta, "matrix": array_to_pairs(np.asarray(matrix, complex))}
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def read_operator_file(path: str | Path) -> tuple[np.ndarray, dict]:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or "matrix" not in data:
        raise InstanceFormatError(f"{path}: not an operator file (no 'matrix' key)")
    matrix = pairs_to_array(data["matrix"], "matrix")
    if matrix.ndim != 2:
        raise InstanceFormatError(f"{path}: matrix must be two-dimensional")
    return matrix, data.get("meta", {})
