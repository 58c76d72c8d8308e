"""Bundled scenario files and the JSON scenario loader.

A scenario is a flat JSON object.  ``spec``, ``x0`` and ``u_max`` are
required; everything else falls back to the controller defaults::

    {"name": "conflict", "spec": "F[0,5](x>=10 & x<=11) & ...",
     "x0": [8], "u_max": 2, "dt": 0.05, "alpha_gain": 1}
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from ..controller import ScenarioConfig
from ..stl import parse_spec
from ..stl.parser import parse_bounds

_FIELDS = {
    "name": str,
    "description": str,
    "spec": str,
    "x0": list,
    "u_max": (int, float),
    "dt": (int, float),
    "beta": (int, float),
    "alpha_gain": (int, float),
    "facets": int,
    "relax_secondary": bool,
    "relax_penalty": (int, float),
    "dwell_credit": bool,
    "align_head": bool,
    "pin": dict,
    "horizon": (int, float),
    "bounds": dict,
    "variables": list,
}
_REQUIRED = ("spec", "x0", "u_max")
_PASSTHROUGH = ("dt", "beta", "alpha_gain", "facets", "relax_secondary", "relax_penalty", "dwell_credit", "align_head", "horizon")


class ScenarioError(ValueError):
    pass


def bundled() -> list[str]:
    """Names of the scenarios shipped with the package."""
    root = resources.files(__name__)
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read(source: str | Path) -> dict[str, Any]:
    """Raw JSON document for a file path or a bundled scenario name."""
    path = Path(source)
    if path.suffix != ".json" and not path.exists():
        if str(source) not in bundled():
            raise ScenarioError(f"no scenario file or bundled scenario named '{source}'")
        text = resources.files(__name__).joinpath(f"{source}.json").read_text(encoding="utf-8")
    else:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: a scenario must be a JSON object")
    return doc


def _check(doc: Mapping[str, Any]) -> None:
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise ScenarioError(f"unknown scenario field(s): {', '.join(unknown)}")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise ScenarioError(f"missing scenario field(s): {', '.join(missing)}")
    for key, value in doc.items():
        kind = _FIELDS[key]
        if isinstance(value, bool) and kind is not bool:
            raise ScenarioError(f"field '{key}' has the wrong type")
        if not isinstance(value, kind):
            raise ScenarioError(f"field '{key}' has the wrong type")


def from_dict(doc: Mapping[str, Any], **overrides) -> ScenarioConfig:
    """Build a ``ScenarioConfig``; ``overrides`` (not None) replace file values."""
    doc = dict(doc)
    doc.update({k: v for k, v in overrides.items() if v is not None})
    _check(doc)
    variables = tuple(doc["variables"]) if "variables" in doc else None
    spec = parse_spec(doc["spec"], bounds=parse_bounds(doc.get("bounds")), variables=variables)
    pin = {int(k): int(v) for k, v in doc.get("pin", {}).items()}
    kwargs = {k: doc[k] for k in _PASSTHROUGH if k in doc}
    return ScenarioConfig(spec, doc["x0"], float(doc["u_max"]), pin=pin or None, name=doc.get("name", ""), **kwargs)


def load(source: str | Path, **overrides) -> ScenarioConfig:
    return from_dict(read(source), **overrides)
