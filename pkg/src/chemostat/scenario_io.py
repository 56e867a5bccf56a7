"""Scenario files and structured reports.

Scenario documents are JSON with exact keys::

    {
      "version": 1,
      "s0": 3.0,
      "d": 1.0,
      "species": [
        {"label": "sp1",
         "growth": {"family": "monod", "params": {"a": 2.0, "b": 1.0}},
         "yield":  {"family": "constant", "params": {"Y": 1.0}},
         "removal": 1.0}
      ],
      "initial": {"s": 3.0, "x": [0.1]},
      "solver":  {"rtol": 1e-8, "atol": 1e-10, "t_end": 200.0},
      "checker": {"grid_n": 4096, "tol": 1e-8}
    }

solver and checker blocks are optional overrides.  Parsing is strict by
default: unknown keys are rejected so silent typos cannot corrupt a
study; lenient mode downgrades them to warnings.

Reports are JSON documents with sorted keys and full-precision floats,
so identical runs produce byte-identical files apart from the provenance
timestamp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import ChemostatError, ValidationError
from .model import (
    GROWTH_FAMILIES,
    YIELD_FAMILIES,
    Scenario,
    Species,
    Violation,
    require_valid,
)

__all__ = [
    "ScenarioFormatError",
    "ScenarioDocument",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario_file",
    "report_to_text",
    "write_report",
    "make_provenance",
]

TOOL_VERSION = "0.1.0"

_TOP_KEYS = {"version", "s0", "d", "species", "initial", "solver", "checker"}
_SPECIES_KEYS = {"label", "growth", "yield", "removal"}
_LAW_KEYS = {"family", "params"}
_INITIAL_KEYS = {"s", "x"}
_SOLVER_KEYS = {"rtol", "atol", "t_end"}
_CHECKER_KEYS = {"grid_n", "tol"}
_GROWTH_PARAM_KEYS = {
    "monod": {"a", "b"},
    "haldane": {"a", "b", "c"},
    "piecewise_linear": {"knots"},
}
_YIELD_PARAM_KEYS = {
    "constant": {"Y"},
    "linear": {"A", "B"},
    "quadratic": {"A", "B"},
}


class ScenarioFormatError(ChemostatError, ValueError):
    """The document does not match the scenario schema."""


@dataclass
class ScenarioDocument:
    """A parsed scenario plus its optional override blocks."""

    scenario: Scenario
    solver: dict = field(default_factory=dict)
    checker: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _require_keys(d: dict, allowed: set[str], where: str, strict: bool, warnings: list[str]):
    unknown = sorted(set(d) - allowed)
    if unknown:
        msg = f"unknown key(s) {unknown} in {where}"
        if strict:
            raise ScenarioFormatError(msg)
        warnings.append(msg)


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ScenarioFormatError(f"missing required key {key!r} in {where}")
    return d[key]


def _law_from_dict(d: dict, families: dict, param_keys: dict, where: str, strict, warnings):
    if not isinstance(d, dict):
        raise ScenarioFormatError(f"{where} must be an object")
    _require_keys(d, _LAW_KEYS, where, strict, warnings)
    family = _need(d, "family", where)
    if family not in families:
        raise ScenarioFormatError(
            f"{where}: unknown family {family!r} (expected one of {sorted(families)})"
        )
    params = _need(d, "params", where)
    if not isinstance(params, dict):
        raise ScenarioFormatError(f"{where}.params must be an object")
    _require_keys(params, param_keys[family], f"{where}.params", strict, warnings)
    missing = sorted(param_keys[family] - set(params))
    if missing:
        raise ScenarioFormatError(f"{where}.params is missing {missing}")
    return families[family](**params)


def scenario_from_dict(doc: dict, strict: bool = True) -> ScenarioDocument:
    """Build a validated scenario from a parsed JSON document.

    Raises ScenarioFormatError for schema problems and ValidationError
    (with the complete violation list) for semantic ones.
    """
    warnings: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario document must be a JSON object")
    _require_keys(doc, _TOP_KEYS, "scenario", strict, warnings)
    version = doc.get("version", 1)
    if version != 1:
        raise ScenarioFormatError(f"unsupported scenario version {version!r}")

    s0 = _need(doc, "s0", "scenario")
    d = _need(doc, "d", "scenario")
    species_docs = _need(doc, "species", "scenario")
    if not isinstance(species_docs, list) or not species_docs:
        raise ScenarioFormatError("scenario.species must be a non-empty array")

    species = []
    for idx, sd in enumerate(species_docs):
        where = f"species[{idx}]"
        if not isinstance(sd, dict):
            raise ScenarioFormatError(f"{where} must be an object")
        _require_keys(sd, _SPECIES_KEYS, where, strict, warnings)
        growth = _law_from_dict(
            _need(sd, "growth", where), GROWTH_FAMILIES, _GROWTH_PARAM_KEYS,
            f"{where}.growth", strict, warnings,
        )
        yld = _law_from_dict(
            _need(sd, "yield", where), YIELD_FAMILIES, _YIELD_PARAM_KEYS,
            f"{where}.yield", strict, warnings,
        )
        species.append(
            Species(
                label=str(sd.get("label", f"species-{idx + 1}")),
                growth=growth,
                yld=yld,
                removal=float(_need(sd, "removal", where)),
            )
        )

    initial = _need(doc, "initial", "scenario")
    if not isinstance(initial, dict):
        raise ScenarioFormatError("scenario.initial must be an object")
    _require_keys(initial, _INITIAL_KEYS, "initial", strict, warnings)
    x = _need(initial, "x", "initial")
    if not isinstance(x, list):
        raise ScenarioFormatError("initial.x must be an array")
    if len(x) != len(species):
        raise ValidationError(
            [Violation("initial.x", f"expected {len(species)} entries, got {len(x)}")]
        )

    solver = doc.get("solver", {})
    checker = doc.get("checker", {})
    if not isinstance(solver, dict):
        raise ScenarioFormatError("scenario.solver must be an object")
    if not isinstance(checker, dict):
        raise ScenarioFormatError("scenario.checker must be an object")
    _require_keys(solver, _SOLVER_KEYS, "solver", strict, warnings)
    _require_keys(checker, _CHECKER_KEYS, "checker", strict, warnings)

    sc = Scenario(
        inflow=float(s0),
        dilution=float(d),
        species=tuple(species),
        initial_s=float(_need(initial, "s", "initial")),
        initial_x=tuple(float(v) for v in x),
    )
    require_valid(sc)
    return ScenarioDocument(
        scenario=sc, solver=dict(solver), checker=dict(checker), warnings=warnings
    )


def scenario_to_dict(sc: Scenario, solver: dict | None = None, checker: dict | None = None) -> dict:
    """Serialize a scenario back to its document form."""
    doc = {
        "version": 1,
        "s0": sc.inflow,
        "d": sc.dilution,
        "species": [
            {
                "label": sp.label,
                "growth": {"family": sp.growth.family, "params": sp.growth.params()},
                "yield": {"family": sp.yld.family, "params": sp.yld.params()},
                "removal": sp.removal,
            }
            for sp in sc.species
        ],
        "initial": {"s": sc.initial_s, "x": list(sc.initial_x)},
    }
    if solver:
        doc["solver"] = dict(solver)
    if checker:
        doc["checker"] = dict(checker)
    return doc


def load_scenario_file(path: str, lenient: bool = False) -> ScenarioDocument:
    """Read and validate a scenario file.

    JSON syntax errors are re-raised as ScenarioFormatError carrying the
    line/column of the problem.
    """
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return scenario_from_dict(doc, strict=not lenient)


# -- reports -------------------------------------------------------------------


def make_provenance(seed=None, tolerances: dict | None = None) -> dict:
    """Provenance block attached to every report.

    The timestamp is the only field allowed to differ between reruns of
    an identical command.
    """
    return {
        "tool": "chemostat",
        "version": TOOL_VERSION,
        "seed": seed,
        "tolerances": tolerances or {},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def report_to_text(report: dict) -> str:
    """Render a report dict as deterministic, diff-friendly JSON."""
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_report(report: dict, path: str | None) -> str:
    """Write a report to path (or return only) and hand back the text."""
    text = report_to_text(report)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text
