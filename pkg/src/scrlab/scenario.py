"""Scenario files: JSON description of a specification, X, Y and an input script."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .history import History, Invocation, history_from_json, invocation_from_json
from .openclose import DEFAULT_FD_BOUND, oc_oracle
from .spec import SearchBounds, SpecOracle

BUNDLED = (
    "open_open",
    "open_close",
    "counterexample_s33",
    "pure_replay",
    "divergence_before_Y",
    "divergence_after_Y",
    "three_threads",
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    spec_name: str
    fd_bound: int
    threads: int
    x: History
    y: History
    input_script: tuple[tuple[int, Invocation], ...]
    bounds: SearchBounds
    witness_bound: int
    perturbations: int
    seed: int

    @property
    def oracle(self) -> SpecOracle:
        return oc_oracle(self.fd_bound, self.threads)


def _int(d: dict, key: str, default=None, minimum: int = 0) -> int:
    v = d.get(key, default)
    if v is None:
        raise ScenarioError(f"missing field {key!r}")
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ScenarioError(f"{key!r} must be an integer >= {minimum}, got {v!r}")
    return v


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    try:
        spec = data.get("spec", {})
        if not isinstance(spec, dict) or spec.get("name") != "openclose":
            raise ScenarioError(f"unsupported spec {spec!r}; only 'openclose' is available")
        fd_bound = _int(spec, "fd_bound", DEFAULT_FD_BOUND, minimum=1)
        threads = _int(data, "threads", minimum=1)
        x = history_from_json(data.get("X", []))
        y = history_from_json(data.get("Y", []))
        script = data.get("input_script", [])
        if not isinstance(script, list):
            raise ScenarioError("input_script must be an array")
        input_script = tuple(invocation_from_json(obj) for obj in script)
        b = data.get("bounds", {})
        if not isinstance(b, dict):
            raise ScenarioError("bounds must be an object")
        bounds = SearchBounds(_int(b, "max_region_len", 4), _int(b, "max_suffix_len", 2))
        sc = Scenario(
            name=str(data.get("name", "unnamed")),
            spec_name="openclose",
            fd_bound=fd_bound,
            threads=threads,
            x=x,
            y=y,
            input_script=input_script,
            bounds=bounds,
            witness_bound=_int(data, "witness_bound", 4),
            perturbations=_int(data, "perturbations", 100, minimum=1),
            seed=_int(data, "seed", 0),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    validate(sc)
    return sc


def validate(sc: Scenario) -> None:
    """Load-time checks. SIM commutativity is not checked here: it is the
    verdict of ``check-sim`` and the gate of the oracle machine."""
    o = sc.oracle
    for t, i in sc.input_script:
        if not 0 <= t < sc.threads:
            raise ScenarioError(f"input_script uses thread {t} outside 0..{sc.threads - 1}")
        if i not in o.invocations:
            raise ScenarioError(f"input_script invocation {i} is outside the spec alphabet")
    for a in sc.x + sc.y:
        if not 0 <= a.thread < sc.threads:
            raise ScenarioError(f"history uses thread {a.thread} outside 0..{sc.threads - 1}")
    if not o.member(sc.x + sc.y):
        raise ScenarioError("X ⧺ Y is not a member of the specification")
    if len(sc.y) > sc.bounds.max_region_len:
        raise ScenarioError(f"Y has {len(sc.y)} actions, above max_region_len {sc.bounds.max_region_len}")


def bundled_path(name: str):
    return resources.files("scrlab").joinpath("scenarios", f"{name}.json")


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a path, or by bundled name (``counterexample_s33``)."""
    p = Path(ref)
    if p.exists():
        text = p.read_text(encoding="utf-8")
    elif str(ref) in BUNDLED:
        text = bundled_path(str(ref)).read_text(encoding="utf-8")
    else:
        raise ScenarioError(f"no such scenario file or bundled scenario: {ref}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from exc
    return parse_scenario(data)
