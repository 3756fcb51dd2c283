"""Scenario files: sectioned key=value text (or JSON) describing one run.

Example::

    [scenario]
    model = canonical
    task = flat-css
    out = runs/r28

    [params]
    R = 28

    [mesh]
    kind = interval
    L = 5
    n_el = 64

    [task]
    guess = 400, 10, 0.5, 1
    label = fcss-r28

Unknown sections or malformed lines are rejected with their line number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ScenarioError
from .fem import assemble_operators, build_interval_mesh, build_rect_mesh
from .params import ParameterSet

TASKS = ("flat-css", "branch", "spectrum", "path", "skiba", "simulate")
MODELS = ("canonical", "private")
SECTIONS = ("scenario", "params", "mesh", "task")


@dataclass
class Scenario:
    model: str = "canonical"
    task: str = ""
    out: str = "out"
    params: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def validate(self):
        if self.model not in MODELS:
            raise ScenarioError(f"unknown model {self.model!r} "
                                f"(expected one of {MODELS})")
        if self.task not in TASKS:
            raise ScenarioError(
                f"missing or unknown task {self.task!r} (expected one of {TASKS})")
        kind = self.mesh.get("kind", "interval")
        if kind not in ("interval", "rect"):
            raise ScenarioError(f"unknown mesh kind {kind!r}")
        return self

    def parameter_set(self) -> ParameterSet:
        return ParameterSet().with_(**{k: float(v)
                                       for k, v in self.params.items()})

    def build_operators(self):
        m = self.mesh
        kind = m.get("kind", "interval")
        L = float(m.get("L", 5.0))
        if kind == "interval":
            mesh = build_interval_mesh(L, int(m.get("n_el", 64)))
        else:
            mesh = build_rect_mesh(L, int(m.get("nx", 40)), int(m.get("ny", 34)))
        return assemble_operators(mesh)

    def resolved(self) -> dict:
        return {
            "model": self.model,
            "task": self.task,
            "out": str(self.out),
            "params": self.parameter_set().as_dict(),
            "mesh": {"kind": self.mesh.get("kind", "interval"),
                     **{k: v for k, v in self.mesh.items() if k != "kind"}},
            "options": dict(self.options),
        }


def _coerce(value: str):
    value = value.strip()
    try:
        f = float(value)
        return int(f) if f.is_integer() and "." not in value and "e" not in value.lower() else f
    except ValueError:
        return value


def parse_scenario_text(text: str) -> Scenario:
    scn = Scenario()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ScenarioError(f"unknown section [{section}]", line=lineno)
            continue
        if section is None:
            raise ScenarioError("content before any [section]", line=lineno)
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {raw.strip()!r}",
                                line=lineno)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if section == "scenario":
            if key not in ("model", "task", "out"):
                raise ScenarioError(f"unknown scenario key {key!r}", line=lineno)
            setattr(scn, key, value)
        elif section == "params":
            scn.params[key] = value
        elif section == "mesh":
            scn.mesh[key] = _coerce(value) if key != "kind" else value
        else:
            scn.options[key] = _coerce(value)
    return scn.validate()


def scenario_from_dict(obj: dict) -> Scenario:
    inner = obj.get("scenario")
    if isinstance(inner, dict) and ("params" in inner or "mesh" in inner
                                    or "options" in inner):
        obj = inner  # manifest style: everything under "scenario"
    scn = Scenario()
    head = obj.get("scenario", {})
    for key in ("model", "task", "out"):
        if key in head:
            setattr(scn, key, head[key])
        if key in obj and isinstance(obj.get(key), str):
            setattr(scn, key, obj[key])
    scn.params = dict(obj.get("params", {}))
    scn.mesh = dict(obj.get("mesh", {}))
    scn.options = dict(obj.get("task", {})) if isinstance(obj.get("task"), dict) \
        else dict(obj.get("options", {}))
    if isinstance(obj.get("task"), str):
        scn.task = obj["task"]
    return scn.validate()


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return scenario_from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"bad JSON scenario: {exc}", line=exc.lineno)
    return parse_scenario_text(text)
