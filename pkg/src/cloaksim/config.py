"""Experiment configuration: JSON file, versioned schema, dataclass view."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema

from .media import RadialObject, ValidationError, build_cloak

EXPERIMENTS = ("cloak-demo", "delta-sweep", "resonance-map", "three-spheres", "proof-pipeline", "oracle-compare")

_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cloaksim experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "experiment", "output"],
    "properties": {
        "schema": {"const": 1},
        "experiment": {"enum": list(EXPERIMENTS)},
        "output": {"type": "string", "minLength": 1},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"d": {"enum": [2, 3]}, "r2": _POS, "r3": _POS, "R_omega": _POS},
        },
        "object": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["edges", "values"],
                    "properties": {
                        "edges": {"type": "array", "items": _POS, "minItems": 2},
                        "values": {"type": "array", "items": _POS, "minItems": 1},
                    },
                },
            ]
        },
        "source": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["point", "modes"]},
                "radius": _POS,
                "angle": {"type": "number"},
                "polar": {"type": "number"},
                "n_min": {"type": "integer", "minimum": 0},
                "n_max": {"type": "integer", "minimum": 0},
                "strength": {"type": "number"},
            },
        },
        "deltas": {"type": "array", "items": _POS, "minItems": 1},
        "n_max": {"type": "integer", "minimum": 0, "maximum": 128},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_r": {"type": "array", "items": {"type": "integer", "minimum": 4, "maximum": 1024}, "minItems": 1},
                "n_theta": {"type": "array", "items": {"type": "integer", "minimum": 4, "maximum": 1024}},
                "compare": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                "max_condition": _POS,
            },
        },
        "annuli": {"type": "array", "items": {"type": "array", "items": {"type": "number", "minimum": 0},
                                              "minItems": 2, "maxItems": 2}},
        "trials": _POS_INT,
        "seed": {"type": "integer", "minimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1},
        "ratios": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 4}, "minItems": 1},
        "heatmap": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "width": {"type": "integer", "minimum": 1, "maximum": 4096},
                        "height": {"type": "integer", "minimum": 1, "maximum": 4096},
                        "scale": {"enum": ["linear", "log"]},
                        "palette": {"enum": ["gray", "color"]},
                        "extent": _POS,
                    },
                },
            ]
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Geometry:
    d: int = 2
    r2: float = 1.0
    r3: float = 8.0
    R_omega: float = 12.0


@dataclass(frozen=True)
class SourceConfig:
    kind: str = "point"
    radius: float = 10.0
    angle: float = 0.0
    polar: float = 1.0
    n_min: int = 0
    n_max: Optional[int] = None
    strength: float = 1.0


@dataclass(frozen=True)
class GridConfig:
    n_r: tuple[int, ...] = (64, 128, 256)
    n_theta: Optional[tuple[int, ...]] = None
    compare: Optional[tuple[float, float]] = None
    max_condition: Optional[float] = None

    def sizes(self) -> list[tuple[int, int]]:
        nt = self.n_theta or self.n_r
        if len(nt) != len(self.n_r):
            raise ValueError("grid.n_theta must match grid.n_r in length")
        return list(zip(self.n_r, nt))


@dataclass(frozen=True)
class HeatmapConfig:
    width: int = 256
    height: int = 256
    scale: str = "linear"
    palette: str = "gray"
    extent: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    output: Path
    geometry: Geometry = field(default_factory=Geometry)
    object: Optional[tuple[tuple[float, ...], tuple[float, ...]]] = ((1.0, 2.0), (2.0,))
    source: SourceConfig = field(default_factory=SourceConfig)
    deltas: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
    n_max: int = 32
    grid: GridConfig = field(default_factory=GridConfig)
    annuli: Optional[tuple[tuple[float, float], ...]] = None
    trials: int = 1000
    seed: int = 0
    alpha: float = 2.0 / 3.0
    ratios: tuple[float, ...] = (8.0, 16.0)
    heatmap: Optional[HeatmapConfig] = None
    config_hash: str = ""
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def radial_object(self) -> Optional[RadialObject]:
        if self.object is None:
            return None
        return RadialObject(self.object[0], self.object[1])

    def cloak(self, delta: Optional[float] = None):
        g = self.geometry
        return build_cloak(g.d, g.r2, g.r3, g.R_omega, self.radial_object(),
                           self.deltas[0] if delta is None else delta)

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)


def locate(text: str, path) -> Optional[int]:
    """Best-effort line of the value at a JSON path (keys matched in order of appearance)."""
    pos = 0
    found = None
    for part in path:
        if isinstance(part, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(part))).search(text, pos)
        if m is None:
            break
        pos = m.end()
        found = m.start()
    if found is None:
        return None
    return text.count("\n", 0, found) + 1


def config_hash(data: dict) -> str:
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _tuple(x):
    return tuple(x) if x is not None else None


def parse_config(text: str, source: str = "<config>", base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse, schema-check and semantically check a configuration text."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (column {exc.colno})", exc.lineno, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", 1, source)

    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        where = "/".join(map(str, path)) or "(top level)"
        raise ConfigError(f"{where}: {err.message}", locate(text, path) or 1, source)

    def fail(msg, *path):
        raise ConfigError(msg, locate(text, list(path)), source)

    deltas = tuple(float(x) for x in data.get("deltas", ExperimentConfig.deltas))
    if any(a <= b for a, b in zip(deltas[:-1], deltas[1:])):
        fail("deltas must be strictly decreasing", "deltas")

    geo = Geometry(**data.get("geometry", {}))
    obj = data.get("object", {"edges": [1.0, 2.0], "values": [2.0]})
    obj_t = None if obj is None else (tuple(map(float, obj["edges"])), tuple(map(float, obj["values"])))
    if obj_t is not None and len(obj_t[0]) != len(obj_t[1]) + 1:
        fail("object needs one more edge than values", "object")
    try:
        build_cloak(geo.d, geo.r2, geo.r3, geo.R_omega,
                    None if obj_t is None else RadialObject(*obj_t), deltas[0])
    except (ValidationError, ValueError) as exc:
        fail(f"geometry rejected: {exc}", "geometry" if "geometry" in data else "object")

    src = SourceConfig(**data.get("source", {}))
    if data["experiment"] not in ("three-spheres",) and not geo.r3 < src.radius < geo.R_omega:
        fail(f"source radius {src.radius} must lie in (r3, R_omega) = ({geo.r3}, {geo.R_omega})", "source", "radius")

    grid_raw = data.get("grid", {})
    grid = GridConfig(_tuple(grid_raw.get("n_r", GridConfig.n_r)), _tuple(grid_raw.get("n_theta")),
                      _tuple(grid_raw.get("compare")), grid_raw.get("max_condition"))
    try:
        sizes = grid.sizes()
    except ValueError as exc:
        fail(str(exc), "grid", "n_theta")
    if any(nt % 2 for _, nt in sizes):
        fail("angular cell counts must be even", "grid")
    if geo.d == 3 and data["experiment"] == "oracle-compare":
        fail("the grid oracle is two-dimensional", "geometry", "d")

    annuli = data.get("annuli")
    if annuli is not None:
        for i, (a, b) in enumerate(annuli):
            if not 0 <= a < b <= geo.R_omega:
                fail(f"annulus {i} must satisfy 0 <= lo < hi <= R_omega", "annuli")

    hm = data.get("heatmap")
    out = Path(data["output"])
    if base_dir is not None and not out.is_absolute():
        out = (base_dir / out).resolve()
    return ExperimentConfig(
        experiment=data["experiment"],
        output=out,
        geometry=geo,
        object=obj_t,
        source=src,
        deltas=deltas,
        n_max=int(data.get("n_max", ExperimentConfig.n_max)),
        grid=grid,
        annuli=None if annuli is None else tuple((float(a), float(b)) for a, b in annuli),
        trials=int(data.get("trials", ExperimentConfig.trials)),
        seed=int(data.get("seed", 0)),
        alpha=float(data.get("alpha", 2.0 / 3.0)),
        ratios=tuple(float(x) for x in data.get("ratios", (8.0, 16.0))),
        heatmap=None if hm is None else HeatmapConfig(**hm),
        config_hash=config_hash(data),
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(p)) from None
    return parse_config(text, str(p), p.parent)


def schema_json() -> str:
    return json.dumps(SCHEMA, indent=2)


def as_dict(obj: Any) -> Any:
    """Plain-JSON view of a config (for summaries)."""
    if hasattr(obj, "__dataclass_fields__"):
        return {k: as_dict(getattr(obj, k)) for k in obj.__dataclass_fields__ if k != "raw"}
    if isinstance(obj, (tuple, list)):
        return [as_dict(x) for x in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj
