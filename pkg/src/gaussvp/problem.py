"""Problem files: JSON documents describing a kernel, plates, a field and solver settings.

Layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "kernel": {"family": "riesz", "alpha": 2, "dim": 3,
                 "diagonal": {"policy": "effective_radius", "scale": 0.5}},
      "plates": [{"sign": 1, "nodes": [[0, 0, 0], ...], "g": 1.0, "mass": 1.0}, ...],
      "field": {"mode": "tabulated", "values": [[0.0, "inf", ...], ...]},
      "solver": {"gap_tol_abs": 1e-9, "variant": "corrective", ...},
      "exhaustion": {"steps": 4, "order": "centroid"}
    }

Infinite field values are written as the string ``"inf"`` so the files stay
strict JSON.  Errors carry the path of the offending entry, e.g.
``plates[0].sign``.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .condenser import Condenser, Plate, validate_condenser
from .errors import KernelError, ParseError, SchemaError, ValidationError
from .kernel import EffectiveRadius, ExcludeDiagonal, Explicit, Kernel
from .measure import DiscreteVectorMeasure, ExternalField, ScalarSignedMeasure
from .solver import SolverConfig

SCHEMA_VERSION = 1
_SOLVER_KEYS = ("max_iters", "gap_tol_abs", "gap_tol_rel", "step_rule", "init", "variant",
                "support_threshold", "seed")


@dataclass(eq=False)
class ProblemFile:
    """A parsed problem; ``doc`` is the normalized document it was built from."""

    doc: dict
    kernel: Kernel = dc_field(repr=False)
    condenser: Condenser = dc_field(repr=False)
    field: ExternalField = dc_field(repr=False)
    solver: SolverConfig = dc_field(repr=False)
    exhaustion: dict | None = None

    @property
    def schema_version(self):
        return self.doc["schema_version"]

    def __eq__(self, other):
        return isinstance(other, ProblemFile) and canonical_json(self.doc) == canonical_json(other.doc)

    def digest(self):
        return hashlib.sha256(canonical_json(self.doc).encode()).hexdigest()


# JSON helpers -----------------------------------------------------------------

def encode_number(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def to_jsonable(obj):
    """Recursively convert numpy values and non-finite floats to strict-JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return encode_number(obj)
    return obj


def canonical_json(doc, indent=None):
    return json.dumps(to_jsonable(doc), sort_keys=True, indent=indent, allow_nan=False)


# schema checks ------------------------------------------------------------------

def _req(d, key, path):
    if not isinstance(d, dict):
        raise SchemaError(path, "expected an object")
    if key not in d:
        raise SchemaError(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


def _num(x, path, allow_inf=False):
    if isinstance(x, bool):
        raise SchemaError(path, "expected a number")
    if isinstance(x, str) and allow_inf and x.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if not isinstance(x, (int, float)):
        raise SchemaError(path, "expected a number" + (" or \"inf\"" if allow_inf else ""))
    x = float(x)
    if math.isnan(x) or (math.isinf(x) and not (allow_inf and x > 0)):
        raise SchemaError(path, "expected a finite number")
    return x


def _int(x, path):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or float(x) != int(x):
        raise SchemaError(path, "expected an integer")
    return int(x)


def _list(x, path):
    if not isinstance(x, list):
        raise SchemaError(path, "expected a list")
    return x


def _numbers(x, path, allow_inf=False):
    return [_num(v, f"{path}[{j}]", allow_inf) for j, v in enumerate(_list(x, path))]


def _kernel(d):
    family = _req(d, "family", "kernel")
    if family not in ("riesz", "newtonian", "log_unit_ball", "custom"):
        raise SchemaError("kernel.family", f"unknown family {family!r}")
    out = {"family": family}
    if family == "riesz":
        out["alpha"] = _num(_req(d, "alpha", "kernel"), "kernel.alpha")
        out["dim"] = _int(_req(d, "dim", "kernel"), "kernel.dim")
    elif family == "newtonian":
        out["dim"] = _int(d.get("dim", 3), "kernel.dim")
    elif family == "custom":
        rows = _list(_req(d, "matrix", "kernel"), "kernel.matrix")
        out["matrix"] = [_numbers(r, f"kernel.matrix[{i}]") for i, r in enumerate(rows)]
    diag = d.get("diagonal")
    out["diagonal"] = None if diag is None else _diagonal(diag)
    try:
        k = _build_kernel(out)
    except (ValueError, KernelError) as e:
        raise SchemaError("kernel", str(e)) from e
    return out, k


def _diagonal(d):
    policy = _req(d, "policy", "kernel.diagonal")
    if policy == "effective_radius":
        return {"policy": policy, "scale": _num(d.get("scale", 0.5), "kernel.diagonal.scale")}
    if policy == "explicit":
        v = _req(d, "values", "kernel.diagonal")
        vals = _numbers(v, "kernel.diagonal.values") if isinstance(v, list) else _num(v, "kernel.diagonal.values")
        return {"policy": policy, "values": vals}
    if policy == "exclude":
        return {"policy": policy}
    raise SchemaError("kernel.diagonal.policy", f"unknown policy {policy!r}")


def _build_kernel(kd):
    diag = kd.get("diagonal")
    pol = None
    if diag is not None:
        if diag["policy"] == "effective_radius":
            pol = EffectiveRadius(diag["scale"])
        elif diag["policy"] == "explicit":
            v = diag["values"]
            pol = Explicit(tuple(v) if isinstance(v, list) else v)
        else:
            pol = ExcludeDiagonal()
    fam = kd["family"]
    if fam == "riesz":
        return Kernel.riesz(kd["alpha"], kd["dim"], pol)
    if fam == "newtonian":
        return Kernel.newtonian(kd["dim"], pol)
    if fam == "log_unit_ball":
        return Kernel.log_unit_ball(pol)
    return Kernel.custom(np.array(kd["matrix"]), pol)


def _plates(items, custom, dim):
    out = []
    for i, p in enumerate(_list(items, "plates")):
        path = f"plates[{i}]"
        sign = _req(p, "sign", path)
        if isinstance(sign, bool) or sign not in (1, -1):
            raise SchemaError(f"{path}.sign", f"sign must be +1 or -1, got {sign!r}")
        nodes = _list(_req(p, "nodes", path), f"{path}.nodes")
        if custom:
            nodes = [_int(v, f"{path}.nodes[{j}]") for j, v in enumerate(nodes)]
        else:
            nodes = [_numbers(v, f"{path}.nodes[{j}]") for j, v in enumerate(nodes)]
            for j, v in enumerate(nodes):
                if len(v) != dim:
                    raise SchemaError(f"{path}.nodes[{j}]", f"expected {dim} coordinates, got {len(v)}")
        g = p.get("g", 1.0)
        g = _numbers(g, f"{path}.g") if isinstance(g, list) else [_num(g, f"{path}.g")] * len(nodes)
        mass = _num(_req(p, "mass", path), f"{path}.mass")
        out.append({"sign": int(sign), "nodes": nodes, "g": g, "mass": mass})
    if not out:
        raise SchemaError("plates", "at least one plate is required")
    return out


def _field(d, plates, custom, dim):
    if d is None:
        return {"mode": "zero"}
    mode = _req(d, "mode", "field")
    if mode == "zero":
        return {"mode": "zero"}
    if mode in ("tabulated", "lsc"):
        vals = _list(_req(d, "values", "field"), "field.values")
        vals = [_numbers(v, f"field.values[{i}]", allow_inf=True) for i, v in enumerate(vals)]
        if len(vals) != len(plates):
            raise ValidationError(f"field has values for {len(vals)} plates, condenser has {len(plates)}")
        for i, (v, p) in enumerate(zip(vals, plates)):
            if len(v) != len(p["nodes"]):
                raise ValidationError(f"field.values[{i}] has {len(v)} entries for {len(p['nodes'])} nodes")
            if mode == "lsc" and any(x < 0 for x in v):
                raise SchemaError(f"field.values[{i}]", "lsc field values must be nonnegative")
        return {"mode": mode, "values": vals}
    if mode == "scalar_source":
        pts = _list(_req(d, "points", "field"), "field.points")
        if custom:
            pts = [_int(v, f"field.points[{j}]") for j, v in enumerate(pts)]
        else:
            pts = [_numbers(v, f"field.points[{j}]") for j, v in enumerate(pts)]
            for j, v in enumerate(pts):
                if len(v) != dim:
                    raise SchemaError(f"field.points[{j}]", f"expected {dim} coordinates")
        w = _numbers(_req(d, "weights", "field"), "field.weights")
        if len(w) != len(pts):
            raise SchemaError("field.weights", "one weight per point is required")
        return {"mode": mode, "points": pts, "weights": w}
    if mode == "vector_source":
        ws = _list(_req(d, "weights", "field"), "field.weights")
        ws = [_numbers(v, f"field.weights[{i}]") for i, v in enumerate(ws)]
        return {"mode": mode, "weights": ws}
    raise SchemaError("field.mode", f"unknown mode {mode!r}")


def _solver(d):
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise SchemaError("solver", "expected an object")
    out = {}
    for key, v in d.items():
        path = f"solver.{key}"
        if key not in _SOLVER_KEYS:
            raise SchemaError(path, "unknown solver option")
        if key in ("max_iters", "seed"):
            out[key] = None if (key == "seed" and v is None) else _int(v, path)
        elif key in ("gap_tol_abs", "gap_tol_rel"):
            out[key] = _num(v, path)
        elif key == "support_threshold":
            out[key] = None if v is None else _num(v, path)
        elif key == "init":
            if isinstance(v, dict):
                out[key] = {"vertex": [_int(x, f"{path}.vertex[{j}]")
                                       for j, x in enumerate(_list(_req(v, "vertex", path), f"{path}.vertex"))]}
            elif v in ("uniform", "random"):
                out[key] = v
            else:
                raise SchemaError(path, "init must be \"uniform\", \"random\" or {\"vertex\": [...]}")
        else:
            if not isinstance(v, str):
                raise SchemaError(path, "expected a string")
            out[key] = v
    try:
        SolverConfig(**out)
    except ValueError as e:
        raise SchemaError("solver", str(e)) from e
    return out


def _exhaustion(d):
    if d is None:
        return None
    steps = _int(_req(d, "steps", "exhaustion"), "exhaustion.steps")
    if steps < 1:
        raise SchemaError("exhaustion.steps", "must be >= 1")
    order = d.get("order", "index")
    if order not in ("index", "centroid"):
        raise SchemaError("exhaustion.order", "must be \"index\" or \"centroid\"")
    return {"steps": steps, "order": order}


def _build(doc) -> ProblemFile:
    k = _build_kernel(doc["kernel"])
    plates = [Plate(p["sign"], np.array(p["nodes"], dtype=float).reshape(len(p["nodes"]), -1) if p["nodes"]
                    else np.zeros((0, 1)), np.array(p["g"], dtype=float), p["mass"]) for p in doc["plates"]]
    c = Condenser(plates)
    validate_condenser(c).raise_if_invalid()
    fd = doc["field"]
    if fd["mode"] == "zero":
        f = ExternalField.zero()
    elif fd["mode"] == "tabulated":
        f = ExternalField.tabulated(fd["values"])
    elif fd["mode"] == "lsc":
        f = ExternalField.lsc(fd["values"])
    elif fd["mode"] == "scalar_source":
        pts = np.array(fd["points"], dtype=float).reshape(len(fd["points"]), -1 if fd["points"] else 1)
        f = ExternalField.scalar_source(ScalarSignedMeasure(pts, fd["weights"]))
    else:
        try:
            nu = DiscreteVectorMeasure(c, tuple(fd["weights"]))
        except ValueError as e:
            raise ValidationError(f"field.weights: {e}") from e
        f = ExternalField.vector_source(nu)
    return ProblemFile(doc, k, c, f, SolverConfig(**doc["solver"]), doc["exhaustion"])


def problem_from_dict(raw) -> ProblemFile:
    if not isinstance(raw, dict):
        raise SchemaError("", "top level must be an object")
    ver = _req(raw, "schema_version", "")
    if isinstance(ver, bool) or ver != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"unsupported schema version {ver!r} (supported: {SCHEMA_VERSION})")
    unknown = set(raw) - {"schema_version", "kernel", "plates", "field", "solver", "exhaustion", "name"}
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown top-level field")
    kd, k = _kernel(_req(raw, "kernel", ""))
    custom = k.is_custom
    dim = None if custom else k.dim
    plates = _plates(_req(raw, "plates", ""), custom, dim)
    if custom:
        n = len(kd["matrix"])
        for i, p in enumerate(plates):
            for j, v in enumerate(p["nodes"]):
                if not 0 <= v < n:
                    raise SchemaError(f"plates[{i}].nodes[{j}]", f"index {v} outside the {n}x{n} kernel matrix")
    doc = {"schema_version": SCHEMA_VERSION, "kernel": kd, "plates": plates,
           "field": _field(raw.get("field"), plates, custom, dim),
           "solver": _solver(raw.get("solver")),
           "exhaustion": _exhaustion(raw.get("exhaustion"))}
    if "name" in raw:
        doc["name"] = str(raw["name"])
    return _build(doc)


def parse_problem(source) -> ProblemFile:
    """Parse a problem from a path, JSON text or an already decoded dict."""
    if isinstance(source, dict):
        return problem_from_dict(source)
    text = str(source)
    where = "<string>"
    if not text.lstrip().startswith("{"):
        where = os.fspath(source)
        try:
            with open(where, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ParseError(where, f"cannot read file: {e.strerror}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{where}:{e.lineno}:{e.colno}", e.msg) from e
    return problem_from_dict(raw)


def serialize_problem(p: ProblemFile, indent=2) -> str:
    return canonical_json(p.doc, indent=indent)
