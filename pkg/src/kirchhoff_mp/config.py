"""JSON run configuration.

Example::

    {
      "schema_version": 1,
      "domain": {"dimension": 1, "extents": [1.0], "nodes_per_axis": [65]},
      "m": {"family": "sine-bump", "heights": [1.22, 0.54]},
      "f": {"family": "sine", "amplitude": 1.0},
      "zeros": [1.0, 4.0],
      "s_star": 1.0,
      "solver": {"path_points": 33},
      "output": {"report": "report.json"},
      "seed": 0
    }

Tabulated m or f use ``{"family": "tabulated", "points": [[t, value], ...]}``
with piecewise-linear interpolation; polynomial f uses ascending
``"coefficients"``.  Missing solver/output keys take the defaults below.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .area import AlphaOptions
from .mesh import Mesh
from .model import (
    PolynomialF,
    ProblemSpec,
    SineBumpM,
    SineF,
    TabulatedF,
    TabulatedM,
)
from .solver import MountainPassConfig

SCHEMA_VERSION = 1

SOLVER_DEFAULTS = {
    "path_points": 33,
    "tol_grad": 1e-8,
    "max_outer_iter": 20000,
    "descent_step_init": 1.0,
    "tau_max": 1e4,
    "tol_res": 1e-6,
    "tol_clip": 1e-9,
    "alpha_starts": 8,
    "alpha_tol_grad": 1e-9,
    "alpha_max_iter": 5000,
    "validation_samples": 200,
}
OUTPUT_DEFAULTS = {"report": "report.json", "csv_dir": None, "trace": False}
TOP_KEYS = {"schema_version", "domain", "m", "f", "zeros", "s_star", "solver", "output", "seed"}
DEFAULT_SEED = 0


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key:
            where.append(f"key '{key}'")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{message}" + (f" ({', '.join(where)})" if where else ""))
        self.key, self.line = key, line


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    leaf = key.split(".")[-1]
    m = re.search(r'"%s"\s*:' % re.escape(leaf), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


@dataclass
class RunConfig:
    data: dict
    text: str | None = None

    # -- accessors ---------------------------------------------------------
    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def solver(self) -> dict:
        return self.data["solver"]

    @property
    def output(self) -> dict:
        return self.data["output"]

    def echo(self) -> dict:
        return copy.deepcopy(self.data)

    def content_hash(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- builders ----------------------------------------------------------
    def build_mesh(self) -> Mesh:
        d = self.data["domain"]
        return Mesh(d["extents"], d["nodes_per_axis"])

    def build_problem(self) -> ProblemSpec:
        zeros = self.data["zeros"]
        mb, fb = self.data["m"], self.data["f"]
        if mb["family"] == "sine-bump":
            m = SineBumpM(zeros, mb["heights"])
        else:
            m = TabulatedM(zeros, mb["points"])
        s_star = self.data["s_star"]
        if fb["family"] == "sine":
            f = SineF(s_star, fb.get("amplitude", 1.0))
        elif fb["family"] == "polynomial":
            f = PolynomialF(s_star, fb["coefficients"])
        else:
            f = TabulatedF(s_star, fb["points"])
        return ProblemSpec(m, f)

    def alpha_options(self) -> AlphaOptions:
        s = self.solver
        return AlphaOptions(starts=s["alpha_starts"], tol_grad=s["alpha_tol_grad"],
                            max_iter=s["alpha_max_iter"], seed=self.seed)

    def mp_config(self) -> MountainPassConfig:
        s = self.solver
        return MountainPassConfig(
            path_points=s["path_points"], tol_grad=s["tol_grad"], max_outer_iter=s["max_outer_iter"],
            descent_step_init=s["descent_step_init"], tau_max=s["tau_max"], tol_res=s["tol_res"],
            seed=self.seed,
        )


def _require(cond: bool, message: str, key: str, text: str | None):
    if not cond:
        raise ConfigError(message, key, _line_of(text, key))


def _number_list(value, key, text, n=None, integer=False):
    ok = isinstance(value, list) and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    )
    _require(ok and len(value) > 0, f"{key} must be a non-empty list of numbers", key, text)
    if n is not None:
        _require(len(value) == n, f"{key} must have length {n}", key, text)
    if integer:
        _require(all(float(v).is_integer() for v in value), f"{key} must hold integers", key, text)
        return [int(v) for v in value]
    _require(all(np.isfinite(v) for v in value), f"{key} must be finite", key, text)
    return [float(v) for v in value]


def _points(value, key, text):
    ok = isinstance(value, list) and len(value) >= 2 and all(isinstance(p, list) and len(p) == 2 for p in value)
    _require(ok, f"{key} must be a list of at least two [t, value] pairs", key, text)
    pts = [_number_list(p, key, text, n=2) for p in value]
    _require(all(b[0] > a[0] for a, b in zip(pts, pts[1:])), f"{key} abscissae must be strictly increasing", key, text)
    return pts


def parse_config(data: dict, text: str | None = None) -> RunConfig:
    """Validate a decoded config document and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    for k in data:
        _require(k in TOP_KEYS, f"unknown key '{k}'", k, text)
    for k in ("schema_version", "domain", "m", "f", "zeros", "s_star"):
        _require(k in data, f"missing required key '{k}'", k, text)
    _require(data["schema_version"] == SCHEMA_VERSION, f"unsupported schema_version (expected {SCHEMA_VERSION})",
             "schema_version", text)
    out: dict = {"schema_version": SCHEMA_VERSION}

    dom = data["domain"]
    _require(isinstance(dom, dict), "domain must be an object", "domain", text)
    for k in dom:
        _require(k in {"dimension", "extents", "nodes_per_axis"}, f"unknown key 'domain.{k}'", f"domain.{k}", text)
    dim = dom.get("dimension", len(dom.get("extents", [])))
    _require(dim in (1, 2), "domain.dimension must be 1 or 2", "domain.dimension", text)
    ext = _number_list(dom.get("extents"), "domain.extents", text, n=dim)
    _require(all(L > 0 for L in ext), "domain.extents must be positive (zero-measure domain)", "domain.extents", text)
    npa = _number_list(dom.get("nodes_per_axis"), "domain.nodes_per_axis", text, n=dim, integer=True)
    _require(all(n >= 3 for n in npa), "domain.nodes_per_axis must be >= 3", "domain.nodes_per_axis", text)
    out["domain"] = {"dimension": dim, "extents": ext, "nodes_per_axis": npa}

    zeros = _number_list(data["zeros"], "zeros", text)
    _require(zeros[0] > 0, "zeros must be positive", "zeros", text)
    _require(all(b > a for a, b in zip(zeros, zeros[1:])), "zeros must be strictly increasing", "zeros", text)
    out["zeros"] = zeros

    s_star = data["s_star"]
    _require(isinstance(s_star, (int, float)) and not isinstance(s_star, bool) and np.isfinite(s_star),
             "s_star must be a number", "s_star", text)
    _require(s_star > 0, "s_star must be positive", "s_star", text)
    out["s_star"] = float(s_star)

    mb = data["m"]
    _require(isinstance(mb, dict) and mb.get("family") in ("sine-bump", "tabulated"),
             "m.family must be 'sine-bump' or 'tabulated'", "m.family" if isinstance(mb, dict) else "m", text)
    if mb["family"] == "sine-bump":
        _require(set(mb) <= {"family", "heights"}, "m accepts only 'family' and 'heights'", "m", text)
        out["m"] = {"family": "sine-bump", "heights": _number_list(mb.get("heights"), "m.heights", text, n=len(zeros))}
    else:
        _require(set(mb) <= {"family", "points"}, "m accepts only 'family' and 'points'", "m", text)
        out["m"] = {"family": "tabulated", "points": _points(mb.get("points"), "m.points", text)}

    fb = data["f"]
    _require(isinstance(fb, dict) and fb.get("family") in ("sine", "polynomial", "tabulated"),
             "f.family must be 'sine', 'polynomial' or 'tabulated'", "f.family" if isinstance(fb, dict) else "f", text)
    if fb["family"] == "sine":
        _require(set(fb) <= {"family", "amplitude"}, "f accepts only 'family' and 'amplitude'", "f", text)
        amp = fb.get("amplitude", 1.0)
        _require(isinstance(amp, (int, float)) and np.isfinite(amp), "f.amplitude must be a number", "f.amplitude", text)
        out["f"] = {"family": "sine", "amplitude": float(amp)}
    elif fb["family"] == "polynomial":
        _require(set(fb) <= {"family", "coefficients"}, "f accepts only 'family' and 'coefficients'", "f", text)
        out["f"] = {"family": "polynomial", "coefficients": _number_list(fb.get("coefficients"), "f.coefficients", text)}
    else:
        _require(set(fb) <= {"family", "points"}, "f accepts only 'family' and 'points'", "f", text)
        out["f"] = {"family": "tabulated", "points": _points(fb.get("points"), "f.points", text)}

    solver = dict(SOLVER_DEFAULTS)
    sb = data.get("solver", {})
    _require(isinstance(sb, dict), "solver must be an object", "solver", text)
    for k, v in sb.items():
        _require(k in SOLVER_DEFAULTS, f"unknown key 'solver.{k}'", f"solver.{k}", text)
        ok = isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v) and v > 0
        _require(ok, f"solver.{k} must be a positive number", f"solver.{k}", text)
        if isinstance(SOLVER_DEFAULTS[k], int):
            _require(float(v).is_integer(), f"solver.{k} must be an integer", f"solver.{k}", text)
        solver[k] = type(SOLVER_DEFAULTS[k])(v)
    _require(solver["path_points"] >= 16, "solver.path_points must be >= 16", "solver.path_points", text)
    _require(solver["alpha_starts"] >= 3, "solver.alpha_starts must be >= 3", "solver.alpha_starts", text)
    _require(solver["validation_samples"] >= 10, "solver.validation_samples must be >= 10",
             "solver.validation_samples", text)
    out["solver"] = solver

    output = dict(OUTPUT_DEFAULTS)
    ob = data.get("output", {})
    _require(isinstance(ob, dict), "output must be an object", "output", text)
    for k, v in ob.items():
        _require(k in OUTPUT_DEFAULTS, f"unknown key 'output.{k}'", f"output.{k}", text)
        if k == "trace":
            _require(isinstance(v, bool), "output.trace must be a boolean", "output.trace", text)
        else:
            _require(v is None or isinstance(v, str), f"output.{k} must be a string", f"output.{k}", text)
        output[k] = v
    out["output"] = output

    seed = data.get("seed", DEFAULT_SEED)
    _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
             "seed must be a non-negative integer", "seed", text)
    out["seed"] = seed
    return RunConfig(out, text)


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    return parse_config(data, text)


def bundled_config(name: str) -> Path:
    """Path of a config shipped in ``kirchhoff_mp/data`` (e.g. 'canonical')."""
    return Path(__file__).with_name("data") / f"{name}.json"
