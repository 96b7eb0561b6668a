"""Run configuration: loading, defaults, overrides, validation and data assembly."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from . import scenarios
from .ambient import SignatureData
from .chart import ChartGrid
from .expr import ExprEvalError, ExprSyntaxError, ScalarField1D, eval_jet2, parse_expr
from .serialize import dumps

DEFAULT_TOLERANCES = {
    "tau_struct": 1.0,
    "tau_exact": 1e-10,
    "order_min": 1.5,
    "tau_grp": 1e-8,
    "tau_drift": 1e-6,
    "tau_quad": 1e-6,
    "tau_imm": 1e-4,
    "tau_trap": 1e-6,
    "tau_deg": 1e-8,
    "tau_leaf": 1e-8,
}
DEFAULT_FLAGS = {"strict": False, "projection_interval": 16, "immersion_fd_order": 4}

ALIASES = {"graph-sphere": "example1", "helicoid-hyperbolic": "example2"}
SCENARIO_PARAMS = {
    "example1": {"h": scenarios.DEFAULT_H1},
    "example2": {"a": scenarios.DEFAULT_A2, "h": scenarios.DEFAULT_H2, "c_const": 1.0},
    "slice": {"t0": 2.0, "a": "t", "fiber": "sphere", "eps": -1, "flip_normal": False},
    "graph-sphere3": {"h": scenarios.DEFAULT_H1},
}


class ConfigError(ValueError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def schema() -> dict:
    text = resources.files(__package__).joinpath("config_schema.json").read_text()
    return json.loads(text)


def load(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from exc


def validate_schema(cfg: dict):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (-len(e.absolute_path), str(e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigError(_pointer(err.absolute_path), err.message)


def _default_grid(name: str, params: dict) -> ChartGrid:
    if name == "example1":
        return scenarios.example1_grid()
    if name == "example2":
        return scenarios.example2_grid()
    if name == "slice":
        return scenarios.slice_grid(params.get("fiber", "sphere"))
    return scenarios.graph_sphere3_grid()


def grid_dict(grid: ChartGrid) -> dict:
    return {"mins": list(grid.mins), "maxs": list(grid.maxs), "counts": list(grid.counts), "names": list(grid.names)}


def resolve(raw: dict) -> dict:
    """Fill defaults so that the returned document fully determines a run."""
    if not isinstance(raw, dict):
        raise ConfigError("", "configuration must be a JSON object")
    validate_schema(raw)
    cfg = copy.deepcopy(raw)
    if "scenario" in cfg and "fields" in cfg:
        raise ConfigError("/fields", "explicit fields cannot be combined with a named scenario")
    if "scenario" in cfg:
        for key in ("signs", "warp"):
            if key in cfg:
                raise ConfigError(f"/{key}", "signs and warp are fixed by the named scenario")
        sc = cfg["scenario"]
        sc["name"] = ALIASES.get(sc["name"], sc["name"])
        allowed = SCENARIO_PARAMS[sc["name"]]
        params = sc.setdefault("params", {})
        for key in params:
            if key not in allowed:
                raise ConfigError(f"/scenario/params/{key}", f"not a parameter of {sc['name']}")
        sc["params"] = {**allowed, **params}
        base = grid_dict(_default_grid(sc["name"], sc["params"]))
    elif "fields" in cfg:
        for key in ("signs", "warp", "grid"):
            if key not in cfg:
                raise ConfigError(f"/{key}", "required with explicit fields")
        base = {}
    else:
        raise ConfigError("", "either 'scenario' or 'fields' is required")
    grid = {**base, **cfg.get("grid", {})}
    if isinstance(grid.get("counts"), int) and "mins" in grid:
        grid["counts"] = [grid["counts"]] * len(grid["mins"])
    cfg["grid"] = grid
    cfg["tolerances"] = {**DEFAULT_TOLERANCES, **cfg.get("tolerances", {})}
    cfg["flags"] = {**DEFAULT_FLAGS, **cfg.get("flags", {})}
    cfg.setdefault("A_scale", 1.0)
    return cfg


def _parse_value(text: str, current):
    if isinstance(current, str):
        return text
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _list_index(node: list, part: str, parts) -> int:
    try:
        i = int(part)
        node[i]
    except (ValueError, IndexError) as exc:
        raise ConfigError(_pointer(parts), f"{part!r} is not a valid list index") from exc
    return i


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply dotted ``key=value`` pairs; values are read as JSON when possible."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError("", f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = cfg
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[_list_index(node, p, parts)]
            else:
                node = node.setdefault(p, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(_pointer(parts), "override path crosses a scalar value")
        last = parts[-1]
        if isinstance(node, list):
            i = _list_index(node, last, parts)
            node[i] = _parse_value(text.strip(), node[i])
        else:
            node[last] = _parse_value(text.strip(), node.get(last))
    return cfg


def prepare(raw: dict, overrides=()) -> dict:
    cfg = resolve(raw)
    cfg = apply_overrides(cfg, overrides)
    cfg = resolve(cfg)  # re-validate and re-fill after overrides
    check_semantics(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()


def make_grid(cfg: dict) -> ChartGrid:
    g = cfg["grid"]
    try:
        return ChartGrid(tuple(g["mins"]), tuple(g["maxs"]), tuple(g["counts"]), tuple(g["names"]))
    except KeyError as exc:
        raise ConfigError(f"/grid/{exc.args[0]}", "missing grid entry") from exc
    except ValueError as exc:
        raise ConfigError("/grid", str(exc)) from exc


def make_signs(cfg: dict) -> SignatureData:
    s = cfg["signs"]
    try:
        return SignatureData(n=s["n"], k=s["k"], c=s["c"], eps=s["epsilon"], eps_normal=s["epsilon_normal"],
                             frame_signs=tuple(s["frame_signs"]), e0_sign=s.get("e0_sign", 1))
    except ValueError as exc:
        raise ConfigError("/signs", str(exc)) from exc


def make_warp(cfg: dict) -> ScalarField1D:
    w = cfg["warp"]
    dom = w.get("domain", [-math.inf, math.inf])
    try:
        return ScalarField1D.from_source(w["expr"], "t", dom)
    except ExprSyntaxError as exc:
        raise ConfigError("/warp/expr", f"{exc} (offset {exc.offset})") from exc


def _expr_paths(fields: dict):
    for key, val in fields.items():
        if isinstance(val, str):
            yield (key,), val
        elif isinstance(val, list):
            for i, row in enumerate(val):
                if isinstance(row, str):
                    yield (key, i), row
                else:
                    for j, item in enumerate(row):
                        yield (key, i, j), item


def check_semantics(cfg: dict):
    grid = make_grid(cfg)
    if "fields" in cfg:
        signs = make_signs(cfg)
        make_warp(cfg)
        n = grid.dim
        if signs.n != n:
            raise ConfigError("/signs/n", "does not match the grid dimension")
        f = cfg["fields"]
        for key in ("metric", "frame", "A"):
            if len(f[key]) != n or any(len(r) != n for r in f[key]):
                raise ConfigError(f"/fields/{key}", f"must be {n}x{n}")
        if len(f["T"]) != n:
            raise ConfigError("/fields/T", f"needs {n} entries")
        if n > 2:
            raise ConfigError("/grid/names", "explicit fields take expressions in at most two chart variables")
        rho = [k for k in ("rho", "rho_t", "rho_b") if k in f]
        if rho and len(rho) != 3:
            raise ConfigError("/fields/rho", "rho, rho_t and rho_b must be given together")
        for path, src in _expr_paths(f):
            try:
                parse_expr(src, grid.names)
            except ExprSyntaxError as exc:
                raise ConfigError("/fields" + _pointer(path), f"{exc} (offset {exc.offset})") from exc
    else:
        sc = cfg["scenario"]
        for key in ("h", "a"):
            if key in sc["params"]:
                var = "t" if key == "a" else ("v" if sc["name"] == "example2" else "u")
                try:
                    parse_expr(sc["params"][key], [var])
                except ExprSyntaxError as exc:
                    raise ConfigError(f"/scenario/params/{key}", f"{exc} (offset {exc.offset})") from exc
    origin = cfg.get("origin")
    if origin is not None:
        if len(origin) != grid.dim or any(o >= c for o, c in zip(origin, grid.counts)):
            raise ConfigError("/origin", "must be a node index inside the grid")


@dataclass
class RunData:
    data: object  # HypersurfaceData
    scenario: object | None  # scenarios.Scenario when built from a named scenario


def build_explicit(cfg: dict, grid: ChartGrid):
    from .structure import HypersurfaceData

    signs = make_signs(cfg)
    warp = make_warp(cfg)
    f = cfg["fields"]
    names = list(grid.names)
    at = dict(zip(names, grid.coords()))

    def jet_all(src, ptr):
        ast = parse_expr(src, names)
        try:
            jets = [eval_jet2(ast, at, wrt=nm) for nm in names]
        except ExprEvalError as exc:
            raise ConfigError(ptr, str(exc)) from exc
        value = np.broadcast_to(jets[0].value, grid.shape).astype(float)
        grad = np.stack([np.broadcast_to(j.d1, grid.shape) for j in jets], axis=-1)
        return value, grad

    def matrix(key):
        vals, grads = [], []
        for i, row in enumerate(f[key]):
            pair = [jet_all(src, f"/fields/{key}/{i}/{j}") for j, src in enumerate(row)]
            vals.append(np.stack([p[0] for p in pair], axis=-1))
            grads.append(np.stack([p[1] for p in pair], axis=-2))
        return np.stack(vals, axis=-2), np.stack(grads, axis=-3)  # [...,i,j], [...,i,j,c]

    def scalar(key):
        return jet_all(f[key], f"/fields/{key}")[0]

    metric, metric_g = matrix("metric")
    frame_rows, frame_g = matrix("frame")  # row i = chart components of e_i
    A, _ = matrix("A")
    T = np.stack([jet_all(src, f"/fields/T/{i}")[0] for i, src in enumerate(f["T"])], axis=-1)
    extra = {}
    if "rho" in f:
        extra = {k: scalar(k) for k in ("rho", "rho_t", "rho_b")}
    data = HypersurfaceData(
        grid=grid,
        metric=metric,
        frame=np.swapaxes(frame_rows, -1, -2),
        A=A,
        T=T,
        T_np1=scalar("T_np1"),
        pi=scalar("pi"),
        signs=signs,
        warp=warp,
        metric_d=np.moveaxis(metric_g, -1, -3),
        frame_d=np.moveaxis(np.swapaxes(frame_g, -2, -3), -1, -3),
        label="explicit",
        **extra,
    )
    try:
        data.validate()
    except ValueError as exc:
        raise ConfigError("/fields", str(exc)) from exc
    return data


def build(cfg: dict, counts=None) -> RunData:
    """Assemble the hypersurface data, optionally at another resolution."""
    grid = make_grid(cfg)
    if counts is not None:
        grid = grid.resized(counts)
    if "fields" in cfg:
        data, sc = build_explicit(cfg, grid), None
    else:
        s = cfg["scenario"]
        try:
            sc = scenarios.build(s["name"], s["params"], grid)
        except ValueError as exc:
            raise ConfigError("/scenario", str(exc)) from exc
        data = sc.data
    scale = float(cfg.get("A_scale", 1.0))
    if scale != 1.0:
        data = data.replace(A=data.A * scale)
    return RunData(data, sc)
