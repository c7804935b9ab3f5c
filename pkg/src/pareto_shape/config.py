"""TOML run configuration: one file drives every command.

Sections: geometry (with geometry.shroud and geometry.clamp), mesh, flow,
elasticity (alias elast), reliability, fluidloss, pool, evaluate, scalarization
(with scalarization.search).  Unknown keys are errors; every error carries the
dotted field name and, when it can be found, the line of the offending key.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import Optional

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .elasticity import FlowConfig, SolidConfig
from .errors import ConfigError
from .geometry import Baseline, ClampDisc, ShapeSpaceConfig, Shroud
from .objectives import CMBParams, FluidLossModel, ReliabilityModel
from .pipeline import PoolConfig, RunConfig, default_shape_space
from .scalarization import METHODS, SearchConfig

_SECTIONS = {"geometry", "mesh", "flow", "elasticity", "elast", "reliability", "fluidloss", "pool",
             "evaluate", "scalarization"}


@dataclass(frozen=True)
class EvaluateConfig:
    """Coefficient vectors to evaluate; an empty tuple means the baseline only."""

    coefficients: tuple = ()


@dataclass(frozen=True)
class ScalarizeConfig:
    method: str = "weighted_sum"
    mode: str = "pool"  # "pool" (exhaustive over the sampled pool) or "search"
    thetas: tuple = ()
    reference: Optional[tuple] = None  # theta*; defaults to the middle of ``thetas``
    index: int = 0
    search: SearchConfig = SearchConfig()
    scale: Optional[tuple] = None  # weighted sums act on J_i / scale_i

    def effective(self, theta):
        """Parameter handed to the scalarization for a user-facing ``theta``."""
        if self.method != "weighted_sum" or self.scale is None:
            return tuple(theta)
        return tuple(t / s for t, s in zip(theta, self.scale))


@dataclass(frozen=True)
class Config:
    run: RunConfig = field(default_factory=RunConfig)
    evaluate: EvaluateConfig = EvaluateConfig()
    scalarization: ScalarizeConfig = ScalarizeConfig()
    source: Optional[str] = None

    def resolved(self) -> dict:
        return _plain(asdict(self.run)) | {"evaluate": _plain(asdict(self.evaluate)),
                                           "scalarization": _plain(asdict(self.scalarization))}

    @property
    def digest(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(obj):
    if is_dataclass(obj):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float):
        return repr(obj) if not math.isfinite(obj) else obj
    if callable(obj):
        return getattr(obj, "__qualname__", repr(obj))
    return obj


# ---------------------------------------------------------------------------
# parsing helpers

class _Reader:
    """Pops typed keys from a section and reports leftovers."""

    def __init__(self, text, data, path):
        self.text, self.data, self.path = text, dict(data), path

    def line(self, key=None):
        return find_line(self.text, self.path, key)

    def fail(self, key, msg):
        name = ".".join(self.path + ([key] if key else []))
        raise ConfigError(msg, field=name, line=self.line(key))

    def get(self, key, kind, default=None):
        if key not in self.data:
            return default
        val = self.data.pop(key)
        try:
            return kind(val)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            self.fail(key, f"invalid value {val!r}: {exc}")

    def sub(self, key):
        val = self.data.pop(key, {})
        if not isinstance(val, dict):
            self.fail(key, "expected a table")
        return _Reader(self.text, val, self.path + [key])

    def done(self):
        for key in self.data:
            self.fail(key, "unknown key")


def _num(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("expected a number")
    return float(v)


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _str(v):
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


def _vec(n=None):
    def conv(v):
        if not isinstance(v, list):
            raise TypeError("expected an array")
        out = tuple(_num(x) for x in v)
        if n is not None and len(out) != n:
            raise ValueError(f"expected {n} numbers")
        return out
    return conv


def _matrix(ncol=None):
    def conv(v):
        if not isinstance(v, list):
            raise TypeError("expected an array of arrays")
        return tuple(_vec(ncol)(row) for row in v)
    return conv


def find_line(text, path, key=None):
    """1-based line of ``key`` inside table ``path`` (or of the table header)."""
    if text is None:
        return None
    current = []
    header_line = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]$", s)
        if m:
            current = [p.strip() for p in m.group(1).split(".")]
            if current == list(path):
                header_line = i
            continue
        if key is None or "=" not in s:
            continue
        lhs = s.split("=", 1)[0].strip()
        parts = [p.strip() for p in lhs.split(".")]
        full = current + parts
        if full[: len(path) + 1] == list(path) + [key]:
            return i
    return header_line


# ---------------------------------------------------------------------------
# sections

def _geometry(r: _Reader) -> ShapeSpaceConfig:
    ref = default_shape_space()
    kind = r.get("baseline", _str, ref.baseline.kind)
    center = r.get("center", _vec(2), ref.baseline.center)
    radius = r.get("radius", _num, ref.baseline.radius)
    axes = r.get("semi_axes", _vec(2), ref.baseline.semi_axes)
    pts = r.get("points", _matrix(2), ())
    try:
        base = Baseline(kind, center, radius, axes, pts)
    except ConfigError as e:
        r.fail("baseline" if e.field is None else e.field.split(".")[-1], str(e).split(" (")[0])
    sr = r.sub("shroud")
    d = ref.shroud
    try:
        shroud = Shroud(sr.get("x0", _num, d.x0), sr.get("y0", _num, d.y0), sr.get("x1", _num, d.x1),
                        sr.get("y1", _num, d.y1), sr.get("corner_radius", _num, d.corner_radius))
    except ConfigError as e:
        sr.fail(None, str(e).split(" (")[0])
    sr.done()
    cr = r.sub("clamp")
    clamp = None
    if cr.get("enabled", _bool, True):
        clamp = ClampDisc(cr.get("center", _vec(2), ref.clamp_disc.center),
                          cr.get("radius", _num, ref.clamp_disc.radius))
    else:
        cr.data.clear()
    cr.done()
    kw = dict(
        exterior_box=r.get("exterior_box", _vec(4), ref.exterior_box),
        hoelder_k=r.get("k", _int, ref.hoelder_k),
        hoelder_alpha=r.get("alpha", _num, ref.hoelder_alpha),
        norm_bound=r.get("K", _num, ref.norm_bound),
        n_modes=r.get("n_modes", _int, ref.n_modes),
        fixed_arcs=r.get("fixed_arcs", _matrix(2), ()),
        leading_edge_angle=r.get("leading_edge_angle", _num, None),
        collar=r.get("collar", _num, ref.collar),
        transition=r.get("transition", _num, ref.transition),
        norm_grid=r.get("norm_grid", _int, ref.norm_grid),
    )
    r.done()
    try:
        return ShapeSpaceConfig(base, shroud, clamp_disc=clamp, **kw)
    except ConfigError as e:
        key = {"hoelder_k": "k", "hoelder_alpha": "alpha", "norm_bound": "K"}.get(
            (e.field or "geometry").split(".")[-1], (e.field or "geometry").split(".")[-1])
        raise ConfigError(str(e).split(" (")[0], field=e.field,
                          line=r.line(key if key != "geometry" else None)) from None


def _flow(r: _Reader) -> FlowConfig:
    d = FlowConfig()
    px, py = r.get("pin_x", _num), r.get("pin_y", _num)
    if (px is None) != (py is None):
        r.fail("pin_x" if px is None else "pin_y", "pin_x and pin_y must be given together")
    cfg = FlowConfig(r.get("inflow_speed", _num, d.inflow_speed), r.get("density", _num, d.density),
                     r.get("stagnation_pressure", _num, d.stagnation_pressure),
                     None if px is None else (px, py), r.get("rel_tol", _num, d.rel_tol),
                     r.get("outlet_speed", _num, None))
    if not cfg.rel_tol > 0:
        r.fail("rel_tol", "must be positive")
    r.done()
    return cfg


def _solid(r: _Reader, default: SolidConfig) -> SolidConfig:
    cfg = SolidConfig(r.get("lambda", _num, default.lame_lambda), r.get("mu", _num, default.lame_mu),
                      r.get("body_force", _vec(2), default.body_force),
                      r.get("rel_tol", _num, default.rel_tol))
    if not cfg.lame_mu > 0:
        r.fail("mu", "shear modulus must be positive")
    if not cfg.lame_lambda + cfg.lame_mu > 0:
        r.fail("lambda", "lambda + mu must be positive")
    r.done()
    return cfg


def _reliability(r: _Reader) -> ReliabilityModel:
    d, c = ReliabilityModel(), CMBParams()
    cmb = CMBParams(r.get("sigma_f", _num, c.sigma_f), r.get("b", _num, c.b),
                    r.get("eps_f", _num, c.eps_f), r.get("c", _num, c.c), r.get("E", _num, c.E))
    try:
        m = ReliabilityModel(r.get("weibull_m", _num, d.weibull_m), r.get("cycles", _num, d.cycles),
                             cmb, r.get("notch_length", _num, d.notch_length),
                             r.get("n_max", _num, d.n_max))
    except ValueError as e:
        r.fail(None, str(e))
    r.done()
    return m


def _fluidloss(r: _Reader) -> FluidLossModel:
    d = FluidLossModel()
    try:
        m = FluidLossModel(r.get("dynamic_viscosity", _num, d.dynamic_viscosity),
                           r.get("kinematic_viscosity", _num, d.kinematic_viscosity),
                           r.get("le_clamp", _num, d.le_clamp))
    except ValueError as e:
        r.fail(None, str(e))
    r.done()
    return m


def _pool(r: _Reader) -> PoolConfig:
    d = PoolConfig()
    cfg = PoolConfig(r.get("size", _int, d.size), r.get("amplitude", _num, d.amplitude),
                     r.get("seed", _int, d.seed), r.get("include_baseline", _bool, d.include_baseline),
                     r.get("max_draws", _int, d.max_draws))
    if cfg.size < 1:
        r.fail("size", "pool size must be >= 1")
    if not cfg.amplitude >= 0:
        r.fail("amplitude", "amplitude must be nonnegative")
    r.done()
    return cfg


def _evaluate(r: _Reader, n_modes) -> EvaluateConfig:
    coeffs = list(r.get("coefficients", _matrix(n_modes), ()))
    g = r.sub("grid")
    if g.data:
        modes = g.get("modes", lambda v: tuple(_int(x) for x in v), ())
        values = g.get("values", _vec(), ())
        if not modes or not values:
            g.fail(None, "grid needs 'modes' and 'values'")
        if any(not 0 <= m < n_modes for m in modes):
            g.fail("modes", f"mode index out of range 0..{n_modes - 1}")
        for combo in np.array(np.meshgrid(*[values] * len(modes), indexing="ij")).reshape(len(modes), -1).T:
            c = np.zeros(n_modes)
            c[list(modes)] = combo
            coeffs.append(tuple(float(x) for x in c))
    g.done()
    r.done()
    return EvaluateConfig(tuple(coeffs))


def _scalarization(r: _Reader) -> ScalarizeConfig:
    method = r.get("method", _str, "weighted_sum")
    if method not in METHODS:
        r.fail("method", f"expected one of {METHODS}")
    mode = r.get("mode", _str, "pool")
    if mode not in ("pool", "search"):
        r.fail("mode", "expected 'pool' or 'search'")
    thetas = list(r.get("thetas", _matrix(), ()))
    p = r.sub("path")
    if p.data:
        a, b = p.get("start", _vec()), p.get("end", _vec())
        steps = p.get("steps", _int, 11)
        if a is None or b is None or len(a) != len(b):
            p.fail(None, "path needs 'start' and 'end' of equal length")
        if steps < 2:
            p.fail("steps", "need at least 2 steps")
        for t in np.linspace(0.0, 1.0, steps):
            thetas.append(tuple(float(x) for x in (1 - t) * np.asarray(a) + t * np.asarray(b)))
    p.done()
    if not thetas:
        r.fail("thetas", "no parameter values given (use 'thetas' or a [scalarization.path])")
    if len({len(t) for t in thetas}) != 1:
        r.fail("thetas", "all parameter vectors must have the same length")
    ref = r.get("reference", _vec(len(thetas[0])), None)
    index = r.get("index", _int, 0)
    scale = r.get("scale", _vec(len(thetas[0])), None)
    if scale is not None and not all(x > 0 for x in scale):
        r.fail("scale", "scales must be positive")
    s = r.sub("search")
    d = SearchConfig()
    search = SearchConfig(s.get("bound", _num, d.bound), s.get("n_starts", _int, d.n_starts),
                          s.get("initial_step", _num, d.initial_step), s.get("min_step", _num, d.min_step),
                          s.get("max_evals", _int, d.max_evals))
    s.done()
    r.done()
    return ScalarizeConfig(method, mode, tuple(thetas), ref, index, search, scale)


def parse_config(text: str, source=None) -> Config:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"TOML syntax error: {e}", line=int(m.group(1)) if m else None) from None
    for key in data:
        if key not in _SECTIONS:
            raise ConfigError("unknown section", field=key, line=find_line(text, [key]))
    if "elast" in data and "elasticity" in data:
        raise ConfigError("give either [elast] or [elasticity]", field="elast",
                          line=find_line(text, ["elast"]))
    sec = lambda name: _Reader(text, data.get(name, {}), [name])  # noqa: E731
    shape_space = _geometry(sec("geometry"))
    m = sec("mesh")
    h = m.get("h", _num, 0.1)
    if not h > 0:
        m.fail("h", "mesh size must be positive")
    m.done()
    base = RunConfig()
    ename = "elast" if "elast" in data else "elasticity"
    run = RunConfig(shape_space, h, _flow(sec("flow")), _solid(sec(ename), base.solid),
                    _reliability(sec("reliability")), _fluidloss(sec("fluidloss")), _pool(sec("pool")))
    ev = _evaluate(sec("evaluate"), shape_space.n_modes)
    sc = _scalarization(sec("scalarization")) if "scalarization" in data else ScalarizeConfig(
        thetas=((0.5, 0.5),))
    return Config(run, ev, sc, source)


def load_config(path) -> Config:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read configuration: {e}") from None
    return parse_config(text, str(path))
