"""Shape space: baseline component, bounded smooth deformations, boundary sampling.

A shape is the image of a star-shaped baseline component under a planar map
``psi(x) = x + eta(rho(x)) * delta(theta(x)) * n0(theta(x))`` where ``theta`` and
``rho`` are polar coordinates about the baseline center (``rho`` normalized so
the baseline boundary sits at ``rho = 1``), ``eta`` is a smooth bump supported
on the collar ``|rho - 1| < collar`` and ``delta`` is a truncated trigonometric
series damped to zero on the fixed part of the boundary.  Both blends are
polynomials with k + 1 continuous derivatives, so psi is C^{k,1}.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.special import betainc
from numba import njit
from scipy.spatial.distance import directed_hausdorff
from shapely.geometry import LinearRing

from .errors import (ConfigError, EmptySet, GridTooCoarse, NormBoundViolation,
                     SelfIntersection)

DIM = 2
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class Baseline:
    """Star-shaped baseline component boundary, parameterized by polar angle."""

    kind: str = "circle"
    center: tuple = (0.0, 0.0)
    radius: float = 0.5
    semi_axes: tuple = (0.5, 0.5)
    points: tuple = ()

    def __post_init__(self):
        if self.kind not in ("circle", "ellipse", "points"):
            raise ConfigError(f"unknown baseline kind {self.kind!r}", field="geometry.baseline.kind")
        if self.kind == "circle" and not self.radius > 0:
            raise ConfigError("radius must be positive", field="geometry.baseline.radius")
        if self.kind == "ellipse" and not min(self.semi_axes) > 0:
            raise ConfigError("semi axes must be positive", field="geometry.baseline.semi_axes")
        if self.kind == "points":
            if len(self.points) < 5:
                raise ConfigError("need at least 5 control points", field="geometry.baseline.points")
            th, r = self._polar_samples()
            if np.any(np.diff(th) <= 0) or np.any(r <= 0):
                raise ConfigError("control points must be star-shaped about the center",
                                  field="geometry.baseline.points")

    def _polar_samples(self):
        p = np.asarray(self.points, float) - np.asarray(self.center, float)
        th = np.mod(np.arctan2(p[:, 1], p[:, 0]), TWO_PI)
        order = np.argsort(th)
        return th[order], np.hypot(p[:, 0], p[:, 1])[order]

    @functools.cached_property
    def _spline(self):
        th, r = self._polar_samples()
        th = np.r_[th, th[0] + TWO_PI]
        r = np.r_[r, r[0]]
        return CubicSpline(th, r, bc_type="periodic")

    def radius_at(self, theta, nu=0):
        """Polar radius R0(theta) or its ``nu``-th derivative."""
        theta = np.asarray(theta, float)
        if self.kind == "circle":
            return np.full_like(theta, self.radius) if nu == 0 else np.zeros_like(theta)
        if self.kind == "ellipse":
            a, b = self.semi_axes
            q = (b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2
            if nu == 0:
                return a * b / np.sqrt(q)
            dq = (a * a - b * b) * np.sin(2 * theta)
            if nu == 1:
                return -0.5 * a * b * dq * q ** -1.5
            raise ValueError("only first derivative available for ellipse")
        spl = self._spline
        t0 = spl.x[0]
        return spl(np.mod(theta - t0, TWO_PI) + t0, nu)

    def point(self, theta):
        theta = np.asarray(theta, float)
        r = self.radius_at(theta)
        c = np.asarray(self.center, float)
        return np.stack([c[0] + r * np.cos(theta), c[1] + r * np.sin(theta)], axis=-1)

    def normal(self, theta):
        """Outward unit normal of the baseline curve."""
        theta = np.asarray(theta, float)
        r = self.radius_at(theta)
        dr = self.radius_at(theta, 1)
        tx = dr * np.cos(theta) - r * np.sin(theta)
        ty = dr * np.sin(theta) + r * np.cos(theta)
        nrm = np.hypot(tx, ty)
        return np.stack([ty / nrm, -tx / nrm], axis=-1)


@dataclass(frozen=True)
class Shroud:
    """Rectangular channel D; inlet on the left side, outlet on the right."""

    x0: float = -2.0
    y0: float = -1.0
    x1: float = 2.0
    y1: float = 1.0
    corner_radius: float = 0.25  # 0 gives sharp corners; arcs count as wall

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ConfigError("shroud extents must be increasing", field="geometry.shroud")
        if not 0 <= self.corner_radius <= 0.25 * min(self.x1 - self.x0, self.y1 - self.y0):
            raise ConfigError("corner radius must lie in [0, min(width, height) / 4]",
                              field="geometry.shroud.corner_radius")

    def signed_distance(self, p):
        """Negative inside the rectangle, positive outside (corners unrounded)."""
        p = np.asarray(p, float)
        dx = np.maximum(self.x0 - p[..., 0], p[..., 0] - self.x1)
        dy = np.maximum(self.y0 - p[..., 1], p[..., 1] - self.y1)
        out = np.hypot(np.maximum(dx, 0), np.maximum(dy, 0))
        return np.where((dx > 0) | (dy > 0), out, np.maximum(dx, dy))


@dataclass(frozen=True)
class ClampDisc:
    center: tuple = (0.0, 0.0)
    radius: float = 0.1


@dataclass(frozen=True)
class ShapeSpaceConfig:
    baseline: Baseline = field(default_factory=Baseline)
    shroud: Shroud = field(default_factory=Shroud)
    exterior_box: tuple = (-3.0, -2.0, 3.0, 2.0)
    clamp_disc: Optional[ClampDisc] = None
    hoelder_k: int = 2
    hoelder_alpha: float = 0.5
    norm_bound: float = 10.0
    n_modes: int = 4
    fixed_arcs: tuple = ()
    leading_edge_angle: Optional[float] = None  # default: upstream junction, else pi
    collar: float = 0.75
    transition: float = 0.6
    norm_grid: int = 64

    def __post_init__(self):
        if self.hoelder_k < 2:
            raise ConfigError("hoelder_k must be >= 2", field="geometry.hoelder_k")
        if not 0 < self.hoelder_alpha <= 1:
            raise ConfigError("hoelder_alpha must lie in (0, 1]", field="geometry.hoelder_alpha")
        if not self.norm_bound > 0:
            raise ConfigError("norm_bound must be positive", field="geometry.norm_bound")
        if self.n_modes < 0:
            raise ConfigError("n_modes must be nonnegative", field="geometry.n_modes")
        if not 0 < self.collar < 1:
            raise ConfigError("collar must lie in (0, 1)", field="geometry.collar")
        if not self.transition > 0:
            raise ConfigError("transition must be positive", field="geometry.transition")
        if self.norm_grid < self.hoelder_k + 2:
            raise ConfigError("norm_grid too coarse", field="geometry.norm_grid")
        th = np.linspace(0, TWO_PI, 1024, endpoint=False)
        ring = self.baseline.point(th)
        if not LinearRing(ring).is_simple:
            raise ConfigError("baseline boundary is not simple", field="geometry.baseline")
        xmin, ymin, xmax, ymax = self.exterior_box
        s = self.shroud
        if not (xmin < s.x0 and ymin < s.y0 and xmax > s.x1 and ymax > s.y1):
            raise ConfigError("exterior box must contain the shroud", field="geometry.exterior_box")
        outer = _collar_curve(self, th, 1.0 + self.collar)
        if (outer[:, 0].min() <= xmin or outer[:, 0].max() >= xmax
                or outer[:, 1].min() <= ymin or outer[:, 1].max() >= ymax):
            raise ConfigError("deformation collar leaves the exterior box", field="geometry.collar")
        moving = self.weight(th) > 0
        rhos = np.linspace(1.0 - self.collar, 1.0 + self.collar, 17)
        seg = np.stack([_collar_curve(self, th[moving], r) for r in rhos])
        if np.any(self.shroud.signed_distance(seg) >= 0):
            raise ConfigError("deformation collar leaves the shroud outside the fixed region",
                              field="geometry.collar")
        if self.clamp_disc is not None:
            cb = self.clamp_disc
            if not cb.radius > 0:
                raise ConfigError("clamp radius must be positive", field="geometry.clamp.radius")
            pts = np.asarray(cb.center) + cb.radius * np.c_[np.cos(th), np.sin(th)]
            if np.any(polar_rho(self.baseline, pts)[0] >= 1.0 - self.collar):
                raise ConfigError("clamp disc must lie strictly inside the component, clear of the collar",
                                  field="geometry.clamp")
            if np.any(self.shroud.signed_distance(pts) <= 0):
                raise ConfigError("clamp disc must lie outside the shroud", field="geometry.clamp")
        if _identity_norm(self) > self.norm_bound:
            raise ConfigError("norm_bound is smaller than the norm of the identity map on the exterior box",
                              field="geometry.norm_bound")

    # fixed region --------------------------------------------------------
    @functools.cached_property
    def fixed_intervals(self):
        """Angular arcs of the baseline boundary where the transform is the identity."""
        arcs = [tuple(map(float, a)) for a in self.fixed_arcs]
        arcs += [tuple(a) for a in collar_exit_arcs(self)]
        return tuple(arcs)

    @functools.cached_property
    def le_angle(self):
        """Leading-edge parameter: explicit, else the upstream root junction, else pi."""
        if self.leading_edge_angle is not None:
            return float(self.leading_edge_angle) % TWO_PI
        junc = junction_angles(self)
        if not junc:
            return math.pi
        x = self.baseline.point(np.asarray(junc))[:, 0]
        return float(junc[int(np.argmin(x))]) % TWO_PI

    def weight(self, theta):
        """Damping of the boundary displacement: zero at the leading edge and on fixed arcs."""
        theta = np.mod(np.asarray(theta, float), TWO_PI)
        w = np.sin(0.5 * (theta - self.le_angle)) ** 2
        if not self.fixed_intervals:
            return w
        dist = np.full(theta.shape, np.inf)
        for a, b in self.fixed_intervals:
            a = a % TWO_PI
            length = (b - a) % TWO_PI
            rel = np.mod(theta - a, TWO_PI)
            d = np.minimum(rel - length, TWO_PI - rel)
            dist = np.minimum(dist, np.where(rel <= length, 0.0, d))
        return w * smoothstep(dist / self.transition, self.hoelder_k + 1)

    @property
    def dim(self):
        return DIM


def smoothstep(t, order=3):
    """Polynomial step, 0 for t <= 0 and 1 for t >= 1, with ``order`` vanishing derivatives at both ends."""
    t = np.clip(np.asarray(t, float), 0.0, 1.0)
    return betainc(order + 1, order + 1, t)


def bump(s, order=3):
    """Polynomial bump (1 - s^2)^(order + 1): bump(0) = 1, support [-1, 1], C^order."""
    s = np.asarray(s, float)
    return np.where(np.abs(s) < 1, (1.0 - s * s) ** (order + 1), 0.0)


def polar_rho(baseline: Baseline, pts):
    pts = np.asarray(pts, float)
    c = np.asarray(baseline.center, float)
    rel = pts - c
    th = np.arctan2(rel[..., 1], rel[..., 0])
    return np.hypot(rel[..., 0], rel[..., 1]) / baseline.radius_at(th), th


def _collar_curve(cfg, theta, rho):
    c = np.asarray(cfg.baseline.center, float)
    r = rho * cfg.baseline.radius_at(theta)
    return np.c_[c[0] + r * np.cos(theta), c[1] + r * np.sin(theta)]


def crossing_arcs(cfg: ShapeSpaceConfig):
    """Angular arcs of the baseline boundary lying outside the open shroud."""
    th = np.linspace(0, TWO_PI, 2049)
    sd = cfg.shroud.signed_distance(cfg.baseline.point(th))
    outside = sd >= 0
    if not outside.any():
        return []
    if outside.all():
        raise ConfigError("baseline component does not intersect the shroud", field="geometry.baseline")
    f = lambda t: float(cfg.shroud.signed_distance(cfg.baseline.point(t)))
    starts, ends = [], []
    for i in range(len(th) - 1):
        if outside[i] != outside[i + 1]:
            root = brentq(f, th[i], th[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
            (starts if outside[i + 1] else ends).append(root % TWO_PI)
    if len(starts) != len(ends):
        raise ConfigError("could not resolve baseline/shroud crossings", field="geometry.baseline")
    arcs = []
    for s in starts:
        e = min(ends, key=lambda e: (e - s) % TWO_PI)
        arcs.append((s, e))
    return arcs


def _collar_exit(cfg, theta, n_rho=65):
    """max over the radial collar segment at ``theta`` of the shroud signed distance."""
    theta = np.atleast_1d(np.asarray(theta, float))
    rhos = np.linspace(1.0 - cfg.collar, 1.0 + cfg.collar, n_rho)
    seg = np.stack([_collar_curve(cfg, theta, r) for r in rhos])
    return cfg.shroud.signed_distance(seg).max(axis=0)


def collar_exit_arcs(cfg: ShapeSpaceConfig):
    """Angular arcs whose radial collar segment is not inside the open shroud.

    The transform must be the identity there: it would otherwise move the shroud
    wall or the root of the component outside the channel.  Every such arc has to
    contain a root crossing; a collar touching the shroud anywhere else is an error.
    """
    th = np.linspace(0, TWO_PI, 4097)
    out = _collar_exit(cfg, th) >= 0
    if not out.any():
        return []
    if out.all():
        raise ConfigError("deformation collar never lies inside the shroud", field="geometry.collar")
    f = lambda t: float(_collar_exit(cfg, t)[0])
    starts, ends = [], []
    for i in range(len(th) - 1):
        if out[i] != out[i + 1]:
            root = brentq(f, th[i], th[i + 1], xtol=1e-14)
            (starts if out[i + 1] else ends).append(root % TWO_PI)
    arcs = []
    for a in starts:
        b = min(ends, key=lambda e: (e - a) % TWO_PI)
        arcs.append((a, b))
    crossings = crossing_arcs(cfg)
    for a, b in arcs:
        length = (b - a) % TWO_PI
        if not any((c - a) % TWO_PI <= length and (d - a) % TWO_PI <= length for c, d in crossings):
            raise ConfigError("deformation collar reaches the shroud boundary away from the root",
                              field="geometry.collar")
    # pad by a hair so the damping starts strictly inside the shroud
    return [(a - 1e-9, b + 1e-9) for a, b in arcs]


def junction_angles(cfg: ShapeSpaceConfig):
    out = []
    for a, b in crossing_arcs(cfg):
        out += [a, b]
    return sorted(out)


def _identity_norm(cfg):
    xmin, ymin, xmax, ymax = cfg.exterior_box
    return max(abs(xmin), abs(xmax), abs(ymin), abs(ymax), 1.0)


def trig_basis(theta, n_modes):
    """Rows: 1, cos t, sin t, cos 2t, sin 2t, ... (first ``n_modes`` of them)."""
    theta = np.asarray(theta, float)
    rows = []
    for j in range(n_modes):
        if j == 0:
            rows.append(np.ones_like(theta))
        else:
            m = (j + 1) // 2
            rows.append(np.cos(m * theta) if j % 2 else np.sin(m * theta))
    return np.array(rows).reshape((n_modes,) + theta.shape)


# ---------------------------------------------------------------------------
# shapes

@dataclass(frozen=True, eq=False)
class Shape:
    config: ShapeSpaceConfig
    coefficients: tuple
    leading_edge: float
    norm_estimate: float = float("nan")
    inverse_norm_estimate: float = float("nan")

    dim = DIM

    def __eq__(self, other):
        return (isinstance(other, Shape) and other.config == self.config
                and other.coefficients == self.coefficients)

    def __hash__(self):
        return hash((self.config, self.coefficients))

    @property
    def is_baseline(self):
        return not any(self.coefficients)

    def normal_displacement(self, theta):
        """Boundary-normal displacement amplitude delta(theta)."""
        cfg = self.config
        if self.is_baseline:
            return np.zeros_like(np.asarray(theta, float))
        c = np.asarray(self.coefficients, float)
        series = np.tensordot(c, trig_basis(theta, cfg.n_modes), axes=1)
        return cfg.weight(theta) * series

    def displacement(self, pts):
        """Planar displacement field d(x) = psi(x) - x."""
        pts = np.asarray(pts, float)
        if self.is_baseline:
            return np.zeros_like(pts)
        cfg = self.config
        rho, th = polar_rho(cfg.baseline, pts)
        eta = bump((rho - 1.0) / cfg.collar, cfg.hoelder_k + 1)
        amp = eta * self.normal_displacement(th)
        return amp[..., None] * cfg.baseline.normal(th)

    def map(self, pts):
        pts = np.asarray(pts, float)
        return pts + self.displacement(pts)

    def inverse_map(self, pts, tol=1e-10, max_iter=500):
        """psi^{-1} by the fixed-point iteration x <- y - d(x)."""
        y = np.asarray(pts, float)
        x = y.copy()
        for _ in range(max_iter):
            x_new = y - self.displacement(x)
            step = np.max(np.abs(x_new - x)) if x.size else 0.0
            x = x_new
            if step <= tol:
                return x
        raise NormBoundViolation("inverse transform iteration did not converge")

    def boundary_points(self, theta):
        cfg = self.config
        b = cfg.baseline
        return b.point(theta) + self.normal_displacement(theta)[..., None] * b.normal(theta)


def _norm_grid(cfg: ShapeSpaceConfig, n):
    th = np.linspace(0, TWO_PI, 721)
    outer = _collar_curve(cfg, th, 1.0 + cfg.collar)
    lo = outer.min(axis=0)
    hi = outer.max(axis=0)
    pad = 2.0 * (hi - lo) / (n - 5)
    lo, hi = lo - pad, hi + pad
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([X, Y], axis=-1), (xs[1] - xs[0], ys[1] - ys[0])


def transform_norms(shape: Shape, n_grid=None):
    """Estimated C^{k,alpha} norms of psi and psi^{-1} over the exterior box.

    The deformation is supported in the collar, so derivatives are sampled on a
    grid covering the collar; outside it the map is the identity, whose
    contribution (|x| on the box, unit Jacobian) is added analytically.
    """
    cfg = shape.config
    n = n_grid or cfg.norm_grid
    grid, spacing = _norm_grid(cfg, n)
    ident = _identity_norm(cfg)
    out = []
    for values in (shape.map(grid), shape.inverse_map(grid)):
        comps = [values[..., 0], values[..., 1]]
        sups, semi = _hoelder_parts(comps, spacing, cfg.hoelder_k, cfg.hoelder_alpha)
        sups[0] = max(sups[0], ident)
        sups[1] = max(sups[1], 1.0)
        out.append(max(sups) + semi)
    return out[0], out[1], grid


def realize_shape(config: ShapeSpaceConfig, coefficients, check=True) -> Shape:
    coefficients = tuple(float(c) for c in np.ravel(coefficients))
    if len(coefficients) != config.n_modes:
        raise ValueError(f"expected {config.n_modes} coefficients, got {len(coefficients)}")
    if not all(math.isfinite(c) for c in coefficients):
        raise ValueError("coefficients must be finite")
    le = config.le_angle
    base = Shape(config, coefficients, le)
    if base.is_baseline or not check:
        ident = _identity_norm(config)
        return Shape(config, coefficients, le, ident, ident) if base.is_baseline else base
    ring = base.boundary_points(np.linspace(0, TWO_PI, 1024, endpoint=False))
    if not LinearRing(ring).is_simple:
        raise SelfIntersection("deformed boundary is not simple")
    try:
        norm, inv_norm, grid = transform_norms(base)
    except NormBoundViolation:
        raise
    if norm > config.norm_bound or inv_norm > config.norm_bound:
        raise NormBoundViolation(
            f"transform norm {max(norm, inv_norm):.6g} exceeds bound {config.norm_bound:.6g}")
    jac = _jacobian_det(base.map(grid), grid)
    if np.any(jac <= 0):
        raise SelfIntersection("deformation folds the plane")
    return Shape(config, coefficients, le, norm, inv_norm)


def _jacobian_det(values, grid):
    hx = grid[1, 0, 0] - grid[0, 0, 0]
    hy = grid[0, 1, 1] - grid[0, 0, 1]
    dxx, dxy = np.gradient(values[..., 0], hx, hy, edge_order=2)
    dyx, dyy = np.gradient(values[..., 1], hx, hy, edge_order=2)
    return dxx * dyy - dxy * dyx


# ---------------------------------------------------------------------------
# metrics

def hausdorff_distance(a, b) -> float:
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    if a.size == 0 or b.size == 0:
        raise EmptySet("Hausdorff distance needs nonempty point sets")
    return max(directed_hausdorff(a, b, seed=0)[0], directed_hausdorff(b, a, seed=0)[0])


def _second_difference(f, h, axis):
    """Compact second derivative, second-order accurate including the end points."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h ** 2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h ** 2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h ** 2
    return np.moveaxis(out, 0, axis)


def _partial(f, spacing, idx):
    for ax, order in enumerate(idx):
        for _ in range(order // 2):
            f = _second_difference(f, spacing[ax], ax)
        if order % 2:
            f = np.gradient(f, spacing[ax], axis=ax, edge_order=2)
    return f


def _derivatives(values, spacing, k):
    """All partial derivatives up to order k, keyed by multi-index."""
    ndim = values.ndim
    idxs = [idx for idx in np.ndindex(*(k + 1,) * ndim) if sum(idx) <= k]
    return {idx: _partial(values, spacing, idx) for idx in idxs}


@njit(cache=True)
def _pair_ratio_max(coords, F, alpha):
    n, d = coords.shape
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for a in range(d):
                t = coords[i, a] - coords[j, a]
                r2 += t * t
            if r2 == 0.0:
                continue
            w = r2 ** (-0.5 * alpha)
            for f in range(F.shape[0]):
                q = abs(F[f, i] - F[f, j]) * w
                if q > best:
                    best = q
    return best


@njit(cache=True)
def _grid_ratio_max(F, wtab, osc):
    # F: (nf, nx, ny) samples on a uniform grid, wtab[dx, dy] = |offset|^-alpha
    nf, nx, ny = F.shape
    best = 0.0
    for dx in range(nx):
        for dy in range(-ny + 1, ny):
            if dx == 0 and dy <= 0:
                continue
            w = wtab[dx, abs(dy)]
            if w * osc <= best:
                continue
            y0 = max(0, -dy)
            y1 = min(ny, ny - dy)
            for x in range(nx - dx):
                for y in range(y0, y1):
                    for f in range(nf):
                        q = abs(F[f, x + dx, y + dy] - F[f, x, y]) * w
                        if q > best:
                            best = q
    return best


def _seminorm(fields, spacing, alpha):
    """max over fields of sup_{x != y} |f(x) - f(y)| / |x - y|^alpha over all grid pairs.

    Offsets whose bound |offset|^-alpha * osc(f) cannot beat the running
    maximum are skipped, which does not change the result.
    """
    F = np.stack([np.asarray(f, float) for f in fields])
    if F.ndim == 2:
        F = F[:, :, None]
        spacing = (spacing[0], 1.0)
    if F.ndim != 3:
        raise ValueError("grids of dimension > 2 are not supported")
    nx, ny = F.shape[1:]
    ix = np.arange(nx)[:, None] * spacing[0]
    iy = np.arange(ny)[None, :] * spacing[1]
    with np.errstate(divide="ignore"):
        wtab = np.where((ix > 0) | (iy > 0), np.hypot(ix, iy) ** -alpha, 0.0)
    osc = float(np.max(F.max(axis=(1, 2)) - F.min(axis=(1, 2))))
    return float(_grid_ratio_max(np.ascontiguousarray(F), wtab, osc))


def _hoelder_parts(fields, spacing, k, alpha):
    first = np.asarray(fields[0])
    ndim = first.ndim
    spacing = tuple(np.broadcast_to(np.asarray(spacing, float), (ndim,)))
    if any(s < k + 2 for s in first.shape):
        raise GridTooCoarse(f"need at least {k + 2} samples per axis for k={k}")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    sups = [0.0] * (k + 1)
    top = []
    for f in fields:
        for idx, d in _derivatives(np.asarray(f, float), spacing, k).items():
            order = sum(idx)
            sups[order] = max(sups[order], float(np.max(np.abs(d))))
            if order == k:
                top.append(d)
    return sups, _seminorm(top, spacing, alpha)


def hoelder_norm_estimate(field, spacing, k: int, alpha: float) -> float:
    """Discrete C^{k,alpha} norm of a function sampled on a uniform grid.

    ``field`` is an ndarray over the grid (one axis per spatial dimension) or a
    list of such arrays for vector fields (the max over components is taken).
    Derivatives are second-order finite differences; the Hoelder seminorm of
    the order-k derivatives is the maximum over all sampled pairs.
    """
    fields = list(field) if isinstance(field, (list, tuple)) else [field]
    sups, semi = _hoelder_parts(fields, spacing, k, alpha)
    return max(sups) + semi


# ---------------------------------------------------------------------------
# boundary sampling

@dataclass(frozen=True, eq=False)
class BoundaryGeometry:
    vertices: np.ndarray
    normals: np.ndarray
    arclength_to_LE: np.ndarray
    segment_tags: tuple
    wetted: np.ndarray  # per edge (i, i+1): edge lies in the closed shroud
    theta: np.ndarray
    junctions: tuple = ()

    dim = DIM

    def __len__(self):
        return len(self.vertices)

    @property
    def edges(self):
        n = len(self.vertices)
        return np.c_[np.arange(n), (np.arange(n) + 1) % n]

    @property
    def edge_lengths(self):
        v = self.vertices
        return np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)

    @property
    def perimeter(self):
        return float(self.edge_lengths.sum())

    @property
    def wetted_vertices(self):
        mask = np.zeros(len(self.vertices), bool)
        e = self.edges[self.wetted]
        mask[e.ravel()] = True
        return mask

    def to_csv(self, path):
        wv = self.wetted_vertices
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "nx", "ny", "dist_LE", "tag"])
            for i, (p, n, s) in enumerate(zip(self.vertices, self.normals, self.arclength_to_LE)):
                tag = "component" if wv[i] else "root"
                w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(n[0])),
                            repr(float(n[1])), repr(float(s)), tag])


def resolution_for(config: ShapeSpaceConfig, h: float) -> int:
    """Boundary resolution giving baseline edge lengths of about 0.75 h."""
    th = np.linspace(0, TWO_PI, 4097)
    per = float(np.sum(np.linalg.norm(np.diff(config.baseline.point(th), axis=0), axis=1)))
    return max(16, int(math.ceil(per / (0.75 * h))))


@functools.lru_cache(maxsize=64)
def boundary_parameters(config: ShapeSpaceConfig, resolution: int):
    """Boundary angles: equal baseline arc length starting at the leading edge, plus junctions."""
    le = config.le_angle
    fine = le + np.linspace(0, TWO_PI, 16 * resolution + 1)
    pts = config.baseline.point(fine)
    s = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    target = np.linspace(0, s[-1], resolution + 1)[:-1]
    theta = np.interp(target, s, fine)
    junc = [((j - le) % TWO_PI) + le for j in junction_angles(config)]
    at_le = [j for j in junc if min(j - le, le + TWO_PI - j) <= 1e-9]  # already vertex 0
    junc = [j for j in junc if j not in at_le]
    if junc:
        spacing = s[-1] / resolution
        s_j = np.interp(junc, fine, s)
        keep = np.ones(len(theta), bool)
        for sj in s_j:
            close = np.abs(target - sj) < 0.25 * spacing  # merged gap stays below 0.94 h
            close[0] = False
            keep &= ~close
        theta = np.sort(np.r_[theta[keep], junc])
    jidx = tuple(sorted([0] * bool(at_le) + [int(np.argmin(np.abs(theta - j))) for j in junc]))
    return np.mod(theta, TWO_PI), jidx


def boundary_geometry(shape: Shape, resolution: int) -> BoundaryGeometry:
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    cfg = shape.config
    theta, jidx = boundary_parameters(cfg, resolution)
    verts = shape.boundary_points(theta)
    sh = cfg.shroud
    for j in jidx:
        # junction points sit exactly on the nearest shroud side
        x, y = verts[j]
        cand = [(abs(x - sh.x0), 0, sh.x0), (abs(x - sh.x1), 0, sh.x1),
                (abs(y - sh.y0), 1, sh.y0), (abs(y - sh.y1), 1, sh.y1)]
        _, ax, val = min(cand)
        verts[j, ax] = val
    eps = 1e-7
    tang = (shape.boundary_points(theta + eps) - shape.boundary_points(theta - eps)) / (2 * eps)
    tn = np.linalg.norm(tang, axis=1)
    normals = np.c_[tang[:, 1] / tn, -tang[:, 0] / tn]
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    edge_len = np.linalg.norm(np.roll(verts, -1, axis=0) - verts, axis=1)
    fwd = np.r_[0.0, np.cumsum(edge_len)[:-1]]
    per = edge_len.sum()
    arc = np.minimum(fwd, per - fwd)
    arc[0] = 0.0
    inside_v = sh.signed_distance(verts) <= 1e-12
    mids = 0.5 * (verts + np.roll(verts, -1, axis=0))
    wetted = inside_v & np.roll(inside_v, -1) & (sh.signed_distance(mids) < 0)
    tags = tuple("component" for _ in range(len(verts)))
    return BoundaryGeometry(verts, normals, arc, tags, wetted, theta, jidx)


def clamp_polygon(config: ShapeSpaceConfig, h: float):
    cb = config.clamp_disc
    n = max(12, int(math.ceil(TWO_PI * cb.radius / (0.9 * h))))
    t = np.linspace(0, TWO_PI, n, endpoint=False)
    return np.asarray(cb.center, float) + cb.radius * np.c_[np.cos(t), np.sin(t)]
