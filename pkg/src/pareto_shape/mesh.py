"""Conforming triangle meshes of the fluid region D \\ Omega and the solid region Omega \\ B.

Meshes of a deformed shape are obtained by pushing the baseline mesh through
the shape transform psi; this keeps the mesh topology fixed across the shape
family, which is what makes objective values vary continuously with the
deformation coefficients.  A fresh constrained Delaunay mesh of the deformed
geometry is used only when the transported mesh breaks the quality floor.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import triangle
from shapely.geometry import Point, Polygon

from .errors import MeshFailure
from .geometry import (DIM, TWO_PI, BoundaryGeometry, Shape, Shroud, boundary_geometry,
                       clamp_polygon, realize_shape, resolution_for)

TAGS = ("inlet", "outlet", "wall", "component", "clamp")
MIN_ANGLE = 20.0
_QUALITY = 25.0


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: tuple
    region: str
    component_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    provenance: str = "delaunay"
    boundary_midpoints: Optional[np.ndarray] = None  # per boundary edge, on the true curve

    dim = DIM

    def __post_init__(self):
        for arr in (self.nodes, self.triangles, self.boundary_edges, self.component_nodes,
                    self.boundary_midpoints):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def h_max(self):
        return float(edge_lengths(self.nodes, self.triangles).max())

    @property
    def areas(self):
        return triangle_areas(self.nodes, self.triangles)

    @property
    def min_angle(self):
        return float(triangle_angles(self.nodes, self.triangles).min())

    def edges_with_tag(self, tag):
        mask = np.array([t == tag for t in self.edge_tags], bool)
        return self.boundary_edges[mask]

    def tag_counts(self):
        return {t: sum(1 for e in self.edge_tags if e == t) for t in TAGS}

    @property
    def n_holes(self):
        chi = len(self.nodes) - len(unique_edges(self.triangles)) + len(self.triangles)
        return 1 - chi


def triangle_areas(nodes, tris):
    a = nodes[tris[:, 1]] - nodes[tris[:, 0]]
    b = nodes[tris[:, 2]] - nodes[tris[:, 0]]
    return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])


def triangle_angles(nodes, tris):
    p = nodes[tris]
    out = []
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        out.append(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
    return np.stack(out, axis=1)


def edge_lengths(nodes, tris):
    e = np.r_[tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]
    return np.linalg.norm(nodes[e[:, 0]] - nodes[e[:, 1]], axis=1)


def unique_edges(tris):
    e = np.sort(np.r_[tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1)
    return np.unique(e, axis=0)


def topological_boundary(tris):
    """Edges belonging to exactly one triangle."""
    e = np.sort(np.r_[tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    return uniq[counts == 1]


# ---------------------------------------------------------------------------
# PSLG construction

def _subdivide(a, b, h):
    n = max(1, int(math.ceil(np.linalg.norm(b - a) / (0.9 * h))))
    t = np.arange(n)[:, None] / n
    return a + (b - a) * t


def _arc(center, r, t0, t1, h):
    n = max(2, int(math.ceil(abs(t1 - t0) * r / (0.9 * h))))
    t = t0 + (t1 - t0) * np.arange(n) / n
    return np.c_[center[0] + r * np.cos(t), center[1] + r * np.sin(t)]


def shroud_outline(shroud: Shroud, h: float):
    """Closed CCW polyline of the shroud with per-edge tags.

    Corners are rounded with arcs of radius ``shroud.corner_radius`` tagged as wall.
    """
    x0, y0, x1, y1 = shroud.x0, shroud.y0, shroud.x1, shroud.y1
    r = shroud.corner_radius
    pieces = []

    def straight(a, b, tag):
        pts = _subdivide(np.asarray(a, float), np.asarray(b, float), h)
        pieces.append((pts, [tag] * len(pts)))

    def corner(c, t0, t1):
        if r > 0:
            pts = _arc(c, r, t0, t1, h)
            pieces.append((pts, ["wall"] * len(pts)))

    hp = 0.5 * math.pi
    straight((x0 + r, y0), (x1 - r, y0), "wall")
    corner((x1 - r, y0 + r), -hp, 0.0)
    straight((x1, y0 + r), (x1, y1 - r), "outlet")
    corner((x1 - r, y1 - r), 0.0, hp)
    straight((x1 - r, y1), (x0 + r, y1), "wall")
    corner((x0 + r, y1 - r), hp, math.pi)
    straight((x0, y1 - r), (x0, y0 + r), "inlet")
    corner((x0 + r, y0 + r), math.pi, 1.5 * math.pi)
    pts = np.concatenate([p for p, _ in pieces])
    tags = [t for _, ts in pieces for t in ts]
    return pts, tags


def triangulate_pslg(vertices, segments, seg_tags, holes, h, region, component_nodes=None):
    """Quality constrained Delaunay mesh with no Steiner points on the segments.

    The area bound is tightened until every edge is at most ``h`` long.
    """
    vertices = np.asarray(vertices, float)
    segments = np.asarray(segments, int)
    tag_ids = np.array([TAGS.index(t) + 1 for t in seg_tags], int)
    if np.any(np.linalg.norm(vertices[segments[:, 0]] - vertices[segments[:, 1]], axis=1) > h * (1 + 1e-12)):
        raise MeshFailure("boundary segment longer than h")
    data = dict(vertices=vertices, segments=segments, segment_markers=tag_ids[:, None])
    if len(holes):
        data["holes"] = np.asarray(holes, float)
    area = 0.2 * h * h
    for _ in range(12):
        out = triangle.triangulate(data, f"pq{_QUALITY}Ya{area:.20f}")  # no exponent notation
        nodes = out["vertices"]
        tris = out["triangles"].astype(int)
        if len(nodes) < len(vertices) or not np.allclose(nodes[:len(vertices)], vertices, atol=0, rtol=0):
            raise MeshFailure("mesher moved input vertices")
        if edge_lengths(nodes, tris).max() <= h:
            break
        area *= 0.7
    else:
        raise MeshFailure("could not meet the element size bound")
    segs = out["segments"].astype(int)
    marks = out["segment_markers"].ravel().astype(int)
    if len(segs) != len(segments):
        raise MeshFailure("mesher split boundary segments")
    bnd = topological_boundary(tris)
    key = {tuple(sorted(s)): TAGS[m - 1] for s, m in zip(segs, marks)}
    tags = []
    for e in bnd:
        t = key.get(tuple(e))
        if t is None:
            raise MeshFailure("boundary edge without tag (geometry too thin for h?)")
        tags.append(t)
    areas = triangle_areas(nodes, tris)
    if np.any(areas <= 0):
        tris = np.where((areas <= 0)[:, None], tris[:, [0, 2, 1]], tris)
    comp = np.zeros(0, int) if component_nodes is None else np.asarray(component_nodes, int)
    return Mesh(nodes.copy(), tris, bnd, tuple(tags), region, comp)


def _loop_segments(start, n):
    i = np.arange(n)
    return np.c_[start + i, start + (i + 1) % n]


def _fluid_pslg(shroud, bg: BoundaryGeometry, h):
    outline, otags = shroud_outline(shroud, h)
    poly = Polygon(bg.vertices)
    if not poly.is_valid:
        raise MeshFailure("component boundary is not a simple polygon")
    nb = len(bg)
    if not len(bg.junctions):
        if np.any(shroud.signed_distance(bg.vertices) >= 0):
            raise MeshFailure("component touches the shroud outside the fixed region")
        inside = [poly.contains(Point(p)) for p in outline]
        if any(inside):
            raise MeshFailure("shroud outline enters the component")
        verts = np.r_[outline, bg.vertices]
        segs = np.r_[_loop_segments(0, len(outline)), _loop_segments(len(outline), nb)]
        tags = list(otags) + ["component"] * nb
        comp = np.arange(len(outline), len(outline) + nb)
        c = np.asarray(bg.vertices.mean(axis=0))
        hole = np.asarray(poly.representative_point().coords[0]) if not poly.contains(Point(c)) else c
        return verts, segs, tags, [hole], comp
    # component crosses the shroud: splice the wetted chain into the outline
    pts = [p for p in outline]
    tg = list(otags)
    for j in bg.junctions:
        q = bg.vertices[j]
        m = len(pts)
        for i in range(m):
            a, b = pts[i], pts[(i + 1) % m]
            ab = b - a
            t = np.dot(q - a, ab) / np.dot(ab, ab)
            if -1e-12 <= t <= 1 + 1e-12 and np.linalg.norm(a + t * ab - q) < 1e-9:
                pts.insert(i + 1, q.copy())
                tg.insert(i + 1, tg[i])
                break
        else:
            raise MeshFailure("junction point not on the shroud outline")
    pts = np.array(pts)
    jset = {tuple(bg.vertices[j]) for j in bg.junctions}
    is_j = np.array([tuple(p) in jset for p in pts])
    covered = np.array([poly.buffer(-1e-12).contains(Point(p)) for p in pts])
    spacing = 0.9 * h
    near_j = np.array([not is_j[i] and min(np.linalg.norm(pts[i] - bg.vertices[j]) for j in bg.junctions) < 0.3 * spacing
                       for i in range(len(pts))])
    keep = ~covered & ~near_j
    idx = np.flatnonzero(keep)
    opts = pts[idx]
    otg = [tg[i] for i in idx]
    m = len(opts)
    segs, tags = [], []
    for i in range(m):
        a, b = opts[i], opts[(i + 1) % m]
        if poly.buffer(-1e-12).contains(Point(0.5 * (a + b))):
            continue
        segs.append((i, (i + 1) % m))
        tags.append(otg[i])
    # map junctions to outline indices, then append interior chain vertices
    where = {tuple(p): i for i, p in enumerate(opts)}
    comp = -np.ones(nb, int)
    for j in bg.junctions:
        comp[j] = where[tuple(bg.vertices[j])]
    verts = list(opts)
    wet_v = bg.wetted_vertices
    for i in range(nb):
        if wet_v[i] and comp[i] < 0:
            comp[i] = len(verts)
            verts.append(bg.vertices[i])
    for a, b in bg.edges[bg.wetted]:
        segs.append((comp[a], comp[b]))
        tags.append("component")
    return np.array(verts), np.array(segs), tags, [], comp


def mesh_channel(shroud: Shroud, h: float) -> Mesh:
    """Fluid mesh of the empty shroud (no component)."""
    outline, tags = shroud_outline(shroud, h)
    return triangulate_pslg(outline, _loop_segments(0, len(outline)), tags, [], h, "fluid")


def curved_midpoints(mesh: Mesh, shape: Shape, bg: BoundaryGeometry):
    """Boundary-edge midpoints on the true component curve and clamp circle."""
    be = mesh.boundary_edges
    mids = 0.5 * (mesh.nodes[be[:, 0]] + mesh.nodes[be[:, 1]])
    tags = np.array(mesh.edge_tags, dtype=object)
    comp = mesh.component_nodes
    owner = np.full(len(mesh.nodes), -1)
    ok = comp >= 0
    owner[comp[ok]] = np.flatnonzero(ok)
    cmask = tags == "component"
    if cmask.any():
        ia, ib = owner[be[cmask, 0]], owner[be[cmask, 1]]
        if np.all(ia >= 0) and np.all(ib >= 0):
            ta, tb = bg.theta[ia], bg.theta[ib]
            dt = np.mod(tb - ta + np.pi, TWO_PI) - np.pi
            mids[cmask] = shape.boundary_points(ta + 0.5 * dt)
    clamp = shape.config.clamp_disc
    kmask = tags == "clamp"
    if clamp is not None and kmask.any():
        c = np.asarray(clamp.center, float)
        d = mids[kmask] - c
        mids[kmask] = c + clamp.radius * d / np.linalg.norm(d, axis=1)[:, None]
    return mids


def _with_midpoints(mesh: Mesh, shape: Shape, bg, provenance=None) -> Mesh:
    return Mesh(mesh.nodes.copy(), mesh.triangles.copy(), mesh.boundary_edges.copy(), mesh.edge_tags,
                mesh.region, mesh.component_nodes.copy(), provenance or mesh.provenance,
                curved_midpoints(mesh, shape, bg))


def _direct_fluid(shape, h):
    bg = boundary_geometry(shape, resolution_for(shape.config, h))
    verts, segs, tags, holes, comp = _fluid_pslg(shape.config.shroud, bg, h)
    return _with_midpoints(triangulate_pslg(verts, segs, tags, holes, h, "fluid", comp), shape, bg)


def _direct_solid(shape, h):
    bg = boundary_geometry(shape, resolution_for(shape.config, h))
    poly = Polygon(bg.vertices)
    if not poly.is_valid:
        raise MeshFailure("component boundary is not a simple polygon")
    nb = len(bg)
    verts = [bg.vertices]
    segs = [_loop_segments(0, nb)]
    tags = ["component"] * nb
    holes = []
    cfg = shape.config
    if cfg.clamp_disc is not None:
        cp = clamp_polygon(cfg, h)
        disc = Point(cfg.clamp_disc.center).buffer(cfg.clamp_disc.radius, 64)
        if not poly.buffer(-0.25 * h).contains(disc):
            raise MeshFailure("clamp disc overlaps the component boundary")
        verts.append(cp)
        segs.append(_loop_segments(nb, len(cp)))
        tags += ["clamp"] * len(cp)
        holes.append(cfg.clamp_disc.center)
    mesh = triangulate_pslg(np.concatenate(verts), np.concatenate(segs), tags, holes, h,
                            "solid", np.arange(nb))
    return _with_midpoints(mesh, shape, bg)


@functools.lru_cache(maxsize=32)
def _baseline_mesh(config, h, region):
    base = realize_shape(config, np.zeros(config.n_modes))
    return _direct_fluid(base, h) if region == "fluid" else _direct_solid(base, h)


def _transport(shape: Shape, h, region):
    base = _baseline_mesh(shape.config, h, region)
    if shape.is_baseline:
        return base
    bg = boundary_geometry(shape, resolution_for(shape.config, h))
    nodes = shape.map(base.nodes)
    comp = base.component_nodes
    ok = comp >= 0
    nodes[comp[ok]] = bg.vertices[ok]
    mesh = Mesh(nodes, base.triangles.copy(), base.boundary_edges.copy(), base.edge_tags, region,
                comp.copy(), "transported")
    if (np.all(mesh.areas > 0) and mesh.min_angle >= MIN_ANGLE and mesh.h_max <= h):
        return _with_midpoints(mesh, shape, bg)
    direct = _direct_fluid(shape, h) if region == "fluid" else _direct_solid(shape, h)
    return _with_midpoints(direct, shape, bg, "remeshed")


def mesh_fluid(shape: Shape, h: float) -> Mesh:
    if not h > 0:
        raise ValueError("h must be positive")
    return _transport(shape, h, "fluid")


def mesh_solid(shape: Shape, h: float) -> Mesh:
    if not h > 0:
        raise ValueError("h must be positive")
    if not shape.is_baseline:
        # a boundary pushed into the clamp cannot be carried by the transport map
        bg = boundary_geometry(shape, resolution_for(shape.config, h))
        cfg = shape.config
        if cfg.clamp_disc is not None:
            disc = Point(cfg.clamp_disc.center).buffer(cfg.clamp_disc.radius, 64)
            if not Polygon(bg.vertices).buffer(-0.25 * h).contains(disc):
                raise MeshFailure("clamp disc overlaps the component boundary")
    return _transport(shape, h, "solid")


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four; boundary edges keep their tags."""
    tris = mesh.triangles
    edges = unique_edges(tris)
    n = len(mesh.nodes)
    mid_index = {tuple(e): n + i for i, e in enumerate(edges)}
    nodes = np.r_[mesh.nodes, 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])]

    def m(a, b):
        return mid_index[(a, b) if a < b else (b, a)]

    new = []
    for a, b, c in tris:
        ab, bc, ca = m(a, b), m(b, c), m(c, a)
        new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    bnd, tags = [], []
    for (a, b), t in zip(mesh.boundary_edges, mesh.edge_tags):
        mm = m(a, b)
        bnd += [(a, mm), (mm, b)]
        tags += [t, t]
    return Mesh(nodes, np.array(new, int), np.array(bnd, int), tuple(tags), mesh.region,
                mesh.component_nodes.copy(), mesh.provenance + "+refined")


# ---------------------------------------------------------------------------
# text format

def write_mesh(mesh: Mesh, path):
    with open(path, "w") as fh:
        fh.write(f"{len(mesh.nodes)}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"{len(mesh.triangles)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        fh.write(f"{len(mesh.boundary_edges)}\n")
        for (i, j), t in zip(mesh.boundary_edges, mesh.edge_tags):
            fh.write(f"{i} {j} {t}\n")


def write_mesh_csv(mesh: Mesh, prefix):
    """Three CSV files: <prefix>_nodes.csv, <prefix>_triangles.csv, <prefix>_edges.csv."""
    paths = [f"{prefix}_nodes.csv", f"{prefix}_triangles.csv", f"{prefix}_edges.csv"]
    with open(paths[0], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y"])
        w.writerows([i, repr(float(x)), repr(float(y))] for i, (x, y) in enumerate(mesh.nodes))
    with open(paths[1], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["triangle", "a", "b", "c"])
        w.writerows([i, *map(int, t)] for i, t in enumerate(mesh.triangles))
    with open(paths[2], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "tag"])
        w.writerows([int(a), int(b), t] for (a, b), t in zip(mesh.boundary_edges, mesh.edge_tags))
    return paths


def read_mesh(path, region="fluid") -> Mesh:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    pos = 0
    n = int(lines[pos][0]); pos += 1
    nodes = np.array([[float(v) for v in lines[pos + i]] for i in range(n)]); pos += n
    m = int(lines[pos][0]); pos += 1
    tris = np.array([[int(v) for v in lines[pos + i]] for i in range(m)], int); pos += m
    k = int(lines[pos][0]); pos += 1
    bnd = np.array([[int(lines[pos + i][0]), int(lines[pos + i][1])] for i in range(k)], int).reshape(-1, 2)
    tags = tuple(lines[pos + i][2] for i in range(k))
    bad = [t for t in tags if t not in TAGS]
    if bad:
        raise ValueError(f"unknown boundary tag {bad[0]!r}")
    return Mesh(nodes, tris, bnd, tags, region)
