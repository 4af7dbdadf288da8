"""Planar cuts of skinned meshes into two deformable halves.

Pipeline:

1. Vertices within eps of the plane (eps = 1e-9 x bbox diagonal) are
   virtually shifted +2 eps along the plane normal, which removes every
   coplanarity degeneracy with one rule.  The shifted copy drives
   classification and intersection only; surviving original vertices
   keep their true positions.
2. Vertices classify by the sign of the conformal inner product of
   their up-projection with the plane.
3. Each mesh edge whose endpoints straddle the plane yields exactly one
   CutPoint (edge-keyed dedup), discovered in face order, with weights
   interpolated along the edge and truncated to four influences.
4. Crossed faces (always exactly two crossed edges) re-triangulate into
   three children: one triangle on the lone-vertex side and two tiling
   the quad, split along its shorter diagonal.  Ties and near-ties (1e-9
   relative) take the diagonal from the first cut point, which keeps the
   choice stable under rigid motion.  Children inherit the parent's
   winding.
5. Faces separate by side into M1 (positive) and M2 (negative); both
   halves receive the full seam of cut points, keep the original bones,
   weights, and clips, and pass load-time validation.  The cut is left
   open: no cap faces.  A plane that misses the mesh returns the
   original model as M1 and an empty M2, whichever side it lies on.

The seam is also reported as ordered polylines: chains of CutPoints in
which consecutive entries share a cut face, closed where the section
loops around the surface and open where it runs off a boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import Multivector, plane_distances
from .errors import NonManifoldCut
from .rig import Mesh, RiggedModel, bbox_diagonal, validate_model
from .weights import weight_by_edge

__all__ = [
    "CutPoint",
    "CutResult",
    "classify_vertices",
    "compute_cut_points",
    "retriangulate_cut_faces",
    "order_cut_polyline",
    "cut",
]

_EPS_SCALE = 1e-9


@dataclass(frozen=True)
class CutPoint:
    """One plane-edge intersection: a seam vertex shared by both halves."""

    position: tuple
    edge: tuple  # (lo, hi) original vertex indices
    lam: float  # interpolation parameter from lo toward hi, in (0, 1)
    ordinal: int  # creation rank; the seam vertex index is len(side) + ordinal
    influences: tuple


@dataclass(frozen=True)
class CutResult:
    """Both halves of a planar cut plus seam bookkeeping."""

    m1: RiggedModel
    m2: RiggedModel
    polylines: tuple  # chains of CutPoints; closed chains repeat no entry
    provenance: dict  # side -> {new vertex index -> (edge lo, edge hi, lam)}
    cut_points: tuple


def _unit_plane(plane: Multivector):
    """Plane rescaled to a unit normal, plus the normal itself."""
    c = np.asarray(plane.coeffs, dtype=np.float64)
    n = c[1:4]
    norm = float(np.linalg.norm(n))
    if norm < 1e-12:
        raise ValueError("cut plane has a zero normal")
    if abs(norm - 1.0) > 1e-12:
        plane = Multivector(c / norm)
    return plane, n / norm


def _vertices_of(mesh_or_points) -> np.ndarray:
    if isinstance(mesh_or_points, Mesh):
        return mesh_or_points.vertices
    return np.asarray(mesh_or_points, dtype=np.float64).reshape(-1, 3)


def classify_vertices(mesh, plane: Multivector, eps: float = None) -> np.ndarray:
    """Side of each vertex: +1 / -1 by conformal inner product, 0 within eps."""
    verts = _vertices_of(mesh)
    plane_u, _ = _unit_plane(plane)
    if eps is None:
        eps = _EPS_SCALE * bbox_diagonal(verts)
    if len(verts) == 0:
        return np.zeros(0, dtype=np.int64)
    d = plane_distances(verts, plane_u)
    out = np.where(d > 0.0, 1, -1).astype(np.int64)
    out[np.abs(d) < eps] = 0
    return out


class _Scan:
    """Shared classification + edge-intersection pass over one model."""

    def __init__(self, model: RiggedModel, plane: Multivector):
        mesh = model.mesh
        plane_u, n_hat = _unit_plane(plane)
        self.n_hat = n_hat
        eps = _EPS_SCALE * bbox_diagonal(mesh)
        work = np.array(mesh.vertices)
        if len(work):
            d = plane_distances(work, plane_u)
            on = np.abs(d) < eps
            if on.any():
                work[on] += (2.0 * eps) * n_hat
                d = plane_distances(work, plane_u)
            self.signs = np.where(d >= 0.0, 1, -1).astype(np.int64)
        else:
            d = np.zeros(0)
            self.signs = np.zeros(0, dtype=np.int64)

        points: dict = {}
        edge_faces: dict = {}
        for fi, (a, b, c) in enumerate(mesh.faces):
            for u, v in ((a, b), (b, c), (c, a)):
                if self.signs[u] == self.signs[v]:
                    continue
                lo, hi = (int(u), int(v)) if u < v else (int(v), int(u))
                key = (lo, hi)
                if key not in points:
                    lam = d[lo] / (d[lo] - d[hi])
                    pos = (1.0 - lam) * work[lo] + lam * work[hi]
                    infl = weight_by_edge(model.weights[lo], model.weights[hi], float(lam))
                    points[key] = CutPoint(
                        tuple(float(x) for x in pos), key, float(lam), len(points), tuple(infl)
                    )
                edge_faces.setdefault(key, []).append(fi)
        self.points = points
        self.edge_faces = edge_faces


def compute_cut_points(model: RiggedModel, plane: Multivector) -> list:
    """One CutPoint per edge that straddles the plane, in face-scan order."""
    scan = _Scan(model, plane)
    return sorted(scan.points.values(), key=lambda cp: cp.ordinal)


def retriangulate_cut_faces(mesh: Mesh, cut_points: Sequence[CutPoint]) -> np.ndarray:
    """Face list over the extended vertex array (originals, then cut points).

    Uncut faces pass through with identity indices; each crossed face
    becomes three triangles with the parent's winding.
    """
    n = len(mesh.vertices)
    by_edge = {cp.edge: cp for cp in cut_points}
    if by_edge:
        ext = np.vstack([mesh.vertices] + [np.asarray(cp.position) for cp in cut_points])
    else:
        ext = mesh.vertices
    out = []
    for face in mesh.faces:
        cyc = [int(i) for i in face]
        crossed = []
        for k in range(3):
            u, v = cyc[k], cyc[(k + 1) % 3]
            key = (u, v) if u < v else (v, u)
            if key in by_edge:
                crossed.append(key)
        if not crossed:
            out.append(tuple(cyc))
            continue
        if len(crossed) != 2:
            raise ValueError(
                f"face {cyc} has {len(crossed)} cut edges; a planar cut crosses 0 or 2"
            )
        lone = (set(crossed[0]) & set(crossed[1])).pop()
        i = cyc.index(lone)
        lv, av, bv = cyc[i], cyc[(i + 1) % 3], cyc[(i + 2) % 3]
        pa = n + by_edge[(min(lv, av), max(lv, av))].ordinal
        pb = n + by_edge[(min(lv, bv), max(lv, bv))].ordinal
        out.append((lv, pa, pb))
        # quad (pa, av, bv, pb): split along its shorter diagonal; ties and
        # near-ties (1e-9 relative) take the first diagonal so the choice is
        # stable under rigid motion of the whole model
        d1 = np.linalg.norm(ext[pa] - ext[bv])
        d2 = np.linalg.norm(ext[av] - ext[pb])
        if d1 <= d2 + 1e-9 * (d1 + d2):
            out.append((pa, av, bv))
            out.append((pa, bv, pb))
        else:
            out.append((pa, av, pb))
            out.append((av, bv, pb))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def order_cut_polyline(cut_points: Sequence[CutPoint], mesh: Mesh) -> tuple:
    """Chains of CutPoints in face-adjacency order.

    Open chains start at their lowest-ordinal endpoint; closed chains
    start at their lowest-ordinal point and step toward the lower
    neighbor.  Raises NonManifoldCut when a cut edge borders more than
    two faces.
    """
    by_edge = {cp.edge: cp for cp in cut_points}
    if not by_edge:
        return ()
    touched: dict = {cp.edge: 0 for cp in cut_points}
    links: dict = {cp.ordinal: [] for cp in cut_points}
    for face in mesh.faces:
        cyc = [int(i) for i in face]
        here = []
        for k in range(3):
            u, v = cyc[k], cyc[(k + 1) % 3]
            key = (u, v) if u < v else (v, u)
            if key in by_edge:
                here.append(by_edge[key])
                touched[key] += 1
        if len(here) == 2:
            links[here[0].ordinal].append(here[1].ordinal)
            links[here[1].ordinal].append(here[0].ordinal)
    for key, count in touched.items():
        if count > 2:
            raise NonManifoldCut(f"cut edge {key} borders {count} faces")

    by_ordinal = {cp.ordinal: cp for cp in cut_points}
    visited: set = set()
    chains = []

    def walk(start: int, first) -> list:
        chain = [start]
        visited.add(start)
        prev, cur = start, first
        while cur is not None and cur not in visited:
            chain.append(cur)
            visited.add(cur)
            nxt = [o for o in links[cur] if o != prev]
            prev, cur = cur, (nxt[0] if nxt else None)
        return chain

    for start in sorted(o for o, nb in links.items() if len(nb) <= 1):
        if start in visited:
            continue
        first = links[start][0] if links[start] else None
        chains.append(walk(start, first))
    for start in sorted(links):
        if start in visited:
            continue
        chains.append(walk(start, min(links[start])))
    return tuple(tuple(by_ordinal[o] for o in chain) for chain in chains)


def _empty_like(model: RiggedModel) -> RiggedModel:
    return RiggedModel(
        Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)),
        model.bones,
        (),
        model.clips,
    )


def cut(model: RiggedModel, plane: Multivector) -> CutResult:
    """Split a rigged model along a plane into two skinnable halves."""
    mesh = model.mesh
    scan = _Scan(model, plane)
    points = sorted(scan.points.values(), key=lambda cp: cp.ordinal)

    if not points and (len(scan.signs) == 0 or np.all(scan.signs == scan.signs[0])):
        # plane misses the mesh entirely: keep the model whole as M1
        return CutResult(model, _empty_like(model), (), {"m1": {}, "m2": {}}, ())

    polylines = order_cut_polyline(points, mesh)
    ext_faces = retriangulate_cut_faces(mesh, points)

    n = len(mesh.vertices)
    pos_orig = np.flatnonzero(scan.signs > 0)
    neg_orig = np.flatnonzero(scan.signs < 0)
    index_map = {
        1: {int(v): r for r, v in enumerate(pos_orig)},
        -1: {int(v): r for r, v in enumerate(neg_orig)},
    }
    base = {1: len(pos_orig), -1: len(neg_orig)}
    faces_out: dict = {1: [], -1: []}
    for tri in ext_faces:
        side = next(int(scan.signs[v]) for v in tri if v < n)
        remap = index_map[side]
        faces_out[side].append(
            tuple(remap[int(v)] if v < n else base[side] + (int(v) - n) for v in tri)
        )

    cut_positions = np.array([cp.position for cp in points]).reshape(-1, 3)
    cut_weights = [cp.influences for cp in points]
    halves = {}
    for side, originals in ((1, pos_orig), (-1, neg_orig)):
        verts = (
            np.vstack([mesh.vertices[originals], cut_positions])
            if len(originals) or len(cut_positions)
            else np.zeros((0, 3))
        )
        weights = tuple(model.weights[int(v)] for v in originals) + tuple(cut_weights)
        half = RiggedModel(
            Mesh(verts, np.array(faces_out[side], dtype=np.int64).reshape(-1, 3)),
            model.bones,
            weights,
            model.clips,
        )
        validate_model(half)
        halves[side] = half

    provenance = {
        label: {base[side] + cp.ordinal: (cp.edge[0], cp.edge[1], cp.lam) for cp in points}
        for label, side in (("m1", 1), ("m2", -1))
    }
    return CutResult(halves[1], halves[-1], polylines, provenance, tuple(points))
