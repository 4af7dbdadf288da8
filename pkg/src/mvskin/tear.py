"""Partial scalpel tears that leave the mesh skinnable.

A tear is driven by a timed sequence of scalpel states (segment
endpoints).  Each consecutive pair of states contributes one step:

1. scalpel_hit finds where each scalpel segment pierces the surface; a
   proper hit is exactly one transversal face crossing (zero raises
   NoIntersection, two or more AmbiguousIntersection).  The default
   probe is a linear scan over faces in ascending id order; a FaceBVH
   accelerator can be passed in and must return bit-identical results,
   which it guarantees by running the same per-face test on a
   conservative, ascending candidate set.
2. build_tear_plane spans the plane through the current anchor and both
   endpoints of the next scalpel state (right-hand rule normal over
   endpoint deltas); a stationary scalpel leaves the plane undefined
   and raises DegenerateTearStep.
3. trace_surface_path walks the plane section across the surface from
   the current anchor's face to the next one's, crossing one new edge
   per face and emitting an intermediate point on every crossed edge.
   Of the two ways around a closed body it takes the one whose first
   step shrinks the straight-line estimate to the target anchor
   (projected onto the plane; the projection distance is kept as a
   path-quality metric).
4. apply_tear inserts anchors and intermediates as vertices, splits
   every traversed face by fanning from its entry point (anchors fan
   from the interior, which also serves shared anchors of chained
   steps), then duplicates every intermediate into a left/right pair by
   plane side.  Anchors stay single and pin the tear ends, so the torn
   mesh remains one connected component.
5. open_tear displaces the two copies of each intermediate by +/- delta
   along the plane normal; delta = 0 is the identity and anchors never
   move.

Intermediate weights interpolate along their host edge, anchor weights
across their host face, so every new vertex keeps at most four
influences drawn from its host's bones and the torn model skins with
every backend.

Vertices that sit within eps of a tear plane (eps = 1e-9 x bbox
diagonal) are virtually shifted by +2 eps along the plane normal for
classification, exactly as in planar cutting, which keeps every
intermediate strictly inside its edge.  Should a face split still
produce a zero-area child (coincident points within eps), the sliver is
collapsed: the inserted point merges into the coincident vertex and the
tear is pinned there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algebra import Multivector, make_plane, plane_distances
from .errors import (
    AmbiguousIntersection,
    DegenerateTearStep,
    NoIntersection,
    PathNotFound,
)
from .rig import Mesh, RiggedModel, bbox_diagonal, edge_face_incidence, validate_model
from .weights import weight_by_barycentric, weight_by_edge

__all__ = [
    "ScalpelState",
    "TearAnchor",
    "TearPoint",
    "TearPath",
    "TearResult",
    "FaceBVH",
    "scalpel_hit",
    "build_tear_plane",
    "trace_surface_path",
    "apply_tear",
    "open_tear",
    "tear",
]

_EPS_SCALE = 1e-9


@dataclass(frozen=True)
class ScalpelState:
    """Scalpel segment (tip to tail) at one instant."""

    time: float
    tip: tuple
    tail: tuple

    def __post_init__(self):
        tip = tuple(float(x) for x in self.tip)
        tail = tuple(float(x) for x in self.tail)
        if len(tip) != 3 or len(tail) != 3:
            raise ValueError("scalpel endpoints must be 3-vectors")
        if not all(math.isfinite(x) for x in tip + tail):
            raise ValueError("scalpel endpoints must be finite")
        object.__setattr__(self, "tip", tip)
        object.__setattr__(self, "tail", tail)


@dataclass(frozen=True)
class TearAnchor:
    """Scalpel-surface intersection pinning one end of a tear step."""

    point: tuple
    face: int
    bary: tuple


@dataclass(frozen=True)
class TearPoint:
    """Plane-edge intersection along a traced path.

    `face` is the face being exited when the edge is crossed; `bary`
    expresses the point in that face's corner order; `lam` runs from
    edge[0] toward edge[1].
    """

    position: tuple
    face: int
    edge: tuple
    lam: float
    bary: tuple


@dataclass
class TearPath:
    """One traced tear step plus the bookkeeping apply_tear fills in."""

    start: TearAnchor
    end: TearAnchor
    plane: Multivector
    points: tuple
    projection_distance: float
    start_index: Optional[int] = None
    end_index: Optional[int] = None
    point_indices: Optional[tuple] = None
    duplicates: Optional[dict] = None  # inserted index -> (left, right)


@dataclass(frozen=True)
class TearResult:
    """Opened torn model plus the per-step paths with their records."""

    model: RiggedModel
    paths: tuple


# --------------------------------------------------------------- scalpel hit


def _face_hit(verts: np.ndarray, tri, p0: np.ndarray, dvec: np.ndarray):
    """Transversal segment-triangle crossing, or None.

    Solves p0 + t*dvec = a + u*(b-a) + v*(c-a); a hit needs t strictly
    inside the segment and (u, v) inside the triangle.  Near-parallel
    segments fail the range checks and count as non-transversal.
    """
    a = verts[tri[0]]
    e1 = verts[tri[1]] - a
    e2 = verts[tri[2]] - a
    h = np.cross(dvec, e2)
    det = float(e1 @ h)
    if abs(det) < 1e-300:
        return None
    inv = 1.0 / det
    s = p0 - a
    u = float(s @ h) * inv
    if not 0.0 <= u <= 1.0:
        return None
    q = np.cross(s, e1)
    v = float(dvec @ q) * inv
    if v < 0.0 or u + v > 1.0:
        return None
    t = float(e2 @ q) * inv
    if not 0.0 < t < 1.0:
        return None
    return t, u, v


class FaceBVH:
    """Median-split AABB tree over mesh faces.

    segment_candidates returns a conservative superset of the faces a
    segment can cross, in ascending id order, so running the shared
    per-face test over it reproduces the linear scan bit for bit.
    """

    def __init__(self, mesh: Mesh, leaf_size: int = 8):
        tri = mesh.vertices[mesh.faces]
        pad = 1e-12 * bbox_diagonal(mesh)
        self._lo = tri.min(axis=1) - pad
        self._hi = tri.max(axis=1) + pad
        centers = 0.5 * (self._lo + self._hi)
        # nodes: (lo, hi, left, right, leaf face ids or None)
        self._nodes = []

        def build(ids: np.ndarray) -> int:
            lo = self._lo[ids].min(axis=0)
            hi = self._hi[ids].max(axis=0)
            slot = len(self._nodes)
            if len(ids) <= leaf_size:
                self._nodes.append((lo, hi, -1, -1, np.sort(ids)))
                return slot
            self._nodes.append(None)
            axis = int(np.argmax(centers[ids].max(axis=0) - centers[ids].min(axis=0)))
            order = ids[np.argsort(centers[ids, axis], kind="stable")]
            mid = len(order) // 2
            left = build(order[:mid])
            right = build(order[mid:])
            self._nodes[slot] = (lo, hi, left, right, None)
            return slot

        if len(mesh.faces):
            build(np.arange(len(mesh.faces)))

    @staticmethod
    def _hits_box(p0, dvec, lo, hi) -> bool:
        tmin, tmax = 0.0, 1.0
        for k in range(3):
            d = dvec[k]
            if d == 0.0:
                if p0[k] < lo[k] or p0[k] > hi[k]:
                    return False
                continue
            t1 = (lo[k] - p0[k]) / d
            t2 = (hi[k] - p0[k]) / d
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
            if tmin > tmax:
                return False
        return True

    def segment_candidates(self, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
        if not self._nodes:
            return np.zeros(0, dtype=np.int64)
        dvec = np.asarray(p1, dtype=np.float64) - p0
        out = []
        stack = [0]
        while stack:
            lo, hi, left, right, leaf = self._nodes[stack.pop()]
            if not self._hits_box(p0, dvec, lo, hi):
                continue
            if leaf is not None:
                out.append(leaf)
            else:
                stack.append(right)
                stack.append(left)
        if not out:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(out))


def scalpel_hit(mesh: Mesh, scalpel: ScalpelState, bvh: FaceBVH = None) -> TearAnchor:
    """The single transversal crossing of a scalpel segment with the surface."""
    verts = mesh.vertices
    p0 = np.asarray(scalpel.tip, dtype=np.float64)
    p1 = np.asarray(scalpel.tail, dtype=np.float64)
    dvec = p1 - p0
    if np.linalg.norm(dvec) <= _EPS_SCALE * bbox_diagonal(mesh):
        raise ValueError("scalpel endpoints coincide")
    candidates = range(len(mesh.faces)) if bvh is None else bvh.segment_candidates(p0, p1)
    hits = []
    for fi in candidates:
        res = _face_hit(verts, mesh.faces[fi], p0, dvec)
        if res is not None:
            hits.append((int(fi), res))
    if not hits:
        raise NoIntersection("scalpel segment does not cross the surface")
    if len(hits) > 1:
        raise AmbiguousIntersection(
            f"scalpel segment crosses the surface {len(hits)} times", count=len(hits)
        )
    fi, (t, u, v) = hits[0]
    point = p0 + t * dvec
    return TearAnchor(tuple(float(x) for x in point), fi, (1.0 - u - v, u, v))


# --------------------------------------------------------------- tear plane


def build_tear_plane(anchor: TearAnchor, scalpel_next: ScalpelState) -> Multivector:
    """Plane through the anchor and both endpoints of the next scalpel state."""
    s = np.asarray(anchor.point, dtype=np.float64)
    a = np.asarray(scalpel_next.tip, dtype=np.float64) - s
    b = np.asarray(scalpel_next.tail, dtype=np.float64) - s
    n = np.cross(a, b)
    norm = float(np.linalg.norm(n))
    scale = float(np.linalg.norm(a) * np.linalg.norm(b))
    if norm <= 1e-12 * scale or scale == 0.0:
        raise DegenerateTearStep(
            "anchor and next scalpel endpoints are collinear; tear plane is undefined"
        )
    n_hat = n / norm
    return make_plane(tuple(n_hat), float(n_hat @ s))


def _plane_frame(plane: Multivector):
    """Unit normal of a plane built by make_plane."""
    n = np.asarray(plane.coeffs[1:4], dtype=np.float64)
    return n / np.linalg.norm(n)


# --------------------------------------------------------------- path trace


def trace_surface_path(
    mesh: Mesh, plane: Multivector, start: TearAnchor, to: TearAnchor
) -> tuple:
    """Ordered plane-edge intersections walking from start's face to to's.

    Crosses one new edge per face; at a branch takes the crossing
    closest to the target anchor (projected onto the plane), breaking
    ties toward the lower edge key.  Raises PathNotFound when the
    section leaves the surface or the walk exceeds the face count.
    """
    if start.face == to.face:
        return ()
    n_hat = _plane_frame(plane)
    eps = _EPS_SCALE * bbox_diagonal(mesh)
    work = np.array(mesh.vertices)
    dist = plane_distances(work, plane)
    on = np.abs(dist) < eps
    if on.any():
        work[on] += (2.0 * eps) * n_hat
        dist = plane_distances(work, plane)

    incidence = edge_face_incidence(mesh.faces)
    to_pt = np.asarray(to.point, dtype=np.float64)
    target = to_pt - float(plane_distances(to_pt.reshape(1, 3), plane)[0]) * n_hat

    def crossings(face_id: int, skip):
        face = mesh.faces[face_id]
        out = []
        for k in range(3):
            u, v = int(face[k]), int(face[(k + 1) % 3])
            key = (u, v) if u < v else (v, u)
            if key == skip or (dist[key[0]] > 0.0) == (dist[key[1]] > 0.0):
                continue
            lam = dist[key[0]] / (dist[key[0]] - dist[key[1]])
            pos = (1.0 - lam) * work[key[0]] + lam * work[key[1]]
            out.append((key, float(lam), pos))
        return out

    def pick(cands):
        return min(cands, key=lambda c: (float(np.linalg.norm(c[2] - target)), c[0]))

    def bary_on_edge(face_id: int, key, lam: float) -> tuple:
        corners = [int(x) for x in mesh.faces[face_id]]
        b = [0.0, 0.0, 0.0]
        b[corners.index(key[0])] = 1.0 - lam
        b[corners.index(key[1])] = lam
        return tuple(b)

    cands = crossings(start.face, None)
    if not cands:
        raise PathNotFound(
            f"tear plane does not cross the boundary of face {start.face}"
        )
    points = []
    face_id = start.face
    key, lam, pos = pick(cands)
    budget = len(mesh.faces)
    while True:
        points.append(
            TearPoint(
                tuple(float(x) for x in pos), face_id, key, lam, bary_on_edge(face_id, key, lam)
            )
        )
        neighbours = [f for f in incidence.get(key, ()) if f != face_id]
        if not neighbours:
            raise PathNotFound(
                f"tear plane section leaves the surface at boundary edge {key}"
            )
        face_id = neighbours[0]
        if face_id == to.face:
            return tuple(points)
        if len(points) > budget:
            raise PathNotFound(
                "tear plane section does not connect the anchors on this side"
            )
        cands = crossings(face_id, key)
        if not cands:
            raise PathNotFound(
                f"tear plane section dead-ends inside face {face_id}"
            )
        key, lam, pos = pick(cands)


# --------------------------------------------------------------- application


def _corner_weights(model: RiggedModel, face_id: int):
    return [model.weights[int(v)] for v in model.mesh.faces[face_id]]


def _apply_paths(model: RiggedModel, paths: Sequence[TearPath]) -> RiggedModel:
    """Insert, split, and duplicate for one or more traced paths at once.

    All paths must have been traced against this model's mesh; chained
    paths share anchor objects and the shared anchor is inserted once.
    """
    mesh = model.mesh
    n_orig = len(mesh.vertices)
    eps = _EPS_SCALE * bbox_diagonal(mesh)

    new_positions = []  # node id -> position
    new_weights = []  # node id -> influences
    anchor_nodes: dict = {}  # id(anchor) -> node id
    interior: dict = {}  # face id -> [node ids]
    on_edge: dict = {}  # (lo, hi) -> [(node id, lam)]
    centers: dict = {}  # face id -> node id (fan hub)
    touched: set = set()

    def insert_anchor(anchor: TearAnchor) -> int:
        if id(anchor) in anchor_nodes:
            return anchor_nodes[id(anchor)]
        for node in interior.get(anchor.face, ()):
            if np.linalg.norm(np.asarray(anchor.point) - new_positions[node]) < eps:
                anchor_nodes[id(anchor)] = node
                return node
        node = len(new_positions)
        new_positions.append(np.asarray(anchor.point, dtype=np.float64))
        new_weights.append(
            weight_by_barycentric(_corner_weights(model, anchor.face), anchor.bary)
        )
        anchor_nodes[id(anchor)] = node
        interior.setdefault(anchor.face, []).append(node)
        touched.add(anchor.face)
        return node

    incidence = edge_face_incidence(mesh.faces)
    for path in paths:
        s_node = insert_anchor(path.start)
        e_node = insert_anchor(path.end)
        q_nodes = []
        for q in path.points:
            node = len(new_positions)
            new_positions.append(np.asarray(q.position, dtype=np.float64))
            lo, hi = q.edge
            new_weights.append(
                weight_by_edge(model.weights[lo], model.weights[hi], q.lam)
            )
            on_edge.setdefault(q.edge, []).append((node, q.lam))
            q_nodes.append(node)
            for f in incidence[q.edge]:
                touched.add(f)
                if f != q.face:
                    centers.setdefault(f, node)  # entry point of the next face
        path.start_index = n_orig + s_node
        path.end_index = n_orig + e_node
        path.point_indices = tuple(n_orig + q for q in q_nodes)

    # interior anchors always win the fan hub of their face
    for face, nodes in interior.items():
        centers[face] = nodes[0]

    positions = (
        np.vstack([mesh.vertices] + [p.reshape(1, 3) for p in new_positions])
        if new_positions
        else np.array(mesh.vertices)
    )

    faces_out = []
    child_of: dict = {}  # inserted global index -> [face slots]

    def emit(tri):
        slot = len(faces_out)
        faces_out.append(list(tri))
        for v in tri:
            if v >= n_orig:
                child_of.setdefault(v, []).append(slot)

    def split_face(fi: int):
        face = [int(v) for v in mesh.faces[fi]]
        polygon = []
        for k in range(3):
            u, v = face[k], face[(k + 1) % 3]
            polygon.append(u)
            key = (u, v) if u < v else (v, u)
            pts = on_edge.get(key, ())
            if pts:
                along = sorted(
                    pts, key=lambda it: (it[1] if u == key[0] else 1.0 - it[1], it[0])
                )
                polygon.extend(n_orig + node for node, _ in along)
        hub_node = centers[fi]
        hub = n_orig + hub_node
        anchors_here = [n_orig + a for a in interior.get(fi, [])]
        if hub in anchors_here:
            ring = polygon
            children = [
                (hub, ring[t], ring[(t + 1) % len(ring)]) for t in range(len(ring))
            ]
            pending = [a for a in anchors_here if a != hub]
        else:
            at = polygon.index(hub)
            ring = polygon[at:] + polygon[:at]
            children = [(hub, ring[t], ring[t + 1]) for t in range(1, len(ring) - 1)]
            pending = list(anchors_here)
        # remaining interior points (two anchors sharing one face): split
        # the child that contains each one
        for a in pending:
            p = positions[a]
            for idx, (x, y, z) in enumerate(children):
                va, vb, vc = positions[x], positions[y], positions[z]
                m = np.column_stack([vb - va, vc - va])
                try:
                    uv, *_ = np.linalg.lstsq(m, p - va, rcond=None)
                except np.linalg.LinAlgError:
                    continue
                u, v = float(uv[0]), float(uv[1])
                if u >= -1e-9 and v >= -1e-9 and u + v <= 1.0 + 1e-9:
                    children[idx : idx + 1] = [(a, x, y), (a, y, z), (a, z, x)]
                    break
        for tri in children:
            emit(tri)

    for fi in range(len(mesh.faces)):
        if fi in touched:
            split_face(fi)
        else:
            faces_out.append([int(v) for v in mesh.faces[fi]])

    # collapse zero-area slivers by merging the coincident inserted point
    remap = {}
    for slot, tri in enumerate(faces_out):
        a, b, c = (positions[remap.get(v, v)] for v in tri)
        if 0.5 * np.linalg.norm(np.cross(b - a, c - a)) >= 1e-12:
            continue
        for i, j in ((0, 1), (1, 2), (2, 0)):
            vi, vj = remap.get(tri[i], tri[i]), remap.get(tri[j], tri[j])
            if vi == vj:
                continue
            if np.linalg.norm(positions[vi] - positions[vj]) < eps:
                src, dst = (vi, vj) if vi > vj else (vj, vi)
                if src >= n_orig:
                    remap[src] = dst
                break
    if remap:
        faces_out = [[remap.get(v, v) for v in tri] for tri in faces_out]
        faces_out = [tri for tri in faces_out if len(set(tri)) == 3]
        child_of = {}
        for slot, tri in enumerate(faces_out):
            for v in tri:
                if v >= n_orig:
                    child_of.setdefault(v, []).append(slot)

    # duplicate every intermediate into a left/right pair by plane side
    pos_rows = [positions[i] for i in range(len(positions))]
    weights_all = list(model.weights) + list(new_weights)
    for path in paths:
        duplicates = {}
        for g in path.point_indices or ():
            g = remap.get(g, g)
            if g < n_orig or g not in child_of:
                continue  # collapsed into an original vertex: tear pinned here
            sides = {}
            for slot in child_of[g]:
                pts = np.vstack([pos_rows[v] for v in faces_out[slot]])
                s = float(np.sum(plane_distances(pts, path.plane)))
                sides[slot] = 1 if s >= 0.0 else -1
            right = [slot for slot, s in sides.items() if s < 0]
            left = [slot for slot, s in sides.items() if s > 0]
            if not right or not left:
                continue  # chord not two-sided here; nothing to separate
            twin = len(pos_rows)
            pos_rows.append(pos_rows[g])
            weights_all.append(weights_all[g])
            for slot in right:
                faces_out[slot] = [twin if v == g else v for v in faces_out[slot]]
            duplicates[g] = (g, twin)
        path.duplicates = duplicates

    torn = RiggedModel(
        Mesh(np.vstack(pos_rows), np.array(faces_out, dtype=np.int64).reshape(-1, 3)),
        model.bones,
        tuple(weights_all),
        model.clips,
    )
    validate_model(torn)
    return torn


def apply_tear(model: RiggedModel, path: TearPath) -> RiggedModel:
    """Insert one traced tear step and fill the path's duplication records."""
    return _apply_paths(model, [path])


def open_tear(model: RiggedModel, path: TearPath, delta: float = None) -> RiggedModel:
    """Move each duplicate pair apart by +/- delta along the tear plane normal."""
    if path.duplicates is None:
        raise ValueError("path has not been applied to a model yet")
    if delta is None:
        delta = 0.01 * bbox_diagonal(model.mesh)
    delta = float(delta)
    if delta < 0.0:
        raise ValueError("opening displacement must be non-negative")
    if delta == 0.0 or not path.duplicates:
        return model
    n_hat = _plane_frame(path.plane)
    verts = np.array(model.mesh.vertices)
    for left, right in path.duplicates.values():
        verts[left] += delta * n_hat
        verts[right] -= delta * n_hat
    return RiggedModel(
        Mesh(verts, model.mesh.faces), model.bones, model.weights, model.clips
    )


def tear(
    model: RiggedModel,
    scalpels: Sequence[ScalpelState],
    delta: float = None,
    accel: bool = False,
) -> TearResult:
    """Run a multi-state scalpel script: hit, trace, apply, and open.

    Consecutive scalpel states contribute one tear step each, chained
    through shared anchors.  `accel` probes scalpel hits through a
    FaceBVH (results are identical to the linear scan).
    """
    if len(scalpels) < 2:
        raise ValueError("a tear needs at least two scalpel states")
    mesh = model.mesh
    bvh = FaceBVH(mesh) if accel else None
    anchors = [scalpel_hit(mesh, s, bvh) for s in scalpels]
    paths = []
    for i in range(len(scalpels) - 1):
        plane = build_tear_plane(anchors[i], scalpels[i + 1])
        points = trace_surface_path(mesh, plane, anchors[i], anchors[i + 1])
        proj = abs(
            float(
                plane_distances(
                    np.asarray(anchors[i + 1].point).reshape(1, 3), plane
                )[0]
            )
        )
        paths.append(TearPath(anchors[i], anchors[i + 1], plane, points, proj))
    torn = _apply_paths(model, paths)
    for path in paths:
        torn = open_tear(torn, path, delta)
    return TearResult(torn, tuple(paths))
