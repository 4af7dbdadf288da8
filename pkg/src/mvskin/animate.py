"""Keyframe interpolation, pose propagation, and three skinning backends.

A Pose carries each bone's global transform at a sample time, in two
equivalent forms evaluated by the same parent-before-child traversal:
a conformal versor and a homogeneous 4x4 matrix.  Skinning composes the
pose with each bone's offset (inverse global bind) and blends per vertex:

  cga  weighted sum of per-influence conformal sandwich results, each
       down-projected before summation (a sum-then-project variant is
       available behind a flag),
  lbs  weighted sum of homogeneous matrix images,
  dq   normalized linear blend of unit dual quaternions; uniform scale
       is factored out of each bone matrix and applied to the input
       point first, since dual quaternions only cover rigid motion.

Sample times outside a track's key range clamp to the nearest key; a
missing track holds the bone's local bind transform.  Tracks, if any,
on the root bone are honored by the traversal; the shipped fixtures
never animate the root, so its pose entry stays the identity.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np

from . import quaternions as quat
from .algebra import down_points, geometric_product, sandwich_matrix, up_points
from .errors import NumericalFailure, SchemaError
from .rig import (
    RiggedModel,
    Trs,
    TrsKey,
    bbox_diagonal,
    trs_matrix,
    trs_versor,
)

__all__ = [
    "Pose",
    "SkinnedFrame",
    "local_transform_at",
    "global_pose_at",
    "bind_pose",
    "skin_cga",
    "skin_lbs",
    "skin_dq",
    "SKIN_BACKENDS",
    "compare_backends",
    "generate_keyframe",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Pose:
    """Per-bone global transforms at one sample time (versor + matrix twins)."""

    time: float
    versors: Mapping  # bone id -> Versor
    matrices: Mapping  # bone id -> (4, 4) ndarray


@dataclass(frozen=True)
class SkinnedFrame:
    """Deformed vertex positions produced by one skinning backend."""

    positions: np.ndarray  # (n, 3)
    backend: str
    time: float


# ---------------------------------------------------------------------------
# keyframe interpolation


def _interpolate_keys(keys, time: float) -> Trs:
    times = [k.time for k in keys]
    i = bisect.bisect_left(times, time)
    if i < len(keys) and keys[i].time == time:
        return keys[i].trs
    if i == 0:
        return keys[0].trs
    if i == len(keys):
        return keys[-1].trs
    k0, k1 = keys[i - 1], keys[i]
    a = (time - k0.time) / (k1.time - k0.time)
    t = (1.0 - a) * np.asarray(k0.translation) + a * np.asarray(k1.translation)
    q = quat.nlerp(k0.rotation, k1.rotation, a)
    s = (1.0 - a) * k0.scale + a * k1.scale
    return Trs(tuple(float(x) for x in t), tuple(float(x) for x in q), float(s))


def local_transform_at(
    model: RiggedModel, clip: Optional[str], bone_id: int, time: float
) -> Trs:
    """Interpolated local transform of one bone.

    Lands exactly on key values at key times, clamps outside the key
    range, and falls back to the bone's bind transform when the clip has
    no track for the bone (or clip is None).
    """
    tracks = model.clips.get(clip, {}) if clip is not None else {}
    keys = tracks.get(bone_id)
    if not keys:
        return model.bone(bone_id).bind
    return _interpolate_keys(keys, time)


def global_pose_at(model: RiggedModel, clip: Optional[str], time: float) -> Pose:
    """Parent-before-child propagation of local transforms over the tree."""
    versors: dict = {}
    matrices: dict = {}
    pending = sorted(model.bones, key=lambda b: b.id)
    done: set = set()
    while pending:
        progressed = False
        for b in list(pending):
            if b.parent is not None and b.parent not in done:
                continue
            local = local_transform_at(model, clip, b.id, time)
            lv, lm = trs_versor(local), trs_matrix(local)
            if b.parent is None:
                versors[b.id], matrices[b.id] = lv, lm
            else:
                versors[b.id] = geometric_product(versors[b.parent], lv)
                matrices[b.id] = matrices[b.parent] @ lm
            done.add(b.id)
            pending.remove(b)
            progressed = True
        if not progressed:  # unreachable for validated models
            raise SchemaError("bone hierarchy is not a tree")
    return Pose(float(time), versors, matrices)


def bind_pose(model: RiggedModel) -> Pose:
    """Global bind transforms as a Pose (what an empty clip evaluates to)."""
    return global_pose_at(model, None, 0.0)


# ---------------------------------------------------------------------------
# skinning backends


def _influence_arrays(model: RiggedModel) -> dict:
    """Per-bone vertex index and weight arrays, keyed by bone id."""
    gathered: dict = {}
    for vi, entry in enumerate(model.weights):
        for bone_id, w in entry:
            gathered.setdefault(bone_id, ([], []))
            gathered[bone_id][0].append(vi)
            gathered[bone_id][1].append(w)
    return {
        b: (np.array(idx, dtype=np.intp), np.array(ws, dtype=np.float64))
        for b, (idx, ws) in gathered.items()
    }


def _check_finite(positions: np.ndarray, backend: str) -> np.ndarray:
    bad = np.flatnonzero(~np.all(np.isfinite(positions), axis=1))
    if bad.size:
        raise NumericalFailure(
            f"{backend} skinning produced a non-finite position at vertex {int(bad[0])}"
        )
    return positions


def skin_cga(model: RiggedModel, pose: Pose, sum_then_project: bool = False) -> SkinnedFrame:
    """Conformal skinning: blend sandwich images of each vertex.

    Default path down-projects every influence term before the weighted
    sum; sum_then_project instead sums the conformal points and projects
    once (the two agree wherever a vertex has a single influence).
    """
    verts = model.mesh.vertices
    out = np.zeros((len(verts), 3))
    acc = np.zeros((len(verts), 32)) if sum_then_project else None
    with np.errstate(all="ignore"):
        lifted = up_points(verts) if len(verts) else np.zeros((0, 32))
        for bone_id, (idx, ws) in _influence_arrays(model).items():
            bone = model.bone(bone_id)
            deform = geometric_product(pose.versors[bone_id], trs_versor(bone.offset))
            img = lifted[idx] @ sandwich_matrix(deform)
            if sum_then_project:
                acc[idx] += ws[:, None] * img
            else:
                out[idx] += ws[:, None] * down_points(img)
        if sum_then_project and len(verts):
            out = down_points(acc)
    return SkinnedFrame(_check_finite(out, "cga"), "cga", pose.time)


def skin_lbs(model: RiggedModel, pose: Pose) -> SkinnedFrame:
    """Linear blend skinning with homogeneous matrices."""
    verts = model.mesh.vertices
    out = np.zeros((len(verts), 3))
    with np.errstate(all="ignore"):
        for bone_id, (idx, ws) in _influence_arrays(model).items():
            bone = model.bone(bone_id)
            m = pose.matrices[bone_id] @ trs_matrix(bone.offset)
            img = verts[idx] @ m[:3, :3].T + m[:3, 3]
            out[idx] += ws[:, None] * img
    return SkinnedFrame(_check_finite(out, "lbs"), "lbs", pose.time)


def _qmul_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    bw, bx, by, bz = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=1,
    )


def _qrot_rows(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    w, u = q[:, :1], q[:, 1:]
    uv = np.cross(u, v)
    return v + 2.0 * w * uv + 2.0 * np.cross(u, uv)


def skin_dq(model: RiggedModel, pose: Pose) -> SkinnedFrame:
    """Dual-quaternion skinning with per-bone uniform scale factored out.

    Each deformation matrix splits into rigid * scale; the blended scale
    multiplies the rest position first, then the hemisphere-corrected
    normalized dual-quaternion blend applies the rigid part.  Hemisphere
    correction pivots on each vertex's largest-weight influence (ties go
    to the lower bone id).
    """
    verts = model.mesh.vertices
    n = len(verts)

    real: dict = {}
    dual: dict = {}
    scale: dict = {}
    for b in model.bones:
        m = pose.matrices[b.id] @ trs_matrix(b.offset)
        a = m[:3, :3]
        s = float(np.linalg.det(a)) ** (1.0 / 3.0)
        q = quat.from_matrix(a / s)
        t = m[:3, 3]
        real[b.id] = q
        dual[b.id] = 0.5 * quat.multiply(np.concatenate([[0.0], t]), q)
        scale[b.id] = s

    pivot_real = np.zeros((n, 4))
    for vi, entry in enumerate(model.weights):
        pivot = min(entry, key=lambda bw: (-bw[1], bw[0]))[0]
        pivot_real[vi] = real[pivot]

    acc_r = np.zeros((n, 4))
    acc_d = np.zeros((n, 4))
    s_blend = np.zeros(n)
    for bone_id, (idx, ws) in _influence_arrays(model).items():
        sgn = np.where(pivot_real[idx] @ real[bone_id] < 0.0, -1.0, 1.0)
        acc_r[idx] += (ws * sgn)[:, None] * real[bone_id]
        acc_d[idx] += (ws * sgn)[:, None] * dual[bone_id]
        s_blend[idx] += ws * scale[bone_id]

    norm = np.linalg.norm(acc_r, axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        qr = acc_r / norm
        qd = acc_d / norm
        scaled = s_blend[:, None] * verts
        conj = qr * np.array([1.0, -1.0, -1.0, -1.0])
        trans = 2.0 * _qmul_rows(qd, conj)[:, 1:]
        out = _qrot_rows(qr, scaled) + trans
    return SkinnedFrame(_check_finite(out, "dq"), "dq", pose.time)


SKIN_BACKENDS = {"cga": skin_cga, "lbs": skin_lbs, "dq": skin_dq}


def compare_backends(
    model: RiggedModel, pose: Pose, reference: str = "dq", test: str = "cga"
) -> dict:
    """Deviation of one backend from another on a pose.

    Errors are relative to the rest mesh's bounding-box diagonal:
    linf_rel is the largest absolute coordinate difference, mean_rel the
    mean per-vertex Euclidean distance.
    """
    for name in (reference, test):
        if name not in SKIN_BACKENDS:
            raise SchemaError(f"unknown skinning backend {name!r}")
    ref = SKIN_BACKENDS[reference](model, pose).positions
    new = SKIN_BACKENDS[test](model, pose).positions
    diff = new - ref
    diag = bbox_diagonal(model.mesh)
    denom = diag if diag > 0.0 else 1.0
    per_vertex = np.linalg.norm(diff, axis=1) if len(diff) else np.zeros(0)
    linf = float(np.max(np.abs(diff))) if len(diff) else 0.0
    return {
        "reference": reference,
        "test": test,
        "time": pose.time,
        "linf_abs": linf,
        "linf_rel": linf / denom,
        "mean_abs": float(per_vertex.mean()) if len(diff) else 0.0,
        "mean_rel": (float(per_vertex.mean()) / denom) if len(diff) else 0.0,
    }


# ---------------------------------------------------------------------------
# keyframe editing


def generate_keyframe(
    model: RiggedModel, clip: str, bone_id: int, trs: Trs, time: float
) -> RiggedModel:
    """New model with a key inserted (or overwritten, with a notice) in a clip."""
    model.bone(bone_id)  # KeyError on unknown bone
    key = TrsKey(float(time), tuple(trs.translation), tuple(trs.rotation), float(trs.scale))
    tracks = dict(model.clips.get(clip, {}))
    keys = list(tracks.get(bone_id, ()))
    existing = [i for i, k in enumerate(keys) if k.time == key.time]
    if existing:
        log.info("clip %r bone %d: overwriting key at t=%g", clip, bone_id, key.time)
        keys[existing[0]] = key
    else:
        bisect.insort(keys, key, key=lambda k: k.time)
    tracks[bone_id] = tuple(keys)
    clips = dict(model.clips)
    clips[clip] = tracks
    return replace(model, clips=clips)
