"""Keyframe interpolation, pose propagation, and the skinning backends."""

import logging

import numpy as np
import pytest

import mvskin.quaternions as quat
from mvskin.algebra import transform_points
from mvskin.animate import (
    SKIN_BACKENDS,
    bind_pose,
    compare_backends,
    generate_keyframe,
    global_pose_at,
    local_transform_at,
    skin_cga,
    skin_dq,
    skin_lbs,
)
from mvskin.errors import NumericalFailure, SchemaError
from mvskin.rig import (
    Bone,
    IDENTITY_TRS,
    Mesh,
    RiggedModel,
    Trs,
    TrsKey,
    make_cylinders_model,
    trs_matrix,
    trs_versor,
    validate_model,
)


def chain_model(n_bones=3, step=(0.0, 0.0, 1.0)):
    """Straight bone chain with one single-influence vertex per bone."""
    bones = [Bone(0, None, IDENTITY_TRS, IDENTITY_TRS)]
    global_t = np.zeros(3)
    for i in range(1, n_bones):
        global_t += np.asarray(step, dtype=float)
        bones.append(
            Bone(i, i - 1, Trs(translation=tuple(-global_t)), Trs(translation=tuple(step)))
        )
    vertices = [[0.1 * i, 0.0, float(i)] for i in range(n_bones)]
    extra = [[5.0, 5.0, 5.0], [5.0, 6.0, 5.0]]
    faces = []
    pts = vertices + extra
    # fan of disjoint triangles so the mesh stays manifold
    for i in range(n_bones - 2):
        faces.append([i, i + 1, i + 2] if i % 2 == 0 else [i + 2, i + 1, i])
    if not faces:
        faces = [[0, 1, 2]]
    weights = [((i % n_bones, 1.0),) for i in range(len(pts))]
    model = RiggedModel(Mesh(pts, faces), tuple(bones), tuple(weights), {})
    return model


def keyed(model, clip, bone, time, **trs_fields):
    return generate_keyframe(model, clip, bone, Trs(**trs_fields), time)


# ---------------------------------------------------------------------------
# keyframe interpolation


def test_exact_key_returns_key_exactly():
    m = make_cylinders_model()
    t1 = Trs(translation=(0.5, 0.25, 0.0), rotation=tuple(quat.from_axis_angle((0, 0, 1), 0.4)))
    m = generate_keyframe(m, "c", 1, t1, 2.0)
    m = keyed(m, "c", 1, 5.0, translation=(9.0, 0.0, 0.0))
    assert local_transform_at(m, "c", 1, 2.0) == t1


def test_clamping_outside_key_range():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, translation=(1.0, 0.0, 0.0))
    m = keyed(m, "c", 1, 2.0, translation=(3.0, 0.0, 0.0))
    assert local_transform_at(m, "c", 1, 0.0) == local_transform_at(m, "c", 1, 1.0)
    assert local_transform_at(m, "c", 1, 99.0) == local_transform_at(m, "c", 1, 2.0)


def test_translation_midpoint_lerp():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 0.0)
    m = keyed(m, "c", 1, 1.0, translation=(2.0, 0.0, 0.0))
    mid = local_transform_at(m, "c", 1, 0.5)
    assert mid.translation == (1.0, 0.0, 0.0)
    assert mid.scale == 1.0


def test_rotation_midpoint_matches_nlerp_oracle():
    theta = 0.9
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 0.0)
    m = keyed(m, "c", 1, 2.0, rotation=tuple(quat.from_axis_angle((0, 0, 1), theta)))
    mid = local_transform_at(m, "c", 1, 1.0)
    expect = quat.nlerp((1, 0, 0, 0), quat.from_axis_angle((0, 0, 1), theta), 0.5)
    assert np.allclose(mid.rotation, expect, atol=1e-15)
    # nlerp of identity and a z-rotation lands on the half-angle rotor
    half = quat.from_axis_angle((0, 0, 1), theta / 2.0)
    assert np.allclose(mid.rotation, half, atol=1e-12)


def test_hemisphere_correction_in_interpolation():
    q0 = quat.from_axis_angle((0, 0, 1), 0.2)
    q1 = -quat.from_axis_angle((0, 0, 1), 0.4)  # same rotation, far hemisphere
    m = make_cylinders_model()
    m = generate_keyframe(m, "c", 1, Trs(rotation=tuple(q0)), 0.0)
    m = generate_keyframe(m, "c", 1, Trs(rotation=tuple(q1)), 1.0)
    mid = local_transform_at(m, "c", 1, 0.5)
    expect = quat.from_axis_angle((0, 0, 1), 0.3)
    assert min(
        np.max(np.abs(np.asarray(mid.rotation) - expect)),
        np.max(np.abs(np.asarray(mid.rotation) + expect)),
    ) < 1e-12


def test_missing_track_falls_back_to_bind():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 0.0, translation=(4.0, 0.0, 0.0))
    assert local_transform_at(m, "c", 2, 0.0) == m.bone(2).bind
    assert local_transform_at(m, None, 1, 0.0) == m.bone(1).bind
    assert local_transform_at(m, "nope", 1, 0.0) == m.bone(1).bind


def test_scale_interpolation_is_linear():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 0.0, scale=1.0)
    m = keyed(m, "c", 1, 1.0, scale=3.0)
    assert local_transform_at(m, "c", 1, 0.25).scale == pytest.approx(1.5)


# ---------------------------------------------------------------------------
# pose propagation


def test_two_bone_chain_translations_compose():
    m = chain_model(2)
    m = keyed(m, "c", 0, 0.0, translation=(1.0, 0.0, 0.0))
    m = keyed(m, "c", 1, 0.0, translation=(1.0, 0.0, 0.0))
    pose = global_pose_at(m, "c", 0.0)
    pts = np.array([[0.0, 0.0, 0.0], [2.0, -1.0, 3.0]])
    assert np.allclose(transform_points(pose.versors[1], pts), pts + [2.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(pose.matrices[1][:3, 3], [2.0, 0.0, 0.0], atol=1e-15)


def test_pose_has_entry_per_bone_and_identity_root():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 0.0, translation=(1.0, 2.0, 3.0))
    pose = global_pose_at(m, "c", 0.0)
    assert set(pose.versors) == {0, 1, 2} and set(pose.matrices) == {0, 1, 2}
    assert np.allclose(pose.matrices[0], np.eye(4))
    assert pose.versors[0].scalar_part == pytest.approx(1.0)


def test_versor_and_matrix_twins_agree_on_random_chain():
    rng = np.random.default_rng(3)
    m = chain_model(5)
    for i in range(5):
        q = quat.normalize(rng.normal(size=4))
        m = generate_keyframe(
            m,
            "c",
            i,
            Trs(tuple(rng.normal(size=3)), tuple(q), float(np.exp(rng.normal() * 0.3))),
            0.0,
        )
    pose = global_pose_at(m, "c", 0.0)
    pts = rng.normal(size=(100, 3)) * 2
    for b in range(5):
        img_v = transform_points(pose.versors[b], pts)
        mm = pose.matrices[b]
        img_m = pts @ mm[:3, :3].T + mm[:3, 3]
        assert np.max(np.abs(img_v - img_m)) < 1e-9


def test_bind_pose_versors_act_as_bind():
    m = make_cylinders_model()
    pose = bind_pose(m)
    joint = np.array([[0.0, 0.0, 0.0]])
    img = transform_points(pose.versors[2], joint)
    assert np.allclose(img, [[0.0, 0.0, 2 * 20.0 / 3.0]], atol=1e-12)


# ---------------------------------------------------------------------------
# skinning backends


def test_bind_pose_fixed_point_all_backends():
    m = make_cylinders_model()
    pose = bind_pose(m)
    for name, fn in SKIN_BACKENDS.items():
        frame = fn(m, pose)
        assert frame.backend == name
        assert np.max(np.abs(frame.positions - m.mesh.vertices)) < 1e-9
    frame = skin_cga(m, pose, sum_then_project=True)
    assert np.max(np.abs(frame.positions - m.mesh.vertices)) < 1e-9


def test_single_influence_equivalence_rigid_pose():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, translation=(2.0, 1.0, 0.0),
              rotation=tuple(quat.from_axis_angle((0, 1, 0), 0.8)))
    pose = global_pose_at(m, "c", 1.0)
    single = [i for i, e in enumerate(m.weights) if len(e) == 1]
    frames = {name: fn(m, pose).positions for name, fn in SKIN_BACKENDS.items()}
    for a in ("lbs", "dq"):
        gap = np.max(np.abs(frames["cga"][single] - frames[a][single]))
        assert gap < 1e-9
    stp = skin_cga(m, pose, sum_then_project=True).positions
    assert np.max(np.abs(stp[single] - frames["cga"][single])) < 1e-9


def test_one_bone_translation_shifts_everything():
    m = chain_model(2)
    weights = tuple(((0, 1.0),) for _ in m.weights)
    m = RiggedModel(m.mesh, m.bones, weights, {})
    m = keyed(m, "c", 0, 0.0, translation=(3.0, -1.0, 2.0))
    pose = global_pose_at(m, "c", 0.0)
    frame = skin_lbs(m, pose)
    assert np.allclose(frame.positions, m.mesh.vertices + [3.0, -1.0, 2.0], atol=1e-12)


def test_lbs_matches_straight_line_matrix_oracle():
    rng = np.random.default_rng(4)
    m = make_cylinders_model()
    for bone in (1, 2):
        q = quat.normalize(rng.normal(size=4))
        m = generate_keyframe(
            m, "c", bone, Trs(tuple(rng.normal(size=3)), tuple(q), 1.0), 1.0
        )
    pose = global_pose_at(m, "c", 1.0)
    got = skin_lbs(m, pose).positions

    # independent straight-line evaluator
    expect = np.zeros_like(m.mesh.vertices)
    for vi, entry in enumerate(m.weights):
        v = np.append(m.mesh.vertices[vi], 1.0)
        acc = np.zeros(4)
        for bone_id, w in entry:
            mm = pose.matrices[bone_id] @ trs_matrix(m.bone(bone_id).offset)
            acc += w * (mm @ v)
        expect[vi] = acc[:3]
    assert np.max(np.abs(got - expect)) < 1e-12


def test_cga_per_term_equals_lbs_for_exact_versor_poses():
    # per-term down-projection of conformal images is the conformal twin of
    # the matrix blend, so the two backends coincide to rounding error
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, rotation=tuple(quat.from_axis_angle((0, 1, 1), 0.7)),
              translation=(2.0, 0.0, 0.0), scale=1.3)
    pose = global_pose_at(m, "c", 1.0)
    r = compare_backends(m, pose, reference="lbs", test="cga")
    assert r["linf_rel"] < 1e-10


def test_sum_then_project_differs_on_blended_vertices():
    # rigid sandwiches keep conformal points normalized, so the two paths
    # only split when a dilation skews the projective weights
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, rotation=tuple(quat.from_axis_angle((1, 0, 0), 1.2)), scale=1.6)
    pose = global_pose_at(m, "c", 1.0)
    default = skin_cga(m, pose).positions
    projected = skin_cga(m, pose, sum_then_project=True).positions
    blended = [i for i, e in enumerate(m.weights) if len(e) > 1]
    assert np.max(np.abs(default[blended] - projected[blended])) > 1e-7
    assert np.all(np.isfinite(projected))


def test_dq_differs_from_lbs_near_joint_rotation():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, rotation=tuple(quat.from_axis_angle((0, 1, 1), 0.7)))
    pose = global_pose_at(m, "c", 1.0)
    r = compare_backends(m, pose, reference="lbs", test="dq")
    assert r["linf_rel"] > 1e-4  # candy-wrapper mitigation visibly moves vertices
    assert r["linf_rel"] < 0.05


def test_dq_handles_dilation_via_factored_scale():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, scale=1.5)
    pose = global_pose_at(m, "c", 1.0)
    r = compare_backends(m, pose, reference="cga", test="dq")
    assert r["linf_rel"] < 1e-12


def test_dq_translation_pose_matches_cga():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, translation=(13.0, 0.0, 0.0))
    pose = global_pose_at(m, "c", 1.0)
    r = compare_backends(m, pose, reference="cga", test="dq")
    assert r["linf_rel"] < 1e-12


def test_dq_hemisphere_pivot_on_far_rotations():
    # rotations 80 and 280 degrees about z: quaternion dot < 0, so the
    # blend must flip one sign before accumulating
    m = chain_model(2)
    weights = (((0, 0.5), (1, 0.5)),) + tuple(((0, 1.0),) for _ in m.weights[1:])
    m = RiggedModel(m.mesh, m.bones, weights, {})
    q80 = quat.from_axis_angle((0, 0, 1), np.deg2rad(80))
    q280 = quat.from_axis_angle((0, 0, 1), np.deg2rad(280))
    m = generate_keyframe(m, "c", 0, Trs(rotation=tuple(q80)), 0.0)
    m = generate_keyframe(m, "c", 1, Trs(rotation=tuple(q280)), 0.0)
    pose = global_pose_at(m, "c", 0.0)
    frame = skin_dq(m, pose)
    # oracle: hemisphere-aligned blend of the two bone rotors; bone 1 picks
    # up its offset translation but vertex 0 sits at the origin
    v = m.mesh.vertices[0]
    qa = quat.from_matrix(quat.to_matrix(q80))
    mm = pose.matrices[1] @ trs_matrix(m.bone(1).offset)
    qb = quat.from_matrix(mm[:3, :3])
    if np.dot(qa, qb) < 0:
        qb = -qb
    blend = 0.5 * qa + 0.5 * qb
    dual = 0.5 * (0.5 * quat.multiply(np.concatenate([[0.0], mm[:3, 3]]), qb))
    n = np.linalg.norm(blend)
    t = 2.0 * quat.multiply(dual / n, quat.conjugate(blend / n))[1:]
    expect = quat.rotate(blend / n, v) + t
    assert np.allclose(frame.positions[0], expect, atol=1e-12)


def test_weight_partition_property():
    # every influence carrying the same global deformation moves the vertex
    # by exactly that transform
    bones = (Bone(0, None), Bone(1, 0), Bone(2, 0))
    mesh = Mesh([[0.3, -0.2, 0.9], [1.3, 0.0, 0.9], [0.3, 1.0, 0.9]], [[0, 1, 2]])
    weights = (((0, 0.2), (1, 0.5), (2, 0.3)), ((0, 1.0),), ((1, 1.0),))
    m = RiggedModel(mesh, bones, weights, {})
    validate_model(m)
    trs = Trs((0.4, -1.0, 2.0), tuple(quat.from_axis_angle((1, 2, 0), 0.6)), 1.7)
    # keying only the root leaves the children at their identity binds, so
    # every bone's global deformation is the same versor
    m = generate_keyframe(m, "c", 0, trs, 0.0)
    pose = global_pose_at(m, "c", 0.0)
    expect = transform_points(trs_versor(trs), mesh.vertices)
    for fn in (skin_cga, skin_lbs):
        assert np.max(np.abs(fn(m, pose).positions - expect)) < 1e-10
    assert np.max(np.abs(skin_dq(m, pose).positions - expect)) < 1e-10


def test_numerical_failure_names_vertex():
    m = chain_model(2)
    bad = Mesh(np.array([[0.0, 0.0, 0.0], [np.inf, 0.0, 0.0], [0.0, 1.0, 0.0],
                         [5.0, 5.0, 5.0], [5.0, 6.0, 5.0]]), m.mesh.faces)
    m = RiggedModel(bad, m.bones, m.weights, {})
    pose = bind_pose(m)
    with pytest.raises(NumericalFailure, match="vertex 1"):
        skin_lbs(m, pose)
    with pytest.raises(NumericalFailure, match="vertex 1"):
        skin_dq(m, pose)


# ---------------------------------------------------------------------------
# comparisons


def test_compare_backend_with_itself_is_zero():
    m = make_cylinders_model()
    pose = bind_pose(m)
    r = compare_backends(m, pose, reference="cga", test="cga")
    assert r["linf_rel"] == 0.0 and r["mean_rel"] == 0.0


def test_compare_unknown_backend():
    m = make_cylinders_model()
    with pytest.raises(SchemaError, match="unknown skinning backend"):
        compare_backends(m, bind_pose(m), reference="cga", test="nurbs")


def test_compare_rotation_pose_within_two_percent():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, rotation=tuple(quat.from_axis_angle((0, 1, 1), 0.5)))
    pose = global_pose_at(m, "c", 1.0)
    r = compare_backends(m, pose, reference="dq", test="cga")
    assert 0.0 < r["linf_rel"] <= 0.02
    assert r["mean_rel"] < r["linf_rel"]


# ---------------------------------------------------------------------------
# keyframe editing


def test_generate_keyframe_inserts_in_order():
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 2.0, translation=(2.0, 0.0, 0.0))
    m = keyed(m, "c", 1, 0.5, translation=(1.0, 0.0, 0.0))
    m = keyed(m, "c", 1, 1.0, translation=(9.0, 0.0, 0.0))
    keys = m.clips["c"][1]
    assert [k.time for k in keys] == [0.5, 1.0, 2.0]
    validate_model(m)


def test_generate_keyframe_overwrites_with_notice(caplog):
    m = make_cylinders_model()
    m = keyed(m, "c", 1, 1.0, translation=(1.0, 0.0, 0.0))
    with caplog.at_level(logging.INFO, logger="mvskin.animate"):
        m = keyed(m, "c", 1, 1.0, translation=(5.0, 0.0, 0.0))
    assert any("overwriting key" in rec.message for rec in caplog.records)
    keys = m.clips["c"][1]
    assert len(keys) == 1 and keys[0].translation == (5.0, 0.0, 0.0)


def test_generate_keyframe_bind_insert_keeps_bind_pose():
    m = make_cylinders_model()
    m = generate_keyframe(m, "c", 1, m.bone(1).bind, 3.0)
    pose = global_pose_at(m, "c", 3.0)
    frame = skin_cga(m, pose)
    assert np.max(np.abs(frame.positions - m.mesh.vertices)) < 1e-9


def test_generate_keyframe_unknown_bone():
    m = make_cylinders_model()
    with pytest.raises(KeyError):
        generate_keyframe(m, "c", 9, Trs(), 0.0)


def test_original_model_unchanged_by_keyframing():
    m = make_cylinders_model()
    m2 = keyed(m, "c", 1, 1.0, translation=(1.0, 0.0, 0.0))
    assert "c" not in m.clips and "c" in m2.clips
