import numpy as np

from balance_sim.com import com_jacobian, com_position
from balance_sim.model import AvatarModel, Joint, Kinematics, Segment, forward_kinematics
from balance_sim.transforms import Transform

from conftest import make_free_body, random_configuration
from oracles import fd_vector_jacobian, jacobian_mismatch


def test_single_segment_com_is_its_own():
    model = make_free_body(com=(0.05, -0.02, 0.08))
    q = model.neutral_q()
    q[0:3] = [1.0, 2.0, 3.0]
    np.testing.assert_allclose(com_position(model, q), [1.05, 1.98, 3.08], atol=1e-15)


def test_two_equal_masses_give_midpoint():
    segs = [
        Segment("a", None, 2.0, np.zeros(3), np.eye(3) * 1e-3, Transform.identity(), Joint("fixed")),
        Segment("b", 0, 2.0, np.zeros(3), np.eye(3) * 1e-3,
                Transform(np.eye(3), np.array([1.0, 0.0, 0.0])),
                Joint("revolute", axis=np.array([0.0, 0.0, 1.0]))),
    ]
    model = AvatarModel(segs)
    np.testing.assert_allclose(com_position(model, np.zeros(1)), [0.5, 0.0, 0.0], atol=1e-15)


def test_com_matches_direct_sum_over_placed_segments(humanoid):
    rng = np.random.default_rng(23)
    for _ in range(5):
        q = random_configuration(humanoid, rng)
        T = forward_kinematics(humanoid, q)
        total = sum(s.mass for s in humanoid.segments)
        expected = sum(s.mass * T[i].apply(s.local_com)
                       for i, s in enumerate(humanoid.segments)) / total
        np.testing.assert_allclose(com_position(humanoid, q), expected, atol=1e-13)


def test_mass_scaling_invariance(humanoid):
    rng = np.random.default_rng(29)
    q = random_configuration(humanoid, rng)
    scaled = AvatarModel(
        [Segment(s.name, s.parent, 3.0 * s.mass, s.local_com, s.inertia, s.joint_origin,
                 Joint(s.joint.kind, s.joint.axis, s.joint.limits), s.collision_points)
         for s in humanoid.segments],
        humanoid.task_frames)
    np.testing.assert_allclose(com_position(humanoid, q), com_position(scaled, q), atol=1e-14)


def test_com_inside_convex_hull_of_segment_coms(humanoid):
    rng = np.random.default_rng(31)
    q = random_configuration(humanoid, rng)
    kin = Kinematics(humanoid, q)
    pts = np.array([kin.world_point(i, s.local_com) for i, s in enumerate(humanoid.segments)])
    c = com_position(humanoid, q)
    assert np.all(c >= pts.min(axis=0) - 1e-12)
    assert np.all(c <= pts.max(axis=0) + 1e-12)


def test_com_jacobian_matches_finite_differences(humanoid):
    rng = np.random.default_rng(37)
    for _ in range(10):
        q = random_configuration(humanoid, rng)
        J = com_jacobian(humanoid, q)
        J_fd = fd_vector_jacobian(humanoid, q, lambda qq: com_position(humanoid, qq))
        assert jacobian_mismatch(J, J_fd) < 1e-5


def test_com_jacobian_root_translation_block_is_identity(humanoid):
    # moving the floating root translates the CoM one-for-one
    rng = np.random.default_rng(41)
    q = random_configuration(humanoid, rng)
    J = com_jacobian(humanoid, q)
    np.testing.assert_allclose(J[:, 0:3], np.eye(3), atol=1e-12)
