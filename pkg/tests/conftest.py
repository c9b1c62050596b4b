from importlib import resources

import numpy as np
import pytest

from balance_sim.model import AvatarModel, Joint, Segment, TaskFrame, integrate_coords, load_avatar
from balance_sim.transforms import Transform

ASSETS = resources.files("balance_sim") / "assets"


def _rod_inertia(mass, length):
    i = mass * length * length / 12.0
    return np.diag([i, i, mass * 1e-4 + 1e-6])


def make_pendulum(length=1.0, mass=2.0, axis=(0, 1, 0), limits=None):
    """Fixed-base pendulum swinging about the world origin; rod along -z."""
    segments = [
        Segment("base", None, 0.0, np.zeros(3), np.eye(3) * 1e-9,
                Transform.identity(), Joint("fixed")),
        Segment("rod", 0, mass, np.array([0.0, 0.0, -length]), _rod_inertia(mass, length),
                Transform.identity(), Joint("revolute", axis=np.asarray(axis, float), limits=limits)),
    ]
    return AvatarModel(segments, {"tip": TaskFrame(1, Transform(np.eye(3), np.array([0, 0, -length])))},
                       name="pendulum")


def make_planar_arm(l1=0.8, l2=0.5, m1=2.0, m2=1.5):
    """Two revolute y-joints, links along +x, gravity-free textbook arm."""
    segments = [
        Segment("base", None, 0.0, np.zeros(3), np.eye(3) * 1e-9,
                Transform.identity(), Joint("fixed")),
        Segment("link1", 0, m1, np.array([l1 / 2, 0.0, 0.0]), _rod_inertia(m1, l1),
                Transform.identity(), Joint("revolute", axis=np.array([0.0, 1.0, 0.0]))),
        Segment("link2", 1, m2, np.array([l2 / 2, 0.0, 0.0]), _rod_inertia(m2, l2),
                Transform(np.eye(3), np.array([l1, 0.0, 0.0])),
                Joint("revolute", axis=np.array([0.0, 1.0, 0.0]))),
    ]
    frames = {"tip": TaskFrame(2, Transform(np.eye(3), np.array([l2, 0.0, 0.0])))}
    return AvatarModel(segments, frames, name="planar_arm")


def make_free_body(mass=3.0, inertia=(0.2, 0.3, 0.4), com=(0.05, -0.02, 0.08)):
    segments = [Segment("body", None, mass, np.asarray(com, float), np.diag(inertia),
                        Transform.identity(), Joint("free6"),
                        collision_points=[np.zeros(3)])]
    return AvatarModel(segments, name="free_body")


def make_box(mass=5.0, half=(0.1, 0.1, 0.1)):
    """Free cuboid with corner collision points, com at the joint origin."""
    hx, hy, hz = half
    inertia = mass / 3.0 * np.diag([hy * hy + hz * hz, hx * hx + hz * hz, hx * hx + hy * hy])
    corners = [np.array([sx * hx, sy * hy, sz * hz])
               for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    segments = [Segment("box", None, mass, np.zeros(3), inertia,
                        Transform.identity(), Joint("free6"), collision_points=corners)]
    return AvatarModel(segments, name="box")


@pytest.fixture(scope="session")
def humanoid():
    return load_avatar(ASSETS / "humanoid.json")


@pytest.fixture(scope="session")
def pendulum():
    return make_pendulum()


@pytest.fixture(scope="session")
def planar_arm():
    return make_planar_arm()


def random_configuration(model, rng, spread=0.6):
    """A valid random coordinate vector reached by a tangent-space move."""
    q = model.neutral_q()
    if model.segments[0].joint.kind == "free6":
        q[0:3] = rng.normal(scale=0.5, size=3)
    dq = rng.normal(scale=spread, size=model.n_dof)
    return integrate_coords(model, q, dq)
