"""Forward kinematics of a 6-revolute-joint serial arm.

The arm is a fixed-base serial chain: each joint contributes a constant
mount transform (translation + rotation) followed by a rotation about its
own axis. The default geometry approximates a small hobby manipulator with
a 0.41 m reach (0.82 m workspace diameter) and is shipped as a TOML file
(``data/default_arm.toml``) so experiments can swap geometries without
code changes.

All functions here are pure and operate on immutable inputs.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from importlib import resources

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAX_REACH = 0.41  # m, workspace radius from the base

# Goal-sampling region: an axis-aligned box intersected with the reach
# sphere. Kept here so both goal validation and goal sampling share one
# definition.
GOAL_BOX_LO = np.array([-0.25, -0.25, 0.10])
GOAL_BOX_HI = np.array([0.25, 0.25, 0.35])


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint: fixed mount transform plus a rotation axis."""

    axis: np.ndarray          # unit 3-vector in the parent frame
    translation: np.ndarray   # mount offset from the parent joint, m
    rotation: np.ndarray      # fixed 3x3 mount rotation
    limit_lo: float           # rad
    limit_hi: float           # rad

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        translation = np.asarray(self.translation, dtype=float)
        rotation = np.asarray(self.rotation, dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("joint axis must be a unit 3-vector")
        if translation.shape != (3,):
            raise ValueError("joint translation must be a 3-vector")
        if rotation.shape != (3, 3):
            raise ValueError("joint rotation must be a 3x3 matrix")
        if (np.abs(rotation @ rotation.T - np.eye(3)).max() > 1e-9
                or abs(np.linalg.det(rotation) - 1.0) > 1e-9):
            raise ValueError("joint rotation must be orthonormal with det 1")
        if not self.limit_lo < self.limit_hi:
            raise ValueError("joint limits must satisfy limit_lo < limit_hi")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "translation", translation)
        object.__setattr__(self, "rotation", rotation)


@dataclass(frozen=True)
class ArmModel:
    """Serial chain of exactly six revolute joints plus a tool offset."""

    joints: tuple[JointSpec, ...]
    tool_offset: np.ndarray

    def __post_init__(self):
        if len(self.joints) != 6:
            raise ValueError("arm model requires exactly 6 joints")
        tool = np.asarray(self.tool_offset, dtype=float)
        if tool.shape != (3,):
            raise ValueError("tool_offset must be a 3-vector")
        object.__setattr__(self, "tool_offset", tool)
        object.__setattr__(self, "joints", tuple(self.joints))
        if abs(self.max_reach() - MAX_REACH) > 1e-6:
            raise ValueError(
                f"arm reach {self.max_reach():.6f} m does not match the "
                f"required {MAX_REACH} m workspace radius"
            )

    def max_reach(self) -> float:
        """Upper bound on end-effector distance from the base."""
        reach = sum(float(np.linalg.norm(j.translation)) for j in self.joints)
        return reach + float(np.linalg.norm(self.tool_offset))

    def limits_lo(self) -> np.ndarray:
        return np.array([j.limit_lo for j in self.joints])

    def limits_hi(self) -> np.ndarray:
        return np.array([j.limit_hi for j in self.joints])


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for ``angle`` radians about a unit ``axis`` (Rodrigues)."""
    x, y, z = axis
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    return np.array([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])


def forward_kinematics(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """End-effector position for joint angles ``q`` (6 values, rad).

    Composes, joint by joint, the fixed mount transform followed by the
    rotation of q[i] about the joint axis, then applies the tool offset.
    Callers are expected to pass angles within the joint limits (see
    :func:`clamp_angles`).
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (6,):
        raise ValueError("expected 6 joint angles")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint angles must be finite")
    p = np.zeros(3)
    r = np.eye(3)
    for joint, angle in zip(model.joints, q):
        p = p + r @ joint.translation
        r = r @ joint.rotation @ rotation_about(joint.axis, angle)
    return p + r @ model.tool_offset


def clamp_angles(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """Clip each angle into its joint's [limit_lo, limit_hi]. Idempotent."""
    q = np.asarray(q, dtype=float)
    if q.shape != (6,):
        raise ValueError("expected 6 joint angles")
    if np.any(np.isnan(q)):
        raise ValueError("joint angles must not be NaN")
    return np.clip(q, model.limits_lo(), model.limits_hi())


def workspace_contains(model: ArmModel, p: np.ndarray,
                       box_lo: np.ndarray = GOAL_BOX_LO,
                       box_hi: np.ndarray = GOAL_BOX_HI) -> bool:
    """True iff ``p`` lies in the goal-sampling region of this arm.

    The region is the axis-aligned box [box_lo, box_hi] intersected with
    the sphere of radius ``max_reach`` around the base. Every goal the
    environment samples or accepts as a fixed goal must pass this check.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (3,):
        raise ValueError("expected a 3-vector position")
    if not np.all(np.isfinite(p)):
        return False
    inside_box = bool(np.all(p >= box_lo) and np.all(p <= box_hi))
    return inside_box and float(np.linalg.norm(p)) <= model.max_reach()


def _parse_joint(entry: dict) -> JointSpec:
    ax, ay, az, angle = entry["rotation"]
    mount_axis = np.asarray([ax, ay, az], dtype=float)
    norm = np.linalg.norm(mount_axis)
    if norm == 0.0:
        raise ValueError("joint rotation axis must be non-zero")
    rotation = rotation_about(mount_axis / norm, float(angle))
    lo, hi = entry["limits"]
    return JointSpec(
        axis=np.asarray(entry["axis"], dtype=float),
        translation=np.asarray(entry["translation"], dtype=float),
        rotation=rotation,
        limit_lo=float(lo),
        limit_hi=float(hi),
    )


def arm_from_dict(doc: dict) -> ArmModel:
    """Build an :class:`ArmModel` from a parsed geometry document."""
    version = doc.get("schema_version")
    if version != 1:
        raise ValueError(f"unsupported arm geometry schema_version: {version!r}")
    joints = [_parse_joint(entry) for entry in doc["joints"]]
    return ArmModel(joints=tuple(joints),
                    tool_offset=np.asarray(doc["tool_offset"], dtype=float))


def load_arm(path) -> ArmModel:
    """Load an arm geometry TOML file (see data/default_arm.toml for the schema)."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return arm_from_dict(doc)


_DEFAULT_ARM = None


def default_arm() -> ArmModel:
    """The packaged default geometry (cached; the model is immutable)."""
    global _DEFAULT_ARM
    if _DEFAULT_ARM is None:
        ref = resources.files("reachbench").joinpath("data/default_arm.toml")
        with ref.open("rb") as fh:
            _DEFAULT_ARM = arm_from_dict(tomllib.load(fh))
    return _DEFAULT_ARM
