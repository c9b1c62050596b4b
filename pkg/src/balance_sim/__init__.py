"""Articulated avatar simulation with a balance unilateral constraint.

The package simulates a floating-base kinematic tree driven by task-space
PD controllers, keeps its center of mass inside a support ellipse through a
single LCP row, guides selected frames with virtual spring-damper
constraints, and records per-step metrics.  A WebSocket server streams
frames to a steering client.
"""

from .balance import (
    BalanceConstraintRow,
    BalanceError,
    SupportEllipse,
    balance_distance,
    balance_jacobian,
    build_balance_row,
    fit_support_ellipse,
)
from .com import com_jacobian, com_position
from .control import (
    ControlContext,
    ControlGains,
    ControlOutput,
    Morphology,
    TaskTarget,
    VirtualGuide,
    apply_guide,
    control_step,
    posture_torques,
    retarget_targets,
    task_torques,
)
from .dynamics import (
    Contact,
    EnvironmentPlane,
    StepConfig,
    StepError,
    StepReport,
    UnilateralRow,
    UnilateralSystem,
    assemble_lcp,
    bias_forces,
    detect_contacts,
    joint_limit_rows,
    mass_matrix,
    step,
)
from .lcp import (
    LcpOptions,
    LcpProblem,
    LcpSolution,
    complementarity_residual,
    enumerate_lcp_oracle,
    solve_lcp,
)
from .model import (
    AvatarModel,
    Joint,
    Kinematics,
    ModelError,
    Segment,
    SimState,
    TaskFrame,
    body_jacobian,
    build_kinematics,
    coordinate_difference,
    forward_kinematics,
    integrate_coords,
    load_avatar,
    reduce_jacobian,
)
from .transforms import Transform

__version__ = "0.1.0"
