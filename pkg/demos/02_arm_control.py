"""Operator-to-robot arm mapping and closed-loop IK.

Run:  python3 demos/02_arm_control.py
"""

import numpy as np

from otv import (
    EndEffectorTarget,
    FilterState,
    IkConfig,
    calibrate,
    filter_pose,
    load_robot_model,
    map_head,
    map_operator_to_targets,
    solve_arm,
)
from otv.arm import home_posture
from otv.kinematics import forward_kinematics
from otv.opframe import HandKeypoints, OperatorFrame
from otv.paths import model_path
from otv.se3 import Pose, quat_from_axis_angle

model = load_robot_model(model_path("h1"))

flat = HandKeypoints.from_array(np.array(
    [[0, 0, 0], [0.06, 0.04, 0], [0.1, 0.02, 0],
     [0.1, 0, 0], [0.1, -0.02, 0], [0.09, -0.04, 0]], dtype=float))
frame = OperatorFrame(
    0.0,
    head=Pose.identity(),
    wrist_left=Pose(np.array([1.0, 0, 0, 0]), np.array([0.32, 0.22, -0.28])),
    wrist_right=Pose(np.array([1.0, 0, 0, 0]), np.array([0.32, -0.22, -0.28])),
    hand_left=flat, hand_right=flat)

cal = calibrate(frame)
print("calibrated; alignment yaw matrix:\n", np.round(cal.align_r, 3))

# the head drives the neck, and wrist targets ride relative to the robot head
head_turned = Pose(quat_from_axis_angle(np.array([0, 0, 1.0]), 0.3), np.zeros(3))
neck = map_head(head_turned, cal, model)
print("neck command for a 0.3 rad head yaw:", np.round(neck, 3))

head_robot = forward_kinematics(model, home_posture(model), "head")
left, right = map_operator_to_targets(frame, cal, head_robot)
print("left wrist target:", np.round(left.position, 3), "clamped:", left.clamped)

# SE(3) low-pass: sudden target jumps land smoothly over a few ticks
state = FilterState(lam=0.6)
target = left.pose()
filter_pose(state, head_robot)  # seed with some prior pose
for k in range(4):
    out = filter_pose(state, target)
    print(f"  filtered step {k}: {np.round(out.t, 3)}")

res = solve_arm(model, home_posture(model),
                EndEffectorTarget(left.position, left.orientation, "left"),
                IkConfig(max_iters=100))
print(f"IK converged={res.converged} in {res.iterations} iterations; "
      f"pos err {res.pos_err:.2e} m, rot err {res.rot_err:.2e} rad")
