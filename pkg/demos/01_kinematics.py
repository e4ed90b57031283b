"""Walk through the kinematic substrate: model parsing, FK, Jacobians.

Run:  python3 demos/01_kinematics.py
"""

import numpy as np

from otv import forward_kinematics, frames_fk, jacobian, load_robot_model, manipulability
from otv.arm import home_posture
from otv.paths import model_path

model = load_robot_model(model_path("h1"))
print(f"loaded '{model.name}': {model.dof} movable joints, "
      f"{model.action_dim}-dim command vector")
print("command order:", ", ".join(model.action_layout[:7]), "...")

q = home_posture(model)
poses = frames_fk(model, q, ["head", "l_ee", "r_ee", "l_thumb_tip"])
print("\nframe positions at the ready posture:")
for name, pose in poses.items():
    print(f"  {name:12s} {np.round(pose.t, 3)}")

arm = tuple(f"l_{s}" for s in ("shoulder_pitch", "shoulder_roll", "shoulder_yaw",
                               "elbow", "wrist_roll", "wrist_pitch", "wrist_yaw"))
j = jacobian(model, q, "l_ee", arm)
print(f"\nleft-arm body Jacobian is {j.shape}; manipulability {manipulability(j):.4f}")

q_straight = model.zero_q()
j0 = jacobian(model, q_straight, "l_ee", arm)
print(f"with the arm fully extended it collapses to {manipulability(j0):.2e}")

# coupled joints follow their driver: bending the index MCP drags the PIP along
q2 = q.copy()
q2[model.joint_index["l_index_mcp"]] = 1.0
tip = forward_kinematics(model, q2, "l_index_tip")
print(f"\nindex tip after a 1.0 rad MCP command: {np.round(tip.t, 3)} "
      f"(PIP follows through the linkage coupling)")
