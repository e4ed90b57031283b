"""Vector-based hand retargeting: dexterous hand and parallel gripper.

Run:  python3 demos/03_hand_retargeting.py
"""

import numpy as np

from otv import RetargetingConfig, RetargetingProblem, VectorSpec, compute_human_vectors, retarget_step
from otv.kinematics import frames_fk
from otv.model import load_robot_model
from otv.opframe import HandKeypoints
from otv.paths import model_path
from otv.se3 import Pose

h1 = load_robot_model(model_path("h1"))
hand = h1.extract_subchain("l_hand")
spec = VectorSpec.dexterous("l")
print(f"dexterous spec: {len(spec)} vectors "
      f"(wrist->5 fingertips, thumb->index, thumb->middle)")

keypoints = HandKeypoints.from_array(np.array(
    [[0, 0, 0], [0.07, 0.05, -0.02], [0.10, 0.02, -0.03],
     [0.105, 0.0, -0.02], [0.10, -0.02, -0.01], [0.085, -0.04, 0.0]]))
targets = compute_human_vectors(keypoints, Pose.identity(), spec, alpha=1.1)
print("first target vector (wrist->thumb, scaled):", np.round(targets[0], 4))

cfg = RetargetingConfig(alpha=1.1, beta=0.1)
res = retarget_step(RetargetingProblem(hand, spec, targets, np.zeros(6)), cfg)
print(f"solved hand joints in {res.iterations} LM iterations, "
      f"residual {res.residual_norm:.4f}:")
for name, v in zip((j.name for j in hand.joints if j.actuated), res.q):
    print(f"  {name:20s} {v:+.3f}")

# gripper morphology: one pinch vector controls the jaw separation
gr1 = load_robot_model(model_path("gr1"))
jaw = gr1.extract_subchain("l_hand")
gspec = VectorSpec.gripper("l")
q_prev = np.zeros(1)
print("\npinch distance -> gripper joint (strictly monotone):")
for d in (0.0, 0.03, 0.06, 0.09, 0.12):
    kp = HandKeypoints.from_array(np.array(
        [[0, 0, 0], [0.10, d / 2, 0], [0.10, -d / 2, 0],
         [0.11, -0.02, 0], [0.10, -0.03, 0], [0.09, -0.04, 0]]))
    t = compute_human_vectors(kp, Pose.identity(), gspec, alpha=1.0)
    r = retarget_step(RetargetingProblem(jaw, gspec, t, q_prev), RetargetingConfig(alpha=1.0))
    q_prev = r.q
    print(f"  pinch {d:0.2f} m -> jaw {r.q[0]:.4f} m (separation {2 * r.q[0]:.3f} m)")
