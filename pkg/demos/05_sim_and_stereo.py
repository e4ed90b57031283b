"""Kinematic simulation, grasping, and the software stereo renderer.

Run:  python3 demos/05_sim_and_stereo.py   (writes PPM images to /tmp/otv_demo)
"""

import os

import numpy as np

from otv import CameraRig, load_robot_model, load_scene, render_stereo, reset_scene
from otv.arm import home_posture
from otv.paths import model_path, scene_path

model = load_robot_model(model_path("h1"))
spec = load_scene(scene_path("can_sorting"))

world = reset_scene(model, spec, seed=3, q0=home_posture(model))
print("scene objects:")
for o in world.objects:
    kind = "graspable " if o.graspable else ""
    print(f"  {o.id}: {kind}{o.shape} '{o.name}' at {np.round(o.pose.t, 3)}")

# joints track commands under a 3 rad/s rate limit
cmd = model.q_to_command(world.q_measured)
i = list(model.action_layout).index("neck_yaw")
cmd[i] = 0.5
for _ in range(12):
    world.step(cmd, 1 / 60)
print(f"\nneck yaw after 12 ticks chasing 0.5 rad: "
      f"{world.q_measured[model.joint_index['neck_yaw']]:.3f} "
      f"(rate-limited to 0.05 rad/tick)")

print(f"left-hand closure (0=open, 1=closed): {world.closure('left'):.2f}")

rig = CameraRig()  # 128x96 by default; 640x480 also supported
stereo = render_stereo(model, world.q_measured, world.objects, rig)
out = "/tmp/otv_demo"
os.makedirs(out, exist_ok=True)
for tag, img in (("left", stereo.left), ("right", stereo.right)):
    with open(f"{out}/{tag}.ppm", "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (rig.width, rig.height))
        f.write(img.tobytes())
print(f"\nwrote {out}/left.ppm and right.ppm "
      f"({rig.width}x{rig.height}, baseline {rig.baseline} m)")

# disparity falls off inversely with depth, matching the pinhole model
depths = [0.3, 0.5, 0.9]
print("expected disparity at depth:", {d: round(rig.focal_px * rig.baseline / d, 1)
                                       for d in depths}, "px")
