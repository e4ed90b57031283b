"""Desk-scale humanoid teleoperation middleware.

Operators stream head/wrist/hand poses over a binary WebSocket protocol; the
server maps them to joint commands via closed-loop IK and vector-based hand
retargeting at 60 Hz, drives a kinematic simulator, streams stereo frames
back, records episodes, and replays them through an action-chunking runtime
with exponential temporal aggregation.
"""

from .arm import (
    ArmSolveResult,
    CalibrationState,
    EndEffectorTarget,
    FilterState,
    IkConfig,
    calibrate,
    clik_step,
    filter_pose,
    home_posture,
    map_head,
    map_operator_to_targets,
    nullspace_correction,
    solve_arm,
)
from .episode import Episode, EpisodeWriter, load_episode
from .hand import (
    RetargetingConfig,
    RetargetingProblem,
    VectorSpec,
    compute_human_vectors,
    retarget_sequence,
    retarget_step,
)
from .kinematics import forward_kinematics, frames_fk, jacobian, manipulability
from .model import RobotModel, load_robot_model, parse_robot_model
from .opframe import HandKeypoints, OperatorFrame
from .policy import ActionChunk, Aggregator, EndGesture, GestureDetector, ScriptedPickPlace
from .render import CameraRig, StereoImage, render_stereo
from .scene import SceneSpec, load_scene, parse_scene
from .se3 import Pose, Twist, se3_compose, se3_exp, se3_interpolate, se3_inverse, se3_log
from .sim import GraspConfig, SimWorld, reset_scene

__version__ = "0.1.0"
