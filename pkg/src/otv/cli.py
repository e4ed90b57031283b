"""Command-line entry points: serve, replay, bench, check-model, trace."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .config import ServerConfig, load_config
from .errors import ModelError, OtvError


def _serve(args) -> int:
    from .server import run_server

    config = load_config(args.config) if args.config else ServerConfig()
    if args.port is not None:
        config.port = args.port
    if args.robot is not None:
        config.robot_model = args.robot
    if args.latency_ms is not None:
        config.latency.delay_ms = args.latency_ms
    print(f"serving {config.robot_model} on {config.host}:{config.port} "
          f"(scene {config.scene}, {config.rate_hz:g} Hz)")
    run_server(config, record_root=args.record, record_frames=args.frames)
    return 0


def _replay(args) -> int:
    from .episode import load_episode
    from .config import ServerConfig
    from .session import build_session

    episode = load_episode(args.episode)
    config = ServerConfig()
    config.robot_model = episode.meta.robot
    config.rate_hz = episode.meta.rate_hz
    session = build_session(config)
    commands = episode.commands
    if args.autonomous:
        session.start_replay(commands)
        replayed = []
        for _ in range(episode.meta.num_steps):
            session.tick()
            replayed.append(session.command.copy())
        replayed = np.asarray(replayed)
        exact = np.array_equal(replayed.astype("<f4"),
                               episode.records["q_commanded"])
        print(f"replayed {len(replayed)} steps through the aggregator; "
              f"commands bitwise-identical: {exact}")
        if not exact:
            return 1
    else:
        dt = 1.0 / episode.meta.rate_hz
        worst = 0.0
        for row in commands:
            session.world.step(row, dt)
            session.world.update_grasp()
        measured = session.model.q_to_command(session.world.q_measured)
        worst = float(np.abs(measured - commands[-1]).max())
        print(f"drove {len(commands)} recorded commands; final tracking "
              f"error {worst:.2e}")
    return 0


def _bench(args) -> int:
    from .arm import IkConfig, home_posture, solve_arm
    from .hand import RetargetingConfig, RetargetingProblem, VectorSpec, retarget_step
    from .model import load_robot_model
    from .paths import model_path

    model = load_robot_model(model_path(args.robot))
    n = args.iters
    if args.target == "ik":
        q0 = home_posture(model)
        cfg = IkConfig(max_iters=3)
        rng = np.random.default_rng(0)
        from .arm import EndEffectorTarget, arm_chain
        from .kinematics import forward_kinematics

        chain = arm_chain(model, "left")
        targets = []
        for _ in range(32):
            q = q0.copy()
            idx = list(chain.q_indices)
            q[idx] = rng.uniform(model.lower[idx], model.upper[idx])
            pose = forward_kinematics(model, q, chain.ee_frame)
            targets.append(EndEffectorTarget(pose.t, pose.q, "left"))
        t0 = time.perf_counter()
        for i in range(n):
            solve_arm(model, q0, targets[i % len(targets)], cfg)
        per = (time.perf_counter() - t0) / n * 1e3
        print(f"ik: {n} solve_arm calls (3 iters each), {per:.3f} ms/call")
    else:
        chain = model.extract_subchain("l_hand")
        dexterous = "l_thumb_tip" in chain.frames
        spec = VectorSpec.dexterous("l") if dexterous else VectorSpec.gripper("l")
        cfg = RetargetingConfig(alpha=1.1 if dexterous else 1.0)
        rng = np.random.default_rng(0)
        joints = tuple(j.name for j in chain.joints if j.actuated)
        q_prev = np.zeros(len(joints))
        t0 = time.perf_counter()
        for i in range(n):
            targets = rng.uniform(-0.05, 0.05, size=(len(spec), 3))
            res = retarget_step(RetargetingProblem(chain, spec, targets, q_prev), cfg)
            q_prev = res.q
        per = (time.perf_counter() - t0) / n * 1e3
        print(f"retarget: {n} retarget_step calls, {per:.3f} ms/call")
    return 0


def _check_model(args) -> int:
    from .model import load_robot_model

    try:
        model = load_robot_model(args.file)
    except ModelError as e:
        print(f"INVALID: {type(e).__name__}: {e}")
        return 1
    actuated = sum(j.actuated for j in model.joints)
    print(f"model '{model.name}': {len(model.joints)} joints, {model.dof} movable, "
          f"{actuated} actuated, action dim {model.action_dim}, "
          f"{len(model.frames)} frames, {len(model.couplings)} couplings")
    return 0


def _trace(args) -> int:
    import tempfile

    from .paths import trace_path
    from .trace import load_trace, run_trace

    doc = load_trace(trace_path(args.infile))
    golden = Path(args.golden)
    with tempfile.TemporaryDirectory() as td:
        session = run_trace(doc, record_root=td)
        episodes = sorted(Path(td).iterdir())
        if not episodes:
            print("trace recorded no episode (no start_recording event)")
            return 1
        fresh = (episodes[0] / "steps.bin").read_bytes()
    if golden.exists():
        committed = golden.read_bytes()
        if committed == fresh:
            print(f"golden match: {len(fresh)} bytes identical")
            return 0
        print(f"GOLDEN MISMATCH: {len(committed)} committed vs {len(fresh)} fresh bytes")
        return 1
    golden.parent.mkdir(parents=True, exist_ok=True)
    golden.write_bytes(fresh)
    print(f"wrote golden: {golden} ({len(fresh)} bytes)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="otv",
                                     description="desk-scale humanoid teleoperation middleware")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the realtime WebSocket server")
    p.add_argument("--config", default=None, help="JSON config path")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--robot", choices=["h1", "gr1"], default=None)
    p.add_argument("--latency-ms", type=float, default=None)
    p.add_argument("--record", default=None, help="episode output directory")
    p.add_argument("--frames", action="store_true", help="record stereo frames")
    p.set_defaults(func=_serve)

    p = sub.add_parser("replay", help="replay a recorded episode")
    p.add_argument("--episode", required=True)
    p.add_argument("--autonomous", action="store_true",
                   help="feed commands through the chunk aggregator")
    p.set_defaults(func=_replay)

    p = sub.add_parser("bench", help="micro-benchmarks")
    p.add_argument("target", choices=["ik", "retarget"])
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--robot", default="h1")
    p.set_defaults(func=_bench)

    p = sub.add_parser("check-model", help="validate a robot model file")
    p.add_argument("file")
    p.set_defaults(func=_check_model)

    p = sub.add_parser("trace", help="run a synthetic operator trace against a golden")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--golden", required=True)
    p.set_defaults(func=_trace)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OtvError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
