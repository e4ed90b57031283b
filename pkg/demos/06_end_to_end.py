"""The full loop: a synthetic operator trace through the deterministic
session, then autonomous can sorting, recorded as an episode and verified.

Run:  python3 demos/06_end_to_end.py
"""

import tempfile
from pathlib import Path

import numpy as np

from otv import load_episode
from otv.paths import trace_path
from otv.trace import load_trace, run_trace

doc = load_trace(trace_path("wave.json"))
print(f"trace: {doc['ticks']} ticks, {len(doc['events'])} events "
      f"(teleop wave, then a mid-run handover to the scripted producer)")

with tempfile.TemporaryDirectory() as td:
    session = run_trace(doc, record_root=td)
    stats = session.stats.payload()
    print(f"ran at {stats['tick_ms_mean']:.1f} ms mean per tick; "
          f"IK convergence {stats['ik_convergence_rate']:.2%}")

    episode = load_episode(Path(td) / "golden")
    print(f"recorded {episode.meta.num_steps} steps of "
          f"{episode.meta.action_dim}-dim commands at {episode.meta.rate_hz:g} Hz")

    cmds = episode.commands
    per_tick = np.abs(np.diff(cmds, axis=0)).max()
    print(f"worst per-tick command change: {per_tick:.4f} rad "
          f"(sim clamps motion at {3.0 / 60:.4f} rad/tick)")

    golden = trace_path("wave_golden_steps.bin").read_bytes()
    fresh = (Path(td) / "golden" / "steps.bin").read_bytes()
    print("matches the committed golden byte-for-byte:", fresh == golden)
