"""Action chunks and exponential temporal aggregation.

Run:  python3 demos/04_action_chunking.py
"""

import math

import numpy as np

from otv import ActionChunk, Aggregator

# a 'policy' emitting one 60-step chunk per tick; overlapping chunks disagree
# slightly, and the aggregator blends them with weights exp(-m * i), the
# oldest contributor carrying the largest weight
k, n, m = 60, 2, 0.01
agg = Aggregator(action_dim=n, chunk_size=k, m=m)
rng = np.random.default_rng(0)


def predict(start):
    ticks = np.arange(start, start + k)
    clean = np.stack([np.sin(ticks / 30.0), np.cos(ticks / 45.0)], axis=1)
    return ActionChunk(start, clean + rng.normal(scale=0.03, size=(k, n)))


for t in range(100):
    agg.push(predict(t))
blended = agg.aggregate(99)
latest = agg.chunks[-1].actions[0]
true = np.array([math.sin(99 / 30.0), math.cos(99 / 45.0)])
print(f"tick 99: newest prediction {np.round(latest, 3)}")
print(f"         aggregated        {np.round(blended, 3)}")
print(f"         noise-free value  {np.round(true, 3)}")
print(f"aggregation error {np.linalg.norm(blended - true):.4f} vs "
      f"single-chunk error {np.linalg.norm(latest - true):.4f}")

print("\nweights for 8 overlapping chunks, oldest first:")
ws = [math.exp(-m * i) for i in range(8)]
total = sum(ws)
print(" ", [round(w / total, 4) for w in ws])

print("\nlarger m leans harder on old (stable) predictions; "
      "m=0 averages uniformly:")
for m_demo in (0.0, 0.005, 0.01, 0.05):
    ws = [math.exp(-m_demo * i) for i in range(8)]
    print(f"  m={m_demo:<6} oldest/newest weight ratio {ws[0] / ws[-1]:.3f}")
