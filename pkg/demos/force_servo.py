"""Force regulation walkthrough.

The gripper starts a few centimetres above the sensor and lowers itself until
the estimated pressure image integrates to the target force. We run it once
with perfect estimates and once with the corrupted estimator, and show where
each one settles.

    python3 demos/force_servo.py
"""

import numpy as np

from softpress.harness import EstimatorConfig, Scenario, run_force_trials

scenario = Scenario()
print(f"control at {EstimatorConfig().rate} Hz, simulation at {scenario.sensor.rate:g} Hz")
print(f"bang-bang deadband {scenario.force_target.deadband} N, "
      f"step {1e3 * scenario.force_target.step_size:g} mm\n")

print("target   oracle mean (min..max)     noisy mean (min..max)")
for level in (1, 2, 3, 4, 5):
    rows = []
    for kind in ("oracle", "noisy"):
        reports = run_force_trials(scenario, levels=(level,), trials_per_level=10,
                                   estimator=EstimatorConfig(kind))
        f = np.array([r.achieved_force for r in reports])
        rows.append(f"{f.mean():5.2f} N ({f.min():.2f}..{f.max():.2f})")
    print(f"{level:4d} N   {rows[0]:<26} {rows[1]}")

# The noisy estimator over-reads pressure, so the controller stops short and
# the true force it reaches sits below the target. The gap grows with load.
