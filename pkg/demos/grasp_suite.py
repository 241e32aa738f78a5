"""Pick up each test object a few times and tally the outcomes.

Every trial walks the grasp state machine: approach, hold a contact force,
servo the fingertips over the object centroid, close, lift and hold. A
failed trial reports which phase it died in and why.

    python3 demos/grasp_suite.py
"""

from collections import Counter

from softpress.estimator import NoiseConfig
from softpress.harness import (TEST_OBJECTS, EstimatorConfig, Scenario, run_grasp_suite,
                               success_counts)

scenario = Scenario()

reports = run_grasp_suite(scenario, TEST_OBJECTS, trials_per_object=3)
for name, (wins, n) in success_counts(reports).items():
    print(f"{name:<17} {wins}/{n}")
total = sum(r.success for r in reports)
print(f"oracle: {total}/{len(reports)} successful\n")

# A badly biased estimator keeps misjudging contact force, which shows up as
# failures while holding surface contact.
biased = EstimatorConfig("noisy", NoiseConfig(gain_bias=2.0))
reports = run_grasp_suite(scenario, TEST_OBJECTS[:4], trials_per_object=3, estimator=biased)
causes = Counter((r.phase, r.reason) for r in reports if not r.success)
print(f"biased estimator: {sum(r.success for r in reports)}/{len(reports)} successful")
for (phase, reason), n in causes.most_common():
    print(f"  {n} x {reason} during {phase}")
