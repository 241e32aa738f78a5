"""Scoring a recorded contact sequence.

Records a force-servo run to disk as ground-truth and estimated frame
sequences, then reloads both and scores them frame by frame.

    python3 demos/estimate_quality.py
"""

from pathlib import Path

from softpress.frameio import Manifest
from softpress.harness import Scenario, record_contact_sequence
from softpress.metrics import evaluate_sequence

out = Path("demo_out/sequence")
report = record_contact_sequence(Scenario(), out, target=2.0)
print(f"recorded {report.duration:.2f} s, final force {report.achieved_force:.2f} N")

gt = Manifest.load(out / "gt" / "manifest.json")
est = Manifest.load(out / "est" / "manifest.json")
scores = evaluate_sequence(gt.frames(), est.frames())
print(f"{scores.n_frames} frames")
print(f"temporal accuracy {scores.temporal_accuracy:.3f}")
print(f"contact IoU       {scores.contact_iou:.3f}")
print(f"volumetric IoU    {scores.volumetric_iou:.3f}")
print(f"MAE               {scores.mae:.1f} Pa")
