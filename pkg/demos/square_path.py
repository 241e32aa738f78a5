"""Tracing an 8 cm square with one fingertip.

Open loop sends the nominal displacements and lets drift accumulate. Closed
loop watches the centre of pressure in the camera image and servos it along
waypoints. The plot data lands in ``demo_out/path_plot.csv``.

    python3 demos/square_path.py
"""

from pathlib import Path

import numpy as np

from softpress.harness import (Scenario, path_plot_csv, path_start, run_square_path,
                               square_corners, trial_seed)

scenario = Scenario()
out = Path("demo_out")
out.mkdir(exist_ok=True)

traces, rms = {}, {"open": [], "closed": []}
for i in range(5):
    seed = trial_seed(scenario.seed, "path", i)
    for mode in ("open", "closed"):
        log = []
        r = run_square_path(scenario, mode, seed=seed, trial=i, path_log=log)
        rms[mode].append(r.tracking_rms_m)
        if i == 0:
            traces[mode] = log
        if mode == "closed":
            print(f"seed {i}: open {1e3 * rms['open'][-1]:.2f} mm, "
                  f"closed {1e3 * r.tracking_rms_m:.2f} mm, last corner {r.final_error_px:.2f} px")

ratio = np.mean(rms["closed"]) / np.mean(rms["open"])
print(f"\nclosed-loop error is {100 * ratio:.0f}% of open-loop error")

corners = square_corners(path_start(scenario), scenario.path_side)
(out / "path_plot.csv").write_text(path_plot_csv(corners, traces))
print(f"wrote {out / 'path_plot.csv'}")
