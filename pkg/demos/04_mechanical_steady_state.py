"""Where the mechanical determinant settles.

Once the drive is in steady state the flux is a phasor of constant length
turning at the electrical frequency.  Both columns of the mechanical
regressor are filtered copies of it, one lagging the other, so their
determinant is constant.  Compare the simulated value with the
frequency-response prediction at a few load levels (about 30 s per
run).
"""
import numpy as np

from dremobs import config_from_dict, run_scenario
from dremobs.mechanical import steady_state_delta

for TL in (0.0, 0.05, 0.1):
    cfg = config_from_dict({"motor": {"TL_true": TL}, "simulation": {"duration": 10.0}})
    tel = run_scenario(cfg, write=False).telemetry
    tail = tel.t >= 8.0
    w = tel["omega"][tail].mean()
    lam = np.hypot(tel["lambda_a"][tail], tel["lambda_b"][tail]).mean()
    p = cfg.motor
    pred = steady_state_delta(w, lam, p.Rr_true, TL, cfg.regression.a, p.J, p.n_p)
    dm = tel["Delta_m"][tail]
    print(f"TL={TL:4.2f}  Delta_m={dm.mean():.6e}  predicted={pred:.6e}  "
          f"ripple={(dm.max() - dm.min()) / abs(dm.mean()):.1e}")
