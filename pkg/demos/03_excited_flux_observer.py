"""Giving the electrical regressor something to work with.

A slow modulation of the flux reference (80 % depth at 20 rad/s) breaks
the symmetry that starves the canonical run.  The determinant is still
tiny in absolute terms, so the electrical gains are raised to match.
The flux error should then follow exp(-gamma int Delta_e^2) exactly,
which this script checks sample by sample.  Below about 1e-6 Wb the
error meets a floor of order 1e-8 set by the filter initial-condition
terms and the step size, and the two columns part ways.
"""
import numpy as np

from dremobs import config_from_dict, preset, run_scenario

cfg = config_from_dict(preset("excited"))
tel = run_scenario(cfg, "excited.csv").telemetry
te = cfg.observer.enable_time
m = tel.t >= te
t, e = tel.t[m], tel["flux_error_norm"][m]
expo = cfg.observer.gamma_lambda * (tel["int_Delta_e_sq"][m] - tel["int_Delta_e_sq"][m][0])
pred = e[0] * np.exp(-expo)

for tk in (2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0):
    k = np.searchsorted(t, tk - 1e-9)
    print(f"t={t[k]:5.2f}  |flux err|={e[k]:.3e}  closed form={pred[k]:.3e}")
print("final |Rr_hat - Rr| = %.2e ohm" % abs(tel["Rr_error"][-1]))
