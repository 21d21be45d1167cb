"""Acceptance criteria evaluated on telemetry.

Each criterion turns one or more logged runs into ``CriterionResult``
records (id, measured value, bound, verdict).  The runs are:

canonical
    the default scenario, ground-truth mode (criteria 1 to 8)
unexcited
    inverter switched off before the observers start (criterion 8)
coarse / fine
    the same short scenario at dt and dt/2 (criterion 9)
ce
    the canonical scenario in certainty-equivalence mode (criterion 10)

:func:`run_suite` produces all of them from a base configuration.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, config_from_dict, _merge
from .harness import Telemetry, excitation_report, run_scenario
from .mechanical import steady_state_delta, unscaled_steady_state_delta
from .observers import INSUFFICIENT

PASS, FAIL, NOT_EVALUATED = "pass", "fail", "not-evaluated"

RES_E = tuple(f"res_e_{k}" for k in range(1, 7))
REQUIRED_COLUMNS = (
    "t", "lambda_a", "lambda_b", "omega", "flux_error_norm", "Rr_error", "TL_error",
    "omega_error", "Delta_m", "int_Delta_e_sq", "int_Delta_m_sq", *RES_E, "res_mix",
    "res_mech", "adj_identity", "mech_active",
)
FLUX_FLOOR_WB = 1e-6
RR_FLOOR_REL = 1e-5


@dataclass
class CriterionResult:
    id: str
    title: str
    measured: float | None
    bound: float | str
    verdict: str
    detail: str = ""
    primary: bool = True

    def line(self) -> str:
        m = "n/a" if self.measured is None else f"{self.measured:.4g}"
        b = self.bound if isinstance(self.bound, str) else f"{self.bound:.4g}"
        return f"[{self.verdict.upper():>13}] {self.id:<22} measured={m:<11} bound={b:<14} {self.title}"


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def _upper(cid, title, value, bound, detail="", primary=True):
    ok = value is not None and np.isfinite(value) and value < bound
    return CriterionResult(cid, title, None if value is None else float(value), bound,
                           _verdict(ok), detail, primary)


def _rows_from(tel: Telemetry, t0: float) -> np.ndarray:
    return tel.t >= t0 - 1e-9


def _window_max(tel: Telemetry, cols, t0: float):
    m = _rows_from(tel, t0)
    if not m.any():
        return None
    return float(max(np.max(tel[c][m]) for c in cols))


def closed_form_deviation(t, err, integral, gamma, t_enable, floor):
    """Largest relative gap between |err| and exp(-gamma int Delta^2)|err(t_enable)|.

    Only samples after ``t_enable`` with ``|err| > floor`` enter.  Returns
    ``(deviation, decades_observed, gamma_times_integral)``.
    """
    after = t >= t_enable - 1e-9
    if not after.any():
        return None, 0.0, 0.0
    k0 = np.flatnonzero(after)[0]
    e = np.abs(err[after])
    expo = gamma * (integral[after] - integral[k0])
    pred = e[0] * np.exp(-expo)
    use = e > floor
    if not use.any() or e[0] == 0.0:
        return 0.0, 0.0, float(expo[-1])
    dev = np.abs(e[use] / pred[use] - 1.0)
    decades = float(np.log10(e[0] / e[use].min()))
    return float(dev.max()), decades, float(expo[-1])


def final_decade_fit(t, err, t_from, clearance=1e3, min_points=3):
    """Log-linear fit over the last decade of decay before the numerical floor.

    The floor is the median |err| over the final fifth of the record; the
    fitted decade ends ``clearance`` times above it.  Returns
    ``(r2, rate, n_points, note)``; ``r2`` is None when no fit is possible.
    """
    m = t >= t_from - 1e-9
    tt, e = t[m], np.abs(err[m])
    if tt.size < min_points:
        return None, None, int(tt.size), "too few samples"
    floor = float(np.median(e[-max(1, tt.size // 5):]))
    top = clearance * max(floor, np.finfo(float).tiny)
    above = np.flatnonzero(e >= 10.0 * top)
    if above.size == 0:
        return 1.0, None, 0, "error never rose a decade above the floor; nothing to fit"
    j = above[-1]
    below = np.flatnonzero((np.arange(e.size) > j) & (e < top))
    k = below[0] if below.size else e.size
    sel = slice(j, k)
    x, y = tt[sel], np.log(e[sel])
    if x.size < min_points:
        return None, None, int(x.size), f"only {x.size} samples in the final decade"
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return r2, float(-slope), int(x.size), f"fit over t in [{x[0]:.4g}, {x[-1]:.4g}] s"


def criterion_1(tel: Telemetry, runtime_s: float | None, cfg: ScenarioConfig):
    v = _window_max(tel, RES_E, 1.0)
    out = [_upper("1", "per-alpha LRE residual after t = 1 s", v, 1e-3,
                  "max over the six chains")]
    canonical_grid = (abs(cfg.simulation.duration - 10.0) < 1e-12
                      and abs(cfg.simulation.dt - 2e-5) < 1e-18)
    if runtime_s is None or not canonical_grid:
        out.append(CriterionResult("1-runtime", "wall time of a 10 s run at dt = 2e-5",
                                   runtime_s, 60.0, NOT_EVALUATED,
                                   "needs the timing of a 10 s, dt = 2e-5 run"))
    else:
        out.append(_upper("1-runtime", "wall time of a 10 s run at dt = 2e-5", runtime_s, 60.0,
                          "seconds, compiled kernel"))
    return out


def criterion_2(tel: Telemetry):
    m = tel.t > 1.0
    mix = float(np.max(tel["res_mix"][m])) if m.any() else None
    return [
        _upper("2", "mixed regression residual after t = 1 s", mix, 1e-3),
        _upper("2-adjugate", "adj(Phi) Phi = det(Phi) I, relative, all rows",
               float(np.max(tel["adj_identity"])), 1e-9),
    ]


def criterion_3(tel: Telemetry, cfg: ScenarioConfig):
    dev, decades, expo = closed_form_deviation(
        tel.t, tel["flux_error_norm"], tel["int_Delta_e_sq"], cfg.observer.gamma_lambda,
        cfg.observer.enable_time, FLUX_FLOOR_WB)
    detail = f"decades of decay observed {decades:.3g}; gamma int Delta_e^2 = {expo:.3g}"
    res = _upper("3", "flux error vs exp(-gamma_lambda int Delta_e^2) closed form", dev, 0.05, detail)
    if decades < 1.0:
        # the comparison is meant over a decade of decay; a frozen error matches vacuously
        res.verdict = FAIL
        res.detail += "; no decade of decay above 1e-6 Wb, so the closed form is not exercised"
    return [res]


def criterion_4(tel: Telemetry, cfg: ScenarioConfig):
    Rr = cfg.motor.Rr_true
    final = abs(tel["Rr_error"][-1]) / Rr
    dev, decades, expo = closed_form_deviation(
        tel.t, tel["Rr_error"], tel["int_Delta_e_sq"], cfg.observer.gamma_r,
        cfg.observer.enable_time, RR_FLOOR_REL * Rr)
    return [
        _upper("4", "final |Rr_hat - Rr| / Rr", final, 0.01,
               f"Rr_hat(end) = {tel['Rr_error'][-1] + Rr:.6g} ohm"),
        _upper("4-closed-form", "Rr error vs exp(-gamma_r int Delta_e^2) closed form", dev, 0.05,
               f"decades of decay observed {decades:.3g}; gamma int Delta_e^2 = {expo:.3g}"
               + ("; error did not move, agreement is trivial" if decades < 1.0 else "")),
    ]


def criterion_5(tel: Telemetry, cfg: ScenarioConfig):
    t0 = cfg.observer.enable_time + 5.0 / cfg.regression.a
    v = _window_max(tel, ("res_mech",), t0)
    return [_upper("5", "mechanical LRE residual after the chain transient", v, 1e-3,
                   f"t >= {t0:.3g} s, {cfg.observer.mode} mode")]


def criterion_6(tel: Telemetry, cfg: ScenarioConfig):
    TL = cfg.motor.TL_true
    tl = abs(tel["TL_error"][-1])
    out = [
        _upper("6-load", "final |TL_hat - TL| / TL", tl / abs(TL) if TL else tl, 0.01),
        _upper("6-speed", "final |omega_hat - omega| (rad/s)", abs(tel["omega_error"][-1]), 0.1),
    ]
    fits = {}
    notes = []
    for name in ("TL_error", "omega_error"):
        r2, rate, n, note = final_decade_fit(tel.t, tel[name], cfg.observer.enable_time)
        fits[name] = r2
        rate_txt = "" if rate is None else f", rate {rate:.4g}/s"
        notes.append(f"{name}: R2={r2 if r2 is None else round(r2, 6)}, {n} pts{rate_txt}; {note}")
    worst = None if any(v is None for v in fits.values()) else min(fits.values())
    ok = worst is not None and worst > 0.99
    out.append(CriterionResult("6-tail", "log-linear fit of the final decade, R^2",
                               worst, "> 0.99", _verdict(ok), " | ".join(notes)))
    return out


def criterion_7(tel: Telemetry, cfg: ScenarioConfig, window: float = 2.0):
    t_end = tel.t[-1]
    m = tel.t >= t_end - window - 1e-9
    dm = tel["Delta_m"][m]
    mean = float(np.mean(dm))
    ripple = float((dm.max() - dm.min()) / abs(mean)) if mean else math.inf
    w_star = float(np.mean(tel["omega"][m]))
    lam_star = float(np.mean(np.hypot(tel["lambda_a"][m], tel["lambda_b"][m])))
    p = cfg.motor
    pred = steady_state_delta(w_star, lam_star, p.Rr_true, p.TL_true, cfg.regression.a, p.J, p.n_p)
    unscaled = unscaled_steady_state_delta(w_star, lam_star, p.Rr_true, p.TL_true,
                                           cfg.regression.a, p.J)
    rel = abs(mean - pred) / abs(pred)
    return [
        _upper("7-ripple", "Delta_m steady-state ripple (max-min)/|mean|", ripple, 0.01,
               f"last {window:g} s, mean Delta_m = {mean:.6g}"),
        _upper("7-prediction", "Delta_m vs frequency-response prediction", rel, 0.02,
               f"predicted {pred:.6g} at omega*={w_star:.5g}, |lam*|={lam_star:.5g}; "
               f"unscaled -(|lam*|/J) sin(psi*) = {unscaled:.6g} (reported only)"),
    ]


def criterion_8(tel: Telemetry, cfg: ScenarioConfig, unexcited: Telemetry | None):
    te = cfg.observer.enable_time
    out = []
    for cid, col in (("8-electrical", "int_Delta_e_sq"), ("8-mechanical", "int_Delta_m_sq")):
        rep = excitation_report(tel, col, te)
        out.append(CriterionResult(cid, f"{col} keeps growing on the canonical run", rep["integral"],
                                   f"label != {INSUFFICIENT}", _verdict(rep["label"] != INSUFFICIENT),
                                   f"monitor label: {rep['label']}"))
    if unexcited is None:
        out.append(CriterionResult("8-unexcited-freeze", "flux error frozen without excitation",
                                   None, 1e-3, NOT_EVALUATED, "no unexcited run supplied"))
        out.append(CriterionResult("8-unexcited-monitor", "monitor reports insufficient",
                                   None, INSUFFICIENT, NOT_EVALUATED, "no unexcited run supplied"))
        return out
    ucfg = unexcited.scenario()
    ute = ucfg.observer.enable_time
    m = _rows_from(unexcited, ute)
    e = unexcited["flux_error_norm"][m]
    drift = float(np.max(np.abs(e / e[0] - 1.0))) if m.any() and e[0] > 0 else None
    out.append(_upper("8-unexcited-freeze", "flux error frozen without excitation (relative drift)",
                      drift, 1e-3, f"gamma_lambda = {ucfg.observer.gamma_lambda:.3g}"))
    rep = excitation_report(unexcited, "int_Delta_e_sq", ute)
    out.append(CriterionResult("8-unexcited-monitor", "monitor reports insufficient",
                               rep["integral"], INSUFFICIENT,
                               _verdict(rep["label"] == INSUFFICIENT), f"label: {rep['label']}"))
    return out


def _aligned(coarse: Telemetry, fine: Telemetry):
    tc = np.round(coarse.t, 9)
    tf = np.round(fine.t, 9)
    common, ic, jf = np.intersect1d(tc, tf, return_indices=True)
    return common, ic, jf


def criterion_9(coarse: Telemetry | None, fine: Telemetry | None, identical: bool | None):
    out = []
    if coarse is None or fine is None:
        out.append(CriterionResult("9-dt", "dt-halving change of residuals / bound", None, 0.125,
                                   NOT_EVALUATED, "needs runs at dt and dt/2"))
    else:
        cfg = coarse.scenario()
        t, ic, jf = _aligned(coarse, fine)
        te = cfg.observer.enable_time + 5.0 / cfg.regression.a
        checks = [(RES_E, 1.0, 1e-3), (("res_mix",), 1.0 + 1e-9, 1e-3),
                  (("res_mech",), te, 1e-3), (("adj_identity",), 0.0, 1e-9)]
        worst, which = 0.0, ""
        for cols, t0, bound in checks:
            m = t >= t0 - 1e-9
            for c in cols:
                if not m.any():
                    continue
                change = np.max(np.abs(coarse[c][ic][m] - fine[c][jf][m])) / bound
                if change > worst:
                    worst, which = float(change), c
        out.append(_upper("9-dt", "dt-halving change of residuals / bound", worst, 0.125,
                          f"{t.size} common samples; largest for {which or 'none'}"))
    if identical is None:
        out.append(CriterionResult("9-determinism", "bit-identical rerun", None, "identical",
                                   NOT_EVALUATED, "no rerun supplied"))
    else:
        out.append(CriterionResult("9-determinism", "bit-identical rerun", float(identical),
                                   "identical", _verdict(identical)))
    return out


def criterion_10(ce: Telemetry | None):
    if ce is None:
        return [CriterionResult(cid, title, None, b, NOT_EVALUATED, "no certainty-equivalence run")
                for cid, title, b in (("10-load", "CE mode final |TL error| / TL", 0.05),
                                      ("10-speed", "CE mode final |omega error|", 0.5))]
    cfg = ce.scenario()
    active = np.flatnonzero(ce["mech_active"] > 0)
    gate = (f"mechanical chain released at t = {ce.t[active[0]]:.4g} s" if active.size
            else "gate never opened: gamma_lambda int Delta_e^2 stayed below "
                 f"{cfg.observer.ce_gate_decades:g} decades")
    TL = cfg.motor.TL_true
    tl = abs(ce["TL_error"][-1])
    return [
        _upper("10-load", "CE mode final |TL error| / TL", tl / abs(TL) if TL else tl, 0.05, gate),
        _upper("10-speed", "CE mode final |omega error| (rad/s)", abs(ce["omega_error"][-1]), 0.5,
               gate),
    ]


def supplementary_flux(tel: Telemetry, cfg: ScenarioConfig):
    ref = cfg.controller.lambda_norm_ref
    return [_upper("S-flux-final", "final flux error / |lambda|ref (not a numbered criterion)",
                   abs(tel["flux_error_norm"][-1]) / ref, 0.01, primary=False)]


def check_acceptance(canonical: Telemetry, *, runtime_s: float | None = None,
                     unexcited: Telemetry | None = None, coarse: Telemetry | None = None,
                     fine: Telemetry | None = None, identical_rerun: bool | None = None,
                     ce: Telemetry | None = None, criteria=None) -> dict:
    """Evaluate the criteria and return a JSON-ready report.

    ``criteria`` optionally restricts evaluation to a set of numbers 1-10.
    Missing telemetry columns raise :class:`TelemetryError`.
    """
    canonical.require(REQUIRED_COLUMNS)
    for extra in (unexcited, coarse, fine, ce):
        if extra is not None:
            extra.require(REQUIRED_COLUMNS)
    cfg = canonical.scenario()
    wanted = set(range(1, 11)) if criteria is None else {int(c) for c in criteria}
    evaluators = {
        1: lambda: criterion_1(canonical, runtime_s, cfg),
        2: lambda: criterion_2(canonical),
        3: lambda: criterion_3(canonical, cfg),
        4: lambda: criterion_4(canonical, cfg),
        5: lambda: criterion_5(canonical, cfg),
        6: lambda: criterion_6(canonical, cfg),
        7: lambda: criterion_7(canonical, cfg),
        8: lambda: criterion_8(canonical, cfg, unexcited),
        9: lambda: criterion_9(coarse, fine, identical_rerun),
        10: lambda: criterion_10(ce),
    }
    results = []
    for k in sorted(wanted):
        results += evaluators[k]()
    if criteria is None:
        results += supplementary_flux(canonical, cfg)
    primary = [r for r in results if r.primary]
    return {
        "schema_version": 1,
        "passed": all(r.verdict == PASS for r in primary),
        "failed": [r.id for r in primary if r.verdict == FAIL],
        "not_evaluated": [r.id for r in primary if r.verdict == NOT_EVALUATED],
        "results": [asdict(r) for r in results],
    }


def report_lines(report: dict) -> list[str]:
    return [CriterionResult(**r).line() for r in report["results"]]


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# scenario variants layered on top of the base configuration
SHORT_DURATION = 4.0


def suite_configs(base: dict | None = None) -> dict[str, ScenarioConfig]:
    """The runs :func:`run_suite` performs, keyed by role."""
    base = base or {}
    b = config_from_dict(base)
    short = {"simulation": {"duration": SHORT_DURATION}}
    fine = {"simulation": {"duration": SHORT_DURATION, "dt": b.simulation.dt / 2,
                           "log_every": 2 * b.simulation.log_every}}
    unexcited = {"controller": {"voltage_cutoff": 1.0},
                 "observer": {"gamma_lambda": 1e18, "gamma_r": 1e18},
                 "simulation": {"duration": SHORT_DURATION}}
    ce = {"observer": {"mode": "certainty-equivalence"}}
    return {
        "canonical": b,
        "coarse": config_from_dict(_merge(base, short)),
        "fine": config_from_dict(_merge(base, fine)),
        "unexcited": config_from_dict(_merge(base, unexcited)),
        "ce": config_from_dict(_merge(base, ce)),
    }


def run_suite(workdir: str | Path, base: dict | None = None, log=print) -> dict:
    """Run every scenario the criteria need, write their telemetry, return the report."""
    workdir = Path(workdir)
    cfgs = suite_configs(base)
    tels, runtime = {}, None
    for role, cfg in cfgs.items():
        res = run_scenario(cfg, workdir / f"{role}.csv")
        log(f"{role}: {res.summary['status']} in {res.summary['wall_time_s']:.1f} s")
        tels[role] = res.telemetry
        if role == "canonical":
            runtime = res.summary["wall_time_s"]
    rerun = run_scenario(cfgs["coarse"], workdir / "coarse_rerun.csv")
    log(f"coarse rerun: {rerun.summary['status']}")
    identical = _digest(workdir / "coarse.csv") == _digest(workdir / "coarse_rerun.csv")
    return check_acceptance(tels["canonical"], runtime_s=runtime, unexcited=tels["unexcited"],
                            coarse=tels["coarse"], fine=tels["fine"], identical_rerun=identical,
                            ce=tels["ce"])


__all__ = [
    "CriterionResult", "check_acceptance", "report_lines", "run_suite", "suite_configs",
    "closed_form_deviation", "final_decade_fit",
]
