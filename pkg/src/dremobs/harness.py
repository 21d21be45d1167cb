"""Run scenarios, write and read telemetry CSV, extract plot series.

Telemetry file layout::

    # schema_version: 1
    # config: {...the full scenario as JSON...}
    t,lambda_a,lambda_b,...           (TELEMETRY_COLUMNS, in order)
    0,0.02,0,...

Numbers are written with 17 significant digits, so identical runs give
identical bytes and a reread reproduces every logged double exactly.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, config_from_dict
from .observers import classify_excitation
from .simulation import (
    MODE_CERTAINTY_EQUIVALENCE, MODE_GROUND_TRUTH, TELEMETRY_COLUMNS, KernelSettings,
    initial_state, integrate,
)

SCHEMA_VERSION = 1
EXCITATION_WINDOW = 1.0


class TelemetryError(ValueError):
    """A telemetry file is unreadable or lacks required columns."""


@dataclass
class Telemetry:
    columns: tuple
    data: np.ndarray
    config: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        self._index = {c: k for k, c in enumerate(self.columns)}

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self._index[name]]
        except KeyError:
            raise TelemetryError(f"telemetry has no column {name!r}") from None

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def require(self, names) -> None:
        missing = [n for n in names if n not in self._index]
        if missing:
            raise TelemetryError("telemetry is missing columns: " + ", ".join(missing))

    def scenario(self) -> ScenarioConfig:
        """The configuration that produced this telemetry (defaults if none recorded)."""
        return config_from_dict(self.config)


def write_telemetry(path: str | Path, tel: Telemetry) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = (f"# schema_version: {tel.schema_version}\n"
              f"# config: {json.dumps(tel.config, sort_keys=True)}\n"
              + ",".join(tel.columns))
    np.savetxt(path, tel.data, fmt="%.17g", delimiter=",", header=header, comments="")


def read_telemetry(path: str | Path) -> Telemetry:
    path = Path(path)
    meta = {}
    try:
        with path.open() as fh:
            line = fh.readline()
            n_comment = 0
            while line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
                n_comment += 1
                line = fh.readline()
            columns = tuple(c.strip() for c in line.strip().split(","))
    except OSError as exc:
        raise TelemetryError(f"cannot read {path}: {exc}") from exc
    if not columns or columns == ("",):
        raise TelemetryError(f"{path}: no header row")
    data = np.loadtxt(path, delimiter=",", skiprows=n_comment + 1, ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(columns)))
    if data.shape[1] != len(columns):
        raise TelemetryError(f"{path}: {data.shape[1]} values per row, {len(columns)} columns")
    config = json.loads(meta["config"]) if "config" in meta else {}
    version = int(meta.get("schema_version", SCHEMA_VERSION))
    return Telemetry(columns, data, config, version)


def kernel_inputs(cfg: ScenarioConfig):
    """Translate a config into the arguments of :func:`integrate`."""
    p = cfg.motor_params()
    g = cfg.controller_gains()
    o, r, s, c, m = cfg.observer, cfg.regression, cfg.simulation, cfg.controller, cfg.modulation
    mode = MODE_GROUND_TRUTH if o.mode == "ground-truth" else MODE_CERTAINTY_EQUIVALENCE
    ks = KernelSettings(
        alphas=np.array(r.alphas, dtype=float), a=float(r.a),
        gamma_lambda=float(o.gamma_lambda), gamma_r=float(o.gamma_r),
        gamma_omega=float(o.gamma_omega), gamma_T=float(o.gamma_T), mode=mode,
        Rr_for_control=float(p.Rr_true if c.Rr_for_control is None else c.Rr_for_control),
        flux_floor=float(c.flux_floor),
        modulation=np.array([m.flux_depth, m.flux_freq, m.speed_amp, m.speed_freq,
                             m.injection_amp, m.injection_freq], dtype=float),
        voltage_cutoff=math.inf if c.voltage_cutoff is None else float(c.voltage_cutoff),
    )
    ini = cfg.initial
    k = p.sigma * p.Ls / p.beta
    chi0 = np.array(ini.lambda_hat0) + k * np.array(ini.i0)
    x0 = initial_state(ini.lambda0, ini.i0, ini.omega0, chi0, ini.Rr_hat0, ini.TL_hat0,
                       ini.omega_hat0, r.filter_ic)
    n_steps = int(round(s.duration / s.dt))
    steps = dict(
        n_steps=n_steps,
        log_every=int(s.log_every),
        elec_step=int(round(r.start / s.dt)),
        enable_step=int(round(o.enable_time / s.dt)),
    )
    return x0, p, g, ks, float(s.dt), steps


def warm_up(cfg: ScenarioConfig | None = None) -> None:
    """Trigger compilation of the kernel so that timed runs measure execution only."""
    cfg = cfg or ScenarioConfig()
    x0, p, g, ks, dt, _ = kernel_inputs(cfg)
    integrate(x0, p, g, ks, dt, 2, 1, 0, 1, cfg.ce_gate)


def _convergence_time(t: np.ndarray, err: np.ndarray, threshold: float):
    """First logged time after which |err| stays below ``threshold`` (None if never)."""
    bad = np.flatnonzero(~(np.abs(err) < threshold))
    if bad.size == 0:
        return float(t[0]) if t.size else None
    if bad[-1] == t.size - 1:
        return None
    return float(t[bad[-1] + 1])


def convergence_thresholds(cfg: ScenarioConfig) -> dict:
    """Error levels used for the convergence times of the run summary."""
    return {
        "flux_error_norm": 0.01 * cfg.controller.lambda_norm_ref,
        "Rr_error": 0.01 * cfg.motor.Rr_true,
        "TL_error": max(0.01 * abs(cfg.motor.TL_true), 1e-6),
        "omega_error": 0.1,
    }


def excitation_report(tel: Telemetry, column: str, t_from: float,
                      window: float = EXCITATION_WINDOW) -> dict:
    t = tel.t
    keep = t >= t_from - 1e-12
    label, window_min = (classify_excitation(t[keep], tel[column][keep], window)
                         if keep.sum() >= 2 else ("insufficient", 0.0))
    return {"label": label, "integral": float(tel[column][-1]) if len(tel) else 0.0,
            "window_min": window_min, "window": window}


def summarize(tel: Telemetry, cfg: ScenarioConfig) -> dict:
    t = tel.t
    final = {name: float(tel[name][-1]) for name in convergence_thresholds(cfg)} if len(tel) else {}
    conv = {name: _convergence_time(t, tel[name], thr)
            for name, thr in convergence_thresholds(cfg).items()} if len(tel) else {}
    return {
        "final_errors": final,
        "convergence_thresholds": convergence_thresholds(cfg),
        "convergence_times": conv,
        "excitation": {
            "electrical": excitation_report(tel, "int_Delta_e_sq", cfg.observer.enable_time),
            "mechanical": excitation_report(tel, "int_Delta_m_sq", cfg.observer.enable_time),
        },
        "flux_floor_hits": int(tel["flux_floor_hits"][-1]) if len(tel) else 0,
    }


@dataclass
class RunResult:
    summary: dict
    telemetry: Telemetry
    path: Path | None

    @property
    def ok(self) -> bool:
        return self.summary["status"] == "ok"


def simulate(cfg: ScenarioConfig) -> tuple[Telemetry, dict]:
    """Run the kernel for ``cfg``; return telemetry and run facts (status, timing)."""
    x0, p, g, ks, dt, steps = kernel_inputs(cfg)
    warm_up(cfg)
    start = time.perf_counter()
    log, n_rows, status, _ = integrate(x0, p, g, ks, dt, steps["n_steps"], steps["log_every"],
                                       steps["elec_step"], steps["enable_step"], cfg.ce_gate)
    wall = time.perf_counter() - start
    tel = Telemetry(TELEMETRY_COLUMNS, log[:n_rows].copy(), cfg.to_dict())
    facts = {
        "status": "ok" if status == 0 else "integration-fault",
        "fault_time": None if status == 0 else status * dt,  # first non-finite state
        "wall_time_s": wall,
        "steps": steps["n_steps"],
        "rows": int(n_rows),
    }
    return tel, facts


def run_scenario(cfg: ScenarioConfig, output: str | Path | None = None,
                 write: bool = True) -> RunResult:
    """Execute the full pipeline and (optionally) write the telemetry CSV.

    An integration fault is not raised: the partial log is written and the
    summary's ``status`` reads ``"integration-fault"`` with ``fault_time``.
    """
    tel, facts = simulate(cfg)
    path = None
    if write:
        path = Path(output if output is not None else cfg.simulation.output)
        write_telemetry(path, tel)
    summary = {**facts, **summarize(tel, cfg), "warnings": cfg.warnings(),
               "telemetry": str(path) if path else None}
    return RunResult(summary, tel, path)


# plot-data selectors: name -> columns after t
SELECTORS = {
    "flux_error_norm": ("flux_error_norm",),
    "excitation": ("int_Delta_e_sq", "int_Delta_m_sq"),
    "flux": ("lambda_a", "lambda_b", "lambda_hat_a", "lambda_hat_b"),
    "rotor_resistance": ("Rr_hat", "Rr_error"),
    "load_torque": ("TL_hat", "TL_error"),
    "speed": ("omega", "omega_hat", "omega_error"),
    "determinants": ("Delta_e", "Delta_m"),
    "residuals": ("res_e_1", "res_e_2", "res_e_3", "res_e_4", "res_e_5", "res_e_6",
                  "res_mix", "res_mech", "adj_identity"),
}


def plot_columns(selector: str) -> tuple:
    if selector in SELECTORS:
        return SELECTORS[selector]
    if selector in TELEMETRY_COLUMNS and selector != "t":
        return (selector,)
    raise TelemetryError(f"unknown selector {selector!r}; use one of "
                         f"{sorted(SELECTORS)} or a telemetry column name")


def emit_plot_data(tel: Telemetry, selectors: list[str], outdir: str | Path | None = None,
                   log10: bool = False) -> dict[str, np.ndarray]:
    """Extract ``t`` plus the selected series; ``log10`` stores log10|x| instead.

    Returns ``{selector: array}``.  With ``outdir`` each selector is also
    written as ``<outdir>/<selector>.csv``.
    """
    if not selectors:
        raise TelemetryError("no plot-data selectors given")
    resolved = {s: plot_columns(s) for s in selectors}
    out = {}
    for sel, cols in resolved.items():
        tel.require(cols)
        series = [tel[c] for c in cols]
        names = list(cols)
        if log10:
            with np.errstate(divide="ignore"):
                series = [np.log10(np.abs(s)) for s in series]
            names = [f"log10_abs_{c}" for c in cols]
        table = np.column_stack([tel.t] + series)
        out[sel] = table
        if outdir is not None:
            Path(outdir).mkdir(parents=True, exist_ok=True)
            np.savetxt(Path(outdir) / f"{sel}.csv", table, fmt="%.17g", delimiter=",",
                       header=",".join(["t"] + names), comments="")
    return out
