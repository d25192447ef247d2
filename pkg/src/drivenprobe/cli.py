"""Command-line runner for the thermometry experiments.

    drivenprobe <subcommand> --config <file|preset> [--out DIR] [--threads N]
                [--allow-unstable] [--order {2,4,exact}]

Presets are the YAML files shipped in ``drivenprobe/configs``, one per
subcommand and named after it.  Every run writes a CSV
(with the configuration and ``git describe`` embedded as ``#`` comments) and
an SVG plot into the output directory.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import os
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .quadrature import QuadratureError

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_NUMERICAL = 0, 2, 3, 4
KINDS = ("sensitivity", "bec", "heat-scan", "stability-chart", "oracle-check")
THREADS_ENV = "DRIVENPROBE_THREADS"


class ConfigError(ValueError):
    pass


class StabilityRefusal(RuntimeError):
    pass


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration

DEFAULTS = {
    "order": 2,
    "harmonics": None,
    "allow_unstable": False,
    "overrides": {"fidelity": "corrected"},
    "output": {"stem": None},
}
_OHMIC = {"type": "ohmic", "gamma": 0.01, "omega_c": 100.0}
KIND_DEFAULTS = {
    "sensitivity": {"model": _OHMIC, "drive": {"omega0": 1.0, "upsilon": 0.1, "omega_d": 0.9},
                    "temperature": {"min": 1e-3, "max": 1.0, "points": 30},
                    "time_policy": {"samples": 10}, "fit_range": [1e-3, 1e-2]},
    "bec": {"experiment": {}, "order": "exact",
            "temperature_kelvin": {"min": 0.2e-9, "max": 2e-9, "points": 25},
            "overrides": {"mu_exponent": "thomas-fermi", "coupling_exponent_sign": -1}},
    "heat-scan": {"model": _OHMIC, "drive": {"omega0": 1.0, "upsilon": 0.1},
                  "omega_d": {"min": 0.3, "max": 2.5, "points": 221}, "temperature": 0.025},
    "stability-chart": {"drive": {"omega0": 1.0}, "gammas": [0.0, 0.1],
                        "omega_d": {"min": 0.4, "max": 2.6, "points": 400},
                        "upsilon": {"min": 0.0, "max": 1.0, "points": 400}},
    "oracle-check": {"model": _OHMIC, "drive": {"omega0": 1.0, "upsilon": 0.0}, "oracle": {}},
}


def preset_names():
    return sorted(p.name[:-5] for p in resources.files("drivenprobe.configs").iterdir()
                  if p.name.endswith(".yaml"))


def load_config(ref: str) -> dict:
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        name = ref[:-5] if ref.endswith(".yaml") else ref
        if name not in preset_names():
            raise ConfigError(f"no config file or preset named {ref!r} (presets: {', '.join(preset_names())})")
        text = resources.files("drivenprobe.configs").joinpath(name + ".yaml").read_text()
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return cfg


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _positive(value, name):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not v > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return v


def _order(value):
    if value in (None, "exact"):
        return None
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"order must be an integer or 'exact', got {value!r}") from None
    if n < 1:
        raise ConfigError("order must be >= 1")
    return n


def _grid(block, name, log=True):
    if isinstance(block, list):
        vals = np.array([float(v) for v in block])
    else:
        try:
            lo, hi, n = float(block["min"]), float(block["max"]), int(block["points"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{name} needs min, max and points") from None
        if n < 1 or not hi >= lo:
            raise ConfigError(f"{name}: need points >= 1 and max >= min")
        if log:
            if lo <= 0:
                raise ConfigError(f"{name}: log grid needs min > 0")
            vals = np.geomspace(lo, hi, n)
        else:
            vals = np.linspace(lo, hi, n)
    if vals.size == 0:
        raise ConfigError(f"{name} grid is empty")
    return vals


def build_model(block):
    from .spectral import OhmicAlgebraic, SuperOhmicHardCutoff

    kind = block.get("type", "ohmic")
    if kind == "ohmic":
        return OhmicAlgebraic(float(block["gamma"]), _positive(block["omega_c"], "model.omega_c"))
    if kind == "super-ohmic":
        return SuperOhmicHardCutoff(float(block["gamma0"]), _positive(block["omega_b"], "model.omega_b"))
    raise ConfigError(f"unknown model type {kind!r}")


def resolve(cfg: dict, args) -> dict:
    """Fill defaults, apply command-line overrides, validate."""
    kind = cfg.get("kind")
    if kind is None:
        cfg = dict(cfg, kind=args.subcommand)
    elif kind != args.subcommand:
        raise ConfigError(f"config is for {kind!r}, not {args.subcommand!r}")
    cfg = _merge(_merge(DEFAULTS, KIND_DEFAULTS[args.subcommand]), cfg)
    if args.order is not None:
        cfg["order"] = args.order
    if args.allow_unstable:
        cfg["allow_unstable"] = True
    if cfg["output"].get("stem") is None:
        cfg["output"]["stem"] = cfg["kind"]
    cfg["order"] = "exact" if _order(cfg["order"]) is None else _order(cfg["order"])
    if "model" in cfg:
        try:
            build_model(cfg["model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model block: {exc}") from exc
    from .metrology import FIDELITY_VARIANTS

    if cfg["overrides"]["fidelity"] not in FIDELITY_VARIANTS:
        raise ConfigError(f"overrides.fidelity must be one of {FIDELITY_VARIANTS}")
    return cfg


# ---------------------------------------------------------------------------
# output

def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True, text=True,
                             timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return format(float(v), ".17g")


def write_csv(path: Path, cfg: dict, header, rows, footer=None):
    buf = io.StringIO()
    buf.write(f"# drivenprobe {__version__}\r\n# git: {git_describe()}\r\n# config:\r\n")
    for line in yaml.safe_dump(cfg, sort_keys=True).splitlines():
        buf.write(f"#   {line}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    for line in footer or []:
        buf.write(f"# {line}\r\n")
    path.write_text(buf.getvalue(), newline="")
    return path


def read_csv(path):
    """Data columns of a CSV written by :func:`write_csv` as ``{name: array}`` plus footer lines."""
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    footer, seen = [], False
    for ln in lines:
        seen = seen or not ln.startswith("#")
        if seen and ln.startswith("# "):
            footer.append(ln[2:])
    rows = list(csv.reader(body))
    cols = {}
    for j, name in enumerate(rows[0]):
        vals = [r[j] for r in rows[1:]]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return cols, footer


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "drivenprobe"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    import matplotlib.pyplot as plt

    plt.close(fig)


def _map(func, tasks, threads):
    if threads <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, tasks))


# ---------------------------------------------------------------------------
# stability gate

def gate(model, drive, allow_unstable, label=""):
    """Mathieu check with the Ohmic-limit damping; returns the margin."""
    from .mathieu import MathieuPoint, classify, stability_margin

    if not drive.b:
        return -np.inf
    gamma = getattr(model, "gamma", None)
    if gamma is None:
        gamma = float(model.j(drive.omega0)) / (2.0 * drive.omega0)
    p = MathieuPoint(drive.omega0, gamma, drive.upsilon, drive.omega_d)
    margin = stability_margin(p)
    if classify(p) != "stable" and not allow_unstable:
        raise StabilityRefusal(f"{label}drive (upsilon={drive.upsilon}, omega_d={drive.omega_d}, "
                               f"gamma={gamma}) is not stable: margin Im(nu) - gamma~/2 = {margin:.3e}; "
                               "use --allow-unstable to override")
    return margin


# ---------------------------------------------------------------------------
# experiments

def _sensitivity_point(task):
    from .limitcycle import covariance_coefficients
    from .metrology import cycle_qfi, instantaneous_qfi, qfi_temperature

    model, drive, T, order, K, m, variant = task
    state = covariance_coefficients(model, drive, T, order=order, K=K)
    if variant != "corrected":
        def at(t):
            def source(temp):
                return covariance_coefficients(model, drive, temp, order=order, K=K,
                                               derivative=False).covariance(t)
            return qfi_temperature(source, T, variant=variant)
        vals = [at(t) for t in np.arange(m) * drive.period / m]
        return min(vals), max(vals), float(np.mean(vals)), float(np.mean(vals))
    if not drive.b:
        q = instantaneous_qfi(state, 0.0)
        return q, q, q, q
    lo, hi, mean = cycle_qfi(state, "sampled", m=m)
    return lo, hi, mean, cycle_qfi(state, "averaged")


def run_sensitivity(cfg, out_dir, threads):
    from .limitcycle import DriveSpec
    from .metrology import SensitivityCurve, fit_scaling_exponent, gibbs_qfi, snr_bound

    model = build_model(cfg["model"])
    d = cfg["drive"]
    omega0 = _positive(d["omega0"], "drive.omega0")
    wds = d["omega_d"] if isinstance(d["omega_d"], list) else [d["omega_d"]]
    Ts = _grid(cfg["temperature"], "temperature")
    order = _order(cfg["order"])
    m = int(cfg["time_policy"].get("samples", 10))
    fit = cfg["fit_range"]
    drives = []
    for wd in wds:
        drive = DriveSpec(omega0) if wd is None or float(d["upsilon"]) == 0 else \
            DriveSpec(omega0, float(d["upsilon"]), _positive(wd, "drive.omega_d"))
        gate(model, drive, cfg["allow_unstable"])
        drives.append(drive)
    tasks = [(model, dr, float(T), order, cfg["harmonics"], m, cfg["overrides"]["fidelity"])
             for dr in drives for T in Ts]
    results = _map(_sensitivity_point, tasks, threads)
    rows, footer = [], []
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for i, dr in enumerate(drives):
        label = "undriven" if not dr.b else f"omega_d={dr.omega_d:g}"
        res = np.array(results[i * Ts.size:(i + 1) * Ts.size])
        snr = snr_bound(res[:, 3], Ts)
        for T, r, s in zip(Ts, res, snr):
            rows.append([label, T, *r, s, gibbs_qfi(omega0, T)])
        for col, name in ((3, "qfi_cycle_avg"), (2, "qfi_mean")):
            try:
                slope, err = fit_scaling_exponent(SensitivityCurve(Ts, res[:, col]), fit)
                footer.append(f"slope {label} {name} T in [{fit[0]:g}, {fit[1]:g}]: {slope:.6f} +- {err:.2g}")
            except ValueError as exc:
                footer.append(f"slope {label} {name}: not fitted ({exc})")
        ax.loglog(Ts, np.sqrt(res[:, 3]) * Ts, label=label)
        if dr.b:
            ax.fill_between(Ts, np.sqrt(res[:, 0]) * Ts, np.sqrt(res[:, 1]) * Ts, alpha=0.25)
    ax.loglog(Ts, Ts * np.sqrt([gibbs_qfi(omega0, T) for T in Ts]), "r:", label="Gibbs")
    ax.set_xlabel("T")
    ax.set_ylabel("T / dT (N = 1)")
    ax.legend()
    stem = cfg["output"]["stem"]
    header = ["curve", "T", "qfi_min", "qfi_max", "qfi_mean", "qfi_cycle_avg", "snr_bound", "gibbs_reference"]
    csv_path = write_csv(out_dir / f"{stem}.csv", cfg, header, rows, footer)
    _save(fig, out_dir / f"{stem}.svg")
    return csv_path, footer


def _bec_point(task):
    from .limitcycle import DriveSpec, covariance_coefficients
    from .metrology import responsiveness_x2

    model, drive, T, order = task
    sd = covariance_coefficients(model, drive, T, order=order)
    s0 = covariance_coefficients(model, DriveSpec(drive.omega0), T)
    return responsiveness_x2(sd), responsiveness_x2(s0)


def bec_experiment(cfg):
    from .becmodel import BecExperiment

    block = dict(cfg.get("experiment", {}))
    ov = cfg["overrides"]
    if "mu_exponent" in ov:
        block["mu_exponent"] = ov["mu_exponent"]
    try:
        exp = BecExperiment(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment block: {exc}") from exc
    if int(ov.get("coupling_exponent_sign", -1)) > 0:
        exp = exp.with_coupling_exponent(+1)
    return exp


def run_bec(cfg, out_dir, threads):
    from .becmodel import HBAR, K_B, temperature_natural, to_probe_model

    exp = bec_experiment(cfg)
    model, drive, _ = to_probe_model(exp)
    gate(model, drive, cfg["allow_unstable"])
    TK = _grid(cfg["temperature_kelvin"], "temperature_kelvin")
    Tn = temperature_natural(exp, TK)
    order = _order(cfg["order"])
    res = np.array(_map(_bec_point, [(model, drive, float(T), order) for T in Tn], threads))
    ratio = res[:, 0] / res[:, 1]
    rows = [[a, b, c, d, e] for a, b, c, d, e in zip(TK, Tn, res[:, 0], res[:, 1], ratio)]
    i = int(np.argmax(ratio))
    target = HBAR * (exp.omega_impurity - exp.omega_d) / (4.0 * K_B)
    footer = [f"gamma0 (probe units): {model.gamma0:.12g}",
              f"ratio peak: {ratio[i]:.6g} at T = {TK[i]:.6g} K",
              f"detuning temperature hbar (w_I - w_d) / 4 k_B: {target:.6g} K"]
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.semilogy(TK * 1e9, res[:, 1], label="undriven")
    ax.semilogy(TK * 1e9, res[:, 0], "--", label="driven")
    ax.set_xlabel("T (nK)")
    ax.set_ylabel("responsiveness of <x^2>")
    ax.legend()
    stem = cfg["output"]["stem"]
    header = ["T_K", "T_natural", "responsiveness_driven", "responsiveness_undriven", "ratio"]
    csv_path = write_csv(out_dir / f"{stem}.csv", cfg, header, rows, footer)
    _save(fig, out_dir / f"{stem}.svg")
    return csv_path, footer


def _heat_point(task):
    from .limitcycle import DriveSpec, covariance_coefficients
    from .mathieu import MathieuPoint, stability_margin
    from .thermo import cycle_averaged_heat, cycle_averaged_input_power

    model, omega0, upsilon, wd, T, gamma = task
    drive = DriveSpec(omega0, upsilon, wd)
    h2 = -cycle_averaged_heat(model, drive, T, 2)
    h4 = -cycle_averaged_heat(model, drive, T, 4)
    state = covariance_coefficients(model, drive, T, order=None, derivative=False, rtol=1e-10)
    w = cycle_averaged_input_power(state)
    q = cycle_averaged_heat(model, drive, T, None)
    resid = abs(w + q) / abs(w) if w != 0 else abs(q)
    margin = stability_margin(MathieuPoint(omega0, gamma, upsilon, wd))
    return h2, h4, w, resid, margin


def run_heat_scan(cfg, out_dir, threads):
    model = build_model(cfg["model"])
    d = cfg["drive"]
    omega0, upsilon = _positive(d["omega0"], "drive.omega0"), float(d["upsilon"])
    wds = _grid(cfg["omega_d"], "omega_d", log=False)
    T = _positive(cfg["temperature"] if not isinstance(cfg["temperature"], dict)
                  else cfg["temperature"]["value"], "temperature")
    gamma = getattr(model, "gamma", float(model.j(omega0)) / (2 * omega0))
    res = np.array(_map(_heat_point, [(model, omega0, upsilon, float(w), T, gamma) for w in wds], threads))
    unstable = res[:, 4] > 0
    if unstable.any() and not cfg["allow_unstable"]:
        bad = wds[unstable]
        raise StabilityRefusal(f"{unstable.sum()} scan points are unstable (omega_d in "
                               f"[{bad.min():g}, {bad.max():g}]); use --allow-unstable to override")
    rows = [[w, *r[:4], not u, r[4]] for w, r, u in zip(wds, res, unstable)]
    i2, i4 = int(np.argmax(res[:, 0])), int(np.argmax(res[:, 1]))
    footer = ["heat columns are the sample heating rate -Q (order-truncated in upsilon)",
              f"order-2 peak: {res[i2, 0]:.6g} at omega_d = {wds[i2]:.6g}",
              f"order-4 peak: {res[i4, 1]:.6g} at omega_d = {wds[i4]:.6g}",
              f"max first-law residual: {res[:, 3].max():.3e}"]
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.semilogy(wds, res[:, 0], label="order 2")
    ax.semilogy(wds, res[:, 1], "--", label="order 4")
    ax.set_xlabel("omega_d / omega_0")
    ax.set_ylabel("sample heating rate")
    ax.legend()
    stem = cfg["output"]["stem"]
    header = ["omega_d", "heat_order2", "heat_order4", "input_power", "first_law_residual", "stable",
              "stability_margin"]
    csv_path = write_csv(out_dir / f"{stem}.csv", cfg, header, rows, footer)
    _save(fig, out_dir / f"{stem}.svg")
    return csv_path, footer


def run_stability_chart(cfg, out_dir, threads):
    from .mathieu import stability_chart, tongue_tip

    wds = _grid(cfg["omega_d"], "omega_d", log=False)
    ups = _grid(cfg["upsilon"], "upsilon", log=False)
    omega0 = _positive(cfg["drive"]["omega0"], "drive.omega0")
    gammas = [float(g) for g in cfg.get("gammas", [0.0, 0.1])]
    charts = _map(_chart_task, [(wds, ups, g, omega0) for g in gammas], threads)
    rows = []
    for i, v in enumerate(ups):
        for j, w in enumerate(wds):
            rows.append([w, v, *[x for c in charts for x in (c.margin[i, j], c.unstable[i, j])]])
    footer = []
    for c in charts:
        for n in (1, 2, 3):
            tip, first = tongue_tip(c, n)
            footer.append(f"gamma={c.gamma:g} tongue n={n}: tip omega_d={tip} lowest unstable upsilon={first}")
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    shades = ["0.85", "0.55", "0.3", "0.15"]
    for c, shade in zip(charts, shades):
        ax.contourf(wds, ups, c.unstable.astype(float), levels=[0.5, 1.5], colors=[shade])
    for n in range(1, 6):
        if wds.min() <= 2 * omega0 / n <= wds.max():
            ax.axvline(2 * omega0 / n, color="k", ls=":", lw=0.8)
    ax.set_xlabel("omega_d / omega_0")
    ax.set_ylabel("upsilon / omega_0^2")
    stem = cfg["output"]["stem"]
    header = ["omega_d", "upsilon"] + [f"{name}_gamma={g:g}" for g in gammas for name in ("margin", "unstable")]
    csv_path = write_csv(out_dir / f"{stem}.csv", cfg, header, rows, footer)
    _save(fig, out_dir / f"{stem}.svg")
    return csv_path, footer


def _chart_task(task):
    from .mathieu import stability_chart

    wds, ups, g, omega0 = task
    return stability_chart(wds, ups, g, omega0)


def run_oracle_check(cfg, out_dir, threads):
    import warnings

    from .limitcycle import DriveSpec, covariance_coefficients
    from .oracle import RecurrenceWarning, discretize, evolve_covariance

    model = build_model(cfg["model"])
    oc = cfg.get("oracle", {})
    N = int(oc.get("modes", 2000))
    bath = discretize(model, N, float(oc.get("omega_max", 1000.0)), grid=oc.get("grid", "geometric"),
                      omega_min=oc.get("omega_min", 0.002))
    t_relax = float(oc.get("relaxation_time", 400.0))
    tol = float(oc.get("tolerance", 0.01))
    d = cfg["drive"]
    omega0 = _positive(d["omega0"], "drive.omega0")
    checks = []
    for T in oc.get("temperatures", [0.1, 1.0]):
        drive = DriveSpec(omega0)
        st = covariance_coefficients(model, drive, float(T)).covariance(0.0)
        times = t_relax + np.array([0.0, 7.0, 13.0])
        with warnings.catch_warnings():
            warnings.simplefilter("error", RecurrenceWarning)
            tr = evolve_covariance(bath, drive, float(T), times)
        for name, ref, val in (("xx", st.xx, tr.xx), ("pp", st.pp, tr.pp)):
            err = float(np.max(np.abs(val / ref - 1)))
            checks.append((f"undriven T={T} sigma_{name}", err, tol))
    if float(d.get("upsilon", 0)) > 0:
        drive = DriveSpec(omega0, float(d["upsilon"]), _positive(d["omega_d"], "drive.omega_d"))
        gate(model, drive, cfg["allow_unstable"])
        T = float(oc.get("driven_temperature", 0.1))
        P = drive.period
        nper = np.round(t_relax / P)
        times = nper * P + np.arange(20) * P / 10
        tr = evolve_covariance(bath, drive, T, times, step=P / 400)
        st = covariance_coefficients(model, drive, T, order=_order(cfg["order"]))
        for name in ("xx", "pp"):
            ref = st.sigma(name, times)
            err = float(np.max(np.abs(getattr(tr, name) / ref - 1)))
            checks.append((f"driven T={T} sigma_{name}", err, float(oc.get("driven_tolerance", 0.02))))
    rows = [[name, err, tol, err <= tol] for name, err, tol in checks]
    footer = [f"{'PASS' if ok else 'FAIL'} {name}: rel. error {err:.3e} (tol {tol:g})" for name, err, tol, ok in rows]
    stem = cfg["output"]["stem"]
    csv_path = write_csv(out_dir / f"{stem}.csv", cfg, ["check", "relative_error", "tolerance", "pass"], rows,
                         footer)
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.barh([r[0] for r in rows], [r[1] for r in rows])
    ax.axvline(tol, color="r", ls=":")
    ax.set_xscale("log")
    ax.set_xlabel("relative error vs discretised bath")
    fig.tight_layout()
    _save(fig, out_dir / f"{stem}.svg")
    if not all(r[3] for r in rows):
        raise NumericalFailure("; ".join(f for f in footer if f.startswith("FAIL")))
    return csv_path, footer


RUNNERS = {
    "sensitivity": run_sensitivity,
    "bec": run_bec,
    "heat-scan": run_heat_scan,
    "stability-chart": run_stability_chart,
    "oracle-check": run_oracle_check,
}


def _threads(value):
    if value is None:
        value = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def build_parser():
    p = argparse.ArgumentParser(prog="drivenprobe", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"drivenprobe {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind)
        s.add_argument("--config", required=True, help="YAML file or preset name")
        s.add_argument("--out", default=None, help="output directory (default: ./out/<stem>)")
        s.add_argument("--threads", default=None, help=f"worker processes (env {THREADS_ENV})")
        s.add_argument("--allow-unstable", action="store_true", help="run even if the drive is unstable")
        s.add_argument("--order", choices=["2", "4", "exact"], default=None, help="amplitude order")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        threads = _threads(args.threads)
        cfg = resolve(load_config(args.config), args)
        out_dir = Path(args.out) if args.out else Path("out") / cfg["output"]["stem"]
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
        csv_path, footer = RUNNERS[args.subcommand](cfg, out_dir, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (NumericalFailure, QuadratureError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for line in footer:
        print(line)
    print(f"wrote {csv_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
