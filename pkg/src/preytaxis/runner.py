"""Run orchestration: simulations with on-disk output, equilibria reports and sweeps."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .analysis import KINDS, BoundContext, classify_all, compute_equilibria
from .config import RunConfig
from .diagnostics import LyapunovReference
from .errors import ConfigError
from .grid import State, write_snapshot
from .integrator import simulate

EXIT_CODES = {"completed": 0, "dt_collapse": 2, "non_finite": 3}


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def lyapunov_reference(cfg: RunConfig):
    """Equilibria the optional Lyapunov columns are centred on."""
    if not cfg.tau_constant:
        return LyapunovReference()
    c = cfg.section("coefficients")
    eqs = {e.kind: e for e in compute_equilibria(cfg.params, c["tau1"], c["tau2"])}
    semi = eqs["semi_coexistence"]
    semi_vals = semi.values if semi.feasible and not semi.degenerate else None
    ref = cfg.section("run")["reference"]
    if ref == "auto":
        ini = cfg.section("initial")
        ref = ini["equilibrium"] if ini["kind"] == "perturbed" else "coexistence_1"
    target = eqs[ref]
    target_vals = target.values if target.feasible else None
    return LyapunovReference(semi_vals, target_vals, float(c["tau1"]))


def run_directory(cfg: RunConfig, out_root):
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    path = os.path.join(out_root, f"{stamp}_{cfg.digest()[:12]}")
    os.makedirs(os.path.join(path, "snapshots"), exist_ok=False)
    return path


def execute_run(cfg: RunConfig, out_root=None):
    """Simulate ``cfg`` and write its outputs; returns ``(result, run_dir)``."""
    out_root = out_root or cfg.section("output")["dir"]
    run_dir = run_directory(cfg, out_root)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    model = cfg.build_model()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        U0 = cfg.initial_state()
    run = cfg.section("run")
    result = simulate(model, U0, run["T_end"], cfg.controller(), diag_interval=run["diag_interval"] or None,
                      snap_interval=run["snap_interval"] or None, reference=lyapunov_reference(cfg))
    files = []
    with open(os.path.join(run_dir, "config.ini"), "w") as fh:
        fh.write(cfg.serialize())
    files.append("config.ini")
    result.diagnostics.write_csv(os.path.join(run_dir, "diagnostics.csv"))
    files.append("diagnostics.csv")
    with open(os.path.join(run_dir, "monitors.jsonl"), "w") as fh:
        for ev in (result.monitor.events if result.monitor else []):
            fh.write(ev.to_json() + "\n")
    files.append("monitors.jsonl")
    snaps = [r for r in result.trajectory if r.state is not None]
    if result.status != "completed":
        # keep the last good state for post-mortems
        snaps.append(type(snaps[0])(result.t_final, result.state))
    for i, rec in enumerate(snaps):
        name = os.path.join("snapshots", f"snap_{i:05d}.csv")
        write_snapshot(os.path.join(run_dir, name), State.from_array(model.grid, rec.state, rec.t))
        files.append(name)
    manifest = {
        "config": cfg.sections,
        "version": __version__,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "status": result.status,
        "message": result.message,
        "t_final": result.t_final,
        "seed": cfg.seed,
        "monitor": result.monitor.summary() if result.monitor else None,
        "controller": result.controller.stats(),
        "snapshot_times": [r.t for r in snaps],
        "files": {f: _sha256(os.path.join(run_dir, f)) for f in files},
    }
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, allow_nan=True)
    return result, run_dir


def equilibria_report(cfg: RunConfig):
    if not cfg.tau_constant:
        raise ConfigError("classification requires constant τ")
    model = cfg.build_model()
    c = cfg.section("coefficients")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ctx = BoundContext.from_state(cfg.initial_state(), cfg.params)
    reports = classify_all(cfg.params, c["tau1"], c["tau2"], model.chi1, model.chi2, model.spec, ctx)
    return {"bound_context": {"X_bar": ctx.X_bar, "Y_bar": ctx.Y_bar, "source": ctx.source},
            "equilibria": [r.to_dict() for r in reports]}


# --------------------------------------------------------------------------
# sweeps


def parse_axis(text):
    """``"name:lo:hi:count"`` -> ``(dotted_name, values)``."""
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError(f"axis {text!r} must look like name:lo:hi:count")
    name, lo, hi, count = parts
    try:
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise ConfigError(f"axis {text!r} has non-numeric bounds or count") from None
    if count < 1 or hi < lo or (count > 1 and hi == lo) or not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError(f"axis {text!r} describes an empty range")
    if "." not in name:
        name = ("coefficients." if name in ("tau1", "tau2", "chi1", "chi2") else "params.") + name
    return name, np.linspace(lo, hi, count)


def _sweep_point(args):
    cfg, overrides = args
    try:
        point = cfg.with_values(**overrides)
        rep = equilibria_report(point)
        return {e["kind"]: (e["verdict"], e["feasible"]) for e in rep["equilibria"]}
    except ConfigError as exc:
        return {"error": str(exc)}


def sweep(cfg: RunConfig, axes, jobs=1):
    """Classify every point of a 1-2 axis parameter grid; returns CSV text."""
    if not 1 <= len(axes) <= 2:
        raise ConfigError("sweep takes one or two axes")
    parsed = [parse_axis(a) for a in axes]
    names = [n for n, _ in parsed]
    points = [dict(zip(names, vals)) for vals in
              np.array(np.meshgrid(*[v for _, v in parsed], indexing="ij")).reshape(len(parsed), -1).T.tolist()]
    tasks = [(cfg, p) for p in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    header = [n.split(".", 1)[1] for n in names]
    for k in KINDS:
        header += [f"{k}_verdict", f"{k}_feasible"]
    header.append("error")
    lines = [",".join(header)]
    for p, res in zip(points, results):
        row = [f"{p[n]:.17g}" for n in names]
        for k in KINDS:
            v, f = res.get(k, ("", ""))
            row += [v, str(f).lower() if f != "" else ""]
        row.append(json.dumps(res["error"]) if "error" in res else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
