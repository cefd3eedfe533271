"""Run configuration: a flat INI-style file whose values are JSON scalars.

Example::

    [params]
    d1 = 0.5
    deltaX = 0.01

    [grid]
    nx = 64

    [coefficients]
    chi1 = "2 + sin(2*pi*x)"

    [taxis]
    family = "saturated"

    [initial]
    kind = "constant"
    X = 0.5

    [run]
    T_end = 10.0

Unknown sections or keys are errors. Every model assumption is checked when
the file is loaded.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .analysis import compute_equilibria, KINDS
from .errors import AssumptionError, ConfigError
from .grid import Grid
from .integrator import Model, StepController
from .model import CoefficientField, ModelParams, TaxisSpec

DEFAULTS = {
    "params": {"r": 1.0, "K": 1.0, "e1": 1.0, "e2": 1.0, "d1": 0.5, "d2": 0.25, "mu1": 1.0, "mu2": 1.0,
               "deltaX": 1.0, "deltaY": 1.0, "deltaZ": 1.0},
    "grid": {"n": 1, "Lx": 1.0, "nx": 64, "Ly": 1.0, "ny": 64},
    "coefficients": {"chi1": 1.0, "chi2": 1.0, "tau1": 0.0, "tau2": 0.0},
    "taxis": {"family": "linear", "c": 1.0, "eps": 1.0, "m": 1.0, "alpha": None, "beta": None,
              "z_range": None, "table_z": [], "table_h": []},
    "initial": {"kind": "constant", "X": 0.5, "Y": 0.5, "Z": 0.5, "equilibrium": "coexistence_1",
                "amplitude": 0.01, "mode": "homogeneous", "weights": [1.0, 1.0, 1.0], "modes": 4},
    "run": {"T_end": 10.0, "diag_interval": 1.0, "snap_interval": 0.0, "seed": 0, "upwind": False,
            "reference": "auto"},
    "controller": {"dt_init": 1e-3, "dt_min": 1e-12, "dt_max": 0.1, "safety": 0.9, "cfl": 0.9, "tol": 1e-7},
    "output": {"dir": "runs"},
}

INITIAL_KINDS = ("constant", "expression", "perturbed", "random")
PERTURB_MODES = ("homogeneous", "cosine", "random")


def _decode(section, key, raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid value (quote strings)") from None


@dataclass
class RunConfig:
    """Validated configuration; ``sections`` holds the full resolved values."""

    sections: dict

    # -- accessors ---------------------------------------------------------

    def section(self, name):
        return self.sections[name]

    @property
    def params(self):
        return ModelParams(**self.sections["params"])

    @property
    def grid(self):
        g = self.sections["grid"]
        n = g["n"]
        if n == 1:
            return Grid((g["Lx"],), (g["nx"],))
        if n == 2:
            return Grid((g["Lx"], g["Ly"]), (g["nx"], g["ny"]))
        raise ConfigError(f"only n in {{1, 2}} supported, got n={n}")

    @property
    def spec(self):
        t = dict(self.sections["taxis"])
        t["table_z"] = tuple(t["table_z"])
        t["table_h"] = tuple(t["table_h"])
        return TaxisSpec(n=self.sections["grid"]["n"], **t)

    def coefficient(self, name):
        return CoefficientField.coerce(self.sections["coefficients"][name])

    @property
    def tau_constant(self):
        return self.coefficient("tau1").is_constant and self.coefficient("tau2").is_constant

    def build_model(self):
        c = self.sections["coefficients"]
        return Model.build(self.params, self.grid, self.spec, c["chi1"], c["chi2"], c["tau1"], c["tau2"],
                           upwind=bool(self.sections["run"]["upwind"]))

    def controller(self):
        return StepController(**self.sections["controller"])

    @property
    def seed(self):
        return int(self.sections["run"]["seed"])

    # -- initial data ------------------------------------------------------

    def equilibrium(self, kind):
        if kind not in KINDS:
            raise ConfigError(f"unknown equilibrium {kind!r}; expected one of {KINDS}")
        if not self.tau_constant:
            raise ConfigError("classification requires constant τ")
        c = self.sections["coefficients"]
        for e in compute_equilibria(self.params, c["tau1"], c["tau2"]):
            if e.kind == kind:
                if not e.feasible:
                    raise ConfigError(f"equilibrium {kind} is infeasible for these parameters: {e.note}")
                return e
        raise ConfigError(f"equilibrium {kind} not found")

    def initial_state(self):
        """Initial fields as an array of shape ``(3, *grid.shape)``."""
        ini = self.sections["initial"]
        grid = self.grid
        mesh = grid.mesh()
        kind = ini["kind"]
        rng = np.random.default_rng(self.seed)
        if kind in ("constant", "expression"):
            U = np.stack([np.asarray(CoefficientField.coerce(ini[s])(*mesh), dtype=float) * np.ones(grid.shape)
                          for s in "XYZ"])
        elif kind == "perturbed":
            base = np.array(self.equilibrium(ini["equilibrium"]).values)
            w = np.asarray(ini["weights"], dtype=float)
            if w.shape != (3,):
                raise ConfigError("[initial] weights needs three entries")
            mode = ini["mode"]
            if mode == "homogeneous":
                shapes = [np.ones(grid.shape)] * 3
            elif mode == "cosine":
                prof = np.ones(grid.shape)
                for x, L in zip(mesh, grid.extents):
                    prof = prof * np.cos(np.pi * x / L)
                shapes = [prof] * 3
            elif mode == "random":
                shapes = [_smooth_random(grid, rng, ini["modes"]) for _ in range(3)]
            else:
                raise ConfigError(f"unknown perturbation mode {mode!r}; expected one of {PERTURB_MODES}")
            U = np.stack([base[i] + ini["amplitude"] * w[i] * shapes[i] for i in range(3)])
        elif kind == "random":
            base = np.array([float(ini[s]) for s in "XYZ"])
            amp = float(ini["amplitude"])
            if not 0 <= amp < 1:
                raise ConfigError("[initial] random amplitude must lie in [0, 1)")
            U = np.stack([base[i] * (1 + amp * _smooth_random(grid, rng, ini["modes"])) for i in range(3)])
        else:
            raise ConfigError(f"unknown initial kind {kind!r}; expected one of {INITIAL_KINDS}")
        _check_initial(U)
        return U

    # -- serialisation -----------------------------------------------------

    def serialize(self):
        lines = []
        for name, values in self.sections.items():
            lines.append(f"[{name}]")
            for k, v in values.items():
                lines.append(f"{k} = {json.dumps(v)}")
            lines.append("")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.serialize().encode()).hexdigest()

    def with_values(self, **dotted):
        """Copy with ``section.key`` overrides, e.g. ``with_values(**{"params.d1": 2.0})``."""
        sections = copy.deepcopy(self.sections)
        for path, v in dotted.items():
            sec, _, key = path.partition(".")
            if sec not in sections or key not in sections[sec]:
                raise ConfigError(f"unknown setting {path!r}")
            sections[sec][key] = v
        return validate(RunConfig(sections))


def _smooth_random(grid, rng, modes):
    """Random cosine series with unit maximum amplitude (Neumann-compatible)."""
    mesh = grid.mesh()
    field = np.zeros(grid.shape)
    for _ in range(int(modes)):
        ks = rng.integers(0, 4, size=grid.n)
        amp = rng.uniform(-1, 1)
        term = np.ones(grid.shape)
        for k, x, L in zip(ks, mesh, grid.extents):
            term = term * np.cos(k * np.pi * x / L)
        field += amp * term
    peak = np.abs(field).max()
    return field / peak if peak > 0 else field


def _check_initial(U):
    if not np.all(np.isfinite(U)):
        raise ConfigError("initial data must be finite")
    if np.any(U < 0):
        raise AssumptionError("(A_I)", "initial densities must be nonnegative")
    for name, u in zip("XYZ", U):
        if not np.any(u > 0):
            warnings.warn(f"(A_I): initial {name} is identically zero; it stays zero for the whole run",
                          stacklevel=3)


def validate(cfg: RunConfig):
    """Build every model object once so assumption violations surface at load."""
    g = cfg.sections["grid"]
    if g["n"] not in (1, 2):
        raise ConfigError(f"only n in {{1, 2}} supported, got n={g['n']}")
    cfg.build_model()
    cfg.controller()
    run = cfg.sections["run"]
    if not (isinstance(run["T_end"], (int, float)) and run["T_end"] >= 0 and math.isfinite(run["T_end"])):
        raise ConfigError("[run] T_end must be a nonnegative number")
    for key in ("diag_interval", "snap_interval"):
        if run[key] < 0:
            raise ConfigError(f"[run] {key} must be nonnegative")
    ref = run["reference"]
    if ref != "auto" and ref not in KINDS:
        raise ConfigError(f"[run] reference must be 'auto' or one of {KINDS}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg.initial_state()
    return cfg


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections = copy.deepcopy(DEFAULTS)
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"unknown section [{name}]")
        for key, raw in parser.items(name):
            if key not in sections[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            sections[name][key] = _decode(name, key, raw)
    return validate(RunConfig(sections))


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
