"""Run configuration, simulation driver, output files and QoI comparison.

Configuration files are flat TOML tables::

    engine = "fem"
    Re = 100
    n = 16
    k = 4
    dt_tbar = 0.001
    t_end = 5
    output_dir = "out/re100"

Every output file carries the configuration hash.  ``qoi.csv`` starts with a
``# schema=...`` comment line followed by the header row.
"""
import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ImportError:  # pragma: no cover
    import tomli as tomllib

from . import kh_setup, perturb, qoi
from .kh_setup import DELTA0

log = logging.getLogger("khbench")

SCHEMA = "khbench-qoi/1"
QOI_COLUMNS = ("step", "t", "t_over_tbar", "K", "E", "P", "delta_ratio", "eps_int", "eps_rel", "engine")
DEFAULT_SNAPSHOTS = (5.0, 10.0, 17.0, 34.0, 56.0, 200.0, 240.0, 278.0, 400.0)
# keys excluded from the content hash (they do not change the numbers)
_HASH_EXCLUDE = ("output_dir", "restart", "checkpoint_every", "deterministic")


class ConfigError(ValueError):
    """Configuration is invalid; ``errors`` lists every problem found."""

    def __init__(self, errors):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = list(errors)


class RunFailed(RuntimeError):
    """A run aborted; ``partial`` holds the result up to the failure."""

    def __init__(self, msg, partial):
        super().__init__(msg)
        self.partial = partial


@dataclass
class RunConfig:
    """All settings of one run (times in tbar = delta0/u_inf units)."""

    engine: str = "fem"
    Re: float = 100.0
    n: int = 16
    k: int = 4
    dt_tbar: float = 1e-3
    t_end: float = 400.0
    with_20pi: bool = True
    formulation: str = "stream"
    penalty: float = 4.0
    precision: str = "single"
    rtol: float = 1e-12
    max_refinements: int = 10
    quad_order: int = 0  # 0 selects 3(k+1)
    oracle_N: int = 128
    oracle_M: int = 128
    qoi_every: int = 10
    delta_lines: int = 1024
    spectrum_samples: int = 1024
    snapshot_times: list = field(default_factory=lambda: list(DEFAULT_SNAPSHOTS))
    snapshot_resolution: int = 256
    write_fields: bool = True
    perturbation: str = "none"
    perturbation_tbar: float = 0.0
    deterministic: bool = True
    checkpoint_every: int = 0
    restart: str = ""
    output_dir: str = None

    @property
    def nu(self):
        return kh_setup.viscosity(self.Re)

    @property
    def dt(self):
        return self.dt_tbar * DELTA0

    @property
    def nsteps(self):
        return int(round(self.t_end / self.dt_tbar))

    def perturbation_spec(self):
        return perturb.parse_spec(self.perturbation, self.perturbation_tbar)

    def as_dict(self):
        return dataclasses.asdict(self)

    def content_hash(self):
        d = {k: v for k, v in self.as_dict().items() if k not in _HASH_EXCLUDE}
        text = json.dumps(d, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name, value):
    f = _FIELDS[name]
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    if name == "output_dir":
        return None if value in (None, "") else str(value)
    if isinstance(default, bool):
        if isinstance(value, str):
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"{name}: expected a boolean, got {value!r}")
        return bool(value)
    if isinstance(default, int):
        v = float(value)
        if v != int(v):
            raise ValueError(f"{name}: expected an integer, got {value!r}")
        return int(v)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, list):
        if isinstance(value, str):
            value = [v for v in value.replace("[", "").replace("]", "").split(",") if v.strip()]
        return [float(v) for v in value]
    return str(value)


def validate(cfg):
    """Return the list of problems of a configuration (empty if valid)."""
    errs = []
    if not (isinstance(cfg.Re, (int, float)) and cfg.Re > 0 and math.isfinite(cfg.Re)):
        errs.append(f"Re must be a positive number, got {cfg.Re!r}")
    if cfg.engine not in ("fem", "oracle"):
        errs.append(f"engine must be 'fem' or 'oracle', got {cfg.engine!r}")
    if cfg.n < 1:
        errs.append(f"n must be >= 1, got {cfg.n}")
    if not 1 <= cfg.k <= 8:
        errs.append(f"k must be in 1..8, got {cfg.k}")
    if not cfg.dt_tbar > 0:
        errs.append(f"dt_tbar must be positive, got {cfg.dt_tbar}")
    if not cfg.t_end >= 0:
        errs.append(f"t_end must be nonnegative, got {cfg.t_end}")
    elif cfg.dt_tbar > 0 and abs(cfg.t_end / cfg.dt_tbar - round(cfg.t_end / cfg.dt_tbar)) > 1e-6:
        errs.append("t_end must be an integer multiple of dt_tbar")
    if cfg.formulation not in ("stream", "mixed"):
        errs.append(f"formulation must be 'stream' or 'mixed', got {cfg.formulation!r}")
    if cfg.precision not in ("single", "double"):
        errs.append(f"precision must be 'single' or 'double', got {cfg.precision!r}")
    if not cfg.penalty > 0:
        errs.append("penalty must be positive")
    if not cfg.rtol > 0:
        errs.append("rtol must be positive")
    if cfg.qoi_every < 1:
        errs.append("qoi_every must be >= 1")
    if cfg.quad_order and cfg.quad_order < 2:
        errs.append("quad_order must be >= 2 (or 0 for the default)")
    if cfg.oracle_N < 8 or cfg.oracle_M < 8:
        errs.append("oracle resolution must be at least 8")
    if cfg.delta_lines < 2 or cfg.spectrum_samples < 2:
        errs.append("delta_lines and spectrum_samples must be >= 2")
    if cfg.checkpoint_every < 0:
        errs.append("checkpoint_every must be >= 0")
    try:
        spec = cfg.perturbation_spec()
        if spec.kind == "regularized_direct_solve" and cfg.formulation != "mixed":
            errs.append("regularized_direct_solve requires formulation = 'mixed'")
        if spec.kind != "none" and cfg.engine == "oracle":
            errs.append("perturbations are only available for the fem engine")
    except ValueError as exc:
        errs.append(f"perturbation: {exc}")
    if cfg.restart and not os.path.exists(cfg.restart):
        errs.append(f"restart file {cfg.restart!r} does not exist")
    return errs


def make_config(values=None, overrides=()):
    """Build and validate a :class:`RunConfig` from a mapping and overrides.

    Raises
    ------
    ConfigError
        Listing every invalid or unknown key and every invalid value.
    """
    values = dict(values or {})
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError([f"override {ov!r} is not of the form key=value"])
        key, val = ov.split("=", 1)
        values[key.strip()] = val.strip().strip('"')
    errs, kw = [], {}
    for key, val in values.items():
        if key not in _FIELDS:
            errs.append(f"unknown key {key!r}")
            continue
        try:
            kw[key] = _coerce(key, val)
        except (TypeError, ValueError) as exc:
            errs.append(str(exc))
    if errs:
        raise ConfigError(errs)
    cfg = RunConfig(**kw)
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def load_config(path, overrides=()):
    with open(path, "rb") as f:
        values = tomllib.load(f)
    return make_config(values, overrides)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return json.dumps(str(v))


def write_config(cfg, path):
    """Write a flat TOML file that :func:`load_config` reads back."""
    with open(path, "w") as f:
        for key, val in cfg.as_dict().items():
            if val is None:
                continue
            f.write(f"{key} = {_toml_value(val)}\n")


# ------------------------------------------------------------------ results
@dataclass
class RunResult:
    config: RunConfig
    config_hash: str
    rows: list
    refinements: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    final: dict = None  # engine state arrays at the last step

    def column(self, name):
        i = QOI_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_qoi_csv(path, rows, chash):
    with open(path, "w", newline="") as f:
        f.write(f"# schema={SCHEMA} config_hash={chash}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(QOI_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _write_xy_csv(path, header, cols, chash):
    with open(path, "w", newline="") as f:
        f.write(f"# config_hash={chash}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])


def write_vtk(path, xs, ys, arrays, chash, title="khbench field"):
    """Legacy ASCII VTK structured points file with point data arrays.

    ``arrays`` maps names to arrays of shape (len(xs), len(ys)) (scalars) or
    (2, len(xs), len(ys)) (vectors, stored with a zero third component).
    """
    nx, ny = len(xs), len(ys)
    dx = xs[1] - xs[0] if nx > 1 else 1.0
    dy = ys[1] - ys[0] if ny > 1 else 1.0
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{title} config_hash={chash}\nASCII\nDATASET STRUCTURED_POINTS\n")
        f.write(f"DIMENSIONS {nx} {ny} 1\nORIGIN {xs[0]:.17g} {ys[0]:.17g} 0\n")
        f.write(f"SPACING {dx:.17g} {dy:.17g} 1\nPOINT_DATA {nx * ny}\n")
        for name, a in arrays.items():
            a = np.asarray(a)
            if a.ndim == 2:
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                np.savetxt(f, a.T.reshape(-1, 1), fmt="%.9g")
            else:
                f.write(f"VECTORS {name} double\n")
                v = np.stack([a[0].T.ravel(), a[1].T.ravel(), np.zeros(nx * ny)], -1)
                np.savetxt(f, v, fmt="%.9g")


# ------------------------------------------------------------------ engines
class _FemEngine:
    def __init__(self, cfg):
        from . import timestepper as ts
        from .fem_space import build_space, project_initial_condition
        from .mesh import build_quad_mesh
        from .selforg import EigenMode

        self.cfg = cfg
        spec = cfg.perturbation_spec()
        self.spec = spec
        formulation = cfg.formulation
        qo = cfg.quad_order or None
        rtol = cfg.rtol
        hook = None
        if spec.kind == "convection_quadrature_order":
            qo = int(spec.params[0])
        elif spec.kind == "solver_rtol":
            rtol = float(spec.params[0])
        elif spec.kind == "rounding_noise":
            rho, seed = spec.rho, spec.seed

            def hook(x, step):
                return perturb.rounding_noise_step_hook(x, rho, seed, step)

        self.space = build_space(build_quad_mesh(cfg.n), cfg.k)
        khc = kh_setup.KHConfig(cfg.Re, cfg.n, cfg.k, cfg.dt, cfg.t_end, cfg.with_20pi)
        self.disc = ts.Discretization(self.space, cfg.nu, formulation, cfg.penalty, qo)
        method = "stream" if formulation == "stream" else "mixed"
        fld = project_initial_condition(self.space, lambda x, y: kh_setup.initial_velocity(x, y, khc), method)
        self.x0 = self.disc.from_field(fld)
        self.stepper = ts.SBDF2Stepper(
            self.disc,
            cfg.dt,
            rtol,
            cfg.max_refinements,
            cfg.precision,
            regularized=spec.kind == "regularized_direct_solve",
            hook=hook,
        )
        self.seed_step = None
        if spec.kind == "eigenmode_seed":
            k1, k2, amp = spec.params
            mode = EigenMode(int(k1), int(k2))
            sf = project_initial_condition(self.space, mode.velocity, method)
            self.seed_vec = float(amp) * self.disc.from_field(sf)
            self.seed_step = int(round(spec.at_tbar / cfg.dt_tbar))
        self.ts = ts

    def initial(self):
        return self.ts.initial_state(self.x0, self.cfg.dt)

    def advance(self, state):
        if self.seed_step is not None and state.step == self.seed_step:
            prev = None if state.u_prev is None else state.u_prev + self.seed_vec
            state = self.ts.TimeState(prev, state.u_curr + self.seed_vec, state.step, state.dt)
            self.stepper._conv_cache = {}
        return self.stepper.advance(state)

    def field(self, state):
        return self.disc.to_field(state.u_curr, state.t)

    def qoi(self, state, tracker):
        fld = self.field(state)
        return qoi.compute_record(fld, state.step, tracker, self.cfg.delta_lines)

    def spectrum(self, state):
        fld = self.field(state)
        return qoi.spectrum(fld, self.cfg.spectrum_samples, self.cfg.spectrum_samples)

    def profile(self, state):
        return qoi.mean_profile(self.field(state), self.cfg.spectrum_samples, self.cfg.spectrum_samples)

    def snapshot(self, state):
        from .fem_space import grid_values

        r = self.cfg.snapshot_resolution
        xs = np.linspace(0.0, 1.0, r + 1)
        fld = self.field(state)
        u1 = grid_values(fld, xs, xs, "u1")
        u2 = grid_values(fld, xs, xs, "u2")
        om = grid_values(fld, xs, xs, "omega")
        return xs, xs, {"vorticity": om, "velocity": np.stack([u1, u2])}

    def save(self, state):
        return {"u_prev": state.u_prev, "u_curr": state.u_curr}

    def load(self, data, step):
        return self.ts.TimeState(data["u_prev"], data["u_curr"], step, self.cfg.dt)

    @property
    def refinements(self):
        return self.stepper.refinement_counts


class _OracleEngine:
    def __init__(self, cfg):
        from . import spectral_oracle as so

        self.so = so
        self.cfg = cfg
        khc = kh_setup.KHConfig(cfg.Re, cfg.n, cfg.k, cfg.dt, cfg.t_end, cfg.with_20pi)
        self.s0 = so.kh_oracle_init(cfg.oracle_N, cfg.oracle_M, cfg.nu, cfg.dt, khc)
        self.refinements = []

    def initial(self):
        return self.s0

    def advance(self, state):
        return self.so.oracle_step(state)

    def qoi(self, state, tracker):
        K, E, P = self.so.oracle_qoi(state)
        ys = np.linspace(0.0, 1.0, self.cfg.delta_lines)
        k2 = np.arange(1, state.M + 1)
        mean_w = np.sin(np.pi * np.outer(ys, k2)) @ state.w[0].real
        m = np.abs(mean_w).max()
        d = 2.0 * kh_setup.U_INF / m / DELTA0 if m > 0 else float("nan")
        eps, rel = tracker.update(state.t, K, E)
        return qoi.QoiRecord(state.step, state.t, K, E, P, d, eps, rel)

    def spectrum(self, state):
        g = self.so._grid(state.N, state.M)
        ys = np.concatenate([[0.0], g.y, [1.0]])
        return qoi.spectrum_from_samples(self._u1_with_walls(state), ys, state.t)

    def _u1_with_walls(self, state):
        """``u1`` on the x grid and the y grid including both walls."""
        from scipy import fft

        g = self.so._grid(state.N, state.M)
        psi = state.w / g.lam
        X = np.zeros((psi.shape[0], state.M + 2), dtype=complex)
        X[:, 1 : state.M + 1] = psi * g.ky / 2.0
        vals = fft.idct(X * 2 * (state.M + 1), type=1, axis=1)
        return np.fft.irfft(vals, n=state.N, axis=0) * state.N

    def profile(self, state):
        g = self.so._grid(state.N, state.M)
        u1 = self._u1_with_walls(state)
        ys = np.concatenate([[0.0], g.y, [1.0]])
        mean = u1.mean(axis=0)
        rms = np.sqrt(((u1 - mean) ** 2).mean(axis=0))
        return qoi.ProfileRecord(state.t, ys, mean, rms)

    def snapshot(self, state):
        g = self.so._grid(state.N, state.M)
        u1, u2 = self.so.oracle_velocity(state)
        om = self.so._sine_to_grid(state.w, state.N)
        return g.x, g.y, {"vorticity": om, "velocity": np.stack([u1, u2])}

    def save(self, state):
        out = {"w": state.w}
        if state.w_prev is not None:
            out.update(w_prev=state.w_prev, n_prev=state.n_prev)
        return out

    def load(self, data, step):
        from dataclasses import replace

        return replace(
            self.s0, w=data["w"], w_prev=data.get("w_prev"), n_prev=data.get("n_prev"), step=step
        )


def _snapshot_steps(cfg):
    out = {}
    for T in cfg.snapshot_times:
        if 0 <= T <= cfg.t_end + 1e-12:
            out[int(round(T / cfg.dt_tbar))] = T
    return out


def _refinement_stats(counts):
    if not counts:
        return {"steps": 0}
    c = np.asarray(counts)
    hist = np.bincount(c)
    return {
        "steps": int(c.size),
        "mean": float(c.mean()),
        "max": int(c.max()),
        "histogram": {str(i): int(v) for i, v in enumerate(hist) if v},
    }


def execute(cfg, progress=None):
    """Run a configuration; write outputs if ``cfg.output_dir`` is set.

    Returns
    -------
    RunResult

    Raises
    ------
    RunFailed
        Wrapping solver failures or blow-up, with the partial result.
    """
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    chash = cfg.content_hash()
    if not cfg.deterministic:
        return _execute(cfg, chash, progress)
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=1):
        return _execute(cfg, chash, progress)


def _execute(cfg, chash, progress):
    t_start = time.time()
    out = cfg.output_dir
    if out:
        os.makedirs(out, exist_ok=True)
        for sub in ("spectra", "profiles", "fields"):
            os.makedirs(os.path.join(out, sub), exist_ok=True)
    engine = _FemEngine(cfg) if cfg.engine == "fem" else _OracleEngine(cfg)
    tracker = qoi.DissipationTracker(cfg.nu)
    rows = []
    state = engine.initial()
    step0 = 0
    if cfg.restart:
        state, rows, tracker = _load_checkpoint(cfg, engine, chash)
        step0 = state.step
    snaps = _snapshot_steps(cfg)
    nsteps = cfg.nsteps

    def record(st):
        r = engine.qoi(st, tracker)
        rows.append((st.step, r.t, r.t_over_tbar, r.K, r.E, r.P, r.delta_ratio, r.eps_int, r.eps_rel, cfg.engine))

    def outputs(st):
        if not out or st.step not in snaps:
            return
        T = snaps[st.step]
        tag = f"t{T:07.2f}"
        sp = engine.spectrum(st)
        _write_xy_csv(os.path.join(out, "spectra", f"spectrum_{tag}.csv"), ("kappa", "E_kappa"), (sp.kappa, sp.E), chash)
        pr = engine.profile(st)
        _write_xy_csv(
            os.path.join(out, "profiles", f"profile_{tag}.csv"), ("y", "u1_mean", "u1_rms"), (pr.y, pr.mean, pr.rms), chash
        )
        if cfg.write_fields:
            xs, ys, arrays = engine.snapshot(st)
            write_vtk(os.path.join(out, "fields", f"field_{tag}.vtk"), xs, ys, arrays, chash)

    if step0 == 0:
        record(state)
        outputs(state)
    try:
        while state.step < nsteps:
            state = engine.advance(state)
            s = state.step
            if s % cfg.qoi_every == 0 or s == nsteps or s in snaps:
                record(state)
                K = rows[-1][3]
                if len(rows) > 1 and not np.isfinite(K):
                    raise FloatingPointError("non-finite kinetic energy")
            outputs(state)
            if out and cfg.checkpoint_every and s % cfg.checkpoint_every == 0 and s < nsteps:
                _save_checkpoint(cfg, engine, state, rows, tracker, chash)
            if progress is not None:
                progress(state, rows)
    except Exception as exc:
        partial = RunResult(cfg, chash, rows, list(engine.refinements))
        if out:
            write_qoi_csv(os.path.join(out, "qoi.csv"), rows, chash)
        raise RunFailed(f"run aborted at step {state.step}: {exc}", partial) from exc
    meta = {
        "config": cfg.as_dict(),
        "config_hash": chash,
        "schema": SCHEMA,
        "perturbation": cfg.perturbation_spec().as_dict(),
        "refinements": _refinement_stats(engine.refinements),
        "steps": nsteps,
        "wall_time_s": time.time() - t_start,
    }
    res = RunResult(cfg, chash, rows, list(engine.refinements), meta, engine.save(state))
    if out:
        write_qoi_csv(os.path.join(out, "qoi.csv"), rows, chash)
        with open(os.path.join(out, "metadata.json"), "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
        write_config(cfg, os.path.join(out, "config.toml"))
    return res


def _checkpoint_path(cfg):
    return os.path.join(cfg.output_dir, "checkpoint.npz")


def _save_checkpoint(cfg, engine, state, rows, tracker, chash):
    data = {k: v for k, v in engine.save(state).items() if v is not None}
    num = np.array([r[:-1] for r in rows], dtype=float)
    tmp = _checkpoint_path(cfg) + ".tmp.npz"
    np.savez(
        tmp,
        step=state.step,
        config_hash=chash,
        rows=num,
        tracker=np.array([tracker.K0, tracker.integral, tracker._last[0], tracker._last[1]]),
        **data,
    )
    os.replace(tmp, _checkpoint_path(cfg))


def _load_checkpoint(cfg, engine, chash):
    with np.load(cfg.restart, allow_pickle=False) as f:
        if str(f["config_hash"]) != chash:
            raise ValueError(f"checkpoint belongs to configuration {f['config_hash']}, not {chash}")
        data = {k: f[k] for k in f.files}
    step = int(data["step"])
    state = engine.load(data, step)
    rows = [tuple([int(r[0])] + list(r[1:]) + [cfg.engine]) for r in data["rows"]]
    tr = qoi.DissipationTracker(cfg.nu)
    K0, integ, t_last, e_last = data["tracker"]
    tr.K0, tr.integral, tr._last = float(K0), float(integ), (float(t_last), float(e_last))
    return state, rows, tr


# ------------------------------------------------------------------ compare
class MisalignedError(ValueError):
    """The compared series do not both cover the requested time range."""


def read_qoi_csv(path, mapping=None):
    """Read a QoI time series.

    Parameters
    ----------
    path : str
    mapping : dict or str, optional
        Column mapping (or path to a JSON sidecar) from this package's
        names (``t_over_tbar``, ``K``, ``E``, ``P``, ``delta_ratio``) to the
        file's column names; ``time_scale`` multiplies the time column.  If
        omitted, ``<path>.columns.json`` is used when present, otherwise the
        file must carry this package's schema line.

    Returns
    -------
    dict of ndarray
    """
    side = path + ".columns.json"
    if mapping is None and os.path.exists(side):
        mapping = side
    if isinstance(mapping, str):
        with open(mapping) as f:
            mapping = json.load(f)
    with open(path, newline="") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    if mapping is None:
        first = lines[0]
        if not first.startswith("# schema="):
            raise ValueError(f"{path}: missing schema line and no column mapping given")
        ver = first.split()[1].split("=", 1)[1]
        if ver != SCHEMA:
            raise ValueError(f"{path}: unsupported schema {ver!r} (expected {SCHEMA})")
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.reader(body)
    header = [h.strip() for h in next(reader)]
    data = list(reader)
    mapping = dict(mapping or {})
    scale = float(mapping.pop("time_scale", 1.0))
    out = {}
    for name in ("t_over_tbar", "K", "E", "P", "delta_ratio"):
        col = mapping.get(name, name)
        if col in header:
            i = header.index(col)
            out[name] = np.array([float(r[i]) for r in data if r])
    if "t_over_tbar" not in out:
        raise ValueError(f"{path}: no time column")
    out["t_over_tbar"] = out["t_over_tbar"] * scale
    return out


def compare(a, b, tmax, tols, mapping_b=None):
    """Max relative deviation of B from A per QoI over [0, tmax] (tbar units).

    B is linearly interpolated to A's sample times.

    Returns
    -------
    dict
        ``{qty: {"max_rel_dev": float, "tol": float, "pass": bool}}`` plus
        ``"pass"`` for the overall outcome.

    Raises
    ------
    MisalignedError
        If either series does not cover [0, tmax].
    """
    A = read_qoi_csv(a) if isinstance(a, str) else a
    B = read_qoi_csv(b, mapping_b) if isinstance(b, str) else b
    ta, tb = A["t_over_tbar"], B["t_over_tbar"]
    eps = 1e-9 * max(1.0, tmax)
    for name, t in (("A", ta), ("B", tb)):
        if t.min() > eps or t.max() < tmax - eps:
            raise MisalignedError(
                f"series {name} covers [{t.min():g}, {t.max():g}] tbar, which does not contain [0, {tmax:g}]"
            )
    sel = ta <= tmax + eps
    report = {}
    ok = True
    for q, tol in tols.items():
        if q not in A or q not in B:
            raise ValueError(f"quantity {q!r} missing from one of the inputs")
        bi = np.interp(ta[sel], tb, B[q])
        av = A[q][sel]
        with np.errstate(divide="ignore", invalid="ignore"):
            dev = np.where(av != 0, np.abs(bi - av) / np.abs(np.where(av != 0, av, 1.0)), np.abs(bi - av))
        m = float(np.nanmax(dev)) if dev.size else 0.0
        report[q] = {"max_rel_dev": m, "tol": tol, "pass": bool(m <= tol)}
        ok &= m <= tol
    report["pass"] = bool(ok)
    return report


# ------------------------------------------------------------------ CLI
def build_parser():
    p = argparse.ArgumentParser(prog="khbench", description="Kelvin-Helmholtz DNS benchmark")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a simulation")
    r.add_argument("--config", required=True, help="flat TOML configuration file")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("-v", "--verbose", action="store_true")
    c = sub.add_parser("compare", help="compare two QoI time series")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--tmax", type=float, required=True, help="end of the window in tbar units")
    c.add_argument("--tol-k", type=float, default=0.01)
    c.add_argument("--tol-e", type=float, default=0.01)
    c.add_argument("--tol-p", type=float, default=0.05)
    c.add_argument("--map-b", default=None, help="JSON column mapping for B")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    if args.command == "run":
        try:
            cfg = load_config(args.config, args.override)
        except ConfigError as exc:
            print(str(exc), file=sys.stderr)
            return 2
        if not cfg.output_dir:
            cfg = dataclasses.replace(cfg, output_dir=os.path.splitext(os.path.basename(args.config))[0] + "_out")
        try:
            res = execute(cfg)
        except RunFailed as exc:
            print(str(exc), file=sys.stderr)
            return 1
        last = res.rows[-1]
        print(f"done: {len(res.rows)} samples, K={last[3]:.10g} E={last[4]:.10g} P={last[5]:.10g} -> {cfg.output_dir}")
        return 0
    tols = {"K": args.tol_k, "E": args.tol_e, "P": args.tol_p}
    try:
        rep = compare(args.a, args.b, args.tmax, tols, args.map_b)
    except (MisalignedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for q in tols:
        r = rep[q]
        print(f"{q}: max relative deviation {r['max_rel_dev']:.3e} (tol {r['tol']:g}) {'PASS' if r['pass'] else 'FAIL'}")
    return 0 if rep["pass"] else 1
