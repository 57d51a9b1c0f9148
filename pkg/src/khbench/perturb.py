"""Controlled perturbations and trajectory divergence reports.

Supported kinds (exactly one per run)::

    none
    convection_quadrature_order(q)
    solver_rtol(tau)
    regularized_direct_solve
    rounding_noise(rho, seed)
    eigenmode_seed(k1, k2, amplitude)

``rounding_noise`` is an emulation of last-bit rounding differences (for
instance fused versus separate multiply-add), not a real change of the
floating point mode.
"""
import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

KINDS = (
    "none",
    "convection_quadrature_order",
    "solver_rtol",
    "regularized_direct_solve",
    "rounding_noise",
    "eigenmode_seed",
)
_NPARAMS = {
    "none": (0, 0),
    "convection_quadrature_order": (1, 1),
    "solver_rtol": (1, 1),
    "regularized_direct_solve": (0, 0),
    "rounding_noise": (0, 2),
    "eigenmode_seed": (3, 3),
}


@dataclass(frozen=True)
class PerturbationSpec:
    """One perturbation and the time (in tbar units) it is applied at."""

    kind: str = "none"
    params: tuple = ()
    at_tbar: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        lo, hi = _NPARAMS[self.kind]
        if not lo <= len(self.params) <= hi:
            raise ValueError(f"{self.kind} takes {lo}..{hi} parameters, got {len(self.params)}")
        if self.kind == "convection_quadrature_order" and int(self.params[0]) < 2:
            raise ValueError("quadrature order must be at least 2")
        if self.kind == "solver_rtol" and not float(self.params[0]) > 0:
            raise ValueError("solver tolerance must be positive")

    @property
    def rho(self):
        return float(self.params[0]) if self.params else 2.0**-52

    @property
    def seed(self):
        return int(self.params[1]) if len(self.params) > 1 else 0

    def label(self):
        if not self.params:
            return self.kind
        return f"{self.kind}({', '.join(repr(p) for p in self.params)})"

    def as_dict(self):
        d = {"kind": self.kind, "params": list(self.params), "at_tbar": self.at_tbar}
        if self.kind == "rounding_noise":
            d["note"] = "emulated last-bit rounding noise, not a floating point mode switch"
        return d


def parse_spec(text, at_tbar=0.0):
    """Parse ``"kind(p1, p2)"`` into a :class:`PerturbationSpec`."""
    m = re.fullmatch(r"\s*([a-z_]+)\s*(?:\((.*)\))?\s*", str(text))
    if not m:
        raise ValueError(f"cannot parse perturbation {text!r}")
    kind, args = m.group(1), m.group(2)
    params = ()
    if args is not None and args.strip():
        vals = []
        for a in args.split(","):
            a = a.strip()
            v = float(a)
            vals.append(int(v) if re.fullmatch(r"[+-]?\d+", a) else v)
        params = tuple(vals)
    return PerturbationSpec(kind, params, float(at_tbar))


def rounding_noise_step_hook(vector, rho, seed, step=0):
    """Multiply each entry by ``1 + rho * xi`` with ``xi`` uniform in [-1, 1].

    The numbers come from a counter-based Philox generator keyed by ``seed``
    with the step number as counter, so entry ``i`` of step ``s`` always gets
    the same ``xi`` regardless of how the run was split or restarted.
    """
    if rho == 0:
        return vector
    bg = np.random.Philox(key=int(seed), counter=int(step))
    xi = np.random.Generator(bg).uniform(-1.0, 1.0, size=np.shape(vector))
    return vector * (1.0 + rho * xi)


# ------------------------------------------------------------------ reports
@dataclass
class DivergenceReport:
    """First divergence times and maximum deviations per QoI.

    ``t_div[q]`` is the first sampled time (tbar units) with relative
    deviation above ``threshold`` (``inf`` if never); ``max_dev[q]`` is the
    largest relative deviation for ``t <= window`` tbar.
    """

    reference_id: str
    perturbed_id: str
    threshold: float
    window: float
    t_div: dict
    max_dev: dict
    t: np.ndarray = None
    deviation: dict = field(default_factory=dict)
    error: str = None

    def deviation_at(self, qty, t_tbar):
        """Relative deviation of ``qty`` at the sample closest to ``t_tbar``."""
        i = int(np.argmin(np.abs(self.t - t_tbar)))
        return float(self.deviation[qty][i])

    def max_after(self, qty, t_lo, t_hi=math.inf):
        sel = (self.t >= t_lo) & (self.t <= t_hi)
        return float(self.deviation[qty][sel].max()) if sel.any() else float("nan")

    def summary(self):
        lines = [f"reference {self.reference_id} vs perturbed {self.perturbed_id}"]
        for q in self.t_div:
            lines.append(
                f"  {q}: t_div={self.t_div[q]:.6g} tbar (threshold {self.threshold:g}), "
                f"max deviation up to {self.window:g} tbar = {self.max_dev[q]:.3e}"
            )
        if self.error:
            lines.append(f"  error: {self.error}")
        return "\n".join(lines)

    def write_csv(self, path):
        qs = list(self.deviation)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t_over_tbar"] + [f"dev_{q}" for q in qs])
            for i, t in enumerate(self.t):
                w.writerow([f"{t:.17g}"] + [f"{self.deviation[q][i]:.17g}" for q in qs])


def divergence_report(t, ref, pert, ref_id="reference", pert_id="perturbed", threshold=0.1, window=200.0):
    """Compare two sampled trajectories on identical sample times.

    Parameters
    ----------
    t : array_like
        Sample times in tbar units.
    ref, pert : dict of array_like
        QoI series keyed by name (palinstrophy ``P`` first by convention).
    """
    t = np.asarray(t, dtype=float)
    n = min(len(t), *(len(v) for v in ref.values()), *(len(v) for v in pert.values()))
    t = t[:n]
    t_div, max_dev, dev = {}, {}, {}
    for q in ref:
        r = np.asarray(ref[q], dtype=float)[:n]
        p = np.asarray(pert[q], dtype=float)[:n]
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(r != 0, np.abs(p - r) / np.abs(np.where(r != 0, r, 1.0)), np.abs(p - r))
        dev[q] = d
        hit = np.nonzero(d > threshold)[0]
        t_div[q] = float(t[hit[0]]) if hit.size else math.inf
        sel = t <= window
        max_dev[q] = float(d[sel].max()) if sel.any() else float("nan")
    return DivergenceReport(ref_id, pert_id, threshold, window, t_div, max_dev, t, dev)


class PairRunError(RuntimeError):
    """One run of a pair failed; ``report`` covers the samples before the failure."""

    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


def run_pair(config, spec, threshold=0.1, window=200.0, quantities=("P", "E", "K")):
    """Run the reference and the perturbed configuration and compare them.

    Parameters
    ----------
    config : RunConfig
        Reference configuration; its own perturbation is ignored.
    spec : PerturbationSpec or str

    Returns
    -------
    DivergenceReport
    """
    from dataclasses import replace

    from .cli_io import execute

    if isinstance(spec, str):
        spec = parse_spec(spec)
    base = replace(config, perturbation="none", output_dir=None)
    if spec.kind == "regularized_direct_solve":
        base = replace(base, formulation="mixed")
    pert = replace(base, perturbation=spec.label(), perturbation_tbar=spec.at_tbar)
    ref_res = execute(base)
    err = None
    try:
        pert_res = execute(pert)
    except Exception as exc:  # report what was computed before the failure
        pert_res = getattr(exc, "partial", None)
        err = f"{type(exc).__name__}: {exc}"
        if pert_res is None:
            raise
    tr = ref_res.column("t_over_tbar")
    rep = divergence_report(
        tr,
        {q: ref_res.column(q) for q in quantities},
        {q: pert_res.column(q) for q in quantities},
        ref_res.config_hash,
        pert_res.config_hash,
        threshold,
        window,
    )
    if err:
        rep.error = err
        raise PairRunError(err, rep)
    return rep
