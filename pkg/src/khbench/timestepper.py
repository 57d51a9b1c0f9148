"""SBDF2 implicit-explicit time stepping of ``M du/dt + A u + C(u) u = 0``.

The stiff Stokes part is implicit, convection is extrapolated.  Both steps are
written in incremental form::

    (M + dt A) (u1 - u0) = -[dt C(u0) u0 + dt A u0]
    (M + 2/3 dt A) (u^{n+1} - u^n) =
        -[4/3 dt C(u^n) u^n - 2/3 dt C(u^{n-1}) u^{n-1} + 2/3 dt A u^n - 1/3 M (u^n - u^{n-1})]

Two formulations share this code path.  ``"stream"`` (default) works in the
stream function basis of the divergence-free subspace, where the systems are
symmetric positive definite and block circulant.  ``"mixed"`` keeps the full
RT velocity and the DG pressure and solves the saddle point systems with
SuperLU.
"""
import hashlib
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import assembly, linalg
from .fem_space import VelocityField, field_from_stream

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    """Kinetic energy grew by more than the allowed fraction in one step."""


@dataclass
class TimeState:
    """Two consecutive states of the SBDF2 recursion.

    ``t`` is always ``step * dt``.  ``u_prev`` is None before the first step.
    """

    u_prev: np.ndarray
    u_curr: np.ndarray
    step: int
    dt: float

    @property
    def t(self):
        return self.step * self.dt


class Discretization:
    """Spatial operators of one formulation.

    Parameters
    ----------
    space : VelocitySpace
    nu : float
    formulation : {"stream", "mixed"}
    alpha : float
        Interior penalty constant.
    quad_order : int, optional
        Convection quadrature order, default ``3(k+1)``.
    with_convection : bool
        Switch the nonlinear term off (Stokes flow).
    """

    def __init__(self, space, nu, formulation="stream", alpha=4.0, quad_order=None, with_convection=True):
        if formulation not in ("stream", "mixed"):
            raise ValueError(f"unknown formulation {formulation!r}")
        self.space = space
        self.nu = nu
        self.formulation = formulation
        self.alpha = alpha
        self.with_convection = with_convection
        basis = space.stream if formulation == "stream" else space.rt
        self.basis = basis
        self.ops = assembly.build_operators(basis, nu, alpha)
        self.convection = assembly.ConvectionOperator(basis, quad_order)
        self.nvel = basis.ndofs
        if formulation == "mixed":
            self._D = assembly.assemble_divergence(space)
            self._Msp = self.ops.M.to_sparse()
            self._Asp = self.ops.A.to_sparse()
            self.npres = space.np_dofs
        else:
            self.npres = 0

    @property
    def size(self):
        return self.nvel + self.npres

    @property
    def quad_order(self):
        return self.convection.quad_order

    # vectors carry velocity first, pressure last (mixed only)
    def vel(self, x):
        return x[: self.nvel]

    def mass(self, x):
        return self.ops.M.matvec(self.vel(x))

    def stokes(self, x):
        """Velocity rows of the Stokes operator (the pressure enters through the solve)."""
        return self.ops.A.matvec(self.vel(x))

    def convect(self, x):
        if not self.with_convection:
            return np.zeros(self.nvel)
        return self.convection.apply(self.vel(x))

    def kinetic_energy(self, x):
        v = self.vel(x)
        return 0.5 * float(v @ self.ops.M.matvec(v))

    def update(self, x, delta):
        """New state from an increment; in the mixed form the solved multiplier
        already is the new pressure (the right-hand side carries no pressure)."""
        if self.npres:
            return np.concatenate([self.vel(x) + self.vel(delta), delta[self.nvel :]])
        return x + delta

    def pad(self, r):
        if self.npres:
            return np.concatenate([r, np.zeros(self.npres)])
        return r

    def factorize(self, theta_dt, rtol=1e-12, max_refinements=10, precision="single", regularized=False):
        """Factorize ``M + theta_dt * A`` (with the divergence constraint if mixed)."""
        if self.formulation == "stream":
            if regularized:
                raise ValueError("the regularized direct solve needs the mixed formulation")
            op = self.ops.M.combine(self.ops.A, 1.0, theta_dt)
            return linalg.factorize_circulant(op, precision, rtol, max_refinements)
        Kv = (self._Msp + theta_dt * self._Asp).tocsr()
        D = theta_dt * self._D
        K, keep = assembly.gauge_fixed(self.space, sp.bmat([[Kv, -D.T], [-D, None]]))
        if regularized:
            Mp = assembly.assemble_pressure_mass(self.space)
            Z = sp.block_diag([sp.csr_matrix((self.nvel, self.nvel)), Mp]).tocsr()[keep][:, keep]
            op = linalg.factorize(
                K, method="ldlt", regularization=-1e-12, pressure_mass=Z, precision="double", refine=False
            )
        else:
            op = linalg.factorize(K, method="indefinite", precision=precision, rtol=rtol, max_refinements=max_refinements)
        n = self.size

        def inner(b, _inner=op.inner):
            x = np.zeros(n)
            x[keep] = _inner(b[keep])
            return x

        def apply(x, _K=K):
            y = np.zeros(n)
            y[keep] = _K @ x[keep]
            return y

        return linalg.FactorizedOperator(apply, inner, n, op.rtol, op.max_refinements, op.refine, op.info)

    def to_field(self, x, t=0.0):
        if self.formulation == "stream":
            return field_from_stream(self.space, x, t)
        p = assembly.pressure_mean_zero(self.space, x[self.nvel :])
        return VelocityField(self.space, x[: self.nvel].copy(), p, t)

    def from_field(self, field):
        if self.formulation == "stream":
            psi = field.meta.get("stream")
            if psi is None:
                raise ValueError("field has no stream function coefficients")
            return np.array(psi, dtype=float)
        return np.concatenate([field.u, field.p])


class SBDF2Stepper:
    """Constant step SBDF2 integrator.

    Parameters
    ----------
    disc : Discretization
    dt : float
    rtol : float
        Linear solver tolerance.
    precision : {"single", "double"}
        Factor precision of the direct solver.
    regularized : bool
        Use the regularized direct solve without refinement (mixed only).
    hook : callable, optional
        ``hook(x, step) -> x`` applied to every new state.
    blowup : float
        Relative single step growth of K that aborts the run.
    """

    def __init__(
        self,
        disc,
        dt,
        rtol=1e-12,
        max_refinements=10,
        precision="single",
        regularized=False,
        hook=None,
        blowup=0.01,
    ):
        self.disc = disc
        self.dt = float(dt)
        self.rtol = rtol
        self.max_refinements = max_refinements
        self.precision = precision
        self.regularized = regularized
        self.hook = hook
        self.blowup = blowup
        self._op1 = None
        self._op2 = None
        self._conv_cache = {}
        self.refinement_counts = []

    def _factor(self, theta):
        return self.disc.factorize(
            theta * self.dt, self.rtol, self.max_refinements, self.precision, self.regularized
        )

    @property
    def op_first(self):
        if self._op1 is None:
            self._op1 = self._factor(1.0)
        return self._op1

    @property
    def op_sbdf2(self):
        if self._op2 is None:
            self._op2 = self._factor(2.0 / 3.0)
        return self._op2

    def _conv(self, x, step):
        c = self._conv_cache.get(step)
        if c is None:
            c = self.disc.convect(x)
            self._conv_cache = {step: c}
        return c

    def _finish(self, x_old, x_new, step):
        if self.hook is not None:
            x_new = self.hook(x_new, step)
        K0 = self.disc.kinetic_energy(x_old)
        K1 = self.disc.kinetic_energy(x_new)
        if not np.isfinite(K1) or K1 > K0 * (1.0 + self.blowup) + 1e-300:
            raise BlowUpError(
                f"kinetic energy grew from {K0:.6e} to {K1:.6e} at step {step} "
                f"(dt={self.dt:.3e}); the time step is probably too large"
            )
        return x_new

    def first_step(self, state):
        """Implicit-explicit Euler step from ``u_curr``."""
        d, dt = self.disc, self.dt
        x0 = state.u_curr
        c0 = d.convect(x0)
        rhs = -d.pad(dt * c0 + dt * d.stokes(x0))
        delta, info = linalg.solve_refined(self.op_first, rhs)
        self.refinement_counts.append(info.refinements)
        x1 = self._finish(x0, d.update(x0, delta), state.step + 1)
        self._conv_cache = {state.step: c0}
        return TimeState(x0, x1, state.step + 1, state.dt)

    def sbdf2_step(self, state):
        """One SBDF2 step in incremental form."""
        d, dt = self.disc, self.dt
        xm, x = state.u_prev, state.u_curr
        cm = self._conv(xm, state.step - 1)
        c = d.convect(x)
        rhs = -d.pad(
            (4.0 / 3.0) * dt * c
            - (2.0 / 3.0) * dt * cm
            + (2.0 / 3.0) * dt * d.stokes(x)
            - (1.0 / 3.0) * d.mass(x - xm)
        )
        delta, info = linalg.solve_refined(self.op_sbdf2, rhs)
        self.refinement_counts.append(info.refinements)
        x1 = self._finish(x, d.update(x, delta), state.step + 1)
        self._conv_cache = {state.step: c}
        return TimeState(x, x1, state.step + 1, state.dt)

    def advance(self, state):
        if state.u_prev is None:
            return self.first_step(state)
        return self.sbdf2_step(state)

    def cfl_check(self, x):
        """Warn when ``dt`` exceeds ``h / ((k+1)^2 max|u|)``; returns the bound."""
        from .fem_space import grid_values

        space = self.disc.space
        fld = self.disc.to_field(x)
        xs = (np.arange(4 * space.n) + 0.5) / (4 * space.n)
        umax = max(np.abs(grid_values(fld, xs, xs, c)).max() for c in ("u1", "u2"))
        if umax == 0:
            return np.inf
        bound = space.h / ((space.k + 1) ** 2 * umax)
        if self.dt > bound:
            log.warning("dt=%.3e exceeds the CFL estimate %.3e", self.dt, bound)
        return bound


def initial_state(x0, dt):
    return TimeState(None, np.asarray(x0, dtype=float), 0, float(dt))


# ------------------------------------------------------------------ checkpoints
def config_hash(obj):
    """Stable hash of a JSON-serializable configuration."""
    import json

    text = json.dumps(obj, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def save_checkpoint(path, state, chash, extra=None):
    """Write ``state`` to a compressed ``.npz`` container."""
    prev = np.array([]) if state.u_prev is None else state.u_prev
    np.savez(
        path,
        u_prev=prev,
        has_prev=state.u_prev is not None,
        u_curr=state.u_curr,
        step=state.step,
        dt=state.dt,
        config_hash=chash,
        **(extra or {}),
    )


def load_checkpoint(path, chash=None):
    """Read a checkpoint; refuses files written for another configuration."""
    with np.load(path, allow_pickle=False) as f:
        h = str(f["config_hash"])
        if chash is not None and h != chash:
            raise ValueError(f"checkpoint config hash {h} does not match {chash}")
        prev = f["u_prev"] if bool(f["has_prev"]) else None
        return TimeState(prev, f["u_curr"].copy(), int(f["step"]), float(f["dt"]))
