"""SIWS dynamics: vector field, Taylor jets, and trajectory simulation.

The field is quadratic in the state, which makes exact Taylor
recurrences (Cauchy products) available.  `taylor_jet` is the single
source of truth for all higher time-derivatives used by the
observability analysis; symbolic differentiation is deliberately
avoided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rk
from .errors import (ClampExceeded, DimensionMismatch, PreconditionViolated,
                     StepSizeUnderflow)
from .model import LayeredModel, State

__all__ = [
    "SimulationControls",
    "Trajectory",
    "TaylorJet",
    "vector_field",
    "taylor_jet",
    "simulate",
    "trajectory_to_csv",
]


def _state_vector(model: LayeredModel, z) -> np.ndarray:
    zv = z.z if isinstance(z, State) else np.asarray(z, dtype=float)
    if zv.ndim != 1 or zv.shape[0] != model.size:
        raise DimensionMismatch(
            f"state must have length {model.size}, got shape {zv.shape}")
    return zv


def vector_field(model: LayeredModel, z) -> np.ndarray:
    """Evaluate dz/dt = (-d_f + (I - X(z)) b_f) z.

    Defined on all of R^(n+m); domain membership is not required.

    Args:
        model: Validated layered model.
        z: State or raw vector of length n+m.
    """
    zv = _state_vector(model, z)
    n = model.n
    u = model.b_f @ zv
    out = u - model.d_diag * zv
    out[:n] -= zv[:n] * u[:n]
    return out


@dataclass(frozen=True)
class TaylorJet:
    """Local series z(t) = sum_k coeffs[k] t^k around an expansion point.

    Attributes:
        order: Highest coefficient index K.
        coeffs: (K+1, n+m) array; coeffs[0] is the expansion point.
        sens: Optional (K+1, n+m, n+m) array of sensitivities
            sens[k] = d coeffs[k] / d z0 with sens[0] = I.
        n: Population block size (first n rows are the x part).
    """

    order: int
    coeffs: np.ndarray
    n: int
    sens: np.ndarray | None = None

    def derivative(self, k: int) -> np.ndarray:
        """k-th time derivative of the solution at the expansion point."""
        import math

        return math.factorial(k) * self.coeffs[k]


def taylor_jet(model: LayeredModel, z0, order: int,
               with_sensitivities: bool = False) -> TaylorJet:
    """Exact Taylor coefficients of the solution through z0.

    The quadratic field gives the recurrence
        (k+1) coeffs[k+1] = [f(z(t))]_k
    where the degree-k coefficient of f along the series is evaluated
    with Cauchy products.  Sensitivities satisfy the recurrence obtained
    by differentiating the same expression with respect to z0.

    Args:
        model: Validated layered model.
        z0: Expansion point (State or raw vector).
        order: K >= 1; number of coefficients beyond the base point.
        with_sensitivities: Also propagate d coeffs[k] / d z0.
    """
    if order < 1:
        raise PreconditionViolated("taylor_jet requires order >= 1")
    zv = _state_vector(model, z0)
    n, dim = model.n, model.size
    bf = model.b_f
    d = model.d_diag

    coeffs = np.zeros((order + 1, dim))
    coeffs[0] = zv
    u = np.zeros((order + 1, dim))

    sens = None
    bf_sens: list[np.ndarray] = []
    if with_sensitivities:
        sens = np.zeros((order + 1, dim, dim))
        sens[0] = np.eye(dim)

    for k in range(order):
        u[k] = bf @ coeffs[k]
        conv = np.zeros(n)
        for l in range(k + 1):
            conv += coeffs[l][:n] * u[k - l][:n]
        rhs = u[k] - d * coeffs[k]
        rhs[:n] -= conv
        coeffs[k + 1] = rhs / (k + 1)

        if sens is not None:
            bf_sens.append(bf @ sens[k])
            dconv = np.zeros((n, dim))
            for l in range(k + 1):
                dconv += u[k - l][:n, None] * sens[l][:n, :]
                dconv += coeffs[l][:n, None] * bf_sens[k - l][:n, :]
            rhs_s = bf_sens[k] - d[:, None] * sens[k]
            rhs_s[:n] -= dconv
            sens[k + 1] = rhs_s / (k + 1)

    return TaylorJet(order=order, coeffs=coeffs, n=n, sens=sens)


@dataclass(frozen=True)
class SimulationControls:
    """Integrator knobs.

    max_step defaults to t_end / 100 when left as None.  The clamp
    budget bounds how far any accepted step may overshoot the invariant
    domain before the run is declared an integrator failure.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    clamp_tol: float = 1e-9
    max_step: float | None = None
    steady_state_tol: float = 1e-13
    steady_state_runs: int = 3


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution with integrator metadata.

    `zs` holds one state per row, aligned with `times`; every stored row
    satisfies the domain constraints exactly (projection runs after each
    accepted step).
    """

    times: np.ndarray
    zs: np.ndarray
    n: int
    steps_accepted: int
    steps_rejected: int
    max_clamp: float

    @property
    def states(self) -> list[State]:
        return [State(x=row[:self.n], w=row[self.n:]) for row in self.zs]

    @property
    def final_state(self) -> State:
        row = self.zs[-1]
        return State(x=row[:self.n], w=row[self.n:])

    @property
    def x_mean(self) -> np.ndarray:
        """Average infection fraction across population nodes, per sample."""
        return self.zs[:, :self.n].mean(axis=1)

    @property
    def w_mean(self) -> np.ndarray:
        """Average contamination across infrastructure nodes, per sample."""
        return self.zs[:, self.n:].mean(axis=1)


def simulate(model: LayeredModel, z0, t_end: float,
             controls: SimulationControls | None = None,
             samples: int = 200) -> Trajectory:
    """Integrate the SIWS dynamics from z0 up to t_end.

    Adaptive embedded RK 5(4) with per-step error control; after each
    accepted step the state is projected back onto the invariant domain
    and the clamp magnitude recorded.  The trajectory is sampled at
    `samples` + 1 equally spaced instants including t = 0.

    Args:
        model: Validated layered model.
        z0: Initial state, must lie in [0,1]^n x [0,inf)^m.
        t_end: Final time, > 0.
        controls: Tolerances and step limits; defaults per
            SimulationControls.
        samples: Number of sampling intervals.

    Raises:
        PreconditionViolated: z0 outside the domain or t_end <= 0.
        StepSizeUnderflow: Step control collapsed (stiffness).
        ClampExceeded: A projection exceeded the clamp budget.
    """
    controls = controls or SimulationControls()
    if t_end <= 0:
        raise PreconditionViolated("t_end must be > 0")
    zv = _state_vector(model, z0)
    state = State.from_z(zv, model.n)
    if not state.in_domain:
        raise PreconditionViolated("initial state must lie in the domain")
    if samples < 1:
        raise PreconditionViolated("samples must be >= 1")

    ts = np.linspace(0.0, float(t_end), samples + 1)
    hmax = controls.max_step if controls.max_step is not None else t_end / 100.0
    zs, max_clamp, acc, rej, status, t_reached = _rk.integrate_dopri5(
        np.ascontiguousarray(model.b_f), model.d_diag.copy(), model.n,
        zv.copy(), ts, controls.rel_tol, controls.abs_tol, float(hmax),
        controls.clamp_tol, controls.steady_state_tol,
        controls.steady_state_runs)

    if status == _rk.STATUS_UNDERFLOW:
        raise StepSizeUnderflow(
            f"step size underflow at t = {t_reached:.6g} (stiffness?)")
    if status == _rk.STATUS_CLAMP:
        raise ClampExceeded(
            f"domain projection exceeded clamp budget "
            f"{controls.clamp_tol:g} at t = {t_reached:.6g}")
    return Trajectory(times=ts, zs=zs, n=model.n, steps_accepted=int(acc),
                      steps_rejected=int(rej), max_clamp=float(max_clamp))


def trajectory_to_csv(traj: Trajectory, path_or_buf) -> None:
    """Write `t, x_1..x_n, w_1..w_m, x_mean, w_mean` rows.

    Floats are printed with 17 significant digits for lossless
    round-trips.
    """
    n = traj.n
    m = traj.zs.shape[1] - n
    header = (["t"] + [f"x_{i + 1}" for i in range(n)]
              + [f"w_{j + 1}" for j in range(m)] + ["x_mean", "w_mean"])
    xm = traj.x_mean
    wm = traj.w_mean

    def _write(buf) -> None:
        buf.write(",".join(header) + "\n")
        for i, t in enumerate(traj.times):
            row = [t, *traj.zs[i], xm[i], wm[i]]
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")

    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "w", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(path_or_buf)
