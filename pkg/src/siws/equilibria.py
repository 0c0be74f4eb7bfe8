"""Equilibria: healthy-state classification, endemic solve, SIS baseline.

The endemic state is computed with a two-sided bracketed fixed-point
iteration of the monotone map T rather than Newton's method: the
brackets come with monotonicity guarantees, and the residual of the
vector field at the returned point is the sole trust anchor.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import vector_field
from .errors import (BracketFailure, DimensionMismatch, HypothesisViolated,
                     NegativeInput, NoConvergence, NotIrreducible, WrongRegime)
from .model import LayeredModel, PopulationLayer, State
from .spectral import (CRITICAL_BAND, ThresholdClass, _collatz_wielandt,
                       is_irreducible, reproduction_number, spectral_radius,
                       stability_margin)

__all__ = [
    "EquilibriumKind",
    "EquilibriumResult",
    "StabilityVerdict",
    "JacobianReport",
    "HealthyVerdict",
    "HealthyStateReport",
    "SisResult",
    "ComparisonReport",
    "jacobian",
    "classify_healthy_state",
    "t_map",
    "endemic_equilibrium",
    "sis_endemic",
    "compare_endemic",
]

_SIGN_BAND = 1e-9
_AGREEMENT_TOL = 1e-10
_RESIDUAL_TOL = 1e-10
_STEP_TOL = 1e-13
_MAX_ITER = 1_000_000


class EquilibriumKind(str, Enum):
    HEALTHY_UNIQUE = "HealthyUnique"
    ENDEMIC = "Endemic"


class StabilityVerdict(str, Enum):
    LOCALLY_EXP_STABLE = "LocallyExpStable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


class HealthyVerdict(str, Enum):
    LOCALLY_EXP_STABLE = "LocallyExpStable"
    GLOBALLY_STABLE_ON_DOMAIN = "GloballyStableOnDomain"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class JacobianReport:
    """Jacobian of the dynamics at a state, with its spectral abscissa."""

    j_matrix: np.ndarray
    s_value: float
    verdict: StabilityVerdict


@dataclass(frozen=True)
class HealthyStateReport:
    """Classification of z = 0 with the rule that produced the verdict."""

    verdict: HealthyVerdict
    rule: str
    s_value: float
    rho: float | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "rule": self.rule,
            "s_value": self.s_value,
            "rho": self.rho,
        }


@dataclass(frozen=True)
class EquilibriumResult:
    """Outcome of the endemic computation.

    kind is HealthyUnique when rho <= 1 (the origin is the only
    equilibrium); otherwise Endemic with the strictly positive state
    z_hat, the residual of the vector field there, the total iteration
    count, and the bracket vectors used.
    """

    kind: EquilibriumKind
    z_hat: State | None
    residual: float
    iterations: int
    bracket_lower: np.ndarray | None = None
    bracket_upper: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "z_hat": None if self.z_hat is None else {
                "x": self.z_hat.x.tolist(), "w": self.z_hat.w.tolist()},
            "residual": self.residual,
            "iterations": self.iterations,
            "bracket_lower": None if self.bracket_lower is None
            else self.bracket_lower.tolist(),
            "bracket_upper": None if self.bracket_upper is None
            else self.bracket_upper.tolist(),
        }


@dataclass(frozen=True)
class SisResult:
    """Endemic equilibrium of the population-only (infrastructure-free) model."""

    kind: EquilibriumKind
    x_tilde: np.ndarray | None
    residual: float
    iterations: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "x_tilde": None if self.x_tilde is None else self.x_tilde.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class ComparisonReport:
    """Componentwise ordering of the coupled vs population-only endemic states.

    ordered is True when x_hat >= x_tilde - 1e-9 componentwise and the
    largest gap exceeds 1e-9 (ordering with strict inequality somewhere).
    """

    x_hat: np.ndarray
    x_tilde: np.ndarray
    gap: np.ndarray
    ordered: bool

    def to_dict(self) -> dict:
        return {
            "x_hat": self.x_hat.tolist(),
            "x_tilde": self.x_tilde.tolist(),
            "gap": self.gap.tolist(),
            "ordered": self.ordered,
        }


def jacobian(model: LayeredModel, z) -> JacobianReport:
    """Jacobian of the dynamics at a state, assembled blockwise.

    At z = 0 the assembled matrix equals b_f - d_f entry for entry.
    The verdict uses the sign of the spectral abscissa with a 1e-9 band.
    """
    zv = z.z if isinstance(z, State) else np.asarray(z, dtype=float)
    n, m = model.n, model.m
    if zv.shape != (n + m,):
        raise DimensionMismatch(f"state must have length {n + m}")
    x, w = zv[:n], zv[n:]
    B = model.pop.beta
    f1 = B @ x
    f2 = model.coupling.beta_w @ w
    j11 = (B - x[:, None] * B - np.diag(model.pop.delta)
           - np.diag(f1) - np.diag(f2))
    j12 = (1.0 - x)[:, None] * model.coupling.beta_w
    j21 = model.coupling.c_w
    j22 = model.infra.alpha - np.diag(model.infra.delta_w)
    J = np.block([[j11, j12], [j21, j22]])
    s = float(np.linalg.eigvals(J).real.max())
    if s < -_SIGN_BAND:
        verdict = StabilityVerdict.LOCALLY_EXP_STABLE
    elif s > _SIGN_BAND:
        verdict = StabilityVerdict.UNSTABLE
    else:
        verdict = StabilityVerdict.MARGINAL
    return JacobianReport(j_matrix=J, s_value=s, verdict=verdict)


def classify_healthy_state(model: LayeredModel) -> HealthyStateReport:
    """Classify z = 0 using the sharpest applicable rule.

    Decoupled models (beta_w = 0 or c_w = 0) are handled by the
    triangular block tests; irreducible coupled models by the threshold
    rho(d_f^-1 b_f) (global stability on the domain for rho <= 1,
    instability otherwise).  Anything else is Unclassified and reports
    the raw spectral abscissa of the Jacobian at 0.
    """
    decoupled = (not np.any(model.coupling.beta_w)
                 or not np.any(model.coupling.c_w))
    if decoupled:
        s1 = stability_margin(model.pop.beta - np.diag(model.pop.delta))
        s2 = stability_margin(model.infra.alpha - np.diag(model.infra.delta_w))
        s = max(s1, s2)
        if s1 < 0 and s2 < 0:
            return HealthyStateReport(
                HealthyVerdict.LOCALLY_EXP_STABLE,
                rule="decoupled-triangular-stable", s_value=s)
        if s1 > 0 or s2 > 0:
            return HealthyStateReport(
                HealthyVerdict.UNSTABLE,
                rule="decoupled-triangular-unstable", s_value=s)
        return HealthyStateReport(
            HealthyVerdict.MARGINAL,
            rule="decoupled-triangular-marginal", s_value=s)

    if model.satisfies_a1 and is_irreducible(model.b_f):
        rep = reproduction_number(model)
        if rep.classification is ThresholdClass.SUPER_THRESHOLD:
            return HealthyStateReport(
                HealthyVerdict.UNSTABLE, rule="irreducible-threshold-unstable",
                s_value=rep.s_margin, rho=rep.rho)
        return HealthyStateReport(
            HealthyVerdict.GLOBALLY_STABLE_ON_DOMAIN,
            rule="irreducible-threshold-global",
            s_value=rep.s_margin, rho=rep.rho)

    rep = jacobian(model, np.zeros(model.size))
    return HealthyStateReport(HealthyVerdict.UNCLASSIFIED, rule="none",
                              s_value=rep.s_value)


def _t_apply(bf: np.ndarray, d: np.ndarray, n: int, z: np.ndarray) -> np.ndarray:
    q = (bf @ z) / d
    out = np.empty_like(z)
    out[:n] = q[:n] / (1.0 + q[:n])
    out[n:] = (q[n:] * z[n:] + q[n:]) / (1.0 + q[n:])
    return out


def t_map(model: LayeredModel, z) -> State:
    """One application of the monotone fixed-point map T.

    Componentwise, with q = d_f^-1 b_f z:
        population rows:      q_i / (1 + q_i)
        infrastructure rows:  (q_j z_j + q_j) / (1 + q_j)
    Fixed points of T are exactly the equilibria of the dynamics.

    Raises:
        WrongRegime: Model does not satisfy the strict regime.
        NegativeInput: z has a negative component.
    """
    if not model.satisfies_a2:
        raise WrongRegime("the fixed-point map requires the A2 regime")
    zv = z.z if isinstance(z, State) else np.asarray(z, dtype=float)
    if zv.shape != (model.size,):
        raise DimensionMismatch(f"state must have length {model.size}")
    if np.any(zv < 0):
        raise NegativeInput("t_map requires a componentwise nonnegative state")
    out = _t_apply(model.b_f, model.d_diag, model.n, zv)
    return State.from_z(out, model.n)


def _iterate_to_fixed_point(bf, d, n, z0, tol, max_iter):
    z = z0.copy()
    gap = np.inf
    for it in range(1, max_iter + 1):
        zn = _t_apply(bf, d, n, z)
        gap = float(np.max(np.abs(zn - z)))
        z = zn
        if gap < tol:
            return z, it
    raise NoConvergence(
        f"fixed-point iteration stalled after {max_iter} steps "
        f"(last step {gap!r})", best=z, gap=gap)


def endemic_equilibrium(model: LayeredModel, *, step_tol: float = _STEP_TOL,
                        max_iter: int = _MAX_ITER) -> EquilibriumResult:
    """Endemic equilibrium via two-sided bracketed fixed-point iteration.

    For rho <= 1 the healthy state is the unique equilibrium and the
    result says so.  For rho > 1 the solver iterates T downward from the
    upper bracket (1, w_up) with w_up = (D_w - A_w)^-1 C_w 1, and upward
    from eps * (Perron vector); both limits must agree to 1e-10 and the
    field residual at the result must be below 1e-10.

    Raises:
        WrongRegime: Model does not satisfy the strict regime.
        NotIrreducible: b_f is reducible.
        BracketFailure: The upper bracket is not strictly positive.
        NoConvergence: Iteration budget or agreement/residual check failed.
    """
    if not model.satisfies_a2:
        raise WrongRegime("endemic computation requires the A2 regime")
    if not is_irreducible(model.b_f):
        raise NotIrreducible("b_f must be irreducible")

    bf, d, n = model.b_f, model.d_diag, model.n
    R = bf / d[:, None]
    rho = spectral_radius(R)
    if rho <= 1.0 + CRITICAL_BAND:
        return EquilibriumResult(kind=EquilibriumKind.HEALTHY_UNIQUE,
                                 z_hat=None, residual=0.0, iterations=0)

    w_up = np.linalg.solve(np.diag(model.infra.delta_w) - model.infra.alpha,
                           model.coupling.c_w @ np.ones(n))
    if not np.all(w_up > 0):
        raise BracketFailure(
            f"upper bracket w component not strictly positive: {w_up!r}")
    upper = np.concatenate([np.ones(n), w_up])

    _, zstar = _collatz_wielandt(R)
    zstar = zstar / zstar.max()
    eps = 0.5 * (rho - 1.0) / rho
    # keep the lower bracket strictly beneath the upper one
    eps = min(eps, 0.5 * float(np.min(upper / zstar)))
    lower = eps * zstar

    down, it_down = _iterate_to_fixed_point(bf, d, n, upper, step_tol, max_iter)
    up, it_up = _iterate_to_fixed_point(bf, d, n, lower, step_tol, max_iter)
    gap = float(np.max(np.abs(down - up)))
    if gap > _AGREEMENT_TOL:
        raise NoConvergence(
            f"bracket limits disagree by {gap!r} > {_AGREEMENT_TOL}",
            best=down, gap=gap)

    z_hat = down
    residual = float(np.max(np.abs(vector_field(model, z_hat))))
    if residual > _RESIDUAL_TOL:
        raise NoConvergence(
            f"residual {residual!r} exceeds {_RESIDUAL_TOL}", best=z_hat,
            gap=residual)
    if not (np.all(z_hat > 0) and np.all(z_hat[:n] < 1)):
        raise NoConvergence(
            "endemic point not strictly interior", best=z_hat, gap=gap)
    return EquilibriumResult(
        kind=EquilibriumKind.ENDEMIC,
        z_hat=State.from_z(z_hat, n),
        residual=residual,
        iterations=it_down + it_up,
        bracket_lower=lower,
        bracket_upper=upper,
    )


def sis_endemic(pop: PopulationLayer, *, step_tol: float = _STEP_TOL,
                max_iter: int = _MAX_ITER) -> SisResult:
    """Endemic equilibrium of the population-only dynamics.

    Fixed-point iteration of the population restriction of T (the
    infrastructure terms absent) downward from the all-ones bracket.
    """
    B, delta = pop.beta, pop.delta
    if not is_irreducible(B):
        raise NotIrreducible("population matrix must be irreducible")
    rho = spectral_radius(B / delta[:, None])
    if rho <= 1.0 + CRITICAL_BAND:
        return SisResult(kind=EquilibriumKind.HEALTHY_UNIQUE, x_tilde=None,
                         residual=0.0, iterations=0)

    x = np.ones(pop.n)
    gap = np.inf
    for it in range(1, max_iter + 1):
        q = (B @ x) / delta
        xn = q / (1.0 + q)
        gap = float(np.max(np.abs(xn - x)))
        x = xn
        if gap < step_tol:
            break
    else:
        raise NoConvergence(
            f"SIS fixed-point iteration stalled (last step {gap!r})",
            best=x, gap=gap)

    residual = float(np.max(np.abs((1.0 - x) * (B @ x) - delta * x)))
    if residual > _RESIDUAL_TOL:
        raise NoConvergence(
            f"SIS residual {residual!r} exceeds {_RESIDUAL_TOL}", best=x,
            gap=residual)
    if not (np.all(x > 0) and np.all(x < 1)):
        raise NoConvergence("SIS endemic point not strictly interior", best=x,
                            gap=gap)
    return SisResult(kind=EquilibriumKind.ENDEMIC, x_tilde=x,
                     residual=residual, iterations=it)


def compare_endemic(model: LayeredModel) -> ComparisonReport:
    """Componentwise comparison of coupled vs population-only endemic levels.

    Requires both thresholds above 1, both b_f and B irreducible, and
    the strict regime; any failure raises HypothesisViolated.
    """
    if not model.satisfies_a2:
        raise HypothesisViolated("comparison requires the A2 regime")
    if not is_irreducible(model.b_f):
        raise HypothesisViolated("comparison requires irreducible b_f")
    if not is_irreducible(model.pop.beta):
        raise HypothesisViolated("comparison requires irreducible B")
    rho = spectral_radius(model.b_f / model.d_diag[:, None])
    rho_pop = spectral_radius(model.pop.beta / model.pop.delta[:, None])
    if rho <= 1.0 + CRITICAL_BAND or rho_pop <= 1.0 + CRITICAL_BAND:
        raise HypothesisViolated(
            f"comparison requires both thresholds above 1, got rho={rho!r} "
            f"rho_pop={rho_pop!r}")

    x_hat = endemic_equilibrium(model).z_hat.x
    x_tilde = sis_endemic(model.pop).x_tilde
    gap = x_hat - x_tilde
    ordered = bool(np.all(gap >= -_SIGN_BAND) and gap.max() > _SIGN_BAND)
    return ComparisonReport(x_hat=x_hat, x_tilde=x_tilde, gap=gap,
                            ordered=ordered)
