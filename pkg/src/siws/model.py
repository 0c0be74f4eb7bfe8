"""Layered SIWS parameterization: layers, regime checks, block assembly.

The model couples a population contact network (n nodes, infection
fractions x) with an infrastructure network (m nodes, contamination
levels w).  Parameters are bundled per layer, validated against one of
two regimes, and assembled into the block matrices

    b_f = [[B,   B_w          ],      d_f = diag(D, D_w - diag(A_w))
           [C_w, A_w - diag(A_w)]]

that drive the coupled dynamics dz/dt = (-d_f + (I - X(z)) b_f) z.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, NegativeEntry, ParseError, RegimeViolation

__all__ = [
    "Regime",
    "PopulationLayer",
    "InfrastructureLayer",
    "CouplingLayer",
    "LayeredModel",
    "State",
    "validate_model",
    "assemble_blocks",
    "project_to_domain",
    "model_from_dict",
    "model_to_dict",
]


class Regime(str, Enum):
    """Parameter regime the model is declared (and verified) to satisfy.

    A1 is the weak regime: positive recovery rates and positive effective
    decay at every infrastructure node.  A2 strengthens it: strictly
    positive decay rates everywhere plus a conservative flow matrix
    (columns of alpha sum to zero).  A2 implies A1.
    """

    A1 = "A1"
    A2 = "A2"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


def _check_matrix(name: str, arr: np.ndarray, shape: tuple[int, int]) -> None:
    if arr.ndim != 2 or arr.shape != shape:
        raise DimensionMismatch(
            f"{name} must have shape {shape}, got {arr.shape}")


@dataclass(frozen=True)
class PopulationLayer:
    """Person-to-person infection rates and recovery rates.

    Attributes:
        beta: n x n nonnegative matrix; beta[i, j] is the rate at which
            infection in group j infects group i (1/time).
        delta: length-n vector of strictly positive recovery rates (1/time).
    """

    beta: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        beta = _freeze(np.atleast_2d(self.beta))
        delta = _freeze(np.atleast_1d(self.delta))
        if beta.shape[0] != beta.shape[1]:
            raise DimensionMismatch(f"beta must be square, got {beta.shape}")
        if delta.ndim != 1 or delta.shape[0] != beta.shape[0]:
            raise DimensionMismatch(
                f"delta must have length {beta.shape[0]}, got {delta.shape}")
        bad = np.argwhere(beta < 0)
        if bad.size:
            i, j = bad[0]
            raise NegativeEntry(f"beta[{i},{j}] = {beta[i, j]} must be >= 0")
        bad = np.argwhere(~(delta > 0))
        if bad.size:
            i = bad[0][0]
            raise NegativeEntry(f"delta[{i}] = {delta[i]} must be > 0")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "delta", delta)

    @property
    def n(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True)
class InfrastructureLayer:
    """Pathogen flow rates between infrastructure nodes and decay rates.

    Attributes:
        alpha: m x m flow matrix.  Off-diagonal entries must be
            nonnegative; alpha[k, j] is the flow rate from node k into
            node j.  The diagonal carries the (nonpositive, under A2)
            self terms; under A2 each column must sum to zero.
        delta_w: length-m vector of nonnegative decay rates (1/time).
    """

    alpha: np.ndarray
    delta_w: np.ndarray

    def __post_init__(self):
        alpha = _freeze(np.atleast_2d(self.alpha))
        delta_w = _freeze(np.atleast_1d(self.delta_w))
        if alpha.shape[0] != alpha.shape[1]:
            raise DimensionMismatch(f"alpha must be square, got {alpha.shape}")
        if delta_w.ndim != 1 or delta_w.shape[0] != alpha.shape[0]:
            raise DimensionMismatch(
                f"delta_w must have length {alpha.shape[0]}, got {delta_w.shape}")
        off = alpha.copy()
        np.fill_diagonal(off, 0.0)
        bad = np.argwhere(off < 0)
        if bad.size:
            k, j = bad[0]
            raise NegativeEntry(f"alpha[{k},{j}] = {alpha[k, j]} must be >= 0")
        bad = np.argwhere(delta_w < 0)
        if bad.size:
            j = bad[0][0]
            raise NegativeEntry(f"delta_w[{j}] = {delta_w[j]} must be >= 0")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta_w", delta_w)

    @property
    def m(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True)
class CouplingLayer:
    """Cross-layer rates.

    Attributes:
        beta_w: n x m nonnegative matrix of infrastructure-to-person rates.
        c_w: m x n nonnegative matrix of person-to-infrastructure rates.
    """

    beta_w: np.ndarray
    c_w: np.ndarray

    def __post_init__(self):
        beta_w = _freeze(np.atleast_2d(self.beta_w))
        c_w = _freeze(np.atleast_2d(self.c_w))
        if beta_w.shape != (c_w.shape[1], c_w.shape[0]):
            raise DimensionMismatch(
                f"beta_w {beta_w.shape} and c_w {c_w.shape} must be "
                "n x m and m x n")
        for name, mat in (("beta_w", beta_w), ("c_w", c_w)):
            bad = np.argwhere(mat < 0)
            if bad.size:
                i, j = bad[0]
                raise NegativeEntry(f"{name}[{i},{j}] = {mat[i, j]} must be >= 0")
        object.__setattr__(self, "beta_w", beta_w)
        object.__setattr__(self, "c_w", c_w)


@dataclass(frozen=True)
class State:
    """Concatenated state z = (x, w): infection fractions and contamination.

    Construction only checks dimensions; membership in the invariant
    domain [0,1]^n x [0,inf)^m is reported by `in_domain` and enforced
    by `project_to_domain`.
    """

    x: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        x = _freeze(np.atleast_1d(self.x))
        w = _freeze(np.atleast_1d(self.w))
        if x.ndim != 1 or w.ndim != 1:
            raise DimensionMismatch("state components must be vectors")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_z(cls, z: np.ndarray, n: int) -> "State":
        z = np.asarray(z, dtype=float)
        if z.ndim != 1 or z.shape[0] < n:
            raise DimensionMismatch(
                f"state vector must be 1-d with at least {n} entries")
        return cls(x=z[:n], w=z[n:])

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.w])

    @property
    def in_domain(self) -> bool:
        return bool(np.all(self.x >= 0) and np.all(self.x <= 1)
                    and np.all(self.w >= 0))


@dataclass(frozen=True)
class LayeredModel:
    """Validated parameter bundle with assembled block matrices.

    Immutable after validation; safe to share read-only across threads.
    `regime` is the regime the caller declared (and that was verified);
    `satisfies_a1` / `satisfies_a2` record which regimes the parameters
    actually satisfy, so downstream threshold results gate correctly.
    """

    pop: PopulationLayer
    infra: InfrastructureLayer
    coupling: CouplingLayer
    regime: Regime
    b_f: np.ndarray
    d_f: np.ndarray
    satisfies_a1: bool
    satisfies_a2: bool

    @property
    def n(self) -> int:
        return self.pop.n

    @property
    def m(self) -> int:
        return self.infra.m

    @property
    def size(self) -> int:
        return self.n + self.m

    @cached_property
    def d_diag(self) -> np.ndarray:
        """Diagonal of d_f as a vector (d_f is diagonal and positive)."""
        return _freeze(np.diag(self.d_f))


# Tolerance for the A2 zero-column-sum structure, scaled by the largest
# flow rate.  Strict positivity checks are exact (no epsilon): binary
# rate matrices make the sign tests unambiguous.
_COLUMN_SUM_RTOL = 1e-14


def _check_cross_dims(pop: PopulationLayer, infra: InfrastructureLayer,
                      coupling: CouplingLayer) -> None:
    _check_matrix("beta_w", coupling.beta_w, (pop.n, infra.m))
    _check_matrix("c_w", coupling.c_w, (infra.m, pop.n))


def assemble_blocks(pop: PopulationLayer, infra: InfrastructureLayer,
                    coupling: CouplingLayer) -> tuple[np.ndarray, np.ndarray]:
    """Assemble (b_f, d_f) from layers without regime gating.

    The flow matrix splits into its off-diagonal part (into b_f) and its
    diagonal (absorbed into d_f); the represented dynamics are unchanged.
    """
    _check_cross_dims(pop, infra, coupling)
    off = infra.alpha.copy()
    np.fill_diagonal(off, 0.0)
    b_f = np.block([[pop.beta, coupling.beta_w], [coupling.c_w, off]])
    d_f = np.diag(np.concatenate([pop.delta,
                                  infra.delta_w - np.diag(infra.alpha)]))
    return _freeze(b_f), _freeze(d_f)


def _regime_failures(pop: PopulationLayer, infra: InfrastructureLayer):
    """Return (a1_failures, a2_failures) as lists of messages."""
    alpha, delta_w = infra.alpha, infra.delta_w
    off = alpha.copy()
    np.fill_diagonal(off, 0.0)
    inflow = off.sum(axis=0)

    a1 = []
    for j in range(infra.m):
        if not delta_w[j] + inflow[j] > 0:
            a1.append(
                f"A1 requires delta_w[{j}] + sum_k alpha[k,{j}] > 0 "
                f"(got {delta_w[j] + inflow[j]})")

    a2 = []
    for j in range(infra.m):
        if not delta_w[j] > 0:
            a2.append(f"A2 requires delta_w[{j}] > 0 (got {delta_w[j]})")
    col_sums = alpha.sum(axis=0)
    tol = _COLUMN_SUM_RTOL * max(np.abs(alpha).max(), 0.0) if alpha.size else 0.0
    for j in range(infra.m):
        if abs(col_sums[j]) > tol:
            a2.append(
                f"A2 requires column {j} of alpha to sum to zero, i.e. "
                f"alpha[{j},{j}] = -sum(off-diagonal column), got sum "
                f"{col_sums[j]!r}")
    return a1, a2


def validate_model(
    pop: PopulationLayer,
    infra: InfrastructureLayer,
    coupling: CouplingLayer,
    regime: Regime | str = Regime.A2,
) -> LayeredModel:
    """Validate layers against a regime and assemble b_f / d_f.

    Args:
        pop: Population layer (beta, delta).
        infra: Infrastructure layer (alpha, delta_w).
        coupling: Cross-layer rates (beta_w, c_w).
        regime: Declared regime; the corresponding inequalities are
            verified and a violation raises `RegimeViolation` naming the
            failed inequality.

    Returns:
        Immutable LayeredModel with assembled block matrices and flags
        recording which regimes the parameters satisfy.

    Raises:
        DimensionMismatch: Cross-layer shapes are inconsistent.
        RegimeViolation: The declared regime's inequalities fail, or the
            assembled d_f would not have a strictly positive diagonal.
    """
    regime = Regime(regime)
    _check_cross_dims(pop, infra, coupling)
    m = infra.m

    a1_fail, a2_fail = _regime_failures(pop, infra)
    satisfies_a1 = not a1_fail
    satisfies_a2 = not a2_fail
    if regime is Regime.A1 and a1_fail:
        raise RegimeViolation(a1_fail[0])
    if regime is Regime.A2 and a2_fail:
        raise RegimeViolation(a2_fail[0])

    # d_f must be invertible regardless of regime: w-block diagonal is
    # delta_w[j] - alpha[j,j].
    d_w_eff = infra.delta_w - np.diag(infra.alpha)
    for j in range(m):
        if not d_w_eff[j] > 0:
            raise RegimeViolation(
                f"d_f diagonal must be positive: delta_w[{j}] - "
                f"alpha[{j},{j}] = {d_w_eff[j]} <= 0")

    b_f, d_f = assemble_blocks(pop, infra, coupling)
    return LayeredModel(
        pop=pop,
        infra=infra,
        coupling=coupling,
        regime=regime,
        b_f=b_f,
        d_f=d_f,
        satisfies_a1=satisfies_a1,
        satisfies_a2=satisfies_a2,
    )


def project_to_domain(z: np.ndarray, n: int) -> tuple[State, float]:
    """Clamp a raw vector onto [0,1]^n x [0,inf)^m.

    Total function: never raises for finite input of the right length.

    Returns:
        (state, clamp): the projected state and the largest componentwise
        clamp magnitude applied (0.0 when z was already in the domain).
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.shape[0] < n:
        raise DimensionMismatch(
            f"state vector must be 1-d with at least {n} entries")
    clamped = z.copy()
    clamped[:n] = np.clip(clamped[:n], 0.0, 1.0)
    clamped[n:] = np.maximum(clamped[n:], 0.0)
    clamp = float(np.max(np.abs(clamped - z))) if z.size else 0.0
    return State(x=clamped[:n], w=clamped[n:]), clamp


def model_from_dict(cfg: dict) -> LayeredModel:
    """Build a validated model from the JSON scenario schema.

    Expected keys: "population" {"beta", "delta"}, "infrastructure"
    {"alpha", "delta_w"}, "coupling" {"beta_w", "c_w"}, "regime".
    """
    try:
        pop = PopulationLayer(
            beta=np.array(cfg["population"]["beta"], dtype=float),
            delta=np.array(cfg["population"]["delta"], dtype=float),
        )
        infra = InfrastructureLayer(
            alpha=np.array(cfg["infrastructure"]["alpha"], dtype=float),
            delta_w=np.array(cfg["infrastructure"]["delta_w"], dtype=float),
        )
        coupling = CouplingLayer(
            beta_w=np.array(cfg["coupling"]["beta_w"], dtype=float),
            c_w=np.array(cfg["coupling"]["c_w"], dtype=float),
        )
        regime = Regime(cfg.get("regime", "A2"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (DimensionMismatch, NegativeEntry)):
            raise
        raise ParseError(f"bad model section: {exc}") from exc
    return validate_model(pop, infra, coupling, regime)


def model_to_dict(model: LayeredModel) -> dict:
    """Inverse of `model_from_dict` (raw parameters, not assembled blocks)."""
    return {
        "population": {
            "beta": model.pop.beta.tolist(),
            "delta": model.pop.delta.tolist(),
        },
        "infrastructure": {
            "alpha": model.infra.alpha.tolist(),
            "delta_w": model.infra.delta_w.tolist(),
        },
        "coupling": {
            "beta_w": model.coupling.beta_w.tolist(),
            "c_w": model.coupling.c_w.tolist(),
        },
        "regime": model.regime.value,
    }
