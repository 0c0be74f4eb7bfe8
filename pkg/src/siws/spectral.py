"""Spectral analysis for nonnegative and Metzler matrices.

Irreducibility, reproduction number rho(d_f^-1 b_f), stability margin
s(M), Perron pairs, and diagonal Lyapunov certificates.  The spectral
radius is always computed twice (dense eigensolver + certified
Collatz-Wielandt power iteration) so that a library-level eigen bug
cannot pass silently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .errors import (CertificateNotFound, DimensionMismatch, EigenFailure,
                     HypothesisViolated, MetzlerViolation, NotIrreducible)
from .model import LayeredModel

__all__ = [
    "ThresholdClass",
    "SpectralReport",
    "LyapunovCertificate",
    "MultiplicityWarning",
    "CRITICAL_BAND",
    "is_irreducible",
    "reproduction_number",
    "stability_margin",
    "spectral_radius",
    "perron_pair",
    "diagonal_lyapunov",
]

# Width of the band |rho - 1| <= CRITICAL_BAND reported as Critical:
# floating point cannot hit the threshold exactly, so it is reported,
# never silently rounded.
CRITICAL_BAND = 1e-9


class ThresholdClass(str, Enum):
    SUB_THRESHOLD = "SubThreshold"
    CRITICAL = "Critical"
    SUPER_THRESHOLD = "SuperThreshold"


class MultiplicityWarning(UserWarning):
    """Dominant eigenvalue has no machine-detectable simplicity gap."""


def _square(mat) -> np.ndarray:
    M = np.asarray(mat, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {M.shape}")
    return M


def is_irreducible(mat) -> bool:
    """True iff the digraph of the nonzero pattern is strongly connected."""
    M = _square(mat)
    graph = sp.csr_matrix((M != 0).astype(np.int8))
    ncomp, _ = csgraph.connected_components(graph, directed=True,
                                            connection="strong")
    return int(ncomp) == 1


def _check_metzler(M: np.ndarray) -> None:
    off = M.copy()
    np.fill_diagonal(off, 0.0)
    bad = np.argwhere(off < 0)
    if bad.size:
        i, j = bad[0]
        raise MetzlerViolation(
            f"off-diagonal entry [{i},{j}] = {M[i, j]} must be >= 0")


def stability_margin(mat) -> float:
    """Largest real part among the eigenvalues of a Metzler matrix."""
    M = _square(mat)
    _check_metzler(M)
    try:
        vals = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"eigensolver failed: {exc}") from exc
    return float(vals.real.max())


def spectral_radius(mat) -> float:
    """Dense-eigensolver spectral radius (no cross-check)."""
    M = _square(mat)
    if M.size == 0:
        return 0.0
    try:
        vals = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"eigensolver failed: {exc}") from exc
    return float(np.abs(vals).max())


def _collatz_wielandt(N: np.ndarray, tol: float = 1e-12,
                      max_iter: int = 300_000) -> tuple[float, np.ndarray]:
    """Certified rho(N) bracket for irreducible nonnegative N.

    Iterates on N + I to break periodicity; min/max of the componentwise
    ratios bracket the Perron value at every step.
    """
    dim = N.shape[0]
    shifted = N + np.eye(dim)
    v = np.full(dim, 1.0 / np.sqrt(dim))
    lo = hi = np.nan
    for _ in range(max_iter):
        w = shifted @ v
        ratios = w / v
        lo = float(ratios.min())
        hi = float(ratios.max())
        if hi - lo <= tol * max(hi, 1.0):
            v = w / np.linalg.norm(w)
            return 0.5 * (lo + hi) - 1.0, v
        v = w / np.linalg.norm(w)
    raise EigenFailure(
        f"power iteration did not converge; last bracket "
        f"[{lo - 1.0!r}, {hi - 1.0!r}]")


def perron_pair(mat) -> tuple[float, np.ndarray, np.ndarray]:
    """Perron value and strictly positive right/left unit vectors.

    Valid for irreducible matrices that are nonnegative or Metzler (a
    diagonal shift reduces the latter to the former).  Warns with
    `MultiplicityWarning` when another eigenvalue sits within 1e-9 of
    the dominant one.

    Returns:
        (value, right, left): for nonnegative input `value` is rho(M),
        for Metzler input it is s(M); vectors have unit 2-norm.
    """
    M = _square(mat)
    if not is_irreducible(M):
        raise NotIrreducible("matrix pattern is not strongly connected")
    _check_metzler(M)
    shift = 1.0 + max(0.0, -float(np.diag(M).min()))
    N = M + shift * np.eye(M.shape[0])
    rho_n, right = _collatz_wielandt(N)
    _, left = _collatz_wielandt(np.ascontiguousarray(N.T))
    value = rho_n - shift

    try:
        vals = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"eigensolver failed: {exc}") from exc
    gaps = np.sort(np.abs(vals - (value + 0j)))
    if len(gaps) > 1 and gaps[1] < 1e-9 * max(1.0, abs(value)):
        warnings.warn(
            f"dominant eigenvalue {value!r} has a near-multiple within "
            f"{gaps[1]!r}", MultiplicityWarning)

    if not (np.all(right > 0) and np.all(left > 0)):
        raise EigenFailure("computed dominant eigenvector is not positive")
    return value, right, left


@dataclass(frozen=True)
class SpectralReport:
    """Threshold analysis of a layered model.

    rho is the reproduction number rho(d_f^-1 b_f); rho_pop the
    population-only threshold rho(D^-1 B); s_margin = s(b_f - d_f).
    Perron vectors are present iff b_f is irreducible.
    """

    rho: float
    s_margin: float
    irreducible: bool
    rho_pop: float
    classification: ThresholdClass
    perron_right: np.ndarray | None = None
    perron_left: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "s_margin": self.s_margin,
            "irreducible": self.irreducible,
            "rho_pop": self.rho_pop,
            "classification": self.classification.value,
            "perron_right": None if self.perron_right is None
            else self.perron_right.tolist(),
            "perron_left": None if self.perron_left is None
            else self.perron_left.tolist(),
        }


def classify_rho(rho: float, band: float = CRITICAL_BAND) -> ThresholdClass:
    if abs(rho - 1.0) <= band:
        return ThresholdClass.CRITICAL
    if rho < 1.0:
        return ThresholdClass.SUB_THRESHOLD
    return ThresholdClass.SUPER_THRESHOLD


def reproduction_number(model: LayeredModel) -> SpectralReport:
    """Reproduction number and stability margin of a layered model.

    The dense-eigensolver value of rho is cross-validated by power
    iteration whenever b_f is irreducible; a relative discrepancy above
    1e-9 raises EigenFailure.
    """
    R = model.b_f / model.d_diag[:, None]
    rho = spectral_radius(R)
    irr = is_irreducible(model.b_f)

    right = left = None
    if irr:
        rho_pi, right = _collatz_wielandt(R)
        if abs(rho_pi - rho) > 1e-9 * max(rho, 1.0):
            raise EigenFailure(
                f"power iteration rho {rho_pi!r} disagrees with dense "
                f"eigensolver rho {rho!r}")
        _, left = _collatz_wielandt(np.ascontiguousarray(R.T))
        resid = np.max(np.abs(R @ right - rho * right))
        resid_l = np.max(np.abs(R.T @ left - rho * left))
        if max(resid, resid_l) > 1e-10 * max(rho, 1.0):
            raise EigenFailure(
                f"Perron vector residual {max(resid, resid_l)!r} too large")

    rho_pop = spectral_radius(model.pop.beta / model.pop.delta[:, None])
    s_margin = stability_margin(model.b_f - model.d_f)
    return SpectralReport(
        rho=rho,
        s_margin=s_margin,
        irreducible=irr,
        rho_pop=rho_pop,
        classification=classify_rho(rho),
        perron_right=right,
        perron_left=left,
    )


@dataclass(frozen=True)
class LyapunovCertificate:
    """Diagonal P with a verified sign of lambda_max(M^T P + P M).

    strict=True certifies negative definiteness; strict=False certifies
    negative semidefiniteness up to the 1e-9 verification tolerance.
    """

    p_diag: np.ndarray
    sym_max_eig: float
    strict: bool


_NONSTRICT_TOL = 1e-9
_REFINE_STEPS = 10_000


def _sym_max_eig(M: np.ndarray, p: np.ndarray) -> tuple[float, np.ndarray]:
    Q = M.T * p[None, :] + p[:, None] * M
    vals, vecs = np.linalg.eigh(Q)
    return float(vals[-1]), vecs[:, -1]


def diagonal_lyapunov(mat, strict: bool = True) -> LyapunovCertificate:
    """Diagonal Lyapunov certificate for an irreducible Metzler matrix.

    The candidate is P = diag(u_i / v_i) with v, u the right and left
    dominant eigenvectors of M.  The candidate is always verified a
    posteriori; on failure it is refined by projected gradient descent
    on lambda_max before giving up.

    Args:
        mat: Irreducible Metzler matrix.
        strict: Certify definiteness (requires s(M) < 0); otherwise
            semidefiniteness (requires s(M) <= 0).

    Raises:
        HypothesisViolated: s(M) has the wrong sign for the request.
        CertificateNotFound: Refinement exhausted; carries the best
            candidate and its lambda_max.
    """
    M = _square(mat)
    _check_metzler(M)
    if not is_irreducible(M):
        raise NotIrreducible("matrix pattern is not strongly connected")
    s = stability_margin(M)
    scale = max(1.0, float(np.abs(M).max()))
    if strict and not s < 0:
        raise HypothesisViolated(f"strict certificate requires s(M) < 0, got {s!r}")
    if not strict and s > _NONSTRICT_TOL * scale:
        raise HypothesisViolated(f"certificate requires s(M) <= 0, got {s!r}")

    _, v, u = perron_pair(M)
    p = u / v
    p = p / p.max()

    lam, _ = _sym_max_eig(M, p)
    ok = (lam < 0) if strict else (lam <= _NONSTRICT_TOL)
    if ok:
        return LyapunovCertificate(p_diag=p, sym_max_eig=lam, strict=strict)

    # Certificate refinement: d lambda_max / d p_i = 2 phi_i (M phi)_i
    # where phi is the top eigenvector of the symmetrized matrix.
    best_p, best_lam = p.copy(), lam
    step = 1e-2 / scale
    for _ in range(_REFINE_STEPS):
        lam, phi = _sym_max_eig(M, p)
        if lam < best_lam:
            best_lam, best_p = lam, p.copy()
        ok = (lam < 0) if strict else (lam <= _NONSTRICT_TOL)
        if ok:
            return LyapunovCertificate(p_diag=p, sym_max_eig=lam, strict=strict)
        grad = 2.0 * phi * (M @ phi)
        p = p - step * grad
        p = np.maximum(p, 1e-12)
        p = p / p.max()
    raise CertificateNotFound(
        f"no diagonal certificate found; best lambda_max {best_lam!r}",
        p_diag=best_p, sym_max_eig=best_lam)
