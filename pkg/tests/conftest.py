"""Shared fixtures and model factories for the test suite."""

import numpy as np
import pytest

from siws.model import (CouplingLayer, InfrastructureLayer, LayeredModel,
                        PopulationLayer, validate_model)
from siws.scenario import _sample_layers, generate_random_scenario
from siws.spectral import is_irreducible, spectral_radius


def scalar_layers(beta=2.0, delta=1.0, beta_w=1.0, c_w=1.0, delta_w=1.0,
                  alpha=0.0):
    pop = PopulationLayer(beta=[[beta]], delta=[delta])
    infra = InfrastructureLayer(alpha=[[alpha]], delta_w=[delta_w])
    coup = CouplingLayer(beta_w=[[beta_w]], c_w=[[c_w]])
    return pop, infra, coup


@pytest.fixture
def scalar_super() -> LayeredModel:
    """1+1 model with rho = 1 + sqrt(2) and endemic point (2/3, 2/3)."""
    return validate_model(*scalar_layers(), regime="A2")


@pytest.fixture
def scalar_sub() -> LayeredModel:
    """1+1 model with rho = (1 + sqrt(5)) / 4 ~= 0.809."""
    return validate_model(*scalar_layers(beta=1.0, delta=2.0, delta_w=2.0),
                          regime="A2")


def model_from_cfg(cfg: dict) -> LayeredModel:
    from siws.model import model_from_dict

    return model_from_dict(cfg)


def random_model(seed: int, target: str = "SuperThreshold", n: int = 4,
                 m: int = 3, density: float = 0.6,
                 target_rho: float | None = None) -> LayeredModel:
    """Generated irreducible A2 model with rho placed per target."""
    cfg = generate_random_scenario(n, m, density, seed, target,
                                   target_rho=target_rho)
    return model_from_cfg(cfg)


def random_unscaled_model(rng: np.random.Generator, n: int = 4, m: int = 3,
                          density: float = 0.6) -> LayeredModel:
    """Irreducible A2 model with whatever threshold the draw produced."""
    for _ in range(1000):
        beta, delta, alpha, delta_w, beta_w, c_w = _sample_layers(
            rng, n, m, density)
        pop = PopulationLayer(beta=beta, delta=delta)
        infra = InfrastructureLayer(alpha=alpha, delta_w=delta_w)
        coup = CouplingLayer(beta_w=beta_w, c_w=c_w)
        model = validate_model(pop, infra, coup, "A2")
        if is_irreducible(model.b_f):
            return model
    raise AssertionError("could not sample an irreducible model")


def both_super_model(seed: int, n: int = 4, m: int = 3,
                     density: float = 0.7,
                     rho_pop_target: float = 1.3) -> LayeredModel:
    """A2 model with both thresholds above 1 and both B, b_f irreducible.

    rho(D^-1 B) scales exactly as 1/sigma under a uniform rate rescale,
    so the population threshold can be placed in closed form; the full
    threshold then dominates it.
    """
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        beta, delta, alpha, delta_w, beta_w, c_w = _sample_layers(
            rng, n, m, density)
        off = alpha.copy()
        np.fill_diagonal(off, 0.0)
        b_f = np.block([[beta, beta_w], [c_w, off]])
        if is_irreducible(beta) and is_irreducible(b_f):
            break
    else:
        raise AssertionError("could not sample irreducible B and b_f")
    rho_pop = spectral_radius(beta / delta[:, None])
    scale = rho_pop / rho_pop_target
    pop = PopulationLayer(beta=beta, delta=scale * delta)
    infra = InfrastructureLayer(alpha=alpha, delta_w=scale * delta_w)
    coup = CouplingLayer(beta_w=beta_w, c_w=c_w)
    return validate_model(pop, infra, coup, "A2")


def random_metzler_hurwitz(rng: np.random.Generator, max_size: int = 20):
    """Random irreducible Metzler matrix shifted to be Hurwitz."""
    from siws.spectral import stability_margin

    while True:
        k = int(rng.integers(2, max_size + 1))
        mask = rng.random((k, k)) < 0.5
        M = np.where(mask, rng.uniform(0.1, 2.0, (k, k)), 0.0)
        np.fill_diagonal(M, rng.uniform(-2.0, 0.0, k))
        if not is_irreducible(M):
            continue
        s = stability_margin(M)
        margin = rng.uniform(0.1, 1.0)
        return M - (s + margin) * np.eye(k)
