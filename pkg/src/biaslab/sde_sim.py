"""Euler-Maruyama simulation of the diffusion matched to grouped SGD.

The matched diffusion moves with drift equal to minus the population
gradient and diffusion coefficient ``eta * Sigma(theta)``, where ``Sigma``
is the per-draw gradient variance of the sampling scheme.  With the time
step set to ``eta`` (the default), one Euler-Maruyama step mirrors one SGD
step with its gradient noise replaced by a Gaussian of matched variance, so
terminal-state distributions can be compared step-for-step.

:func:`weak_distance` runs both processes from the same initial point for
the same horizon and returns the total-variation distance between binned
terminal states — the empirical weak-approximation gap, expected to shrink
as ``eta`` does.  For multi-dimensional losses the diffusion is isotropic
per region with the region's leading variance scalar, and binned statistics
use the first coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .grad_sampler import (
    Scheme,
    _scheme_draw_params,
    region_variance_scalar,
    variance_grad,
)
from .mixture_loss import GroupedLossMultiD, as_weights
from .rng import (
    STREAM_SDE_ENSEMBLE,
    STREAM_SDE_RUN,
    STREAM_SGD_ENSEMBLE,
    make_generator,
)
from .sgd_engine import DIVERGENCE_LIMIT, Histogram, Trajectory

__all__ = [
    "SdeConfig",
    "euler_maruyama",
    "em_histogram",
    "weak_distance",
    "tv_distance",
]


@dataclass(frozen=True)
class SdeConfig:
    """Euler-Maruyama run parameters; ``steps = horizon / dt`` (rounded)."""

    dt: float
    horizon: float
    theta0: float | tuple[float, ...]
    replicas: int = 1
    seed: int = 0
    burn_in: float = 0.5

    def __post_init__(self) -> None:
        problems = []
        if not (math.isfinite(self.dt) and self.dt > 0):
            problems.append(f"dt must be positive, got {self.dt!r}")
        elif not (math.isfinite(self.horizon) and self.horizon >= self.dt):
            problems.append(
                f"horizon must be at least one step ({self.dt}), got {self.horizon!r}"
            )
        if int(self.replicas) != self.replicas or self.replicas < 1:
            problems.append(f"replicas must be a positive integer, got {self.replicas!r}")
        if not 0.0 <= self.burn_in < 1.0:
            problems.append(f"burn_in must lie in [0, 1), got {self.burn_in!r}")
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "replicas", int(self.replicas))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


def _diffusion_scale(loss, scheme, a, f, theta, eta):
    """sqrt(eta * Sigma) per replica; isotropic per region in multi-D."""
    if isinstance(loss, GroupedLossMultiD):
        regions = loss.region_of(theta)
        scalars = np.array(
            [
                region_variance_scalar(scheme, loss, a, f, g)
                for g in range(loss.num_groups)
            ]
        )
        s2 = scalars[regions]
    else:
        s2 = variance_grad(scheme, loss, a, f, theta)
    return np.sqrt(eta * np.maximum(s2, 0.0))


def euler_maruyama(loss, scheme, a, f, eta: float, config: SdeConfig) -> Trajectory:
    """Simulate one diffusion path; returns every iterate like the SGD runner."""
    scheme, _, _ = _scheme_draw_params(scheme, a, f, loss.num_groups)
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta!r}")
    aw = as_weights(a, loss.num_groups)
    gen = make_generator(config.seed, STREAM_SDE_RUN)
    dt = float(config.dt)
    root_dt = math.sqrt(dt)
    steps = config.steps

    multi = isinstance(loss, GroupedLossMultiD)
    theta = (
        np.asarray(config.theta0, dtype=float) if multi else float(config.theta0)
    )
    noise = gen.standard_normal((steps, loss.dimension) if multi else steps)
    iterates = [np.array(theta) if multi else theta]
    for k in range(steps):
        mu = loss.population_grad(theta, aw)
        if multi:
            scale = float(_diffusion_scale(loss, scheme, a, f, theta, eta))
            theta = theta - dt * np.asarray(mu) + scale * root_dt * noise[k]
            size = float(np.linalg.norm(theta))
        else:
            scale = float(_diffusion_scale(loss, scheme, a, f, theta, eta))
            theta = theta - dt * float(mu) + scale * root_dt * float(noise[k])
            size = abs(theta)
        if size > DIVERGENCE_LIMIT:
            raise DivergenceError(k + 1)
        iterates.append(np.array(theta) if multi else theta)
    return Trajectory(np.asarray(iterates), config.seed)


def _em_ensemble(loss, scheme, a, f, eta, config: SdeConfig, collect=None):
    """Vectorized diffusion ensemble; returns terminal states.

    ``collect(k, theta, alive)`` is invoked after every step when given
    (used for pooled statistics); diverged replicas freeze in place.
    """
    aw = as_weights(a, loss.num_groups)
    gen = make_generator(config.seed, STREAM_SDE_ENSEMBLE)
    dt = float(config.dt)
    root_dt = math.sqrt(dt)
    steps = config.steps
    replicas = config.replicas

    multi = isinstance(loss, GroupedLossMultiD)
    if multi:
        theta0 = np.asarray(config.theta0, dtype=float)
        theta = np.tile(theta0, (replicas, 1))
    else:
        theta = np.full(replicas, float(config.theta0))
    alive = np.ones(replicas, dtype=bool)

    for k in range(steps):
        mu = loss.population_grad(theta, aw)
        scale = _diffusion_scale(loss, scheme, a, f, theta, eta)
        if multi:
            z = gen.standard_normal((replicas, loss.dimension))
            proposal = theta - dt * mu + (scale * root_dt)[:, None] * z
            size = np.linalg.norm(proposal, axis=1)
        else:
            z = gen.standard_normal(replicas)
            proposal = theta - dt * mu + scale * root_dt * z
            size = np.abs(proposal)
        ok = alive & (size <= DIVERGENCE_LIMIT)
        if multi:
            theta[ok] = proposal[ok]
        else:
            theta = np.where(ok, proposal, theta)
        alive &= size <= DIVERGENCE_LIMIT
        if collect is not None:
            collect(k + 1, theta, alive)
    return theta, alive


def em_histogram(
    loss,
    scheme,
    a,
    f,
    eta: float,
    config: SdeConfig,
    bins: int = 120,
    domain: tuple[float, float] = (-3.0, 3.0),
) -> Histogram:
    """Pooled post-burn-in histogram of a diffusion ensemble."""
    scheme, _, _ = _scheme_draw_params(scheme, a, f, loss.num_groups)
    lo, hi = float(domain[0]), float(domain[1])
    if not (bins >= 1 and lo < hi):
        raise ConfigError(f"invalid histogram request bins={bins} domain={domain!r}")
    burn_start = int(math.floor(config.burn_in * config.steps))
    width = (hi - lo) / bins
    counts = np.zeros(bins, dtype=np.int64)
    state = {"outside": 0, "samples": 0}
    multi = isinstance(loss, GroupedLossMultiD)

    def collect(k, theta, alive):
        if k < burn_start or not np.any(alive):
            return
        x = theta[alive, 0] if multi else theta[alive]
        idx = np.floor((x - lo) / width).astype(np.int64)
        inside = (idx >= 0) & (idx < bins) & (x >= lo) & (x < hi)
        counts[:] += np.bincount(idx[inside], minlength=bins)
        state["outside"] += int(np.sum(~inside))
        state["samples"] += x.size

    _em_ensemble(loss, scheme, a, f, eta, config, collect=collect)
    return Histogram(
        edges=np.linspace(lo, hi, bins + 1),
        counts=counts,
        outside=state["outside"],
        samples=state["samples"],
    )


def tv_distance(h1: Histogram, h2: Histogram) -> float:
    """Total-variation distance between two histograms on identical bins."""
    if h1.edges.shape != h2.edges.shape or not np.allclose(
        h1.edges, h2.edges, atol=1e-12
    ):
        raise ConfigError("histograms must share identical bin edges")
    return 0.5 * (
        float(np.sum(np.abs(h1.mass - h2.mass)))
        + abs(h1.outside_mass - h2.outside_mass)
    )


def weak_distance(
    loss,
    scheme,
    a,
    f,
    eta: float,
    horizon: float,
    replicas: int,
    bins: int = 40,
    domain: tuple[float, float] = (-3.0, 3.0),
    theta0: float | tuple[float, ...] = 0.0,
    seed: int = 0,
) -> float:
    """Terminal-state TV distance between SGD and its matched diffusion.

    Both processes run ``horizon / eta`` steps (SGD with learning rate
    ``eta``, the diffusion with time step ``eta``) from ``theta0`` with
    ``replicas`` independent paths each, and their terminal states are
    binned on the shared grid.  The Monte Carlo noise floor scales like
    ``0.4 * sqrt(bins / replicas)``.
    """
    scheme, probs, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
    if eta <= 0 or horizon < eta:
        raise ConfigError(
            f"need 0 < eta <= horizon, got eta={eta!r} horizon={horizon!r}"
        )
    if replicas < 2:
        raise ConfigError(f"replicas must be at least 2, got {replicas!r}")
    steps = max(1, int(round(horizon / eta)))
    lo, hi = float(domain[0]), float(domain[1])
    if not (bins >= 1 and lo < hi):
        raise ConfigError(f"invalid histogram request bins={bins} domain={domain!r}")

    multi = isinstance(loss, GroupedLossMultiD)

    # SGD ensemble (lean terminal-only loop, same update as the SGD engine).
    gen = make_generator(seed, STREAM_SGD_ENSEMBLE)
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    if multi:
        theta = np.tile(np.asarray(theta0, dtype=float), (replicas, 1))
    else:
        theta = np.full(replicas, float(theta0))
    alive = np.ones(replicas, dtype=bool)
    for _ in range(steps):
        groups = np.searchsorted(cum, gen.random(replicas), side="right")
        w = weights[groups]
        grads = loss.grad_for_groups(theta, groups)
        proposal = theta - eta * (w[:, None] * grads if multi else w * grads)
        size = np.linalg.norm(proposal, axis=1) if multi else np.abs(proposal)
        ok = alive & (size <= DIVERGENCE_LIMIT)
        if multi:
            theta[ok] = proposal[ok]
        else:
            theta = np.where(ok, proposal, theta)
        alive &= size <= DIVERGENCE_LIMIT
    sgd_terminal = theta

    config = SdeConfig(
        dt=eta, horizon=horizon, theta0=theta0, replicas=replicas, seed=seed
    )
    em_terminal, _ = _em_ensemble(loss, scheme, a, f, eta, config)

    def bin_terminal(values) -> Histogram:
        x = values[:, 0] if multi else values
        counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
        return Histogram(
            edges=edges,
            counts=counts.astype(np.int64),
            outside=int(x.size - counts.sum()),
            samples=int(x.size),
        )

    return tv_distance(bin_terminal(sgd_terminal), bin_terminal(em_terminal))
