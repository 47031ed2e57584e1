"""Stochastic gradient descent on grouped losses.

:func:`run` produces a single iterate path; :func:`run_ensemble` evolves
many replicas in lockstep (vectorized across replicas) and accumulates
streaming statistics: per-step ensemble moments, a pooled post-burn-in
histogram, terminal iterates, and (for multi-dimensional losses) region
occupancy.  Replicas whose iterate norm exceeds ``DIVERGENCE_LIMIT`` are
frozen at their last finite value and excluded from the statistics from that
step on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DivergenceError
from .grad_sampler import Scheme, _scheme_draw_params
from .mixture_loss import GroupedLossMultiD
from .rng import STREAM_SGD_ENSEMBLE, STREAM_SGD_RUN, make_generator

__all__ = [
    "DIVERGENCE_LIMIT",
    "SgdConfig",
    "Trajectory",
    "Histogram",
    "EnsembleStats",
    "BasinFractions",
    "run",
    "run_ensemble",
    "stationary_histogram",
    "basin_fraction",
]

DIVERGENCE_LIMIT = 1e8


@dataclass(frozen=True)
class SgdConfig:
    """Run parameters shared by the single-path and ensemble drivers.

    ``burn_in`` is the fraction of steps discarded before pooled statistics
    start; ``replicas`` only matters to :func:`run_ensemble`.
    """

    learning_rate: float
    steps: int
    theta0: float | tuple[float, ...]
    replicas: int = 1
    burn_in: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        problems = []
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            problems.append(f"learning_rate must be positive, got {self.learning_rate!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            problems.append(f"steps must be a positive integer, got {self.steps!r}")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            problems.append(f"replicas must be a positive integer, got {self.replicas!r}")
        if not 0.0 <= self.burn_in < 1.0:
            problems.append(f"burn_in must lie in [0, 1), got {self.burn_in!r}")
        theta0 = self.theta0
        if np.ndim(theta0) == 0:
            if not math.isfinite(float(theta0)):
                problems.append(f"theta0 must be finite, got {theta0!r}")
            object.__setattr__(self, "theta0", float(theta0))
        else:
            vals = tuple(float(x) for x in theta0)
            if not all(math.isfinite(v) for v in vals):
                problems.append(f"theta0 must be finite, got {theta0!r}")
            object.__setattr__(self, "theta0", vals)
        if int(self.seed) != self.seed:
            problems.append(f"seed must be an integer, got {self.seed!r}")
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "replicas", int(self.replicas))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def burn_start(self) -> int:
        """First iterate index included in pooled statistics."""
        return int(math.floor(self.burn_in * self.steps))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A single iterate path, including the initial point.

    ``diverged_at`` is the step at which the path was truncated because the
    iterate norm exceeded ``DIVERGENCE_LIMIT`` (None if it never did).
    """

    iterates: np.ndarray
    seed: int
    diverged_at: int | None = None

    @property
    def final(self):
        last = self.iterates[-1]
        return float(last) if np.ndim(last) == 0 else last

    @property
    def num_steps(self) -> int:
        return len(self.iterates) - 1


@dataclass(frozen=True, eq=False)
class Histogram:
    """Fixed-bin histogram with an explicit out-of-range bucket."""

    edges: np.ndarray
    counts: np.ndarray
    outside: int
    samples: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def mass(self) -> np.ndarray:
        """Fraction of all pooled samples per bin (outside mass excluded)."""
        if self.samples == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / self.samples

    @property
    def outside_mass(self) -> float:
        return self.outside / self.samples if self.samples else 0.0

    def mode_center(self) -> float:
        """Center of the most occupied bin."""
        return float(self.centers[int(np.argmax(self.counts))])

    def density(self) -> np.ndarray:
        """Per-bin probability density (mass / bin width)."""
        widths = np.diff(self.edges)
        return self.mass / widths


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Streaming statistics of an SGD replica ensemble.

    ``step_mean[k]`` and ``second_moment[k]`` average over replicas still
    alive at iterate ``k``; ``second_moment`` is the mean squared distance
    to ``theta_ref`` (or to the origin when no reference is given).
    ``histogram`` pools every post-burn-in iterate of every alive replica.
    ``region_occupancy`` (multi-dimensional losses only) is the fraction of
    pooled samples in each region.
    """

    scheme: Scheme
    config: SgdConfig
    theta_ref: float | np.ndarray | None
    step_mean: np.ndarray
    second_moment: np.ndarray
    terminal: np.ndarray
    diverged_at: np.ndarray
    histogram: Histogram
    region_occupancy: np.ndarray | None
    pooled_samples: int

    @property
    def diverged(self) -> np.ndarray:
        return self.diverged_at >= 0

    @property
    def num_diverged(self) -> int:
        return int(np.sum(self.diverged))


def _start_generator(config: SgdConfig, stream: int):
    return make_generator(config.seed, stream)


def run(loss, scheme, a, f, config: SgdConfig, on_divergence: str = "raise") -> Trajectory:
    """Run one SGD path and return every iterate.

    ``on_divergence`` is ``"raise"`` (default, raises DivergenceError) or
    ``"truncate"`` (returns the path up to the last finite iterate, with
    ``diverged_at`` set).
    """
    if on_divergence not in ("raise", "truncate"):
        raise ConfigError(
            f"on_divergence must be 'raise' or 'truncate', got {on_divergence!r}"
        )
    scheme, probs, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
    gen = _start_generator(config, STREAM_SGD_RUN)
    eta = config.learning_rate
    steps = config.steps
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    u = gen.random(steps)
    groups = np.searchsorted(cum, u, side="right")

    multi = isinstance(loss, GroupedLossMultiD)
    theta = (
        np.asarray(config.theta0, dtype=float)
        if multi
        else float(config.theta0)
    )
    iterates = [np.array(theta) if multi else theta]
    for k in range(steps):
        g = int(groups[k])
        grad = loss.group_grad(g, theta)
        theta = theta - eta * float(weights[g]) * grad
        size = float(np.linalg.norm(theta)) if multi else abs(theta)
        if size > DIVERGENCE_LIMIT:
            if on_divergence == "raise":
                raise DivergenceError(k + 1)
            return Trajectory(np.asarray(iterates), config.seed, diverged_at=k + 1)
        iterates.append(np.array(theta) if multi else theta)
    return Trajectory(np.asarray(iterates), config.seed)


def run_ensemble(
    loss,
    scheme,
    a,
    f,
    config: SgdConfig,
    theta_ref=None,
    bins: int = 120,
    domain: tuple[float, float] = (-3.0, 3.0),
) -> EnsembleStats:
    """Evolve ``config.replicas`` SGD paths in lockstep.

    The pooled histogram covers ``domain`` with ``bins`` equal bins over the
    iterate (its first coordinate for multi-dimensional losses); samples
    outside go to the histogram's outside bucket.
    """
    scheme, probs, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
    lo, hi = (float(domain[0]), float(domain[1]))
    if not (bins >= 1 and lo < hi):
        raise ConfigError(
            [f"bins must be >= 1, got {bins}"] if bins < 1 else
            [f"domain must satisfy lo < hi, got {domain!r}"]
        )
    gen = _start_generator(config, STREAM_SGD_ENSEMBLE)
    eta = config.learning_rate
    steps = config.steps
    replicas = config.replicas
    burn_start = config.burn_start
    cum = np.cumsum(probs)
    cum[-1] = 1.0

    multi = isinstance(loss, GroupedLossMultiD)
    if multi:
        theta0 = np.asarray(config.theta0, dtype=float)
        if theta0.shape != (loss.dimension,):
            raise ConfigError(
                f"theta0 must have {loss.dimension} coordinates, got {config.theta0!r}"
            )
        theta = np.tile(theta0, (replicas, 1))
        ref = None if theta_ref is None else np.asarray(theta_ref, dtype=float)
    else:
        if np.ndim(config.theta0) != 0:
            raise ConfigError(
                f"theta0 must be a scalar for a one-dimensional loss, got {config.theta0!r}"
            )
        theta = np.full(replicas, float(config.theta0))
        ref = None if theta_ref is None else float(theta_ref)

    alive = np.ones(replicas, dtype=bool)
    diverged_at = np.full(replicas, -1, dtype=np.int64)
    mean_shape = (steps + 1, loss.dimension) if multi else (steps + 1,)
    step_mean = np.full(mean_shape, np.nan)
    second_moment = np.full(steps + 1, np.nan)

    bin_width = (hi - lo) / bins
    counts = np.zeros(bins, dtype=np.int64)
    outside = 0
    pooled = 0
    occupancy = (
        np.zeros(loss.num_groups, dtype=np.int64) if multi else None
    )

    def record_moments(k: int) -> None:
        if not np.any(alive):
            return
        live = theta[alive]
        step_mean[k] = live.mean(axis=0)
        if multi:
            dev = live - (0.0 if ref is None else ref)
            second_moment[k] = float(np.mean(np.sum(dev * dev, axis=1)))
        else:
            dev = live - (0.0 if ref is None else ref)
            second_moment[k] = float(np.mean(dev * dev))

    def record_pooled(values: np.ndarray) -> None:
        nonlocal outside, pooled
        x = values[:, 0] if multi else values
        idx = np.floor((x - lo) / bin_width).astype(np.int64)
        inside = (idx >= 0) & (idx < bins) & (x >= lo) & (x < hi)
        counts_local = np.bincount(idx[inside], minlength=bins)
        counts[:] += counts_local
        outside += int(np.sum(~inside))
        pooled += x.size
        if multi:
            regions = loss.region_of(values)
            occupancy[:] += np.bincount(regions, minlength=loss.num_groups)

    record_moments(0)
    if burn_start == 0:
        record_pooled(theta[alive])

    for k in range(steps):
        u = gen.random(replicas)
        groups = np.searchsorted(cum, u, side="right")
        w = weights[groups]
        grads = loss.grad_for_groups(theta, groups)
        if multi:
            proposal = theta - eta * w[:, None] * grads
            size = np.linalg.norm(proposal, axis=1)
        else:
            proposal = theta - eta * w * grads
            size = np.abs(proposal)
        blew_up = alive & (size > DIVERGENCE_LIMIT)
        moved = alive & ~blew_up
        if multi:
            theta[moved] = proposal[moved]
        else:
            theta = np.where(moved, proposal, theta)
        diverged_at[blew_up] = k + 1
        alive &= ~blew_up
        record_moments(k + 1)
        if k + 1 >= burn_start and np.any(alive):
            record_pooled(theta[alive])

    histogram = Histogram(
        edges=np.linspace(lo, hi, bins + 1),
        counts=counts,
        outside=outside,
        samples=pooled,
    )
    return EnsembleStats(
        scheme=scheme,
        config=config,
        theta_ref=ref,
        step_mean=step_mean,
        second_moment=second_moment,
        terminal=theta.copy() if multi else np.asarray(theta),
        diverged_at=diverged_at,
        histogram=histogram,
        region_occupancy=(occupancy / pooled if multi and pooled else None),
        pooled_samples=pooled,
    )


def stationary_histogram(
    source,
    bins: int = 120,
    domain: tuple[float, float] = (-3.0, 3.0),
    burn_in: float = 0.5,
) -> Histogram:
    """Pooled post-burn-in histogram from a trajectory or an ensemble.

    For a :class:`Trajectory`, bins the iterates with index at or beyond
    ``floor(burn_in * steps)``.  For :class:`EnsembleStats`, returns the
    histogram accumulated during the run; it must have been accumulated with
    the same ``bins``/``domain`` (ensembles stream their pooled statistics,
    so they cannot be re-binned after the fact).
    """
    if isinstance(source, EnsembleStats):
        hist = source.histogram
        lo, hi = (float(domain[0]), float(domain[1]))
        same = (
            len(hist.edges) == bins + 1
            and math.isclose(hist.edges[0], lo, abs_tol=1e-12)
            and math.isclose(hist.edges[-1], hi, abs_tol=1e-12)
        )
        if not same:
            raise ConfigError(
                "ensemble statistics were accumulated with different histogram "
                "bins/domain; re-run run_ensemble with the desired binning"
            )
        return hist
    if isinstance(source, Trajectory):
        iterates = np.asarray(source.iterates, dtype=float)
        x = iterates[:, 0] if iterates.ndim == 2 else iterates
        start = int(math.floor(burn_in * (len(x) - 1)))
        x = x[start:]
        lo, hi = (float(domain[0]), float(domain[1]))
        if not (bins >= 1 and lo < hi):
            raise ConfigError(f"invalid histogram request bins={bins} domain={domain!r}")
        counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
        inside = int(counts.sum())
        return Histogram(
            edges=edges,
            counts=counts.astype(np.int64),
            outside=int(x.size - inside),
            samples=int(x.size),
        )
    raise ConfigError(
        f"stationary_histogram expects a Trajectory or EnsembleStats, got {type(source)!r}"
    )


@dataclass(frozen=True, eq=False)
class BasinFractions:
    """Fraction of replicas whose terminal iterate sits near each center."""

    centers: tuple
    radius: float
    fractions: np.ndarray
    unclassified: float
    diverged: float


def basin_fraction(source, centers: Sequence, radius: float) -> BasinFractions:
    """Classify terminal iterates by proximity to candidate minimizers.

    ``radius`` must be positive and smaller than half the minimum
    center separation so the balls cannot overlap.  Fractions are relative
    to the full replica count; diverged replicas are never classified.
    """
    if isinstance(source, EnsembleStats):
        terminal = source.terminal
        diverged = source.diverged
    else:
        terminal = np.asarray(source, dtype=float)
        diverged = np.zeros(terminal.shape[0], dtype=bool)

    pts = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers]
    problems = []
    if radius <= 0:
        problems.append(f"radius must be positive, got {radius}")
    if len(pts) < 1:
        problems.append("at least one center is required")
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            sep = float(np.linalg.norm(pts[i] - pts[j]))
            if radius >= 0.5 * sep:
                problems.append(
                    f"radius {radius} must be below half the separation "
                    f"{sep} of centers {i} and {j}"
                )
    if problems:
        raise ConfigError(problems)

    term = terminal.reshape(terminal.shape[0], -1)
    total = term.shape[0]
    fractions = np.zeros(len(pts))
    classified = np.zeros(total, dtype=bool)
    for i, c in enumerate(pts):
        near = (np.linalg.norm(term - c, axis=1) <= radius) & ~diverged
        fractions[i] = float(np.sum(near)) / total
        classified |= near
    unclassified = float(np.sum(~classified & ~diverged)) / total
    return BasinFractions(
        centers=tuple(tuple(c) if c.size > 1 else float(c) for c in pts),
        radius=float(radius),
        fractions=fractions,
        unclassified=unclassified,
        diverged=float(np.sum(diverged)) / total,
    )
