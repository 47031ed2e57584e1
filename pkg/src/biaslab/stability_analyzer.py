"""Local mean-square stability of SGD at the wells of the two-well quadratic.

Near a minimizer of the piecewise-quadratic two-group family (unit-curvature
wells at -1 and +1, each flat outside its own well), the deviation
``x = theta - theta*`` follows the exact linear recursion
``x_{k+1} = (1 - eta * W_k) * x_k`` where ``W_k`` is the sampled weighted
curvature: it is 0 whenever the drawn group is flat at ``theta*``.  The
second moment therefore evolves geometrically with per-step factor
``E[(1 - eta * W)**2]``, computed here in closed form for both sampling
schemes, together with the critical learning rate at which the factor
crosses 1.

:func:`verify_factor` checks the closed form against a Monte Carlo
simulation of the same recursion.  It averages the per-step factors across
replicas *before* multiplying across steps (the steps are independent, so
the product of per-step means is an unbiased, far lower-variance estimate of
the second moment than the mean of per-replica products; the plain estimator
is also exposed for comparison via :func:`linearized_second_moments`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LossConfigError
from .grad_sampler import Scheme
from .mixture_loss import as_weights
from .rng import STREAM_SGD_LINEARIZED, make_generator

__all__ = [
    "StabilityReport",
    "weight_distribution",
    "stability_factor",
    "critical_learning_rate",
    "moment_curve",
    "stability_report",
    "linearized_second_moments",
    "verify_factor",
]


def _active_group(minimizer) -> int:
    """Index of the group whose well holds the given minimizer."""
    m = float(minimizer)
    if m == -1.0:
        return 0
    if m == 1.0:
        return 1
    raise ConfigError(
        f"minimizer must be -1 or +1 (the wells of the two-group quadratic), got {minimizer!r}"
    )


def weight_distribution(scheme, a, f, minimizer):
    """Two-point distribution of the weighted curvature W at a well.

    Returns ``(values, probs)``: under resampling W is 1 with probability
    ``a_active`` (0 otherwise); under reweighting W is ``a_active/f_active``
    with probability ``f_active`` (0 otherwise).
    """
    scheme = Scheme.parse(scheme)
    aw = as_weights(a, 2)
    g = _active_group(minimizer)
    if scheme is Scheme.RESAMPLING:
        return np.array([0.0, 1.0]), np.array([1.0 - aw[g], aw[g]])
    fw = as_weights(f, 2)
    if np.any(fw <= 0.0):
        raise LossConfigError(
            f"reweighting requires strictly positive data frequencies, got {fw.tolist()}"
        )
    return np.array([0.0, aw[g] / fw[g]]), np.array([1.0 - fw[g], fw[g]])


def stability_factor(scheme, a, f, eta, minimizer) -> float:
    """Per-step second-moment factor ``E[(1 - eta W)**2]`` at a well.

    The factor is below 1 exactly when SGD is locally mean-square stable at
    that minimizer.
    """
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    values, probs = weight_distribution(scheme, a, f, minimizer)
    return float(np.sum(probs * (1.0 - eta * values) ** 2))


def critical_learning_rate(scheme, a, f, minimizer) -> float:
    """Learning rate at which the second-moment factor equals 1.

    Solves ``1 - 2 eta E[W] + eta**2 E[W**2] = 1``: the boundary is
    ``eta = 2 E[W] / E[W**2]``, i.e. 2 under resampling and
    ``2 f_active / a_active`` under reweighting.
    """
    values, probs = weight_distribution(scheme, a, f, minimizer)
    first = float(np.sum(probs * values))
    second = float(np.sum(probs * values**2))
    return 2.0 * first / second


def moment_curve(scheme, a, f, eta, minimizer, steps: int, x0: float = 1.0) -> np.ndarray:
    """Closed-form second-moment path ``x0**2 * factor**k`` for k = 0..steps."""
    if steps < 0:
        raise ConfigError(f"steps must be >= 0, got {steps}")
    factor = stability_factor(scheme, a, f, eta, minimizer)
    return float(x0) ** 2 * factor ** np.arange(steps + 1)


@dataclass(frozen=True)
class StabilityReport:
    """Stability verdict for one scheme at one well."""

    minimizer: float
    scheme: Scheme
    factor: float
    stable: bool
    critical_eta: float


def stability_report(scheme, a, f, eta) -> tuple[StabilityReport, StabilityReport]:
    """Reports for both wells (-1 then +1).  Factor exactly 1 counts as stable."""
    out = []
    for m in (-1.0, 1.0):
        factor = stability_factor(scheme, a, f, eta, m)
        out.append(
            StabilityReport(
                minimizer=m,
                scheme=Scheme.parse(scheme),
                factor=factor,
                stable=factor <= 1.0,
                critical_eta=critical_learning_rate(scheme, a, f, m),
            )
        )
    return tuple(out)


def linearized_second_moments(
    scheme,
    a,
    f,
    eta,
    minimizer,
    steps: int,
    replicas: int,
    seed: int = 0,
    x0: float = 1.0,
):
    """Monte Carlo second-moment paths of the linearized recursion.

    Returns ``(plain, factored)`` arrays of length ``steps + 1``:

    * ``plain[k]`` — mean over replicas of ``x0**2 * prod_j (1 - eta W_j)**2``
      (the naive estimator; its relative noise grows quickly with k);
    * ``factored[k]`` — ``x0**2 * prod_j mean_r (1 - eta W_{r,j})**2``
      (per-step means multiplied across steps; unbiased for the same
      quantity because the steps are independent, with much smaller noise).
    """
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    if replicas < 1:
        raise ConfigError(f"replicas must be >= 1, got {replicas}")
    values, probs = weight_distribution(scheme, a, f, minimizer)
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    gen = make_generator(seed, STREAM_SGD_LINEARIZED)
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    u = gen.random((replicas, steps))
    w = values[np.searchsorted(cum, u, side="right")]
    factors = (1.0 - eta * w) ** 2
    x0sq = float(x0) ** 2

    plain = np.empty(steps + 1)
    plain[0] = x0sq
    plain[1:] = x0sq * np.mean(np.cumprod(factors, axis=1), axis=0)

    factored = np.empty(steps + 1)
    factored[0] = x0sq
    factored[1:] = x0sq * np.cumprod(np.mean(factors, axis=0))
    return plain, factored


def verify_factor(
    scheme,
    a,
    f,
    eta,
    minimizer,
    replicas: int = 100_000,
    steps: int = 20,
    seed: int = 0,
) -> float:
    """Worst relative error of the Monte Carlo moment path vs the closed form.

    Simulates the linearized recursion with the factored estimator and
    returns ``max_k |estimate_k / factor**k - 1|`` over k = 1..steps.  At
    least 10_000 replicas are required for the estimate to be meaningful;
    when the factor exceeds 1 the horizon is capped at 20 steps so the
    geometric growth stays well-conditioned.
    """
    if replicas < 10_000:
        raise ConfigError(
            f"verify_factor needs at least 10000 replicas for a stable estimate, got {replicas}"
        )
    factor = stability_factor(scheme, a, f, eta, minimizer)
    if factor > 1.0:
        steps = min(steps, 20)
    _, factored = linearized_second_moments(
        scheme, a, f, eta, minimizer, steps, replicas, seed=seed
    )
    theory = factor ** np.arange(steps + 1)
    rel = np.abs(factored[1:] / theory[1:] - 1.0)
    return float(np.max(rel))
