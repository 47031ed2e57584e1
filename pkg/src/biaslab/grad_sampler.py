"""Stochastic gradient oracles for group-balanced training.

Two sampling schemes produce unbiased estimates of the population gradient
``sum_g a_g grad V_g`` when data is collected with group frequencies ``f``
that differ from the population proportions ``a``:

* **resampling** — draw the group from the population proportions ``a``
  directly and use its gradient with weight 1;
* **reweighting** — draw the group from the data frequencies ``f`` and
  multiply its gradient by the importance weight ``a_g / f_g``.

Both have the same mean but different second moments; the variance gap is
what drives every downstream stability and stationary-distribution result,
so :func:`variance_grad` implements the exact second-moment formulas rather
than a Monte Carlo estimate.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import LossConfigError
from .mixture_loss import GroupedLoss1D, GroupedLossMultiD, as_weights
from .rng import RngStream, as_generator

__all__ = [
    "Scheme",
    "GradientDraw",
    "draw",
    "draw_batch",
    "sample_groups",
    "mean_grad",
    "variance_grad",
    "region_variance_scalar",
    "weighted_slope_distribution",
    "RngStream",
]


class Scheme(enum.Enum):
    """How stochastic gradients are sampled from grouped data."""

    RESAMPLING = "resampling"
    REWEIGHTING = "reweighting"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value

    @classmethod
    def parse(cls, value) -> "Scheme":
        """Accept a Scheme, or a case-insensitive name/abbreviation."""
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        aliases = {
            "resampling": cls.RESAMPLING,
            "resample": cls.RESAMPLING,
            "rs": cls.RESAMPLING,
            "reweighting": cls.REWEIGHTING,
            "reweight": cls.REWEIGHTING,
            "rw": cls.REWEIGHTING,
        }
        if text not in aliases:
            raise LossConfigError(
                f"unknown scheme {value!r}; expected one of "
                "'resampling'/'rs' or 'reweighting'/'rw'"
            )
        return aliases[text]


def _scheme_draw_params(scheme, a, f, num_groups):
    """Validated (draw probabilities, per-group weights) for a scheme."""
    scheme = Scheme.parse(scheme)
    aw = as_weights(a, num_groups)
    if scheme is Scheme.RESAMPLING:
        probs = aw
        weights = np.ones_like(aw)
    else:
        fw = as_weights(f, num_groups)
        if np.any(fw <= 0.0):
            raise LossConfigError(
                "reweighting requires strictly positive data frequencies; "
                f"got {fw.tolist()}"
            )
        probs = fw
        weights = aw / fw
    return scheme, probs, weights


def sample_groups(probs: np.ndarray, rng, size: int | None = None):
    """Draw group indices from a categorical distribution.

    Uses inverse-CDF lookup on pre-drawn uniforms so the stream of random
    numbers is identical across schemes with the same probabilities.
    """
    gen = as_generator(rng)
    cum = np.cumsum(np.asarray(probs, dtype=float))
    cum[-1] = 1.0
    u = gen.random() if size is None else gen.random(size)
    idx = np.searchsorted(cum, u, side="right")
    return int(idx) if size is None else idx


@dataclass(frozen=True)
class GradientDraw:
    """One stochastic gradient sample.

    ``grad`` is the importance-weighted gradient ``weight * grad V_group``
    that the optimizer consumes; ``group`` and ``weight`` expose the raw
    draw for diagnostics.
    """

    group: int
    weight: float
    grad: float | np.ndarray


def draw(scheme, loss, a, f, theta, rng) -> GradientDraw:
    """Draw one stochastic gradient at ``theta``."""
    scheme, probs, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
    g = sample_groups(probs, rng)
    w = float(weights[g])
    return GradientDraw(group=g, weight=w, grad=w * loss.group_grad(g, theta))


def draw_batch(scheme, loss, a, f, theta, rng, replicas: int):
    """Draw ``replicas`` independent stochastic gradients at one point.

    Returns ``(groups, weights, grads)`` arrays; ``grads`` are already
    importance-weighted.  ``theta`` may be a scalar (one-dimensional loss)
    or a vector (multi-dimensional loss).
    """
    if replicas < 1:
        raise LossConfigError(f"replicas must be >= 1, got {replicas}")
    scheme, probs, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
    groups = sample_groups(probs, rng, replicas)
    w = weights[groups]
    if isinstance(loss, GroupedLossMultiD):
        pts = np.tile(np.asarray(theta, dtype=float), (replicas, 1))
        grads = w[:, None] * loss.grad_for_groups(pts, groups)
    else:
        pts = np.full(replicas, float(theta))
        grads = w * loss.grad_for_groups(pts, groups)
    return groups, w, grads


def mean_grad(loss, a, theta):
    """Expected stochastic gradient — the population mixture gradient.

    Both schemes are unbiased, so the mean does not depend on the scheme or
    on the data frequencies.
    """
    return loss.population_grad(theta, a)


def variance_grad(scheme, loss, a, f, theta):
    """Exact per-draw gradient (co)variance at ``theta``.

    For a one-dimensional loss, returns the scalar variance (vectorized over
    an array of points).  For a multi-dimensional loss and a single point,
    returns the ``(d, d)`` covariance matrix.

    The second moment is ``sum_g a_g grad_g**2`` under resampling and
    ``sum_g (a_g**2 / f_g) grad_g**2`` under reweighting; the squared mean
    ``(sum_g a_g grad_g)**2`` is subtracted from both.
    """
    scheme, _, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
    aw = as_weights(a, loss.num_groups)
    coeff = aw * weights  # a_g under RS, a_g^2 / f_g under RW

    if isinstance(loss, GroupedLossMultiD):
        th = np.asarray(theta, dtype=float)
        if th.ndim != 1:
            raise LossConfigError(
                "variance_grad on a multi-dimensional loss expects a single point"
            )
        second = np.zeros((loss.dimension, loss.dimension))
        mean = np.zeros(loss.dimension)
        for g in range(loss.num_groups):
            grad = np.asarray(loss.group_grad(g, th), dtype=float)
            second += coeff[g] * np.outer(grad, grad)
            mean += aw[g] * grad
        return second - np.outer(mean, mean)

    th = np.asarray(theta, dtype=float)
    second = np.zeros_like(th)
    mean = np.zeros_like(th)
    for g in range(loss.num_groups):
        grad = np.asarray(loss.group_grad(g, th), dtype=float)
        second = second + coeff[g] * grad**2
        mean = mean + aw[g] * grad
    out = second - mean**2
    return float(out) if np.ndim(theta) == 0 else out


def region_variance_scalar(scheme, loss: GroupedLossMultiD, a, f, region: int) -> float:
    """Leading per-coordinate gradient variance inside one region.

    With the off-region slope treated as negligible, only the region's own
    group contributes: the per-coordinate variance is
    ``a_g (1 - a_g) kappa_g**2`` under resampling and
    ``a_g**2 (1 - f_g) / f_g * kappa_g**2`` under reweighting.  Used as the
    isotropic diffusion scale of the matching continuous-time model.
    """
    scheme, _, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
    aw = as_weights(a, loss.num_groups)
    if not 0 <= region < loss.num_groups:
        raise LossConfigError(
            f"region index {region} out of range for {loss.num_groups} regions"
        )
    kappa2 = float(loss.kappas[region]) ** 2
    ag = float(aw[region])
    if scheme is Scheme.RESAMPLING:
        return ag * (1.0 - ag) * kappa2
    fg = ag / float(weights[region])  # recover f_g = a_g / weight_g
    return ag**2 * (1.0 - fg) / fg * kappa2


def weighted_slope_distribution(scheme, loss: GroupedLoss1D, a, f, theta_star: float):
    """Distribution of ``weight * (d^2 V_group / d theta^2)`` at a point.

    Returns ``(values, probs)`` for the weighted local gradient slope ``W``
    whose linearized recursion ``x_{k+1} = (1 - eta * W_k) x_k`` governs the
    second moment near a minimizer.  Requires every piece at ``theta_star``
    to have an affine gradient (closed-form slope).
    """
    scheme, probs, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
    piece = int(loss.piece_index(float(theta_star)))
    values = np.empty(loss.num_groups)
    for g in range(loss.num_groups):
        coeffs = loss.pieces[g][piece].grad_coefficients()
        if coeffs is None:
            raise LossConfigError(
                "weighted_slope_distribution requires closed-form gradient "
                f"slopes; group {g} piece {piece} has none"
            )
        values[g] = weights[g] * coeffs[0]
    return values, probs.copy()
