"""Stationary profiles of the diffusion matched to grouped SGD.

Small-step SGD on a one-dimensional grouped loss behaves like the diffusion
``d theta = -mu(theta) dt + sqrt(eta * Sigma(theta)) dW`` with ``mu`` the
population gradient and ``Sigma`` the scheme's per-draw gradient variance.
Its stationary density solves the zero-flux balance

    mu(theta) p(theta) + (eta / 2) d/dtheta [Sigma(theta) p(theta)] = 0,

so ``q = eta * Sigma * p`` satisfies ``q' = -(2/eta) (mu / Sigma) q`` and is
continuous across breakpoints even where ``Sigma`` jumps (``p`` itself then
jumps).  :func:`stationary_density` integrates this exactly in log space on
a graded grid whose local spacing is chosen from the flux-tolerance it must
support, and cross-checks itself two independent ways:

* the per-piece log-slope integrals are computed both by the per-cell
  quadrature that builds the grid and by adaptive quadrature
  (``continuity_error``), validating the matching constants that make
  ``Sigma * p`` continuous;
* the normalizing mass is computed both by Simpson on the stored grid and
  by fresh Gauss-Legendre quadrature (``normalization_error``).

:func:`flux_residual` then measures the raw residual of the balance equation
on the stored grid with high-order difference stencils plus breakpoint jump
terms.  The ``gibbs_ratio_*`` functions give the closed-form leading-order
mass ratios between two wells that the exact profile is compared against,
and :func:`wall_integral` evaluates the wall integral ``int dtheta / h'``
they need, with geometric refinement and tail extrapolation near a wall
minimum where the integrand may blow up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import (
    AssumptionError,
    ConfigError,
    LossConfigError,
    NormalizationError,
    NumericalFailure,
    SingularIntegralError,
)
from .grad_sampler import Scheme, _scheme_draw_params
from .mixture_loss import GroupedLoss1D, GroupedLossMultiD, as_weights

__all__ = [
    "PiecewiseDiffusion",
    "StationaryDensity",
    "stationary_density",
    "flux_residual",
    "gibbs_ratio_linear",
    "reweighting_sign_condition",
    "SignCondition",
    "wall_integral",
    "gibbs_ratio_general",
    "gibbs_ratio_multid",
    "equal_coefficient_gibbs_ratio",
]

# Spacing is chosen so each node's expected flux residual is ~NODE_FLUX_TOL,
# far under the 1e-6 the profile is validated against downstream.
NODE_FLUX_TOL = 2e-8
_LOG_DECAY_REQUIRED = math.log(1e-12)  # auto-domain edges must be this far below peak
_LOG_TRIM = 550.0  # keep log densities comfortably above exp() underflow
_GL8 = np.polynomial.legendre.leggauss(8)
_GL24 = np.polynomial.legendre.leggauss(24)
_trapezoid = getattr(np, "trapezoid", None) or np.trapz  # numpy<2 fallback


class PiecewiseDiffusion:
    """Per-piece drift, diffusion, and log-slope of the matched diffusion.

    All evaluators take an explicit piece index and apply that piece's
    formulas, so values at breakpoints are one-sided.
    """

    def __init__(self, loss: GroupedLoss1D, scheme, a, f, eta: float):
        if not isinstance(loss, GroupedLoss1D):
            raise ConfigError(
                "stationary profiles require a one-dimensional grouped loss"
            )
        if not (math.isfinite(eta) and eta > 0):
            raise ConfigError(f"eta must be positive, got {eta!r}")
        scheme, _, weights = _scheme_draw_params(scheme, a, f, loss.num_groups)
        self.loss = loss
        self.scheme = scheme
        self.eta = float(eta)
        self.aw = as_weights(a, loss.num_groups)
        self.coeff = self.aw * weights  # second-moment coefficients

    def mu(self, piece: int, x):
        """Population gradient using the given piece's formulas."""
        total = 0.0
        for g in range(self.loss.num_groups):
            total = total + self.aw[g] * self.loss.piece_grad(g, piece, x)
        return total

    def sigma2(self, piece: int, x):
        """Per-draw gradient variance using the given piece's formulas."""
        second = 0.0
        mean = 0.0
        for g in range(self.loss.num_groups):
            grad = self.loss.piece_grad(g, piece, x)
            second = second + self.coeff[g] * np.square(grad)
            mean = mean + self.aw[g] * grad
        return second - np.square(mean)

    def phi(self, piece: int, x):
        """Log-slope of q = eta*Sigma*p:  q'/q = -phi = -(2/eta) mu/Sigma."""
        return (2.0 / self.eta) * self.mu(piece, x) / self.sigma2(piece, x)

    def rate(self, piece: int, x):
        """Local exponential decay rate of the density, 2|mu|/(eta*Sigma)."""
        return 2.0 * np.abs(self.mu(piece, x)) / (self.eta * self.sigma2(piece, x))

    def check_positive_variance(self) -> None:
        """Fail fast when the diffusion degenerates at a population minimizer.

        If the per-draw gradient variance vanishes where the drift also
        vanishes, the stationary profile collapses onto the minimizer and no
        smooth density exists.
        """
        for m in self.loss.local_minimizers(self.aw):
            loc = float(m.location)
            sides = [m.piece]
            if m.kind == "kink":
                sides.append(m.piece + 1)
            for piece in sides:
                s = float(self.sigma2(piece, loc))
                if s <= 1e-12:
                    raise NumericalFailure(
                        "gradient variance vanishes at the minimizer "
                        f"{loc} (piece {piece}: Sigma={s!r}); the stationary "
                        "profile is degenerate there"
                    )


def _segments(loss: GroupedLoss1D, lo: float, hi: float):
    """(lo, hi, piece) triples splitting [lo, hi] at interior breakpoints."""
    cuts = [lo]
    for xi in loss.breakpoints:
        if lo + 1e-12 < xi < hi - 1e-12:
            cuts.append(float(xi))
    cuts.append(hi)
    segs = []
    for a_, b_ in zip(cuts, cuts[1:]):
        piece = int(loss.piece_index(0.5 * (a_ + b_)))
        segs.append((a_, b_, piece))
    return segs


def _cell_integrals(diff: PiecewiseDiffusion, piece: int, xs: np.ndarray) -> np.ndarray:
    """Gauss-Legendre(8) integral of phi over each cell of a node array."""
    gl_x, gl_w = _GL8
    mid = 0.5 * (xs[:-1] + xs[1:])
    half = 0.5 * np.diff(xs)
    nodes = mid[:, None] + half[:, None] * gl_x[None, :]
    vals = diff.phi(piece, nodes)
    return half * (vals @ gl_w)


def _coarse_profile(diff: PiecewiseDiffusion, segs, cells: int = 512):
    """Sampled log q / log p profile used for grading and domain decisions."""
    xs_list, logq_list, logp_list = [], [], []
    running = 0.0
    for lo, hi, piece in segs:
        xs = np.linspace(lo, hi, cells + 1)
        cum = np.concatenate([[0.0], np.cumsum(_cell_integrals(diff, piece, xs))])
        logq = running - cum
        running = logq[-1]
        s2 = diff.sigma2(piece, xs)
        if np.any(s2 <= 0.0):
            bad = xs[np.argmin(s2)]
            raise NumericalFailure(
                f"gradient variance is non-positive near theta={bad!r}; "
                "the matched diffusion is degenerate"
            )
        xs_list.append(xs)
        logq_list.append(logq)
        logp_list.append(logq - np.log(diff.eta * s2))
    return xs_list, logq_list, logp_list


def _auto_domain(diff: PiecewiseDiffusion, hull_lo: float, hull_hi: float):
    """Extend past the hull until the profile has decayed, then trim.

    Extends each side (doubling margins, at most 12 rounds) until the edge
    log-density sits at least ``log(1e-12)`` below the peak, then pulls each
    edge back to where the drop reaches ``_LOG_TRIM`` so stored log densities
    stay far from floating-point underflow.  Never trims into the hull.
    """
    margin_lo = margin_hi = 0.75
    lo = hull_lo - margin_lo
    hi = hull_hi + margin_hi
    for _ in range(12):
        segs = _segments(diff.loss, lo, hi)
        xs_l, _, logp_l = _coarse_profile(diff, segs, cells=160)
        logp_all = np.concatenate(logp_l)
        peak = float(np.max(logp_all))
        ok_lo = logp_l[0][0] - peak <= _LOG_DECAY_REQUIRED
        ok_hi = logp_l[-1][-1] - peak <= _LOG_DECAY_REQUIRED
        if ok_lo and ok_hi:
            xs_all = np.concatenate(xs_l)
            drop = logp_all - peak
            keep = drop >= -_LOG_TRIM
            lo_trim = float(np.min(xs_all[keep]))
            hi_trim = float(np.max(xs_all[keep]))
            pad = 1e-3 * (hull_hi - hull_lo + 1.0)
            lo = min(lo_trim, hull_lo - pad)
            hi = max(hi_trim, hull_hi + pad)
            return lo, hi
        if not ok_lo:
            margin_lo *= 2.0
            lo -= margin_lo
        if not ok_hi:
            margin_hi *= 2.0
            hi += margin_hi
    raise NormalizationError(
        "stationary profile does not decay within the explored domain; "
        "no normalizable density exists for these parameters"
    )


def _graded_panels(xs, h_allowed, seg_len):
    """Partition a segment into uniform panels honoring a local spacing bound.

    Returns a list of ``(start, stop, cells)`` with ``stop - start`` split
    into ``cells`` equal cells.  Spacings are quantized to powers of two of
    the tightest requirement so panels merge into clean runs.
    """
    h_cap = seg_len / 8.0
    h = np.minimum(h_allowed, h_cap)
    h_min = max(float(np.min(h)), seg_len * 1e-12)
    levels = np.clip(np.floor(np.log2(h / h_min)).astype(int), 0, 60)

    runs = []  # (x_start, x_stop, level)
    start = 0
    for i in range(1, len(xs)):
        if levels[i] != levels[start]:
            runs.append((xs[start], xs[i], int(levels[start])))
            start = i
    runs.append((xs[start], xs[-1], int(levels[start])))

    # Merge runs too short to hold a few cells of their own spacing into the
    # finer neighbor, so every panel supports Simpson and flux stencils.
    merged = []
    for run in runs:
        if merged and (run[1] - run[0]) < 4.0 * min(h_cap, h_min * 2.0 ** run[2]):
            prev = merged[-1]
            merged[-1] = (prev[0], run[1], min(prev[2], run[2]))
        else:
            merged.append(run)
    if len(merged) >= 2 and (merged[0][1] - merged[0][0]) < 4.0 * min(
        h_cap, h_min * 2.0 ** merged[0][2]
    ):
        first, second = merged[0], merged[1]
        merged = [(first[0], second[1], min(first[2], second[2]))] + merged[2:]

    panels = []
    for x0, x1, level in merged:
        h_run = min(h_min * 2.0**level, h_cap)
        cells = max(2, int(math.ceil((x1 - x0) / h_run)))
        cells += cells % 2  # even cell count -> odd node count (Simpson)
        panels.append((x0, x1, cells))
    return panels


@dataclass(frozen=True, eq=False)
class SegmentGrid:
    """Grid and profile of one breakpoint-free segment (one-sided at ends)."""

    lo: float
    hi: float
    piece: int
    nodes: np.ndarray
    logq: np.ndarray
    logp: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    panels: tuple  # (start_index, stop_index, spacing) into the node arrays


@dataclass(frozen=True, eq=False)
class StationaryDensity:
    """Normalized stationary density on a graded grid.

    ``grid`` repeats each interior breakpoint once per adjoining segment:
    the density genuinely jumps where the diffusion coefficient does, and
    both one-sided values are real.  ``continuity_error`` and
    ``normalization_error`` are the dual-route disagreement diagnostics
    described in the module docstring; ``tail_bounds`` estimate the mass
    lying beyond each edge of the domain.
    """

    loss: GroupedLoss1D
    scheme: Scheme
    a: np.ndarray
    f: np.ndarray | None
    eta: float
    domain: tuple[float, float]
    segments: tuple[SegmentGrid, ...]
    grid: np.ndarray
    log_density: np.ndarray
    density: np.ndarray
    log_normalizer: float
    continuity_error: float
    normalization_error: float
    tail_bounds: tuple[float, float]

    # -- lookup ---------------------------------------------------------------

    def _segment_index(self, x: float, side: str = "own") -> int:
        lo, hi = self.domain
        if not lo <= x <= hi:
            raise ConfigError(f"theta={x} lies outside the domain {self.domain}")
        cuts = np.array([s.hi for s in self.segments[:-1]])
        idx = int(np.searchsorted(cuts, x, side="left"))
        if side == "right" and idx < len(self.segments) - 1 and x == cuts[idx]:
            idx += 1
        elif side not in ("own", "left", "right"):
            raise ConfigError(f"side must be 'own', 'left', or 'right', got {side!r}")
        return idx

    def log_value_at(self, x: float, side: str = "own") -> float:
        """Log density at a point; breakpoints read from the left by default."""
        x = float(x)
        seg = self.segments[self._segment_index(x, side)]
        logq = float(np.interp(x, seg.nodes, seg.logq))
        diff = self._diffusion()
        s2 = float(diff.sigma2(seg.piece, x))
        return logq - math.log(self.eta * s2) - self.log_normalizer

    def value_at(self, x: float, side: str = "own") -> float:
        return math.exp(self.log_value_at(x, side))

    def _diffusion(self) -> PiecewiseDiffusion:
        return PiecewiseDiffusion(self.loss, self.scheme, self.a, self.f, self.eta)

    def _is_internal_cut(self, x: float) -> bool:
        return any(
            abs(x - s.hi) <= 1e-12 for s in self.segments[:-1]
        )

    def _log_point_mass(self, x: float) -> float:
        """Log density with the kink convention: mean of one-sided values."""
        if self._is_internal_cut(x):
            left = self.log_value_at(x, side="left")
            right = self.log_value_at(x, side="right")
            hi = max(left, right)
            return hi + math.log(0.5 * (math.exp(left - hi) + math.exp(right - hi)))
        return self.log_value_at(x)

    def log_ratio(self, x: float, y: float) -> float:
        """log p(x)/p(y); at a breakpoint the two one-sided values are averaged."""
        return self._log_point_mass(float(x)) - self._log_point_mass(float(y))

    def ratio(self, x: float, y: float) -> float:
        return math.exp(self.log_ratio(x, y))

    def mode(self) -> float:
        """Grid location of the density maximum."""
        return float(self.grid[int(np.argmax(self.log_density))])

    def mu_at(self, x: float, side: str = "own") -> float:
        seg = self.segments[self._segment_index(float(x), side)]
        return float(self._diffusion().mu(seg.piece, float(x)))

    def sigma2_at(self, x: float, side: str = "own") -> float:
        seg = self.segments[self._segment_index(float(x), side)]
        return float(self._diffusion().sigma2(seg.piece, float(x)))

    def mass_within(self, lo: float, hi: float) -> float:
        """Mass of [lo, hi] by trapezoid on the stored grid (diagnostic)."""
        total = 0.0
        for seg in self.segments:
            a_, b_ = max(lo, seg.lo), min(hi, seg.hi)
            if a_ >= b_:
                continue
            mask = (seg.nodes >= a_) & (seg.nodes <= b_)
            if np.sum(mask) < 2:
                continue
            p = np.exp(seg.logp - self.log_normalizer)
            total += float(_trapezoid(p[mask], seg.nodes[mask]))
        return total


def stationary_density(
    loss,
    scheme,
    a,
    f,
    eta: float,
    domain: tuple[float, float] | None = None,
    grid_size: int = 10_000,
) -> StationaryDensity:
    """Construct the normalized stationary density of the matched diffusion.

    ``domain`` defaults to an automatically chosen interval on which the
    profile has decayed by at least twelve orders of magnitude from its
    peak.  ``grid_size`` is the approximate total node budget; nodes are
    graded so that steep exponential walls receive spacing fine enough for
    the flux residual target.
    """
    diff = PiecewiseDiffusion(loss, scheme, a, f, eta)
    diff.check_positive_variance()
    if grid_size < 500:
        raise ConfigError(f"grid_size must be at least 500, got {grid_size}")

    minimizers = [float(m.location) for m in loss.local_minimizers(diff.aw)]
    hull_pts = list(loss.breakpoints) + minimizers
    hull_lo, hull_hi = min(hull_pts), max(hull_pts)

    if domain is None:
        lo, hi = _auto_domain(diff, hull_lo, hull_hi)
    else:
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < hi:
            raise ConfigError(f"domain must satisfy lo < hi, got {domain!r}")

    segs = _segments(loss, lo, hi)

    # Grading pass: sample the profile, convert the node flux tolerance into
    # a local spacing bound h <= (30*tol/|mu p|)^(1/4) / rate, then cut each
    # segment into power-of-two graded panels.
    xs_l, logq_l, logp_l = _coarse_profile(diff, segs)
    peak = max(float(np.max(lp)) for lp in logp_l)
    mass0 = sum(
        float(_trapezoid(np.exp(lp - peak), xs))
        for xs, lp in zip(xs_l, logp_l)
    )
    log_norm0 = peak + math.log(mass0)

    panel_lists = None
    scale = 1.0
    for _ in range(2):
        panel_lists = []
        total_nodes = 0
        for (s_lo, s_hi, piece), xs, lp in zip(segs, xs_l, logp_l):
            p_est = np.exp(lp - log_norm0)
            mu_abs = np.abs(diff.mu(piece, xs))
            rate = diff.rate(piece, xs)
            drive = np.maximum(mu_abs * p_est, 1e-12 * max(1.0, peak))
            h_allowed = (30.0 * NODE_FLUX_TOL / drive) ** 0.25 / np.maximum(rate, 1e-9)
            h_allowed = np.maximum(h_allowed * scale, (s_hi - s_lo) * 1e-12)
            panels = _graded_panels(xs, h_allowed, s_hi - s_lo)
            panel_lists.append(panels)
            total_nodes += sum(c + 1 for _, _, c in panels)
        if total_nodes >= 0.5 * grid_size or total_nodes >= grid_size:
            break
        scale *= max(total_nodes / grid_size, 0.05)

    # Final pass: exact cumulative log q on the graded nodes, one-sided
    # diffusion data, and the two independent mass routes.
    gl24_x, gl24_w = _GL24
    segments = []
    running = 0.0
    continuity_error = 0.0
    mass_simpson = 0.0
    mass_gl = 0.0
    log_scale = None

    built = []
    for (s_lo, s_hi, piece), panels in zip(segs, panel_lists):
        nodes_parts = []
        for j, (x0, x1, cells) in enumerate(panels):
            arr = np.linspace(x0, x1, cells + 1)
            nodes_parts.append(arr if j == 0 else arr[1:])
        nodes = np.concatenate(nodes_parts)
        cum = np.concatenate([[0.0], np.cumsum(_cell_integrals(diff, piece, nodes))])
        logq = running - cum
        total_gl = float(cum[-1])
        total_quad, _ = quad(
            lambda x: float(diff.phi(piece, x)),
            s_lo,
            s_hi,
            epsabs=1e-14,
            epsrel=1e-12,
            limit=500,
        )
        continuity_error = max(
            continuity_error,
            abs(total_gl - total_quad) / max(1.0, abs(total_quad)),
        )
        running = float(logq[-1])
        s2 = diff.sigma2(piece, nodes)
        if np.any(s2 <= 0.0):
            raise NumericalFailure(
                f"gradient variance is non-positive inside segment ({s_lo}, {s_hi})"
            )
        mu = diff.mu(piece, nodes)
        logp = logq - np.log(diff.eta * s2)
        built.append((s_lo, s_hi, piece, nodes, logq, logp, mu, s2, panels))

    log_scale = max(float(np.max(b[5])) for b in built)

    for s_lo, s_hi, piece, nodes, logq, logp, mu, s2, panels in built:
        p_tilde = np.exp(logp - log_scale)
        idx = 0
        panel_index = []
        for x0, x1, cells in panels:
            i0, i1 = idx, idx + cells
            h = (x1 - x0) / cells
            w = np.ones(cells + 1)
            w[1:-1:2] = 4.0
            w[2:-1:2] = 2.0
            mass_simpson += float(h / 3.0 * np.dot(w, p_tilde[i0 : i1 + 1]))

            mid = 0.5 * (x0 + x1)
            half = 0.5 * (x1 - x0)
            pts = mid + half * gl24_x
            logq0 = logq[i0]
            vals = np.empty_like(pts)
            for k, t in enumerate(pts):
                offset = _gl8_integral(diff, piece, x0, float(t))
                lq = logq0 - offset
                vals[k] = math.exp(
                    lq - math.log(diff.eta * float(diff.sigma2(piece, t))) - log_scale
                )
            mass_gl += float(half * np.dot(gl24_w, vals))

            panel_index.append((i0, i1, h))
            idx = i1
        segments.append(
            SegmentGrid(
                lo=s_lo,
                hi=s_hi,
                piece=piece,
                nodes=nodes,
                logq=logq,
                logp=logp,
                mu=mu,
                sigma2=s2,
                panels=tuple(panel_index),
            )
        )

    if mass_simpson <= 0.0 or not math.isfinite(mass_simpson):
        raise NormalizationError(
            f"stationary profile mass is not normalizable (mass={mass_simpson!r})"
        )
    log_normalizer = log_scale + math.log(mass_simpson)
    normalization_error = abs(mass_simpson - mass_gl) / mass_gl

    grid = np.concatenate([s.nodes for s in segments])
    log_density = np.concatenate([s.logp for s in segments]) - log_normalizer
    density = np.exp(log_density)

    first, last = segments[0], segments[-1]
    rate_lo = float(diff.rate(first.piece, first.nodes[0]))
    rate_hi = float(diff.rate(last.piece, last.nodes[-1]))
    p_lo = math.exp(first.logp[0] - log_normalizer)
    p_hi = math.exp(last.logp[-1] - log_normalizer)
    tail_bounds = (
        p_lo / rate_lo if rate_lo > 0 else math.inf,
        p_hi / rate_hi if rate_hi > 0 else math.inf,
    )

    return StationaryDensity(
        loss=loss,
        scheme=diff.scheme,
        a=diff.aw,
        f=None if diff.scheme is Scheme.RESAMPLING else as_weights(f, loss.num_groups),
        eta=diff.eta,
        domain=(lo, hi),
        segments=tuple(segments),
        grid=grid,
        log_density=log_density,
        density=density,
        log_normalizer=log_normalizer,
        continuity_error=continuity_error,
        normalization_error=normalization_error,
        tail_bounds=tail_bounds,
    )


def _gl8_integral(diff: PiecewiseDiffusion, piece: int, x0: float, x1: float) -> float:
    """Single-shot Gauss-Legendre(8) integral of phi over [x0, x1]."""
    gl_x, gl_w = _GL8
    mid = 0.5 * (x0 + x1)
    half = 0.5 * (x1 - x0)
    return float(half * np.dot(gl_w, diff.phi(piece, mid + half * gl_x)))


def flux_residual(density: StationaryDensity) -> float:
    """Worst raw residual of the zero-flux balance on the stored grid.

    Evaluates ``|mu p + (eta/2) d(Sigma p)/dx|`` with fourth-order centered
    stencils at interior panel nodes (two nodes in from each panel edge) and
    adds, at every interior breakpoint, the jump in ``Sigma p`` divided by
    the finest neighboring spacing — the term a corrupted matching constant
    would show up in.
    """
    eta = density.eta
    worst = 0.0
    for seg in density.segments:
        p = np.exp(seg.logp - density.log_normalizer)
        sp = seg.sigma2 * p
        mup = seg.mu * p
        for i0, i1, h in seg.panels:
            if i1 - i0 < 4:
                continue
            j = np.arange(i0 + 2, i1 - 1)
            d4 = (sp[j - 2] - 8.0 * sp[j - 1] + 8.0 * sp[j + 1] - sp[j + 2]) / (12.0 * h)
            resid = np.abs(mup[j] + 0.5 * eta * d4)
            worst = max(worst, float(np.max(resid)))

    for left, right in zip(density.segments, density.segments[1:]):
        p_l = math.exp(left.logp[-1] - density.log_normalizer)
        p_r = math.exp(right.logp[0] - density.log_normalizer)
        jump = abs(left.sigma2[-1] * p_l - right.sigma2[0] * p_r)
        h_local = min(left.panels[-1][2], right.panels[0][2])
        worst = max(worst, 0.5 * eta * jump / h_local)
    return worst


# ---------------------------------------------------------------------------
# Closed-form leading-order mass ratios


def _well_values(a, epsilon: float):
    """Population values at the two wells of the piecewise-linear family."""
    aw = as_weights(a, 2)
    eps = float(epsilon)
    if not 0.0 <= eps < 1.0:
        raise ConfigError(f"epsilon must lie in [0, 1), got {epsilon!r}")
    v_left = -aw[0] + aw[1] * eps  # population value at -1
    v_right = aw[0] * eps - aw[1]  # population value at +1
    return aw, v_left, v_right


def gibbs_ratio_linear(scheme, a, f, eta: float, epsilon: float = 0.0, as_log: bool = False):
    """Leading-order stationary mass ratio p(+1)/p(-1), linear family.

    Under resampling the ratio is ``exp(-(2/(a1 a2 eta)) (V(1) - V(-1)))``;
    under reweighting the exponent couples each well's depth to its own
    group frequency and an algebraic prefactor appears.  ``epsilon``
    adjusts the well values for the off-support slope; the default 0 gives
    the leading-order form in the small-slope limit.  Ratios routinely
    over- or under-flow a float, so ``as_log=True`` returns the log ratio.
    """
    scheme = Scheme.parse(scheme)
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta!r}")
    aw, v_left, v_right = _well_values(a, epsilon)
    if scheme is Scheme.RESAMPLING:
        log_ratio = -(2.0 / (aw[0] * aw[1] * eta)) * (v_right - v_left)
    else:
        fw = as_weights(f, 2)
        if np.any(fw <= 0.0):
            raise LossConfigError(
                f"reweighting requires strictly positive data frequencies, got {fw.tolist()}"
            )
        log_pref = 2.0 * (math.log(aw[0] / fw[0]) - math.log(aw[1] / fw[1]))
        exponent = (
            -(2.0 * fw[1] / fw[0]) / (aw[1] ** 2 * eta) * v_right
            + (2.0 * fw[0] / fw[1]) / (aw[0] ** 2 * eta) * v_left
        )
        log_ratio = log_pref + exponent
    return log_ratio if as_log else math.exp(log_ratio)


@dataclass(frozen=True)
class SignCondition:
    """Whether reweighting tilts the stationary mass toward the shallow well.

    ``favors_shallow`` is True when ``ratio = f2/f1`` does not exceed
    ``threshold``, the point where the leading-order exponent of the
    +1-to--1 mass ratio changes sign.
    """

    ratio: float
    threshold: float
    favors_shallow: bool


def reweighting_sign_condition(a, f, epsilon: float = 0.0) -> SignCondition:
    """Evaluate the frequency-ratio condition for mass inversion.

    The shallow well (-1) dominates under reweighting exactly when
    ``f2/f1 <= (a2/a1) * sqrt(V(-1)/V(1))`` (well values are both negative,
    so the ratio under the root is positive).
    """
    aw, v_left, v_right = _well_values(a, epsilon)
    if v_left >= 0 or v_right >= 0:
        raise LossConfigError(
            "sign condition requires both wells to have negative population "
            f"value; got V(-1)={v_left}, V(+1)={v_right}"
        )
    fw = as_weights(f, 2)
    if np.any(fw <= 0.0):
        raise LossConfigError(
            f"strictly positive data frequencies are required, got {fw.tolist()}"
        )
    ratio = fw[1] / fw[0]
    threshold = (aw[1] / aw[0]) * math.sqrt(v_left / v_right)
    return SignCondition(
        ratio=float(ratio),
        threshold=float(threshold),
        favors_shallow=bool(ratio <= threshold),
    )


# ---------------------------------------------------------------------------
# General convex wells: wall integrals and their mass ratio


def _one_hot(index: int, length: int) -> np.ndarray:
    out = np.zeros(length)
    out[index] = 1.0
    return out


def _group_minimizer(loss: GroupedLoss1D, group: int) -> float:
    mins = loss.local_minimizers(_one_hot(group, loss.num_groups))
    if len(mins) != 1:
        raise LossConfigError(
            f"group {group} must have a unique minimizer, found {len(mins)}"
        )
    return float(mins[0].location)


def _junction(loss: GroupedLoss1D, a, lo: float, hi: float) -> float:
    """Population-value maximizer between two minimizers (snaps to breakpoints)."""
    aw = as_weights(a, loss.num_groups)
    xs = np.linspace(lo, hi, 4097)[1:-1]
    vals = loss.population_value(xs, aw)
    best_x = float(xs[int(np.argmax(vals))])
    best_v = float(np.max(vals))
    spacing = float(xs[1] - xs[0])
    for xi in loss.breakpoints:
        if lo < xi < hi and abs(xi - best_x) <= 2.0 * spacing:
            if float(loss.population_value(xi, aw)) >= best_v - 1e-9:
                return float(xi)
    return best_x


def wall_integral(loss: GroupedLoss1D, group: int, junction: float, cutoff: float = 1e-6) -> float:
    """``int d theta / |V_group'|`` from the group's minimizer to the junction.

    The integrand may blow up at the minimizer (where the wall slope
    vanishes); the integral is evaluated on geometrically halved end
    segments down to ``cutoff``, and the remaining sliver is extrapolated
    from the observed geometric decay of the slice values.  If the slices
    stop decaying (ratio at or above 0.95) the integral is treated as
    divergent and SingularIntegralError is raised.
    """
    if cutoff <= 0:
        raise ConfigError(f"cutoff must be positive, got {cutoff!r}")
    m = _group_minimizer(loss, group)
    span = junction - m
    if abs(span) <= cutoff:
        raise ConfigError(
            f"junction {junction} coincides with the group-{group} minimizer {m}"
        )
    direction = 1.0 if span > 0 else -1.0
    depth = abs(span)

    gl_x, gl_w = _GL8

    def slice_value(t0: float, t1: float) -> float:
        mid = 0.5 * (t0 + t1)
        half = 0.5 * (t1 - t0)
        ts = mid + half * gl_x
        xs = m + direction * ts
        slopes = np.abs(loss.group_grad(group, xs))
        if np.any(slopes <= 0.0):
            raise SingularIntegralError(
                f"wall slope of group {group} vanishes inside ({t0}, {t1}); "
                "the wall integral is singular away from the minimizer"
            )
        return float(half * np.dot(gl_w, 1.0 / slopes))

    slices = []
    upper = depth
    for _ in range(200):
        lower = max(upper / 2.0, cutoff)
        slices.append(slice_value(lower, upper))
        upper = lower
        if upper <= cutoff:
            break

    total = float(np.sum(slices))
    if len(slices) >= 2:
        rho = slices[-1] / slices[-2]
        if rho >= 0.95:
            raise SingularIntegralError(
                f"wall integral of group {group} does not converge at its "
                f"minimizer (slice ratio {rho:.4f} at offset {cutoff})"
            )
        if 0.0 < rho < 1.0:
            total += slices[-1] * rho / (1.0 - rho)
    if not math.isfinite(total):
        raise SingularIntegralError(
            f"wall integral of group {group} is not finite"
        )
    return total


def gibbs_ratio_general(
    loss,
    scheme,
    a,
    f,
    eta: float,
    p: int,
    q: int,
    cutoff: float = 1e-6,
    as_log: bool = False,
):
    """Leading-order mass ratio p(m_p)/p(m_q) for two convex wells.

    ``p`` and ``q`` are group indices; the formula uses the shared wall
    integral I between each minimizer and the junction (the population-value
    maximizer between them).  The derivation assumes the two walls mirror
    each other; the wall slopes at the junction, the wall slopes at the
    minimizers, and the two wall integrals are each checked for agreement
    and an AssumptionError names whichever check fails.
    """
    scheme = Scheme.parse(scheme)
    if not isinstance(loss, GroupedLoss1D):
        raise ConfigError("gibbs_ratio_general requires a one-dimensional loss")
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta!r}")
    aw = as_weights(a, loss.num_groups)
    if p == q or not (0 <= p < loss.num_groups and 0 <= q < loss.num_groups):
        raise ConfigError(f"p={p}, q={q} must be distinct valid group indices")

    m_p = _group_minimizer(loss, p)
    m_q = _group_minimizer(loss, q)
    lo, hi = min(m_p, m_q), max(m_p, m_q)
    junction = _junction(loss, aw, lo, hi)

    delta = cutoff
    side_p = 1.0 if m_p < junction else -1.0
    side_q = 1.0 if m_q < junction else -1.0
    slope_p_junction = abs(float(loss.group_grad(p, junction - side_p * delta)))
    slope_q_junction = abs(float(loss.group_grad(q, junction - side_q * delta)))
    scale = max(slope_p_junction, slope_q_junction, 1e-300)
    if abs(slope_p_junction - slope_q_junction) > 1e-8 * scale:
        raise AssumptionError(
            "wall slopes at the junction differ "
            f"(|V_p'|={slope_p_junction!r}, |V_q'|={slope_q_junction!r}); "
            "the shared-wall mass-ratio formula does not apply"
        )
    slope_p_min = abs(float(loss.group_grad(p, m_p + side_p * delta)))
    slope_q_min = abs(float(loss.group_grad(q, m_q + side_q * delta)))
    scale = max(slope_p_min, slope_q_min, 1e-300)
    if abs(slope_p_min - slope_q_min) > 1e-8 * scale:
        raise AssumptionError(
            "wall slopes near the two minimizers differ "
            f"({slope_p_min!r} vs {slope_q_min!r}); "
            "the shared-wall mass-ratio formula does not apply"
        )

    i_p = wall_integral(loss, p, junction, cutoff=cutoff)
    i_q = wall_integral(loss, q, junction, cutoff=cutoff)
    if abs(i_p - i_q) > 1e-6 * max(abs(i_p), abs(i_q)):
        raise AssumptionError(
            f"wall integrals differ (I_p={i_p!r}, I_q={i_q!r}); "
            "the shared-wall mass-ratio formula does not apply"
        )
    wall = 0.5 * (i_p + i_q)

    if scheme is Scheme.RESAMPLING:
        coeff = 1.0 / (1.0 - aw[p]) - 1.0 / (1.0 - aw[q])
    else:
        fw = as_weights(f, loss.num_groups)
        if np.any(fw <= 0.0):
            raise LossConfigError(
                f"reweighting requires strictly positive data frequencies, got {fw.tolist()}"
            )
        coeff = fw[p] / (aw[p] * (1.0 - fw[p])) - fw[q] / (aw[q] * (1.0 - fw[q]))
    log_ratio = (2.0 / eta) * wall * coeff
    return log_ratio if as_log else math.exp(log_ratio)


# ---------------------------------------------------------------------------
# Multi-dimensional L1 wells


def _multid_terms(loss, a, f, scheme, p, q, use_population_complement: bool):
    if not isinstance(loss, GroupedLossMultiD):
        raise ConfigError("multi-dimensional mass ratios require a region-based loss")
    aw = as_weights(a, loss.num_groups)
    if p == q or not (0 <= p < loss.num_groups and 0 <= q < loss.num_groups):
        raise ConfigError(f"p={p}, q={q} must be distinct valid region indices")
    kappas = np.asarray(loss.kappas, dtype=float)
    betas = np.asarray(loss.betas, dtype=float)

    def term(g: int) -> float:
        if scheme is Scheme.RESAMPLING:
            return betas[g] / ((1.0 - aw[g]) * kappas[g] ** 2)
        fw = as_weights(f, loss.num_groups)
        if np.any(fw <= 0.0):
            raise LossConfigError(
                f"reweighting requires strictly positive data frequencies, got {fw.tolist()}"
            )
        complement = (1.0 - aw[g]) if use_population_complement else (1.0 - fw[g])
        return fw[g] * betas[g] / (aw[g] * complement * kappas[g] ** 2)

    return term(p), term(q)


def gibbs_ratio_multid(loss, scheme, a, f, eta: float, p: int, q: int, as_log: bool = False):
    """Leading-order region-mass ratio (region p over region q), L1 family.

    Each region contributes ``beta_g / ((1 - a_g) kappa_g^2)`` under
    resampling; under reweighting the weight ``f_g / (a_g (1 - f_g))``
    replaces ``1 / (1 - a_g)``.
    """
    scheme = Scheme.parse(scheme)
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta!r}")
    t_p, t_q = _multid_terms(loss, a, f, scheme, p, q, use_population_complement=False)
    log_ratio = (2.0 / eta) * (t_p - t_q)
    return log_ratio if as_log else math.exp(log_ratio)


def equal_coefficient_gibbs_ratio(
    loss, scheme, a, f, eta: float, p: int, q: int, as_log: bool = False
):
    """Region-mass ratio in the equal-coefficient normal form.

    Same as :func:`gibbs_ratio_multid` except that under reweighting the
    complement in the denominator is the population one, ``1 - a_g``, i.e.
    each region term is ``f_g beta_g / (a_g (1 - a_g) kappa_g^2)``.  The two
    forms coincide under resampling.
    """
    scheme = Scheme.parse(scheme)
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta!r}")
    t_p, t_q = _multid_terms(loss, a, f, scheme, p, q, use_population_complement=True)
    log_ratio = (2.0 / eta) * (t_p - t_q)
    return log_ratio if as_log else math.exp(log_ratio)
