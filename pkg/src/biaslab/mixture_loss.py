"""Piecewise per-group losses and their population mixtures.

The central object is a family of per-group loss functions ``V_i`` on a
shared domain, together with helpers that evaluate single-group values and
gradients and the population mixture ``sum_i a_i V_i(theta)``.

One-dimensional families are piecewise on a shared breakpoint grid, with
quadratic, linear, or general convex pieces.  The multi-dimensional family is
piecewise-L1 over axis-aligned regions.  Built-in constructors cover the four
supported families: :func:`quadratic_example`, :func:`linear_example`,
:func:`general_convex`, and :func:`multid_l1`.

Breakpoint convention
---------------------
Cell ``p`` owns the half-open interval ``(xi_{p-1}, xi_p]``: the value and
the gradient at a breakpoint come from the piece on its *left*.  SGD iterates
hit exact breakpoints with probability zero, so the convention only matters
to deterministic evaluations and tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import LossConfigError

__all__ = [
    "Proportions",
    "as_weights",
    "QuadraticPiece",
    "LinearPiece",
    "ConvexPiece",
    "GroupedLoss1D",
    "GroupedLossMultiD",
    "Minimizer",
    "quadratic_example",
    "linear_example",
    "general_convex",
    "multid_l1",
]

_CONTINUITY_TOL = 1e-12


@dataclass(frozen=True)
class Proportions:
    """Strictly positive group proportions that sum to one.

    Used both for population proportions (how common each group really is)
    and sampling proportions (how common each group is in the collected
    data).  Entries must lie strictly inside (0, 1) and sum to 1 within
    1e-12.
    """

    entries: tuple[float, ...]

    def __post_init__(self) -> None:
        entries = tuple(float(v) for v in self.entries)
        object.__setattr__(self, "entries", entries)
        problems = []
        for i, v in enumerate(entries):
            if not 0.0 < v < 1.0 or not math.isfinite(v):
                problems.append(
                    f"proportion entry {i} is {v!r}; every entry must lie strictly in (0, 1)"
                )
        if abs(sum(entries) - 1.0) > 1e-12:
            problems.append(f"proportions sum to {sum(entries)!r}, not 1 within 1e-12")
        if problems:
            raise LossConfigError(problems)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> float:
        return self.entries[i]

    @property
    def asarray(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)


def as_weights(proportions, expected_length: int | None = None) -> np.ndarray:
    """Coerce proportions (strict or loose) to a validated weight vector.

    :class:`Proportions` instances pass through.  Plain sequences are allowed
    to contain zeros (useful for degenerate mixtures such as ``a=(1, 0)``)
    but must still be non-negative and sum to 1 within 1e-9.
    """
    if isinstance(proportions, Proportions):
        arr = proportions.asarray
    else:
        arr = np.asarray(proportions, dtype=float)
        problems = []
        if arr.ndim != 1:
            raise LossConfigError(f"proportions must be a flat sequence, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            problems.append("proportions contain non-finite entries")
        elif np.any(arr < 0.0) or np.any(arr > 1.0):
            problems.append(f"proportions {arr.tolist()} must lie in [0, 1]")
        elif abs(float(arr.sum()) - 1.0) > 1e-9:
            problems.append(f"proportions {arr.tolist()} sum to {float(arr.sum())!r}, not 1")
        if problems:
            raise LossConfigError(problems)
    if expected_length is not None and arr.size != expected_length:
        raise LossConfigError(
            f"expected {expected_length} proportions (one per group), got {arr.size}"
        )
    return arr


# ---------------------------------------------------------------------------
# Piece descriptors


@dataclass(frozen=True)
class QuadraticPiece:
    """Piece ``0.5 * curvature * (theta - root)**2 + offset``."""

    curvature: float
    root: float
    offset: float = 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.curvature * (x - self.root) ** 2 + self.offset

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.curvature * (x - self.root)

    def grad_coefficients(self) -> tuple[float, float] | None:
        """Return (A, B) such that grad(x) = A*x + B."""
        return self.curvature, -self.curvature * self.root


@dataclass(frozen=True)
class LinearPiece:
    """Piece ``slope * theta + offset``."""

    slope: float
    offset: float = 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.slope * x + self.offset

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, self.slope)

    def grad_coefficients(self) -> tuple[float, float] | None:
        return 0.0, self.slope


@dataclass(frozen=True, eq=False)
class ConvexPiece:
    """Piece given by explicit value and derivative callables.

    Both callables must accept numpy arrays and evaluate elementwise.  The
    piece is expected to be convex and continuously differentiable on its
    cell; this is relied on (and spot-checked) by downstream consumers, not
    enforced pointwise here.
    """

    value_fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    label: str = ""

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.value_fn(x), dtype=float)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.grad_fn(x), dtype=float)

    def grad_coefficients(self) -> tuple[float, float] | None:
        return None


Piece = QuadraticPiece | LinearPiece | ConvexPiece


@dataclass(frozen=True)
class Minimizer:
    """A local minimizer of a population mixture.

    ``piece`` is the index of the cell that owns the location (for a kink
    minimizer sitting exactly on a breakpoint, the cell on its left).
    ``kind`` is ``"interior"`` for a stationary point inside a cell,
    ``"kink"`` for a sign change of the mixture gradient at a breakpoint,
    and ``"region"`` for the per-region minimizer of a multi-dimensional
    family.
    """

    location: float | tuple[float, ...]
    value: float
    piece: int
    kind: str = "interior"


# ---------------------------------------------------------------------------
# One-dimensional families


@dataclass(frozen=True, eq=False)
class GroupedLoss1D:
    """A finite family of continuous piecewise losses on the real line.

    The line is split at ``breakpoints`` into ``P = len(breakpoints) + 1``
    cells; cell ``p`` owns ``(xi_{p-1}, xi_p]``.  ``pieces[g][p]`` gives
    group ``g``'s loss on cell ``p``.  Every group must be continuous across
    every breakpoint (validated at construction within 1e-12).

    ``epsilon`` records the small off-support slope used by the built-in
    constructors; 0 is allowed and is used by analytical oracles that drop
    those terms.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[tuple[Piece, ...], ...]
    epsilon: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        bps = tuple(float(x) for x in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        pieces = tuple(tuple(row) for row in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        problems = []
        if len(bps) < 1:
            problems.append("at least one breakpoint is required")
        if any(not math.isfinite(x) for x in bps):
            problems.append("breakpoints must be finite")
        elif any(b <= a for a, b in zip(bps, bps[1:])):
            problems.append(f"breakpoints {list(bps)} must be strictly increasing")
        if self.epsilon < 0:
            problems.append(f"epsilon must be >= 0, got {self.epsilon}")
        n_cells = len(bps) + 1
        if not pieces:
            problems.append("at least one group is required")
        for g, row in enumerate(pieces):
            if len(row) != n_cells:
                problems.append(
                    f"group {g} has {len(row)} pieces but {len(bps)} breakpoints "
                    f"require {n_cells}"
                )
        if problems:
            raise LossConfigError(problems)

        for g, row in enumerate(pieces):
            for j, xi in enumerate(bps):
                left = float(row[j].value(xi))
                right = float(row[j + 1].value(xi))
                tol = _CONTINUITY_TOL * max(1.0, abs(left), abs(right))
                if abs(left - right) > tol:
                    problems.append(
                        f"group {g} is discontinuous at breakpoint {xi}: "
                        f"left value {left!r}, right value {right!r}"
                    )
        if problems:
            raise LossConfigError(problems)

        object.__setattr__(self, "_bps", np.asarray(bps, dtype=float))
        coeffs = [[piece.grad_coefficients() for piece in row] for row in pieces]
        if all(c is not None for row in coeffs for c in row):
            slopes = np.array([[c[0] for c in row] for row in coeffs], dtype=float)
            inter = np.array([[c[1] for c in row] for row in coeffs], dtype=float)
        else:
            slopes = inter = None
        object.__setattr__(self, "_grad_slopes", slopes)
        object.__setattr__(self, "_grad_intercepts", inter)

    # -- basic structure ----------------------------------------------------

    @property
    def num_groups(self) -> int:
        return len(self.pieces)

    @property
    def num_pieces(self) -> int:
        return len(self.breakpoints) + 1

    def piece_bounds(self, piece: int) -> tuple[float, float]:
        """Open/closed cell bounds, with infinite outer ends."""
        self._check_piece(piece)
        lo = -math.inf if piece == 0 else self.breakpoints[piece - 1]
        hi = math.inf if piece == self.num_pieces - 1 else self.breakpoints[piece]
        return lo, hi

    def piece_index(self, theta):
        """Index of the cell owning each point (breakpoints go left)."""
        return np.searchsorted(self._bps, theta, side="left")

    def _check_group(self, group: int) -> None:
        if not 0 <= group < self.num_groups:
            raise LossConfigError(
                f"group index {group} out of range for {self.num_groups} groups"
            )

    def _check_piece(self, piece: int) -> None:
        if not 0 <= piece < self.num_pieces:
            raise LossConfigError(
                f"piece index {piece} out of range for {self.num_pieces} pieces"
            )

    # -- evaluation ----------------------------------------------------------

    def _eval_group(self, group: int, theta, which: str):
        th = np.asarray(theta, dtype=float)
        flat = th.reshape(-1)
        idx = np.searchsorted(self._bps, flat, side="left")
        if self._grad_slopes is not None:
            a = self._grad_slopes[group, idx]
            b = self._grad_intercepts[group, idx]
            if which == "grad":
                out = a * flat + b
            else:
                const = np.array(
                    [float(p.value(0.0)) for p in self.pieces[group]], dtype=float
                )
                out = (0.5 * a * flat + b) * flat + const[idx]
        else:
            out = np.empty_like(flat)
            for p, piece in enumerate(self.pieces[group]):
                mask = idx == p
                if mask.any():
                    fn = piece.grad if which == "grad" else piece.value
                    out[mask] = fn(flat[mask])
        out = out.reshape(th.shape)
        return float(out) if th.ndim == 0 else out

    def group_value(self, group: int, theta):
        """V_group(theta) under the breakpoint ownership convention."""
        self._check_group(group)
        return self._eval_group(group, theta, "value")

    def group_grad(self, group: int, theta):
        """dV_group/dtheta under the breakpoint ownership convention."""
        self._check_group(group)
        return self._eval_group(group, theta, "grad")

    def piece_value(self, group: int, piece: int, theta):
        """Evaluate a specific piece's formula, ignoring cell ownership.

        Gives one-sided values at breakpoints.
        """
        self._check_group(group)
        self._check_piece(piece)
        out = self.pieces[group][piece].value(theta)
        return float(out) if np.ndim(out) == 0 else out

    def piece_grad(self, group: int, piece: int, theta):
        """One-sided gradient from a specific piece's formula."""
        self._check_group(group)
        self._check_piece(piece)
        out = self.pieces[group][piece].grad(theta)
        return float(out) if np.ndim(out) == 0 else out

    def grad_for_groups(self, theta, groups):
        """Vectorized ``dV_{groups[i]}/dtheta`` at ``theta[i]``.

        ``theta`` and ``groups`` must have matching shapes.  This is the hot
        path used by ensemble simulators.
        """
        th = np.asarray(theta, dtype=float)
        gs = np.asarray(groups)
        flat = th.reshape(-1)
        gflat = gs.reshape(-1)
        idx = np.searchsorted(self._bps, flat, side="left")
        if self._grad_slopes is not None:
            out = self._grad_slopes[gflat, idx] * flat + self._grad_intercepts[gflat, idx]
        else:
            out = np.empty_like(flat)
            for g in range(self.num_groups):
                for p in range(self.num_pieces):
                    mask = (gflat == g) & (idx == p)
                    if mask.any():
                        out[mask] = self.pieces[g][p].grad(flat[mask])
        return out.reshape(th.shape)

    def population_value(self, theta, a):
        """Mixture value ``sum_g a_g V_g(theta)``."""
        w = as_weights(a, self.num_groups)
        total = None
        for g in range(self.num_groups):
            term = w[g] * self._eval_group(g, theta, "value")
            total = term if total is None else total + term
        return total

    def population_grad(self, theta, a):
        """Mixture gradient ``sum_g a_g dV_g/dtheta``."""
        w = as_weights(a, self.num_groups)
        total = None
        for g in range(self.num_groups):
            term = w[g] * self._eval_group(g, theta, "grad")
            total = term if total is None else total + term
        return total

    # -- minimizers -----------------------------------------------------------

    def _mixture_piece_grad(self, w: np.ndarray, piece: int, x):
        total = 0.0
        for g in range(self.num_groups):
            total = total + w[g] * self.pieces[g][piece].grad(x)
        return total

    def local_minimizers(self, a) -> list[Minimizer]:
        """Local minimizers of the population mixture, sorted by location.

        Interior stationary points are found per piece (in closed form for
        quadratic/linear pieces, by bracketed root finding to 1e-10 for
        general convex pieces); breakpoints where the mixture gradient
        changes sign from <=0 to >=0 (one side strict) are reported as kink
        minimizers.
        """
        w = as_weights(a, self.num_groups)
        found: list[Minimizer] = []
        for p in range(self.num_pieces):
            lo, hi = self.piece_bounds(p)
            coeffs = [self.pieces[g][p].grad_coefficients() for g in range(self.num_groups)]
            if all(c is not None for c in coeffs):
                slope = float(sum(w[g] * coeffs[g][0] for g in range(self.num_groups)))
                inter = float(sum(w[g] * coeffs[g][1] for g in range(self.num_groups)))
                if slope > 0.0:
                    root = -inter / slope
                    if lo < root < hi:
                        found.append(
                            Minimizer(root, float(self.population_value(root, w)), p)
                        )
            elif math.isfinite(lo) and math.isfinite(hi):
                gl = float(self._mixture_piece_grad(w, p, lo))
                gr = float(self._mixture_piece_grad(w, p, hi))
                if gl < 0.0 < gr:
                    root = float(
                        brentq(
                            lambda x: float(self._mixture_piece_grad(w, p, x)),
                            lo,
                            hi,
                            xtol=1e-10,
                        )
                    )
                    if lo < root < hi:
                        found.append(
                            Minimizer(root, float(self.population_value(root, w)), p)
                        )
        for j, xi in enumerate(self.breakpoints):
            gl = float(self._mixture_piece_grad(w, j, xi))
            gr = float(self._mixture_piece_grad(w, j + 1, xi))
            if gl <= 0.0 <= gr and (gl < 0.0 or gr > 0.0):
                found.append(
                    Minimizer(xi, float(self.population_value(xi, w)), j, kind="kink")
                )
        found.sort(key=lambda m: m.location)
        return found


# ---------------------------------------------------------------------------
# Multi-dimensional family


@dataclass(frozen=True, eq=False)
class GroupedLossMultiD:
    """Piecewise-L1 per-group losses over disjoint axis-aligned regions.

    Region ``g`` is the box ``prod_j (lows[g,j], highs[g,j]]`` (half-open per
    coordinate, so shared faces belong to the lower region, matching the 1-D
    breakpoint convention).  Inside its own region, group ``g``'s loss is
    ``kappas[g] * ||theta - minimizer_g||_1 - betas[g]``; outside, the pull
    back toward the minimizer has the small slope ``epsilon`` instead.  Off-
    region values are qualitative (no cross-region continuity is enforced);
    gradients are what the dynamics consume.
    """

    lows: np.ndarray
    highs: np.ndarray
    kappas: np.ndarray
    betas: np.ndarray
    minimizers: np.ndarray
    epsilon: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        lows = np.atleast_2d(np.asarray(self.lows, dtype=float))
        highs = np.atleast_2d(np.asarray(self.highs, dtype=float))
        mins = np.atleast_2d(np.asarray(self.minimizers, dtype=float))
        kappas = np.atleast_1d(np.asarray(self.kappas, dtype=float))
        betas = np.atleast_1d(np.asarray(self.betas, dtype=float))
        for field, value in (
            ("lows", lows),
            ("highs", highs),
            ("kappas", kappas),
            ("betas", betas),
            ("minimizers", mins),
        ):
            object.__setattr__(self, field, value)

        problems = []
        g, d = lows.shape
        if highs.shape != (g, d) or mins.shape != (g, d):
            problems.append(
                f"lows {lows.shape}, highs {highs.shape}, minimizers {mins.shape} "
                "must share one (groups, dimension) shape"
            )
        if kappas.shape != (g,) or betas.shape != (g,):
            problems.append("kappas and betas must have one entry per region")
        if problems:
            raise LossConfigError(problems)

        if np.any(kappas <= 0):
            problems.append(f"region slopes must be positive, got {kappas.tolist()}")
        if np.any(betas < 0):
            problems.append(f"region offsets must be non-negative, got {betas.tolist()}")
        if self.epsilon < 0:
            problems.append(f"epsilon must be >= 0, got {self.epsilon}")
        if np.any(lows >= highs):
            problems.append("every region must satisfy lows < highs per coordinate")
        for i in range(g):
            if not (np.all(lows[i] < mins[i]) and np.all(mins[i] < highs[i])):
                problems.append(
                    f"minimizer of region {i} must lie strictly inside the region"
                )
        for i in range(g):
            for j in range(i + 1, g):
                inter_lo = np.maximum(lows[i], lows[j])
                inter_hi = np.minimum(highs[i], highs[j])
                if np.all(inter_lo < inter_hi):
                    problems.append(f"regions {i} and {j} overlap")
        if problems:
            raise LossConfigError(problems)

    @property
    def num_groups(self) -> int:
        return self.lows.shape[0]

    @property
    def dimension(self) -> int:
        return self.lows.shape[1]

    def region_of(self, theta):
        """Region index per point; raises if any point is uncovered."""
        th = np.asarray(theta, dtype=float)
        scalar_point = th.ndim == 1
        pts = th.reshape(-1, self.dimension)
        out = np.full(pts.shape[0], -1, dtype=np.int64)
        for g in range(self.num_groups):
            mask = np.all((pts > self.lows[g]) & (pts <= self.highs[g]), axis=1)
            out[mask] = g
        if np.any(out < 0):
            bad = pts[out < 0][0]
            raise LossConfigError(
                f"{int(np.sum(out < 0))} point(s) lie in no region, e.g. {bad.tolist()}"
            )
        if scalar_point:
            return int(out[0])
        return out.reshape(th.shape[:-1])

    def group_grad(self, group: int, theta):
        """Gradient of V_group: slope kappa inside its region, epsilon outside."""
        if not 0 <= group < self.num_groups:
            raise LossConfigError(
                f"group index {group} out of range for {self.num_groups} groups"
            )
        th = np.asarray(theta, dtype=float)
        regions = np.asarray(self.region_of(th))
        slope = np.where(regions == group, self.kappas[group], self.epsilon)
        return slope[..., None] * np.sign(th - self.minimizers[group])

    def grad_for_groups(self, theta, groups):
        """Vectorized per-point gradient of each point's assigned group."""
        th = np.asarray(theta, dtype=float)
        gs = np.asarray(groups)
        pts = th.reshape(-1, self.dimension)
        gflat = gs.reshape(-1)
        regions = self.region_of(pts)
        slope = np.where(regions == gflat, self.kappas[gflat], self.epsilon)
        out = slope[:, None] * np.sign(pts - self.minimizers[gflat])
        return out.reshape(th.shape)

    def group_value(self, group: int, theta):
        if not 0 <= group < self.num_groups:
            raise LossConfigError(
                f"group index {group} out of range for {self.num_groups} groups"
            )
        th = np.asarray(theta, dtype=float)
        regions = np.asarray(self.region_of(th))
        dist = np.sum(np.abs(th - self.minimizers[group]), axis=-1)
        inside = regions == group
        return np.where(
            inside, self.kappas[group] * dist - self.betas[group], self.epsilon * dist
        )

    def population_value(self, theta, a):
        w = as_weights(a, self.num_groups)
        total = None
        for g in range(self.num_groups):
            term = w[g] * self.group_value(g, theta)
            total = term if total is None else total + term
        return total

    def population_grad(self, theta, a):
        w = as_weights(a, self.num_groups)
        total = None
        for g in range(self.num_groups):
            term = w[g] * self.group_grad(g, theta)
            total = term if total is None else total + term
        return total

    def local_minimizers(self, a) -> list[Minimizer]:
        """The per-region minimizers with their population values."""
        w = as_weights(a, self.num_groups)
        out = []
        for g in range(self.num_groups):
            loc = self.minimizers[g]
            val = float(self.population_value(loc, w))
            out.append(Minimizer(tuple(float(x) for x in loc), val, g, kind="region"))
        return out


# ---------------------------------------------------------------------------
# Built-in constructors


def quadratic_example() -> GroupedLoss1D:
    """Two-group loss that is quadratic on each group's own half-line.

    Group 1 is ``0.5*(theta+1)**2 - 0.5`` for theta <= 0 and flat 0 beyond;
    group 2 mirrors it around the origin.  The mixture has interior local
    minimizers at -1 and +1 with values ``-a_1/2`` and ``-a_2/2``.
    """
    flat = LinearPiece(0.0, 0.0)
    return GroupedLoss1D(
        breakpoints=(0.0,),
        pieces=(
            (QuadraticPiece(1.0, -1.0, -0.5), flat),
            (flat, QuadraticPiece(1.0, 1.0, -0.5)),
        ),
        epsilon=0.0,
        name="quadratic",
    )


def linear_example(epsilon: float = 0.1) -> GroupedLoss1D:
    """Two-group piecewise-linear loss with V-shaped wells at -1 and +1.

    Group 1 is ``|theta+1| - 1`` left of the origin and climbs with slope
    ``epsilon`` beyond it; group 2 mirrors it.  ``epsilon=0`` is allowed and
    drops the off-support terms, matching the analytic leading-order
    formulas; simulations should keep ``epsilon > 0`` so both groups pull
    everywhere.
    """
    if not 0.0 <= epsilon < 1.0:
        raise LossConfigError(
            f"linear_example requires 0 <= epsilon < 1, got {epsilon}"
        )
    e = float(epsilon)
    return GroupedLoss1D(
        breakpoints=(-1.0, 0.0, 1.0),
        pieces=(
            (
                LinearPiece(-1.0, -2.0),
                LinearPiece(1.0, 0.0),
                LinearPiece(e, 0.0),
                LinearPiece(e, 0.0),
            ),
            (
                LinearPiece(-e, 0.0),
                LinearPiece(-e, 0.0),
                LinearPiece(-1.0, 0.0),
                LinearPiece(1.0, -2.0),
            ),
        ),
        epsilon=e,
        name="linear",
    )


WallPair = tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]


def general_convex(
    minimizers: Sequence[float] = (-1.0, 1.0),
    junction: float = 0.0,
    power: float = 2.0,
    walls: tuple[WallPair, WallPair] | None = None,
    epsilon: float = 0.1,
    outer_slope: float = 1.0,
    name: str = "general",
) -> GroupedLoss1D:
    """Two-group family whose convex inner walls meet at a junction.

    Group 0 has its minimum at ``minimizers[0]`` left of ``junction`` and
    rises along a convex wall toward the junction, where its value is 0;
    beyond the junction it climbs with slope ``epsilon``, and outside its own
    basin it falls toward the minimum with slope ``outer_slope``.  Group 1
    mirrors this on the right.

    Walls default to the symmetric power family ``h(t) = t**power / power``
    in the offset ``t`` from the group's minimizer (``power=1`` reproduces
    the piecewise-linear family exactly; ``power>1`` has a smooth minimum
    whose wall integral ``int 1/h'`` is singular there for ``power >= 2``).
    Custom ``walls`` are a pair of ``(h, h')`` callables per group, each
    vectorized in ``t >= 0`` with ``h(0) = 0``.
    """
    m0, m1 = (float(x) for x in minimizers)
    xi = float(junction)
    problems = []
    if not m0 < xi < m1:
        problems.append(
            f"minimizers {m0}, {m1} must straddle the junction {xi} strictly"
        )
    if epsilon < 0:
        problems.append(f"epsilon must be >= 0, got {epsilon}")
    if outer_slope <= 0:
        problems.append(f"outer_slope must be positive, got {outer_slope}")
    if walls is None and power < 1.0:
        problems.append(f"power must be >= 1, got {power}")
    if problems:
        raise LossConfigError(problems)

    if walls is None:
        p = float(power)

        def make_wall(pw: float) -> WallPair:
            return (lambda t: np.power(t, pw) / pw, lambda t: np.power(t, pw - 1.0))

        walls = (make_wall(p), make_wall(p))

    (h0, h0p), (h1, h1p) = walls
    for g, h in ((0, h0), (1, h1)):
        if abs(float(h(np.asarray(0.0)))) > 1e-12:
            raise LossConfigError(f"wall {g} must have value 0 at its minimizer")
    depth0 = float(h0(np.asarray(xi - m0)))
    depth1 = float(h1(np.asarray(m1 - xi)))

    def wall0_value(x):
        return h0(np.asarray(x, dtype=float) - m0) - depth0

    def wall0_grad(x):
        return h0p(np.asarray(x, dtype=float) - m0)

    def wall1_value(x):
        return h1(m1 - np.asarray(x, dtype=float)) - depth1

    def wall1_grad(x):
        return -np.asarray(h1p(m1 - np.asarray(x, dtype=float)), dtype=float)

    e = float(epsilon)
    s = float(outer_slope)
    group0 = (
        LinearPiece(-s, -depth0 + s * m0),
        ConvexPiece(wall0_value, wall0_grad, label="wall0"),
        LinearPiece(e, -e * xi),
        LinearPiece(e, -e * xi),
    )
    group1 = (
        LinearPiece(-e, e * xi),
        LinearPiece(-e, e * xi),
        ConvexPiece(wall1_value, wall1_grad, label="wall1"),
        LinearPiece(s, -depth1 - s * m1),
    )
    return GroupedLoss1D(
        breakpoints=(m0, xi, m1),
        pieces=(group0, group1),
        epsilon=e,
        name=name,
    )


def multid_l1(
    dimension: int = 2,
    kappas: Sequence[float] = (1.0, 1.0),
    betas: Sequence[float] = (1.0, 1.0),
    epsilon: float = 0.1,
) -> GroupedLossMultiD:
    """Two-region L1 family split by the hyperplane ``x_0 = 0``.

    Region 1 is the half-space ``x_0 <= 0`` with minimizer ``(-1, 0, ...)``;
    region 2 is ``x_0 > 0`` with minimizer ``(+1, 0, ...)``.  Slopes and
    offsets are per region.
    """
    if dimension < 1:
        raise LossConfigError(f"dimension must be >= 1, got {dimension}")
    inf = math.inf
    lows = np.full((2, dimension), -inf)
    highs = np.full((2, dimension), inf)
    highs[0, 0] = 0.0
    lows[1, 0] = 0.0
    mins = np.zeros((2, dimension))
    mins[0, 0] = -1.0
    mins[1, 0] = 1.0
    return GroupedLossMultiD(
        lows=lows,
        highs=highs,
        kappas=np.asarray(kappas, dtype=float),
        betas=np.asarray(betas, dtype=float),
        minimizers=mins,
        epsilon=float(epsilon),
        name="multid_l1",
    )
