"""Off-policy tabular TD(0) with reweighted or resampled corrections.

A behavior policy collects one trajectory on a deterministic ring MDP; the
goal is the value function of a different target policy.  Two corrections
make TD(0) unbiased for the target:

* **reweighting** — follow the logged transitions in order and scale each
  update by the importance ratio ``pi(a|s) / mu(a|s)``;
* **resampling** — at each logged state draw a fresh action from the target
  policy and apply an unweighted update along a stored transition for that
  state-action pair (when the pair never occurs in the log, the target
  policy is renormalized over the actions that do occur at that state).

Both produce the same expected update per visited state under full action
coverage (see :func:`expected_td_update`), but their update-noise profiles
differ, mirroring the gradient-sampling schemes for grouped losses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LossConfigError, NumericalFailure
from .grad_sampler import Scheme
from .rng import STREAM_TD_RESAMPLE, STREAM_TD_TRAJECTORY, make_generator

__all__ = [
    "RingMDP",
    "TabularPolicy",
    "uniform_policy",
    "biased_policy",
    "TransitionLog",
    "OffpolicyResult",
    "exact_value",
    "generate_trajectory",
    "td_reweighting",
    "td_resampling",
    "run_offpolicy",
    "expected_td_update",
]

ACTIONS = (-1, 1)


@dataclass(frozen=True, eq=False)
class RingMDP:
    """States 0..n-1 on a ring; action a in {-1, +1} moves to (s + a) mod n.

    The reward for a transition out of state ``s`` is ``rewards[s]``
    (default ``1 + sin(2 pi s / n)``), and ``gamma`` discounts the future.
    """

    num_states: int = 32
    gamma: float = 0.9
    rewards: np.ndarray | None = None

    def __post_init__(self) -> None:
        problems = []
        if int(self.num_states) != self.num_states or self.num_states < 2:
            problems.append(f"num_states must be an integer >= 2, got {self.num_states!r}")
        if not 0.0 <= self.gamma < 1.0:
            problems.append(f"gamma must lie in [0, 1), got {self.gamma!r}")
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "num_states", int(self.num_states))
        n = self.num_states
        if self.rewards is None:
            r = 1.0 + np.sin(2.0 * np.pi * np.arange(n) / n)
        else:
            r = np.asarray(self.rewards, dtype=float)
            if r.shape != (n,):
                raise ConfigError(
                    f"rewards must have one entry per state ({n}), got shape {r.shape}"
                )
        object.__setattr__(self, "rewards", r)

    def next_state(self, state: int, action: int) -> int:
        return (state + action) % self.num_states


@dataclass(frozen=True)
class TabularPolicy:
    """State-independent two-action policy; ``prob_plus`` is P(a = +1)."""

    prob_plus: float

    def __post_init__(self) -> None:
        if not 0.0 < self.prob_plus < 1.0:
            raise ConfigError(
                f"prob_plus must lie strictly in (0, 1) so both actions can occur, "
                f"got {self.prob_plus!r}"
            )

    def prob(self, action: int) -> float:
        if action == 1:
            return self.prob_plus
        if action == -1:
            return 1.0 - self.prob_plus
        raise ConfigError(f"action must be -1 or +1, got {action!r}")


def uniform_policy() -> TabularPolicy:
    return TabularPolicy(0.5)


def biased_policy(c: float) -> TabularPolicy:
    """Behavior policy P(+1) = 1/2 + c; c in [0, 0.5) keeps both actions live."""
    if not 0.0 <= c < 0.5:
        raise ConfigError(f"bias c must lie in [0, 0.5), got {c!r}")
    return TabularPolicy(0.5 + c)


def exact_value(mdp: RingMDP, pi: TabularPolicy) -> np.ndarray:
    """Target-policy value function by direct linear solve.

    Solves ``(I - gamma P_pi) V = r`` and verifies the residual is at most
    1e-10 in the max norm.
    """
    n = mdp.num_states
    p = np.zeros((n, n))
    idx = np.arange(n)
    p[idx, (idx + 1) % n] = pi.prob(1)
    p[idx, (idx - 1) % n] = pi.prob(-1)
    a = np.eye(n) - mdp.gamma * p
    v = np.linalg.solve(a, mdp.rewards)
    residual = float(np.max(np.abs(a @ v - mdp.rewards)))
    if residual > 1e-10:
        raise NumericalFailure(
            f"value-function solve residual {residual!r} exceeds 1e-10"
        )
    return v


@dataclass(frozen=True, eq=False)
class TransitionLog:
    """A behavior trajectory: states s_0..s_T and actions a_0..a_{T-1}.

    Construction validates every logged transition against the ring
    dynamics.  ``present`` marks which (state, action) pairs occur at least
    once; resampling renormalizes the target policy over present actions.
    """

    mdp: RingMDP
    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=np.int64)
        actions = np.asarray(self.actions, dtype=np.int64)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        if states.ndim != 1 or actions.ndim != 1 or len(states) != len(actions) + 1:
            raise LossConfigError(
                "a log needs T+1 states and T actions; got "
                f"{states.shape} states, {actions.shape} actions"
            )
        if not np.all(np.isin(actions, ACTIONS)):
            raise LossConfigError("actions must all be -1 or +1")
        n = self.mdp.num_states
        if np.any(states < 0) or np.any(states >= n):
            raise LossConfigError(f"states must lie in [0, {n})")
        expected = (states[:-1] + actions) % n
        bad = np.nonzero(expected != states[1:])[0]
        if bad.size:
            t = int(bad[0])
            raise LossConfigError(
                f"logged transition {t} is inconsistent with the ring dynamics: "
                f"{states[t]} --{actions[t]}--> {states[t + 1]}"
            )
        present = np.zeros((n, 2), dtype=bool)
        present[states[:-1], (actions + 1) // 2] = True
        object.__setattr__(self, "present", present)

    @property
    def num_steps(self) -> int:
        return len(self.actions)

    def has(self, state: int, action: int) -> bool:
        return bool(self.present[state, (action + 1) // 2])


def generate_trajectory(
    mdp: RingMDP, mu: TabularPolicy, steps: int, start: int = 0, rng=None, seed: int = 0
) -> TransitionLog:
    """Roll the behavior policy for ``steps`` transitions from ``start``."""
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps!r}")
    gen = rng if rng is not None else make_generator(seed, STREAM_TD_TRAJECTORY)
    u = gen.random(steps)
    actions = np.where(u < mu.prob_plus, 1, -1).astype(np.int64)
    states = np.empty(steps + 1, dtype=np.int64)
    states[0] = int(start) % mdp.num_states
    states[1:] = (states[0] + np.cumsum(actions)) % mdp.num_states
    return TransitionLog(mdp=mdp, states=states, actions=actions)


def td_reweighting(values, transition, eta: float, pi: TabularPolicy, mu: TabularPolicy):
    """One importance-weighted TD(0) update, in place.

    ``values`` is a ``(V, gamma)`` pair and ``transition`` is
    ``(s, a, r, s_next)``; the update is
    ``V[s] += eta * (pi(a)/mu(a)) * (r + gamma * V[s_next] - V[s])``.
    """
    v, gamma = values
    s, a, r, s_next = transition
    weight = pi.prob(a) / mu.prob(a)
    delta = r + gamma * v[s_next] - v[s]
    v[s] += eta * weight * delta
    return v


def td_resampling(values, log: TransitionLog, state: int, eta: float, pi: TabularPolicy, rng):
    """One resampled TD(0) update at a logged state, in place.

    Draws an action from the target policy (renormalized over the actions
    present at ``state`` in the log) and applies an unweighted update along
    a stored transition for that pair.  On this deterministic ring all
    stored transitions for a pair are identical, so the uniform choice among
    them is elided.
    """
    v, gamma = values
    p_plus = pi.prob(1)
    has_plus = log.has(state, 1)
    has_minus = log.has(state, -1)
    if not (has_plus or has_minus):
        raise LossConfigError(f"state {state} never occurs in the log")
    if has_plus and has_minus:
        action = 1 if rng.random() < p_plus else -1
    else:
        action = 1 if has_plus else -1
    s_next = log.mdp.next_state(state, action)
    r = float(log.mdp.rewards[state])
    delta = r + gamma * v[s_next] - v[state]
    v[state] += eta * delta
    return v


@dataclass(frozen=True, eq=False)
class OffpolicyResult:
    """Error trace of one off-policy TD run.

    ``errors[i]`` is the squared L2 distance between the value estimate
    after ``record_steps[i]`` updates and the exact target value function.
    """

    scheme: Scheme
    c: float
    eta: float
    seed: int
    passes: int
    record_steps: np.ndarray
    errors: np.ndarray
    values: np.ndarray
    exact: np.ndarray

    @property
    def initial_error(self) -> float:
        return float(self.errors[0])

    @property
    def final_error(self) -> float:
        return float(self.errors[-1])


def _record_schedule(total: int, points: int = 64) -> np.ndarray:
    """Step counts 0 < t <= total, roughly log-spaced, always ending at total."""
    raw = np.unique(np.round(np.geomspace(1, total, points)).astype(np.int64))
    return raw[(raw >= 1) & (raw <= total)]


def run_offpolicy(
    mdp: RingMDP,
    pi: TabularPolicy,
    c: float,
    steps: int,
    eta: float,
    passes: int = 1,
    seed: int = 0,
    scheme=Scheme.REWEIGHTING,
    record_points: int = 64,
) -> OffpolicyResult:
    """Collect one behavior trajectory and run TD(0) with a correction scheme.

    The same seed produces the same trajectory for both schemes, so paired
    comparisons share their data.  ``passes`` repeats the sweep over the log
    (fresh resampling randomness per pass).  Errors against the exact value
    function are recorded on a log-spaced schedule plus step 0.
    """
    scheme = Scheme.parse(scheme)
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta!r}")
    if passes < 1:
        raise ConfigError(f"passes must be >= 1, got {passes!r}")
    mu = biased_policy(c)
    log = generate_trajectory(mdp, mu, steps, start=0, seed=seed)
    exact = exact_value(mdp, pi)

    total = steps * passes
    schedule = _record_schedule(total, record_points)
    record_steps = np.concatenate([[0], schedule])

    n = mdp.num_states
    gamma = mdp.gamma
    v = [0.0] * n
    exact_list = exact.tolist()
    rewards = mdp.rewards.tolist()
    states = log.states.tolist()
    actions = log.actions.tolist()

    def current_error() -> float:
        return float(sum((vi - ei) ** 2 for vi, ei in zip(v, exact_list)))

    errors = [current_error()]
    next_idx = 0

    if scheme is Scheme.REWEIGHTING:
        w_plus = pi.prob(1) / mu.prob(1)
        w_minus = pi.prob(-1) / mu.prob(-1)
        t_global = 0
        for _ in range(passes):
            for t in range(steps):
                s = states[t]
                a = actions[t]
                weight = w_plus if a == 1 else w_minus
                delta = rewards[s] + gamma * v[states[t + 1]] - v[s]
                v[s] += eta * weight * delta
                t_global += 1
                if next_idx < len(schedule) and t_global == schedule[next_idx]:
                    errors.append(current_error())
                    next_idx += 1
    else:
        gen = make_generator(seed, STREAM_TD_RESAMPLE)
        u = gen.random(total)
        p_plus = pi.prob(1)
        present = log.present
        has_both = (present[:, 0] & present[:, 1]).tolist()
        has_plus = present[:, 1].tolist()
        t_global = 0
        for _ in range(passes):
            for t in range(steps):
                s = states[t]
                if has_both[s]:
                    a = 1 if u[t_global] < p_plus else -1
                else:
                    a = 1 if has_plus[s] else -1
                nxt = (s + a) % n
                delta = rewards[s] + gamma * v[nxt] - v[s]
                v[s] += eta * delta
                t_global += 1
                if next_idx < len(schedule) and t_global == schedule[next_idx]:
                    errors.append(current_error())
                    next_idx += 1

    return OffpolicyResult(
        scheme=scheme,
        c=float(c),
        eta=float(eta),
        seed=int(seed),
        passes=int(passes),
        record_steps=record_steps,
        errors=np.asarray(errors),
        values=np.asarray(v),
        exact=exact,
    )


def expected_td_update(scheme, values: np.ndarray, mdp: RingMDP, pi: TabularPolicy, mu: TabularPolicy) -> np.ndarray:
    """Expected per-visit TD(0) update at every state, per unit learning rate.

    Enumerates both actions exactly (full coverage assumed).  Under
    reweighting each action is drawn with its behavior probability and
    weighted by the importance ratio; under resampling each action is drawn
    with its target probability and unweighted.  Algebraically both equal
    ``sum_a pi(a) delta(s, a)``, which is what makes the two schemes agree
    in expectation; this function computes each scheme's form literally so
    the agreement can be verified rather than assumed.
    """
    scheme = Scheme.parse(scheme)
    v = np.asarray(values, dtype=float)
    n = mdp.num_states
    if v.shape != (n,):
        raise ConfigError(f"values must have shape ({n},), got {v.shape}")
    out = np.zeros(n)
    for s in range(n):
        for a in ACTIONS:
            delta = mdp.rewards[s] + mdp.gamma * v[mdp.next_state(s, a)] - v[s]
            if scheme is Scheme.REWEIGHTING:
                out[s] += mu.prob(a) * (pi.prob(a) / mu.prob(a)) * delta
            else:
                out[s] += pi.prob(a) * delta
    return out
