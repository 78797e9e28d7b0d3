"""Sequential likelihood evaluation for epidemics observed through susceptibles.

The hidden infectious count evolves as a birth-death process whose up-jump
total over an observation interval is pinned by the observed drop in
susceptibles.  Each step therefore reduces to an expectation over restricted
bridge spaces: draw a start state from the positive part of the current
posterior, an end state uniformly from its admissible range, and a uniform
bridge between them; the importance weight is the path likelihood over the
bridge density times the size of the end-state range.  The absorbed case
(no infectious individuals left) is handled exactly: the susceptible count can
then never move again.

A plain bootstrap particle filter (propagate forward, keep exact matches on
the observed susceptible count) is included as the baseline whose weight
collapse the bridge filter is designed to avoid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .counting import NEG_INF, BridgeSpec, log_bridge_count
from .errors import DataFormatError, ModelDomainError
from .likelihood import batch_path_loglik
from .models import SIRParams, sir_as_bd
from .sampler import RngStream, _draw_padded

POSTERIOR_TOL = 1e-12


@dataclass
class Observations:
    """Susceptible counts at strictly increasing times; counts never increase."""

    times: np.ndarray
    susceptibles: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.susceptibles = np.asarray(self.susceptibles, np.int64)
        if self.times.ndim != 1 or self.times.shape != self.susceptibles.shape:
            raise DataFormatError("times and susceptibles must be equal-length vectors")
        if len(self.times) < 1:
            raise DataFormatError("need at least one observation")
        # Rows are reported 1-based, naming the later entry of a violating pair.
        if np.any(np.diff(self.times) <= 0):
            k = int(np.flatnonzero(np.diff(self.times) <= 0)[0]) + 2
            raise DataFormatError(f"times must be strictly increasing (row {k})")
        if np.any(np.diff(self.susceptibles) > 0):
            k = int(np.flatnonzero(np.diff(self.susceptibles) > 0)[0]) + 2
            raise DataFormatError(f"susceptible counts must be nonincreasing (row {k})")
        if np.any(self.susceptibles < 0):
            k = int(np.flatnonzero(self.susceptibles < 0)[0]) + 1
            raise DataFormatError(f"susceptible counts must be >= 0 (row {k})")

    def __len__(self):
        return len(self.times)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def drops(self) -> np.ndarray:
        return -np.diff(self.susceptibles)


@dataclass
class FilterState:
    """Empirical posterior over the hidden infectious count after ``step``."""

    step: int
    posterior: np.ndarray

    def __post_init__(self):
        self.posterior = np.asarray(self.posterior, float)
        total = self.posterior.sum()
        if self.posterior.ndim != 1 or abs(total - 1.0) > POSTERIOR_TOL:
            raise ValueError(f"posterior must sum to 1, got {total}")
        if np.any(self.posterior < 0):
            raise ValueError("posterior must be nonnegative")

    @property
    def p_alive(self) -> float:
        return float(1.0 - self.posterior[0])


def initial_state(i0: int) -> FilterState:
    if i0 < 1:
        raise ModelDomainError(f"initial infectious count must be >= 1, got {i0}")
    post = np.zeros(i0 + 1)
    post[i0] = 1.0
    return FilterState(0, post)


def igbs_filter_step(state: FilterState, params: SIRParams, s_prev: int,
                     s_next: int, dt: float, m: int, rng: RngStream):
    """One filtering step; returns the new state and the log conditional
    probability of the observed susceptible count.

    With the epidemic surely absorbed, the observation law is 0-1: an
    unchanged count has probability one, any drop is impossible (-inf).
    """
    if s_next > s_prev:
        raise DataFormatError("susceptible count increased between observations")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    drop = int(s_prev - s_next)
    p_alive = state.p_alive
    size_new = len(state.posterior) + drop

    if p_alive == 0.0:
        post = np.zeros(size_new)
        post[0] = 1.0
        new_state = FilterState(state.step + 1, post)
        return new_state, (0.0 if drop == 0 else NEG_INF)

    positive = state.posterior.copy()
    positive[0] = 0.0
    positive /= positive.sum()
    model = sir_as_bd(params, s0=s_prev)

    i_draws = rng.gen.choice(len(positive), m, p=positive).astype(np.int64)
    j_draws = (rng.gen.random(m) * (i_draws + drop + 1)).astype(np.int64)
    upper = i_draws + drop + 1
    steps, dtau, jumps = _draw_padded(i_draws, j_draws, drop, dt, 0, upper, m, rng)
    ll = batch_path_loglik(model, i_draws, steps, dtau)

    # log bridge density per draw; skeleton counts computed once per endpoint pair
    pair_codes = i_draws * (size_new + 1) + j_draws
    codes, inverse = np.unique(pair_codes, return_inverse=True)
    per_pair = np.empty(len(codes))
    for pos, code in enumerate(codes):
        i_val, j_val = int(code) // (size_new + 1), int(code) % (size_new + 1)
        spec = BridgeSpec(i=i_val, j=j_val, up_jumps=drop, t=dt,
                          lower=0, upper=i_val + drop + 1)
        per_pair[pos] = log_bridge_count(spec)
    log_cards = per_pair[inverse]
    log_simplex = gammaln(jumps + 1) - jumps * math.log(dt)
    log_q = ll - (log_simplex - log_cards) + np.log(i_draws + drop + 1)
    q = np.exp(log_q)

    contrib = np.bincount(j_draws, weights=q, minlength=size_new) * (p_alive / m)
    if drop == 0:
        contrib[0] += 1.0 - p_alive
    total = float(contrib.sum())
    if total <= 0.0:
        # All replicate weights vanished: the observation is unexplainable at
        # these parameters (or m was exhausted); keep a degenerate posterior.
        post = np.zeros(size_new)
        post[0] = 1.0
        return FilterState(state.step + 1, post), NEG_INF
    new_state = FilterState(state.step + 1, contrib / total)
    return new_state, math.log(total)


def run_filter(params: SIRParams, obs: Observations, i0: int, m: int,
               rng: RngStream, trace: list | None = None):
    """Full filtering pass; returns (log-likelihood, final state).

    The recursion starts from a point mass at ``i0`` infectious individuals.
    A -inf step (parameters cannot explain the data) propagates immediately.
    """
    state = initial_state(i0)
    total = 0.0
    for k in range(1, len(obs)):
        dt = float(obs.times[k] - obs.times[k - 1])
        state, step_ll = igbs_filter_step(
            state, params, int(obs.susceptibles[k - 1]), int(obs.susceptibles[k]),
            dt, m, rng,
        )
        if trace is not None:
            trace.append({"step": k, "cond_loglik": step_ll, "p_alive": state.p_alive})
        if step_ll == NEG_INF:
            return NEG_INF, state
        total += step_ll
    return total, state


def igbs_filter_loglik(params: SIRParams, obs: Observations, i0: int, m: int,
                       rng: RngStream, trace: list | None = None) -> float:
    """Log-likelihood of the susceptible record under the bridge filter."""
    return run_filter(params, obs, i0, m, rng, trace=trace)[0]


@dataclass
class BootstrapResult:
    loglik: float
    survival: np.ndarray
    failed: bool
    posterior_final: np.ndarray = field(default=None, repr=False)


def _propagate_pairs(infectious: np.ndarray, s_start: int, params: SIRParams,
                     dt: float, rng: RngStream, max_rounds: int = 1_000_000):
    """Forward-simulate (S, I) pairs over one interval for every particle."""
    n = len(infectious)
    s = np.full(n, s_start, np.int64)
    i = infectious.astype(np.int64).copy()
    now = np.zeros(n)
    active = i > 0
    for _ in range(max_rounds):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return s, i
        infect = params.beta * s[idx] * i[idx]
        total = infect + params.gamma * i[idx]
        frozen = total <= 0.0
        if frozen.any():
            active[idx[frozen]] = False
            idx, infect, total = idx[~frozen], infect[~frozen], total[~frozen]
            if idx.size == 0:
                continue
        wait = rng.gen.exponential(1.0, idx.size) / total
        u = rng.gen.random(idx.size)
        t_new = now[idx] + wait
        done = t_new >= dt
        active[idx[done]] = False
        rows = idx[~done]
        now[rows] = t_new[~done]
        is_infection = u[~done] < (infect[~done] / total[~done])
        s[rows] -= is_infection
        i[rows] += np.where(is_infection, 1, -1)
        active[rows[i[rows] == 0]] = False
    raise RuntimeError("pair propagation exceeded the event-round cap")


def bootstrap_filter(params: SIRParams, obs: Observations, n_particles: int,
                     threshold: float, rng: RngStream,
                     i0: int = 1) -> BootstrapResult:
    """Sequential importance resampling with the exact 0-1 observation match.

    Weights are indicators that a particle's simulated susceptible count hits
    the observed one; the per-step surviving fraction below ``threshold``
    raises the failure flag (all-zero weights give -inf and failure).
    """
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    infectious = np.full(n_particles, i0, np.int64)
    survival = np.zeros(obs.steps)
    loglik = 0.0
    failed = False
    for k in range(1, len(obs)):
        dt = float(obs.times[k] - obs.times[k - 1])
        s_end, i_end = _propagate_pairs(
            infectious, int(obs.susceptibles[k - 1]), params, dt, rng,
        )
        hits = s_end == obs.susceptibles[k]
        frac = float(hits.mean())
        survival[k - 1] = frac
        if frac < threshold:
            failed = True
        if frac == 0.0:
            loglik = NEG_INF
            break
        loglik += math.log(frac)
        survivors = i_end[hits]
        infectious = survivors[rng.gen.integers(0, len(survivors), n_particles)]
    counts = np.bincount(infectious)
    return BootstrapResult(loglik, survival, failed, counts / counts.sum())


@dataclass
class ScanResult:
    beta_grid: np.ndarray
    gamma_grid: np.ndarray
    thresholds: tuple[float, ...]
    survival_min: np.ndarray      # (n_beta, n_gamma)
    failed: np.ndarray            # (n_thresholds, n_beta, n_gamma) booleans


def failure_domain_scan(obs: Observations, beta_grid, gamma_grid,
                        n_particles: int, thresholds, rng: RngStream,
                        i0: int = 1) -> ScanResult:
    """Bootstrap-filter survival over a parameter grid; failures are data."""
    beta_grid = np.asarray(beta_grid, float)
    gamma_grid = np.asarray(gamma_grid, float)
    thresholds = tuple(float(x) for x in thresholds)
    n0 = int(obs.susceptibles[0]) + i0
    survival_min = np.empty((len(beta_grid), len(gamma_grid)))
    failed = np.zeros((len(thresholds), len(beta_grid), len(gamma_grid)), bool)
    for a, beta in enumerate(beta_grid):
        for b, gamma in enumerate(gamma_grid):
            res = bootstrap_filter(
                SIRParams(n0=n0, beta=float(beta), gamma=float(gamma)),
                obs, n_particles, min(thresholds), rng.child(a, b), i0=i0,
            )
            smin = float(res.survival.min()) if res.survival.size else 1.0
            if res.loglik == NEG_INF:
                smin = 0.0
            survival_min[a, b] = smin
            for c, thr in enumerate(thresholds):
                failed[c, a, b] = smin < thr
    return ScanResult(beta_grid, gamma_grid, thresholds, survival_min, failed)
