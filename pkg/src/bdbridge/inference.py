"""Maximum likelihood for the contact and removal rates from susceptible records.

The likelihood surface is Monte Carlo, so every cell is averaged over several
independently seeded filter runs before any argmax is taken, and the search is
a coarse-to-fine grid refinement rather than a gradient method.  Confidence
intervals come from profile likelihoods with the usual chi-square(1) 95% drop
of 1.92, interpolated linearly between grid points.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .counting import NEG_INF
from .filters import Observations, igbs_filter_loglik
from .models import SIRParams
from .sampler import RngStream

PROFILE_DROP = 1.92  # chi-square(1) 95% cutoff / 2


@dataclass
class SurfaceResult:
    beta_grid: np.ndarray
    gamma_grid: np.ndarray
    mean: np.ndarray    # (n_beta, n_gamma) averaged log-likelihoods
    spread: np.ndarray  # per-cell standard deviation across replications
    replications: int


@dataclass
class GridSpec:
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if not (self.lo < self.hi) or self.steps < 1:
            raise ValueError(f"bad grid range {self}")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass
class SearchConfig:
    beta: GridSpec
    gamma: GridSpec
    refinements: int = 2
    replications: int = 5
    threads: int = 1


@dataclass
class FitResult:
    beta_hat: float
    gamma_hat: float
    ci_beta: tuple[float, float]
    ci_gamma: tuple[float, float]
    r0: float
    loglik_max: float
    boundary_warning: bool
    surface: SurfaceResult = field(repr=False)


def loglik_surface(obs: Observations, beta_grid, gamma_grid, m: int,
                   rng: RngStream, replications: int = 1, i0: int = 1,
                   threads: int = 1) -> SurfaceResult:
    """Seed-averaged filter log-likelihood over a parameter grid.

    Cells own derived streams indexed by (row, column, replication), so the
    result is independent of the worker count; -inf cells are permitted.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    beta_grid = np.asarray(beta_grid, float)
    gamma_grid = np.asarray(gamma_grid, float)
    n0 = int(obs.susceptibles[0]) + i0

    def cell(job):
        a, b = job
        params = SIRParams(n0=n0, beta=float(beta_grid[a]), gamma=float(gamma_grid[b]))
        vals = np.array([
            igbs_filter_loglik(params, obs, i0, m, rng.child(a, b, r))
            for r in range(replications)
        ])
        finite = vals[np.isfinite(vals)]
        if finite.size == 0:
            return NEG_INF, 0.0
        # A single -inf replicate is Monte Carlo starvation, not evidence the
        # cell is impossible; average the finite runs and record the spread.
        return float(finite.mean()), float(finite.std())

    jobs = [(a, b) for a in range(len(beta_grid)) for b in range(len(gamma_grid))]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(cell, jobs))
    else:
        results = [cell(j) for j in jobs]
    mean = np.array([r[0] for r in results]).reshape(len(beta_grid), len(gamma_grid))
    spread = np.array([r[1] for r in results]).reshape(len(beta_grid), len(gamma_grid))
    return SurfaceResult(beta_grid, gamma_grid, mean, spread, replications)


def _profile_interval(grid: np.ndarray, profile: np.ndarray,
                      drop: float = PROFILE_DROP) -> tuple[float, float]:
    """{theta : max - profile(theta) <= drop}, linearly interpolated at the ends."""
    finite = np.isfinite(profile)
    if not finite.any():
        return float("nan"), float("nan")
    k_max = int(np.nanargmax(np.where(finite, profile, -np.inf)))
    cutoff = profile[k_max] - drop
    lo = grid[0]
    for k in range(k_max, 0, -1):
        if not np.isfinite(profile[k - 1]) or profile[k - 1] < cutoff:
            frac = ((profile[k] - cutoff) / (profile[k] - profile[k - 1])
                    if np.isfinite(profile[k - 1]) else 1.0)
            lo = grid[k] - frac * (grid[k] - grid[k - 1])
            break
    hi = grid[-1]
    for k in range(k_max, len(grid) - 1):
        if not np.isfinite(profile[k + 1]) or profile[k + 1] < cutoff:
            frac = ((profile[k] - cutoff) / (profile[k] - profile[k + 1])
                    if np.isfinite(profile[k + 1]) else 1.0)
            hi = grid[k] + frac * (grid[k + 1] - grid[k])
            break
    return float(lo), float(hi)


def fit_mle(obs: Observations, config: SearchConfig, m: int, rng: RngStream,
            i0: int = 1) -> FitResult:
    """Coarse-to-fine grid maximum likelihood with profile intervals.

    The top-level surface spans the full configured ranges and supplies the
    confidence intervals; each refinement re-grids a window around the running
    argmax.  An argmax on the outer boundary raises a warning flag.
    """
    beta_grid = config.beta.values()
    gamma_grid = config.gamma.values()
    surface0 = loglik_surface(obs, beta_grid, gamma_grid, m, rng.child(0),
                              replications=config.replications, i0=i0,
                              threads=config.threads)
    if not np.isfinite(surface0.mean).any():
        raise ValueError("log-likelihood is -inf over the whole search grid")
    flat = np.where(np.isfinite(surface0.mean), surface0.mean, -np.inf)
    a, b = np.unravel_index(int(np.argmax(flat)), flat.shape)
    boundary_warning = a in (0, len(beta_grid) - 1) or b in (0, len(gamma_grid) - 1)
    best = (float(beta_grid[a]), float(gamma_grid[b]), float(surface0.mean[a, b]))

    cur_beta, cur_gamma = beta_grid, gamma_grid
    for level in range(1, config.refinements):
        db = (cur_beta[1] - cur_beta[0]) if len(cur_beta) > 1 else (config.beta.hi - config.beta.lo)
        dg = (cur_gamma[1] - cur_gamma[0]) if len(cur_gamma) > 1 else (config.gamma.hi - config.gamma.lo)
        beta_w = np.linspace(max(best[0] - 1.5 * db, config.beta.lo),
                             min(best[0] + 1.5 * db, config.beta.hi), config.beta.steps)
        gamma_w = np.linspace(max(best[1] - 1.5 * dg, config.gamma.lo),
                              min(best[1] + 1.5 * dg, config.gamma.hi), config.gamma.steps)
        surf = loglik_surface(obs, beta_w, gamma_w, m, rng.child(level),
                              replications=config.replications, i0=i0,
                              threads=config.threads)
        flat = np.where(np.isfinite(surf.mean), surf.mean, -np.inf)
        a, b = np.unravel_index(int(np.argmax(flat)), flat.shape)
        if flat[a, b] > best[2]:
            best = (float(beta_w[a]), float(gamma_w[b]), float(flat[a, b]))
        cur_beta, cur_gamma = beta_w, gamma_w

    profile_beta = np.max(np.where(np.isfinite(surface0.mean), surface0.mean, -np.inf), axis=1)
    profile_gamma = np.max(np.where(np.isfinite(surface0.mean), surface0.mean, -np.inf), axis=0)
    ci_beta = _profile_interval(beta_grid, profile_beta)
    ci_gamma = _profile_interval(gamma_grid, profile_gamma)
    ci_beta = (min(ci_beta[0], best[0]), max(ci_beta[1], best[0]))
    ci_gamma = (min(ci_gamma[0], best[1]), max(ci_gamma[1], best[1]))

    n0 = int(obs.susceptibles[0]) + i0
    r0 = basic_reproduction_number(best[0], best[1], n0)
    return FitResult(best[0], best[1], ci_beta, ci_gamma, r0, best[2],
                     boundary_warning, surface0)


def basic_reproduction_number(beta: float, gamma: float, n0: int) -> float:
    """Expected secondary infections per case in a fully susceptible population."""
    if gamma <= 0:
        return math.inf
    return beta * n0 / gamma
