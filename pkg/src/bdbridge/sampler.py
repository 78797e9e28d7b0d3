"""Uniform sampling over jump-time simplexes and taboo-bounded skeletons.

A bridge path factors into two independent uniform draws: sorted i.i.d.
uniform jump times, and a uniformly chosen admissible skeleton.  Skeletons
come from shuffling the up/down step multiset and rejecting arrangements that
touch a taboo bound; tiny spaces are enumerated once and indexed instead.

``_draw_padded`` is the vectorized core used by the estimators: rows may have
different endpoints and step counts, padded with zero steps and zero-length
holding intervals so downstream likelihood sums are unaffected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counting import NEG_INF, BridgeSpec, _enumerate_cached, bridge_count
from .errors import BridgeDomainError, RejectionCapExceeded, ZeroMeasureSpace

#: Spaces at most this large are enumerated once and sampled by index.
ENUM_CARD_LIMIT = 4096
#: ... provided they are also short enough for enumeration to stay cheap.
ENUM_JUMP_LIMIT = 64

_BATCH_MAX_ROUNDS = 10_000


class RngStream:
    """Splittable counter-based random stream.

    A stream is identified by ``(seed, stream_id)``; identical identities
    replay identical draws, distinct ones are statistically independent
    (Philox keyed through a seed sequence).  ``child`` derives subordinate
    independent streams for blocks, workers, or grid cells.  The underlying
    generator is created lazily and consumed sequentially; never share one
    instance across threads, give each worker its own child.
    """

    def __init__(self, seed: int, stream_id=0):
        self.seed = int(seed)
        if isinstance(stream_id, (tuple, list)):
            self.stream_id = tuple(int(k) for k in stream_id)
        else:
            self.stream_id = (int(stream_id),)
        self._gen: np.random.Generator | None = None

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream_id)
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def child(self, *keys: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(int(k) for k in keys))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass
class BridgePath:
    """A decomposed bridge: jump epochs and visited states.

    ``times`` runs 0 = tau_0 < tau_1 < ... < tau_K < tau_{K+1} = t and
    ``states`` holds the start state, the K post-jump states, and the end
    state repeated (the process sits at the end state after its last jump).
    """

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=np.int64)

    @property
    def jumps(self) -> int:
        return len(self.times) - 2

    @property
    def up_jumps(self) -> int:
        return int(np.sum(np.diff(self.states[:-1]) == 1))

    def validate(self, spec: BridgeSpec | None = None) -> None:
        if self.times.shape != self.states.shape or len(self.times) < 2:
            raise BridgeDomainError("times and states must share a length >= 2")
        if self.times[0] != 0.0 or not np.all(np.diff(self.times[:-1]) > 0):
            raise BridgeDomainError("jump times must be strictly increasing from 0")
        if self.jumps > 0 and self.times[-2] >= self.times[-1]:
            raise BridgeDomainError("last jump must precede the horizon")
        if self.states[-1] != self.states[-2]:
            raise BridgeDomainError("state after the last jump must repeat the end state")
        steps = np.diff(self.states[:-1])
        if self.jumps > 0 and not np.all(np.abs(steps) == 1):
            raise BridgeDomainError("consecutive states must differ by exactly 1")
        if spec is not None:
            if self.jumps != spec.jumps:
                raise BridgeDomainError("jump count does not match the spec")
            if self.states[0] != spec.i or self.states[-1] != spec.j:
                raise BridgeDomainError("endpoints do not match the spec")
            if self.up_jumps != spec.up_jumps:
                raise BridgeDomainError("up-jump count does not match the spec")
            if self.times[-1] != spec.t:
                raise BridgeDomainError("horizon does not match the spec")
            interior = self.states[1:-2] if spec.jumps > 0 else self.states[:0]
            if interior.size and not np.all(
                (interior > spec.lower) & (interior < spec.upper)
            ):
                raise BridgeDomainError("interior states touch a taboo bound")


def sample_times(jumps: int, t: float, rng: RngStream) -> np.ndarray:
    """Sorted i.i.d. uniform jump times on (0, t); exact ties trigger a redraw."""
    if jumps < 0:
        raise BridgeDomainError(f"jumps must be >= 0, got {jumps}")
    if not t > 0:
        raise BridgeDomainError(f"t must be > 0, got {t}")
    if jumps == 0:
        return np.empty(0)
    while True:
        u = rng.gen.uniform(0.0, t, jumps)
        u.sort()
        if u[0] > 0.0 and u[-1] < t and np.all(np.diff(u) > 0):
            return u


def sample_skeleton(spec: BridgeSpec, rng: RngStream, method: str = "auto",
                    max_tries: int = 1_000_000, stats: dict | None = None) -> np.ndarray:
    """One uniform draw from the admissible skeletons, as states omega_0..omega_K.

    ``method`` is "auto" (enumerate-and-index small spaces, otherwise shuffle
    with rejection), "enumerate", or "reject".  Acceptance telemetry is left
    in ``stats`` when a dict is supplied.
    """
    card = bridge_count(spec)
    if card == 0:
        raise ZeroMeasureSpace(f"no skeletons for {spec}")
    if method not in ("auto", "enumerate", "reject"):
        raise ValueError(f"unknown method {method!r}")
    use_enum = method == "enumerate" or (
        method == "auto" and card <= ENUM_CARD_LIMIT and spec.jumps <= ENUM_JUMP_LIMIT
    )
    if use_enum:
        paths = _enumerate_cached(spec)
        idx = int(rng.gen.integers(card))
        if stats is not None:
            stats.update(method="enumerate", tries=1)
        return np.asarray(paths[idx], dtype=np.int64)

    # Fisher-Yates shuffle of the step multiset, rejecting bound violations.
    if spec.ends_at_lower:
        length, ups, tail = spec.jumps - 1, spec.up_jumps, int(spec.lower)
    elif spec.ends_at_upper:
        length, ups, tail = spec.jumps - 1, spec.up_jumps - 1, int(spec.upper)
    else:
        length, ups, tail = spec.jumps, spec.up_jumps, None
    template = np.concatenate([np.ones(ups, np.int64), -np.ones(length - ups, np.int64)])
    tries = 0
    while tries < max_tries:
        tries += 1
        steps = rng.gen.permutation(template)
        states = spec.i + np.cumsum(steps)
        if np.all((states > spec.lower) & (states < spec.upper)):
            if stats is not None:
                stats.update(method="reject", tries=tries)
            out = np.concatenate([[spec.i], states])
            if tail is not None:
                out = np.concatenate([out, [tail]])
            return out
    raise RejectionCapExceeded(tries, 0, max_tries)


def sample_bridge(spec: BridgeSpec, rng: RngStream, method: str = "auto",
                  max_tries: int = 1_000_000) -> BridgePath:
    """Assemble one uniform bridge path: independent time and skeleton draws."""
    mid = sample_times(spec.jumps, spec.t, rng)
    skeleton = sample_skeleton(spec, rng, method=method, max_tries=max_tries)
    times = np.concatenate([[0.0], mid, [spec.t]])
    states = np.concatenate([skeleton, [spec.j]])
    return BridgePath(times, states)


def _draw_padded(i, j, up_jumps: int, t: float, lower, upper, size: int,
                 rng: RngStream, max_rounds: int = _BATCH_MAX_ROUNDS):
    """Vectorized uniform draws for ``size`` bridges sharing ``up_jumps`` and ``t``.

    ``i``, ``j`` and ``upper`` may vary per row; ``lower`` is shared.  Rows
    whose end state sits on a finite bound get their forced terminal step
    appended after the strict-interior shuffle.  Returns ``(steps, dtau,
    jumps)`` padded to the longest row: padding steps are 0 and padding
    holding intervals have zero length, so likelihood sums ignore them.

    Callers must pre-filter empty bridge spaces; this routine only rejects on
    bound violations and will loop on impossible rows until the round cap.
    """
    i = np.broadcast_to(np.asarray(i, np.int64), (size,))
    j = np.broadcast_to(np.asarray(j, np.int64), (size,))
    upper_arr = np.broadcast_to(np.asarray(upper, float), (size,))
    lower = float(lower)

    ends_low = (j == lower) if lower != NEG_INF else np.zeros(size, bool)
    ends_up = np.isfinite(upper_arr) & (j == upper_arr)
    jumps = 2 * up_jumps + i - j
    if np.any(jumps < 0):
        raise BridgeDomainError("infeasible up-jump budget in batch draw")
    length = jumps - ends_low - ends_up
    ups = np.where(ends_up, up_jumps - 1, up_jumps)

    len_max = int(length.max()) if size else 0
    cols = np.arange(len_max)
    steps_core = np.zeros((size, len_max), np.int8)
    pending = np.arange(size)
    tries = 0
    accepted = 0
    for _ in range(max_rounds):
        if pending.size == 0:
            break
        keys = rng.gen.random((pending.size, len_max))
        keys[cols >= length[pending, None]] = 2.0  # padding sorts last
        order = np.argsort(keys, axis=1)
        # The c-th smallest key carries an up step for c < ups, a down step
        # for c < length, padding otherwise (padding keys sort last).
        vals = np.where(cols < ups[pending, None], 1,
                        np.where(cols < length[pending, None], -1, 0)).astype(np.int8)
        x = np.empty_like(vals)
        np.put_along_axis(x, order, vals, axis=1)
        states = i[pending, None] + np.cumsum(x, axis=1, dtype=np.int64)
        inplay = cols < length[pending, None]
        bad = inplay & ((states <= lower) | (states >= upper_arr[pending, None]))
        ok = ~bad.any(axis=1)
        steps_core[pending[ok]] = x[ok]
        tries += pending.size
        accepted += int(ok.sum())
        pending = pending[~ok]
    if pending.size:
        raise RejectionCapExceeded(tries, accepted, max_rounds)

    jumps_max = int(jumps.max()) if size else 0
    steps = np.zeros((size, jumps_max), np.int8)
    steps[:, :len_max] = steps_core
    rows_low = np.flatnonzero(ends_low)
    steps[rows_low, length[rows_low]] = -1
    rows_up = np.flatnonzero(ends_up)
    steps[rows_up, length[rows_up]] = 1

    tcols = np.arange(jumps_max)
    while True:
        u = rng.gen.random((size, jumps_max)) * t
        u[tcols >= jumps[:, None]] = t
        tau = np.sort(u, axis=1)
        if jumps_max == 0:
            break
        ties = (np.diff(tau, axis=1) == 0) & (tcols[:-1] < jumps[:, None] - 1)
        has_jump = jumps > 0
        edge = has_jump & (
            (tau[:, 0] == 0.0)
            | (tau[np.arange(size), np.maximum(jumps - 1, 0)] >= t)
        )
        if not (ties.any(axis=1) | edge).any():
            break
        # Measure-zero collisions: redraw the whole batch (cheap and rare).
    zeros = np.zeros((size, 1))
    dtau = np.diff(np.concatenate([zeros, tau, np.full((size, 1), t)], axis=1), axis=1)
    return steps, dtau, jumps
