"""SIR epidemic simulation over temporal contact networks.

Transmission happens per contact event with a fixed probability; an
infected node stays infectious for a Poisson-distributed number of time
steps, then recovers.  Time steps come from the trace granularity (for
the 600 s step of the reference traces, a mean infectious duration of 80
steps corresponds to 800 minutes).  Every run pre-draws its transmission
uniforms and per-node durations, so trajectories under different
``p_transmit`` values are coupled on the same random stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import TemporalNetwork
from .seeds import derive_rng

_BIG = np.iinfo(np.int64).max // 4


@dataclass(frozen=True)
class SirParams:
    """Per-contact transmission probability, mean infectious duration in
    steps, epidemic start step, and number of simulated steps."""

    p_transmit: float
    recovery_mean: float
    start_step: int
    horizon: int

    def __post_init__(self):
        if not 0.0 <= self.p_transmit <= 1.0:
            raise ValueError("p_transmit must lie in [0, 1]")
        if not self.recovery_mean > 0:
            raise ValueError("recovery_mean must be positive")
        if self.start_step < 0:
            raise ValueError("start_step must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")


def default_params(
    net: TemporalNetwork,
    p_transmit: float = 0.5,
    recovery_mean: float = 80.0,
    start_step: int = 250,
    horizon: int | None = None,
) -> SirParams:
    """Reference parameter set: p = 0.5, Poisson mean 80 steps, start at
    step 250, horizon running to the end of the trace."""
    if horizon is None:
        horizon = max(1, net.n_steps - start_step)
    return SirParams(
        p_transmit=p_transmit,
        recovery_mean=recovery_mean,
        start_step=start_step,
        horizon=horizon,
    )


@dataclass(frozen=True)
class SirRun:
    """Single trajectory: per-step compartment counts and the final
    state.

    ``s_of_t[k]`` counts susceptibles after all events in steps before
    ``start_step + k``; index 0 is therefore always N - 1.
    """

    seed_node: int
    s_of_t: np.ndarray
    i_of_t: np.ndarray
    r_of_t: np.ndarray
    reached: frozenset

    def __post_init__(self):
        for name in ("s_of_t", "i_of_t", "r_of_t"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_steps(self) -> int:
        return len(self.s_of_t)


def run_sir(
    net: TemporalNetwork,
    seed_node: int,
    params: SirParams,
    rng: np.random.Generator,
    per_step_contacts: bool = False,
) -> SirRun:
    """Simulate one SIR outbreak seeded at ``seed_node``.

    Events are visited in time order; when exactly one endpoint is
    infectious and the other susceptible, transmission occurs with
    probability ``p_transmit`` (one trial per event, or one per step of
    overlap with ``per_step_contacts``).  A newly infected node is
    infectious for the remainder of its step, for a duration drawn from
    Poisson(``recovery_mean``); an infinite mean means no recovery
    inside the horizon.
    """
    n = net.n_nodes
    if not 0 <= seed_node < n:
        raise ValueError(f"seed node {seed_node} out of range for {n} nodes")
    a, b, start, end = net.event_arrays
    if len(start) and not net.t_min + params.start_step * net.granularity <= net.t_max:
        raise ValueError("start_step lies beyond the trace")

    g = net.granularity
    if len(start):
        steps = np.floor((start - net.t_min) / g).astype(np.int64)
    else:
        steps = np.zeros(0, dtype=np.int64)
    window_end = params.start_step + params.horizon
    if per_step_contacts:
        ev_step = []
        ev_a = []
        ev_b = []
        for idx in range(len(start)):
            s0 = steps[idx]
            last = max(s0, int(math.ceil((end[idx] - net.t_min) / g - 1e-9)) - 1)
            for k in range(max(s0, params.start_step), min(last, window_end - 1) + 1):
                ev_step.append(k)
                ev_a.append(a[idx])
                ev_b.append(b[idx])
        order = np.argsort(np.asarray(ev_step, dtype=np.int64), kind="stable")
        ev_step = np.asarray(ev_step, dtype=np.int64)[order]
        ev_a = np.asarray(ev_a, dtype=np.int64)[order]
        ev_b = np.asarray(ev_b, dtype=np.int64)[order]
    else:
        lo = int(np.searchsorted(steps, params.start_step, side="left"))
        hi = int(np.searchsorted(steps, window_end, side="left"))
        ev_step = steps[lo:hi]
        ev_a = a[lo:hi]
        ev_b = b[lo:hi]

    uniforms = rng.random(len(ev_step))
    if math.isinf(params.recovery_mean):
        durations = np.full(n, params.horizon + 1, dtype=np.int64)
    else:
        durations = rng.poisson(params.recovery_mean, n).astype(np.int64)

    state = np.zeros(n, dtype=np.int8)  # 0 susceptible, 1 infectious, 2 recovered
    visible_from = np.full(n, _BIG, dtype=np.int64)  # snapshot index where the node stops counting as S
    recovery_step = np.full(n, _BIG, dtype=np.int64)
    state[seed_node] = 1
    visible_from[seed_node] = 0
    recovery_step[seed_node] = params.start_step + durations[seed_node]

    s_of_t = np.empty(params.horizon + 1, dtype=np.int64)
    s_count = n - 1
    cursor = 0

    for idx in range(len(ev_step)):
        k = int(ev_step[idx]) - params.start_step
        while cursor <= k:
            s_of_t[cursor] = s_count
            cursor += 1
        x, y = int(ev_a[idx]), int(ev_b[idx])
        step_abs = int(ev_step[idx])
        for v in (x, y):
            if state[v] == 1 and step_abs >= recovery_step[v]:
                state[v] = 2
        if state[x] > state[y]:
            x, y = y, x
        # after the swap x has the lower state; infection needs (S, I)
        if state[x] == 0 and state[y] == 1 and uniforms[idx] < params.p_transmit:
            state[x] = 1
            visible_from[x] = k + 1
            recovery_step[x] = step_abs + durations[x]
            s_count -= 1
    s_of_t[cursor:] = s_count

    ks = np.arange(params.horizon + 1)
    infected_ever = visible_from < _BIG
    rec_k = np.maximum(recovery_step - params.start_step, visible_from)
    not_s = infected_ever[:, None] & (visible_from[:, None] <= ks[None, :])
    recovered = infected_ever[:, None] & (rec_k[:, None] <= ks[None, :])
    i_of_t = (not_s & ~recovered).sum(axis=0)
    r_of_t = recovered.sum(axis=0)
    return SirRun(
        seed_node=seed_node,
        s_of_t=s_of_t,
        i_of_t=i_of_t,
        r_of_t=r_of_t,
        reached=frozenset(int(v) for v in np.flatnonzero(infected_ever)),
    )


@dataclass(frozen=True)
class SirCurve:
    """Mean susceptible-count curve for one seed node with percentile
    bootstrap bands."""

    seed_node: int
    s_of_t: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    runs: int

    def __post_init__(self):
        for name in ("s_of_t", "ci_low", "ci_high"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def half_time(self, n_nodes: int):
        """First step where mean S(t) drops below half the population, or
        None if it never does."""
        below = np.flatnonzero(self.s_of_t < 0.5 * n_nodes)
        return int(below[0]) if len(below) else None


def sir_experiment(
    net: TemporalNetwork,
    params: SirParams,
    runs_per_node: int = 30,
    bootstrap_resamples: int = 200,
    seed: int = 0,
    ci: float = 0.95,
    per_step_contacts: bool = False,
) -> list:
    """Repeat the outbreak for every node as seed and bootstrap the mean
    susceptible curve.

    Each (node, run) pair draws from its own named random stream, so the
    experiment is deterministic in ``seed`` and indifferent to execution
    order.
    """
    if runs_per_node < 1:
        raise ValueError("runs_per_node must be at least 1")
    if bootstrap_resamples < 1:
        raise ValueError("bootstrap_resamples must be at least 1")
    if not 0.0 < ci < 1.0:
        raise ValueError("ci must lie strictly between 0 and 1")
    lo_pct = 100.0 * (1.0 - ci) / 2.0
    hi_pct = 100.0 - lo_pct

    curves = []
    for node in range(net.n_nodes):
        traj = np.empty((runs_per_node, params.horizon + 1))
        for r in range(runs_per_node):
            rng = derive_rng(seed, "sir", node, r)
            traj[r] = run_sir(net, node, params, rng, per_step_contacts=per_step_contacts).s_of_t
        mean = traj.mean(axis=0)
        boot_rng = derive_rng(seed, "sir-boot", node)
        resampled = np.empty((bootstrap_resamples, params.horizon + 1))
        for bi in range(bootstrap_resamples):
            pick = boot_rng.integers(0, runs_per_node, runs_per_node)
            resampled[bi] = traj[pick].mean(axis=0)
        ci_low = np.percentile(resampled, lo_pct, axis=0)
        ci_high = np.percentile(resampled, hi_pct, axis=0)
        curves.append(
            SirCurve(seed_node=node, s_of_t=mean, ci_low=ci_low, ci_high=ci_high, runs=runs_per_node)
        )
    return curves


def ranking_table(curves, n_nodes: int) -> list:
    """Seed nodes ordered by how quickly their mean curve reaches half
    the population susceptible (never-reaching nodes last)."""
    entries = []
    for c in curves:
        ht = c.half_time(n_nodes)
        entries.append((math.inf if ht is None else ht, c.seed_node))
    entries.sort()
    return [(node, None if math.isinf(ht) else int(ht)) for ht, node in entries]


def write_curves_csv(curves, path) -> None:
    """All curves as ``seed_node,t,mean_s,ci_low,ci_high`` rows."""
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write("seed_node,t,mean_s,ci_low,ci_high\n")
        for c in curves:
            for t in range(len(c.s_of_t)):
                fh.write(
                    f"{c.seed_node},{t},{float(c.s_of_t[t])!r},"
                    f"{float(c.ci_low[t])!r},{float(c.ci_high[t])!r}\n"
                )


def write_ranking_json(curves, n_nodes: int, path) -> None:
    ranked = ranking_table(curves, n_nodes)
    payload = {
        "half_time": {str(node): ht for node, ht in ranked},
        "order": [node for node, _ in ranked],
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
